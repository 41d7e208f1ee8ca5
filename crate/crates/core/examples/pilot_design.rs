//! Embedded-pilot layout and the conditioning of its measurement matrix.
//!
//! The random pilot block is drawn from a seed; seeds differ a lot in how
//! much they amplify noise in the LS estimate, `tr((ΦᴴΦ)⁻¹)`.

use otfs_pnp::frame::FrameConfig;
use otfs_pnp::pilot::{best_pilot_seed, build_measurement_matrix, ls_noise_gain, PilotLayout};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = FrameConfig::standard();
    let mut layout = PilotLayout::new(2, 2, 4, 5);
    println!(
        "pilot block {}x{}, window {}x{}, overhead {:.1}%",
        layout.p_m,
        layout.p_n,
        layout.window_delays(),
        layout.window_dopplers(),
        100.0 * layout.overhead(&cfg)
    );
    for seed in 0..8 {
        layout.seed = seed;
        let phi = build_measurement_matrix(&layout, &cfg)?.phi;
        println!("seed {seed}: Phi {}x{}, LS noise gain {:.2}", phi.nrows(), phi.ncols(), ls_noise_gain(&phi));
    }
    let best = best_pilot_seed(&layout, &cfg, 64)?;
    layout.seed = best;
    let phi = build_measurement_matrix(&layout, &cfg)?.phi;
    println!("best of 64: seed {best}, LS noise gain {:.2}", ls_noise_gain(&phi));
    Ok(())
}
