//! Draws one channel of each kind and shows how fractional Doppler and
//! fractional delay spread energy over the truncated delay-Doppler response.

use otfs_pnp::channel::{build_truncated_response, eta, ChannelKind, ChannelParams};
use otfs_pnp::frame::FrameConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = FrameConfig::standard();
    for kind in [ChannelKind::Integer, ChannelKind::FractionalDoppler, ChannelKind::FractionalDelayDoppler] {
        let params = ChannelParams::standard(kind);
        let paths = params.sample(cfg.m, &mut ChaCha8Rng::seed_from_u64(3))?;
        let resp = build_truncated_response(&paths, &cfg)?;
        let energy: Vec<f64> = resp.vec().iter().map(|h| h.norm_sqr()).collect();
        let total: f64 = energy.iter().sum();
        let mut sorted = energy.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        // taps needed to hold 95% of the response energy
        let mut acc = 0.0;
        let k95 = sorted.iter().take_while(|&&e| { acc += e; acc < 0.95 * total }).count() + 1;
        println!(
            "{kind:?}: {} paths, {} of {} taps nonzero, 95% energy in {k95} taps",
            paths.paths.len(),
            resp.nonzeros(),
            resp.len()
        );
    }

    println!("\nDoppler leakage |eta(q, kappa)|^2, N = 20");
    for kappa in [0.0, 0.1, 0.25, 0.5] {
        let row: Vec<String> = (-3..=3).map(|q| format!("{:.3}", eta(q, kappa, 20).norm_sqr())).collect();
        println!("  kappa={kappa:<4}  q=-3..3: {}", row.join(" "));
    }
    Ok(())
}
