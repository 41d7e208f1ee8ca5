//! Calibrates the scale `c` of the adaptive ℓ1 threshold
//! `τ = c·σ_x·√(2 ln L_n)` on seeds disjoint from the sweeps' seeds.
//!
//! The receivers default to the `c` that minimizes NMSE here.

use otfs_pnp::channel::ChannelKind;
use otfs_pnp::harness::seeds::SeedTree;
use otfs_pnp::harness::sim::{Scenario, ScenarioSpec};
use otfs_pnp::linalg::nmse;
use otfs_pnp::pnp::PnpConfig;
use otfs_pnp::receivers::ce::{CeOutput, ThresholdPolicy};

const SCALES: [f64; 10] = [1.0, 2.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 12.0, 16.0];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = SeedTree::new(0xCA1B);
    let pnp = PnpConfig::default();
    let trials = 100;
    // NMSE relative to the best scale of each cell, averaged over cells
    let mut regret = vec![0.0; SCALES.len()];
    let mut cells_seen = 0.0;
    for kind in [ChannelKind::Integer, ChannelKind::FractionalDoppler] {
        let sc = Scenario::new(ScenarioSpec::standard(kind))?;
        println!("{kind:?}");
        for snr in [10.0, 20.0, 30.0] {
            let mut acc = vec![0.0; SCALES.len()];
            for t in 0..trials {
                let paths = sc.draw_channel(&mut tree.child("channel", t).rng())?;
                let tr = sc.ce_trial(paths, snr, &mut tree.child("data", t).rng(), &mut tree.child_f64("noise", snr).child("trial", t).rng())?;
                for (a, &c) in acc.iter_mut().zip(&SCALES) {
                    let tau = sc.estimator.threshold(ThresholdPolicy::Adaptive(c), tr.noise_var, pnp.rho)?;
                    *a += nmse(&sc.estimator.admm_l1(&tr.y_obs, tau, &pnp, CeOutput::Denoised, None)?.h, &tr.truth);
                }
            }
            let floor = acc.iter().copied().fold(f64::INFINITY, f64::min);
            for (r, a) in regret.iter_mut().zip(&acc) {
                *r += a / floor;
            }
            cells_seen += 1.0;
            let best = acc.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| SCALES[i]).unwrap_or(1.0);
            let cells: Vec<String> = acc.iter().map(|a| format!("{:.3e}", a / trials as f64)).collect();
            println!("  {snr:>4} dB  best c = {best:<4}  [{}]", cells.join(" "));
        }
    }
    println!("c grid: {SCALES:?}");
    let mean: Vec<String> = regret.iter().map(|r| format!("{:.3}", r / cells_seen)).collect();
    println!("mean NMSE / cell best: [{}]", mean.join(" "));
    let best = regret.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| SCALES[i]).unwrap_or(1.0);
    println!("calibrated c = {best}");
    Ok(())
}
