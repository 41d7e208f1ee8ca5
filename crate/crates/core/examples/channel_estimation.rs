//! Pilot-based channel estimation on one scenario.
//!
//! Runs LS, LMMSE and ADMM-ℓ1 over a few channel draws. Pass a trained EDN
//! weight file (see the `train_denoisers` example or `otfs-lab train`) to
//! add PnP-ADMM with the EDN prior:
//!
//! ```text
//! cargo run --release --example channel_estimation -- models/acceptance.edn.otpn
//! ```

use otfs_pnp::channel::ChannelKind;
use otfs_pnp::denoise::EdnDenoiser;
use otfs_pnp::harness::config::DEFAULT_THRESHOLD_SCALE;
use otfs_pnp::harness::sim::{Scenario, ScenarioSpec};
use otfs_pnp::linalg::nmse;
use otfs_pnp::persist::load_network;
use otfs_pnp::pnp::PnpConfig;
use otfs_pnp::receivers::ce::{CeOutput, ThresholdPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let edn = match std::env::args().nth(1) {
        Some(p) => Some(EdnDenoiser::new(load_network(p.as_ref())?)?),
        None => None,
    };
    let sc = Scenario::new(ScenarioSpec::standard(ChannelKind::Integer))?;
    let est = &sc.estimator;
    let pnp = PnpConfig::default();
    let prior = 1.0 / sc.response_len() as f64;
    let trials = 50;
    println!("Phi: {}x{}, {trials} trials", est.phi().nrows(), est.dim());
    for snr in [10.0, 20.0, 30.0] {
        let mut acc = [0.0; 4];
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(t);
            let paths = sc.draw_channel(&mut rng)?;
            let tr = sc.ce_trial(paths, snr, &mut rng, &mut ChaCha8Rng::seed_from_u64(1000 + t))?;
            let y = &tr.y_obs;
            acc[0] += nmse(&est.ls(y)?, &tr.truth);
            acc[1] += nmse(&est.lmmse(y, tr.noise_var, prior)?, &tr.truth);
            let tau = est.threshold(ThresholdPolicy::Adaptive(DEFAULT_THRESHOLD_SCALE), tr.noise_var, pnp.rho)?;
            acc[2] += nmse(&est.admm_l1(y, tau, &pnp, CeOutput::Denoised, None)?.h, &tr.truth);
            if let Some(d) = &edn {
                acc[3] += nmse(&est.pnp(y, d, &pnp, CeOutput::Denoised, None)?.h, &tr.truth);
            }
        }
        let n = trials as f64;
        print!("{snr:>4} dB  ls {:.3e}  lmmse {:.3e}  l1 {:.3e}", acc[0] / n, acc[1] / n, acc[2] / n);
        if edn.is_some() {
            print!("  pnp-edn {:.3e}", acc[3] / n);
        }
        println!();
    }
    Ok(())
}
