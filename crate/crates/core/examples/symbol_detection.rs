//! Detects 4-QAM frames through a known fractional-Doppler channel with LS,
//! LMMSE and PnP-ADMM (exact soft mapper), and prints the PnP BER per
//! iteration.

use otfs_pnp::channel::ChannelKind;
use otfs_pnp::denoise::SoftMapper;
use otfs_pnp::harness::sim::{Scenario, ScenarioSpec};
use otfs_pnp::pnp::PnpConfig;
use otfs_pnp::receivers::sd::bit_errors;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::new(ScenarioSpec::standard(ChannelKind::FractionalDoppler))?;
    let sm = SoftMapper { constellation: sc.frame().constellation.clone() };
    let cfg = PnpConfig::default();
    let (frames, snr) = (50u64, 12.0);
    let mut errors = [0usize; 3];
    let mut trace = vec![0.0; cfg.iterations];
    let mut bits = 0;
    for f in 0..frames {
        let mut rng = ChaCha8Rng::seed_from_u64(f);
        let paths = sc.draw_channel(&mut rng)?;
        let t = sc.sd_trial(&paths, snr, &mut rng, &mut ChaCha8Rng::seed_from_u64(500 + f))?;
        let det = sc.structured_detector(&paths)?;
        errors[0] += bit_errors(&det.ls(&t.y)?.bits, &t.bits);
        errors[1] += bit_errors(&det.lmmse(&t.y, t.noise_var)?.bits, &t.bits);
        let r = det.pnp(&t.y, &sm, &cfg, Some(&t.bits))?;
        errors[2] += bit_errors(&r.bits, &t.bits);
        trace.iter_mut().zip(&r.ber_trace).for_each(|(a, b)| *a += b);
        bits += t.bits.len();
    }
    let ber = |e: usize| e as f64 / bits as f64;
    println!("{frames} frames at {snr} dB, sigma = {:.3}", cfg.sigma(cfg.rho));
    println!("ls {:.4}  lmmse {:.4}  pnp {:.4}", ber(errors[0]), ber(errors[1]), ber(errors[2]));
    for (k, b) in trace.iter().enumerate() {
        println!("  iteration {:>2}: {:.4}", k + 1, b / frames as f64);
    }
    Ok(())
}
