//! Cost of `(ĤᴴĤ + ρI)⁻¹v` through per-block Cholesky factors versus a
//! dense factorization of the full MN×MN system.

use otfs_pnp::channel::{build_time_channel, complex_gaussian, sample_paths};
use otfs_pnp::frame::FrameConfig;
use otfs_pnp::receivers::block_inverse::{measure_inversion, StructuredChannel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("{:>4} {:>4} {:>14} {:>14} {:>8} {:>10}", "M", "N", "structured", "dense", "ratio", "rel err");
    for (m, n) in [(8, 8), (16, 8), (16, 16), (20, 20)] {
        let cfg = FrameConfig::new(m, n, 4, 4)?;
        let paths = sample_paths(&mut rng, 5, 4, 2, true, 1)?;
        let ch = StructuredChannel::new(build_time_channel(&paths, &cfg)?, &cfg)?;
        let v: Vec<_> = (0..m * n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let (cost, err) = measure_inversion(&ch, &cfg, 0.1, &v)?;
        println!("{m:>4} {n:>4} {:>14} {:>14} {:>8.1} {err:>10.1e}", cost.structured, cost.dense, cost.ratio());
    }
    Ok(())
}
