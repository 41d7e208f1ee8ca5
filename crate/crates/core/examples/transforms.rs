//! OTFS modulation round trip on the default 20×20 frame.
//!
//! Maps random bits to 4-QAM on the delay-Doppler grid, runs ISFFT/SFFT and
//! the zero-padded modulator/demodulator, and checks that nothing is lost.

use otfs_pnp::frame::{demap_symbols, demodulate, isfft, map_bits, modulate, sfft, strip_zero_padding, FrameConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = FrameConfig::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bits: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2)).collect();
    let x = map_bits(&bits, &cfg)?;
    println!("frame: M={} N={} zp={} ({} bits)", cfg.m, cfg.n, cfg.zp_len, bits.len());

    let tf = isfft(&x, &cfg)?;
    let back = sfft(&tf, &cfg)?;
    println!("ISFFT energy ratio  {:.15}", tf.norm_squared() / x.energy());
    println!("SFFT(ISFFT(x)) err  {:.2e}", (&back.data - &x.data).norm());

    let tx = modulate(&x, &cfg, true)?;
    println!("transmitted samples {} (incl. zero padding)", tx.samples.len());
    let y = demodulate(&strip_zero_padding(&tx, &cfg)?, &cfg)?;
    println!("demodulated err     {:.2e}", (&y.data - &x.data).norm());
    println!("bits recovered      {}", demap_symbols(&y, &cfg)? == bits);
    Ok(())
}
