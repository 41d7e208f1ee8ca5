//! Weight artifacts: save, reload, and reject a corrupted file.

use otfs_pnp::denoise::mlp::build_mlp;
use otfs_pnp::denoise::MlpConfig;
use otfs_pnp::persist::{load_network, save_network};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = build_mlp(&MlpConfig::default(), 4, 42)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("mlp.otpn");
    save_network(&path, &net)?;
    let bytes = std::fs::read(&path)?;
    println!("{} parameters, {} bytes on disk, magic {:?}", net.param_count(), bytes.len(), std::str::from_utf8(&bytes[..4])?);
    println!("reloaded identical: {}", load_network(&path)? == net);

    let mut bad = bytes.clone();
    let last = bad.len() - 1;
    bad[last] ^= 1;
    std::fs::write(&path, &bad)?;
    match load_network(&path) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted file rejected [{}]: {e}", e.category()),
    }
    Ok(())
}
