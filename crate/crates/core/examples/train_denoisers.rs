//! Trains the channel EDN and the symbol MLP at a reduced size and saves
//! both weight files.
//!
//! ```text
//! cargo run --release --example train_denoisers -- models
//! ```
//! The full desk-scale run is `otfs-lab train`.

use std::path::PathBuf;

use otfs_pnp::harness::config::ExperimentConfig;
use otfs_pnp::harness::train::train_denoisers;
use otfs_pnp::persist::{file_digest, save_network};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "models".into()));
    std::fs::create_dir_all(&dir)?;
    let mut cfg = ExperimentConfig::default();
    cfg.train.edn.train_samples = 3000;
    cfg.train.edn.val_samples = 500;
    cfg.train.edn.epochs = 8;

    let t = std::time::Instant::now();
    let trained = train_denoisers(&cfg)?;
    for c in &trained.curves {
        println!("{} epoch {:>2}  train {:.4}  val {:.4}", c.network, c.epoch, c.train_loss, c.val_loss);
    }
    let s = &trained.summary;
    println!("EDN val NMSE {:.4} (identity {:.4}); MLP TV to exact posterior {:.4}", s.edn_val_nmse, s.identity_val_nmse, s.mlp_tv);

    for (name, net) in [("edn.otpn", &trained.edn.net), ("mlp.otpn", &trained.mlp.net)] {
        let p = dir.join(name);
        save_network(&p, net)?;
        println!("{} sha256={}", p.display(), file_digest(&p)?);
    }
    println!("done in {:.0} s", t.elapsed().as_secs_f64());
    Ok(())
}
