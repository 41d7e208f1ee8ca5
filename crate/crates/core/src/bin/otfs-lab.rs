//! Command-line front end: train denoisers, run sweeps, record traces.
//!
//! Failures print one JSON object on stderr,
//! `{"error":{"category":"config","message":"..."}}`, and exit with the
//! category's code.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otfs_pnp::harness::config::ExperimentConfig;
use otfs_pnp::harness::metrics::{MetricRow, CURVE_SCHEMA, METRIC_SCHEMA, TRACE_SCHEMA};
use otfs_pnp::harness::sweep::{run_ce_sweep, run_convergence_trace, run_sd_sweep, Denoisers};
use otfs_pnp::harness::train::train_denoisers;
use otfs_pnp::persist::{file_digest, save_json, save_network, write_atomic, write_csv, ArtifactKind};
use otfs_pnp::{Error, Result};

#[derive(Parser)]
#[command(name = "otfs-lab", version, about = "OTFS plug-and-play receiver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the channel EDN and the symbol MLP.
    Train(Common),
    /// Channel-estimation NMSE sweep.
    CeSweep(Common),
    /// Symbol-detection BER sweep (known CSI, perturbed CSI, or pipelines).
    SdSweep(Common),
    /// Per-iteration NMSE/BER traces.
    Trace(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Full-size trial counts and training sets.
    #[arg(long)]
    paper_scale: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.paper_scale {
            cfg.paper_scale();
        }
        cfg.validate()?;
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        // the resolved config sits next to its outputs
        let path = self.out.join(format!("{}.config.toml", cfg.id));
        write_atomic(&path, cfg.to_toml()?.as_bytes())?;
        Ok(cfg)
    }

    fn path(&self, cfg: &ExperimentConfig, suffix: &str) -> PathBuf {
        self.out.join(format!("{}.{suffix}", cfg.id))
    }
}

fn print_rows(rows: &[MetricRow]) {
    for r in rows {
        let (metric, mean, se) = match (r.nmse_mean, r.ber_mean) {
            (Some(m), _) => ("nmse", m, r.nmse_se.unwrap_or(f64::NAN)),
            (None, Some(b)) => ("ber", b, r.ber_se.unwrap_or(f64::NAN)),
            _ => continue,
        };
        println!(
            "{:<22} snr={:>5.1} eps={:<8} {metric}={mean:.4e} se={se:.1e} iters={:.1}",
            r.method, r.snr_db, r.epsilon, r.mean_iterations
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = c.load()?;
            let t = train_denoisers(&cfg)?;
            let (edn, mlp) = (c.path(&cfg, "edn.otpn"), c.path(&cfg, "mlp.otpn"));
            save_network(&edn, &t.edn.net)?;
            save_network(&mlp, &t.mlp.net)?;
            write_csv(&c.path(&cfg, "curves.csv"), CURVE_SCHEMA, &t.curves)?;
            save_json(&c.path(&cfg, "summary.otpn"), ArtifactKind::Metrics, &t.summary)?;
            let s = &t.summary;
            println!("edn: {} params, val nmse {:.4} (identity {:.4})", s.edn_params, s.edn_val_nmse, s.identity_val_nmse);
            println!("mlp: {} params, val loss {:.4}, tv {:.4}", s.mlp_params, s.mlp_val_loss, s.mlp_tv);
            println!("{}  sha256={}", edn.display(), file_digest(&edn)?);
            println!("{}  sha256={}", mlp.display(), file_digest(&mlp)?);
        }
        Command::CeSweep(c) => {
            let cfg = c.load()?;
            let out = run_ce_sweep(&cfg, &Denoisers::load(&cfg)?)?;
            write_csv(&c.path(&cfg, "ce.csv"), METRIC_SCHEMA, &out.rows)?;
            print_rows(&out.rows);
        }
        Command::SdSweep(c) => {
            let cfg = c.load()?;
            let out = run_sd_sweep(&cfg, &Denoisers::load(&cfg)?)?;
            write_csv(&c.path(&cfg, "sd.csv"), METRIC_SCHEMA, &out.rows)?;
            print_rows(&out.rows);
        }
        Command::Trace(c) => {
            let cfg = c.load()?;
            let rows = run_convergence_trace(&cfg, &Denoisers::load(&cfg)?)?;
            let path = c.path(&cfg, "trace.csv");
            write_csv(&path, TRACE_SCHEMA, &rows)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": { "category": e.category(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
