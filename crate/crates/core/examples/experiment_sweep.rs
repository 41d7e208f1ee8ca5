//! Runs a small channel-estimation sweep from an inline TOML config and
//! writes the metric rows as CSV.

use otfs_pnp::channel::ChannelKind;
use otfs_pnp::harness::config::ExperimentConfig;
use otfs_pnp::harness::metrics::METRIC_SCHEMA;
use otfs_pnp::harness::sim::ScenarioSpec;
use otfs_pnp::harness::sweep::{run_ce_sweep, Denoisers};
use otfs_pnp::persist::{read_csv, write_csv};

const CONFIG: &str = r#"
id = "ce-demo"
seed = 7
trials = 100
snr_db = [10.0, 20.0, 30.0]

[ce]
methods = ["ls", "lmmse", "l1-adaptive", "l1-fixed:0.05"]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.scenario = ScenarioSpec::standard(ChannelKind::FractionalDoppler);
    let out = run_ce_sweep(&cfg, &Denoisers::default())?;
    for r in &out.rows {
        println!("{:<14} {:>4} dB  nmse {:.3e} ± {:.1e}", r.method, r.snr_db, r.nmse_mean.unwrap_or(f64::NAN), r.nmse_se.unwrap_or(f64::NAN));
    }
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("ce-demo.csv");
    write_csv(&path, METRIC_SCHEMA, &out.rows)?;
    let back: Vec<otfs_pnp::harness::metrics::MetricRow> = read_csv(&path, METRIC_SCHEMA)?;
    println!("wrote {} rows to {}; read back identical: {}", back.len(), path.display(), back == out.rows);
    Ok(())
}
