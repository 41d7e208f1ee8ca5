//! Result records and their CSV schemas.

use serde::{Deserialize, Serialize};

pub const METRIC_SCHEMA: &str = "metric_row/v1";
pub const TRACE_SCHEMA: &str = "trace_row/v1";
pub const CURVE_SCHEMA: &str = "train_curve/v1";

/// One (method, SNR, ε) cell of a sweep. Standard errors are of the
/// per-trial mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub experiment: String,
    pub method: String,
    pub snr_db: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub nmse_mean: Option<f64>,
    pub nmse_se: Option<f64>,
    pub ber_mean: Option<f64>,
    pub ber_se: Option<f64>,
    pub mean_iterations: f64,
    pub seed: u64,
}

/// Per-iteration value of one traced run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub experiment: String,
    pub kind: String,
    pub method: String,
    pub run: usize,
    pub iteration: usize,
    pub nmse: Option<f64>,
    pub ber: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub network: String,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Mean and standard error of `b − a` over paired trials; `b` is better
/// than `a` at `k` standard errors when `mean > k·se`.
pub fn paired_gap(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_se(&d)
}

pub fn find<'a>(rows: &'a [MetricRow], method: &str, snr_db: f64, epsilon: f64) -> Option<&'a MetricRow> {
    rows.iter().find(|r| r.method == method && r.snr_db == snr_db && r.epsilon == epsilon)
}

/// Traced values of one kind grouped per run, in iteration order.
pub fn trace_runs(rows: &[TraceRow], kind: &str) -> Vec<Vec<f64>> {
    let mut runs: Vec<Vec<f64>> = Vec::new();
    for r in rows.iter().filter(|r| r.kind == kind) {
        if runs.len() <= r.run {
            runs.resize(r.run + 1, Vec::new());
        }
        runs[r.run].push(r.nmse.or(r.ber).unwrap_or(f64::NAN));
    }
    runs
}
