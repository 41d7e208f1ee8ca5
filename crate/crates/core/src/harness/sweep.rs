//! Monte-Carlo sweeps and convergence traces.
//!
//! Every method in a cell sees the same channel, data and noise draws. Draws
//! are keyed by purpose and trial index (see [`super::seeds`]), so the
//! channel of trial `t` is also shared across SNR points.

use rayon::prelude::*;

use super::config::{CeMethod, ExperimentConfig, Pipeline, SdMethod, TraceKind};
use super::metrics::{mean_se, MetricRow, TraceRow};
use super::seeds::SeedTree;
use super::sim::{noise_variance, Scenario};
use crate::denoise::{EdnDenoiser, MlpDenoiser, SoftMapper};
use crate::error::{Error, Result};
use crate::linalg::{nmse, C64};
use crate::persist::load_network;
use crate::pnp::{Denoiser, PnpConfig};
use crate::receivers::ce::{CeResult, ThresholdPolicy};
use crate::receivers::sd::{Detector, SdResult};

/// Learned denoisers loaded for a run.
#[derive(Debug, Clone, Default)]
pub struct Denoisers {
    pub edn: Option<EdnDenoiser>,
    pub mlp: Option<MlpDenoiser>,
}

impl Denoisers {
    /// Loads the weight files the config's methods need.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (need_edn, need_mlp) = (cfg.needs_edn(), cfg.needs_mlp());
        cfg.check_denoiser_files(need_edn, need_mlp)?;
        let mut out = Self::default();
        if let (true, Some(p)) = (need_edn, &cfg.denoisers.edn) {
            out.edn = Some(EdnDenoiser::new(load_network(p)?)?);
        }
        if let (true, Some(p)) = (need_mlp, &cfg.denoisers.mlp) {
            out.mlp = Some(MlpDenoiser::new(load_network(p)?, cfg.scenario.frame.constellation.clone())?);
        }
        Ok(out)
    }

    fn edn(&self) -> Result<&EdnDenoiser> {
        self.edn.as_ref().ok_or_else(|| Error::Config("pnp-edn selected but no EDN is loaded".into()))
    }

    fn mlp(&self) -> Result<&MlpDenoiser> {
        self.mlp.as_ref().ok_or_else(|| Error::Config("pnp-mlp selected but no MLP is loaded".into()))
    }
}

/// Per-trial values of one cell, in trial order. Paired comparisons between
/// methods of the same cell use these.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSamples {
    pub method: String,
    pub snr_db: f64,
    pub epsilon: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<MetricRow>,
    pub samples: Vec<CellSamples>,
}

impl SweepOutput {
    pub fn samples(&self, method: &str, snr_db: f64, epsilon: f64) -> Option<&[f64]> {
        self.samples
            .iter()
            .find(|c| c.method == method && c.snr_db == snr_db && c.epsilon == epsilon)
            .map(|c| c.values.as_slice())
    }
}

/// One method's outcome on one trial.
struct Outcome {
    value: f64,
    iterations: usize,
}

fn sweep_cells<F>(
    cfg: &ExperimentConfig,
    methods: &[String],
    cells: &[(f64, f64)],
    nmse_metric: bool,
    trial: F,
) -> Result<SweepOutput>
where
    F: Fn(f64, f64, u64) -> Result<Vec<Outcome>> + Sync,
{
    let mut out = SweepOutput::default();
    for &(snr_db, epsilon) in cells {
        let per_trial: Vec<Vec<Outcome>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| trial(snr_db, epsilon, t))
            .collect::<Result<_>>()?;
        for (m, name) in methods.iter().enumerate() {
            let values: Vec<f64> = per_trial.iter().map(|o| o[m].value).collect();
            let iters = per_trial.iter().map(|o| o[m].iterations as f64).sum::<f64>() / cfg.trials as f64;
            let (mean, se) = mean_se(&values);
            let (nm, ns, bm, bs) = if nmse_metric {
                (Some(mean), Some(se), None, None)
            } else {
                (None, None, Some(mean), Some(se))
            };
            out.rows.push(MetricRow {
                experiment: cfg.id.clone(),
                method: name.clone(),
                snr_db,
                epsilon,
                trials: cfg.trials,
                nmse_mean: nm,
                nmse_se: ns,
                ber_mean: bm,
                ber_se: bs,
                mean_iterations: iters,
                seed: cfg.seed,
            });
            out.samples.push(CellSamples { method: name.clone(), snr_db, epsilon, values });
        }
    }
    Ok(out)
}

/// Channel estimation with the config's hyperparameters.
pub struct CeRunner<'a> {
    pub scenario: &'a Scenario,
    pub cfg: &'a ExperimentConfig,
    pub denoisers: &'a Denoisers,
}

impl CeRunner<'_> {
    pub fn prior_var(&self) -> f64 {
        self.cfg.ce.lmmse_prior_var.unwrap_or(1.0 / self.scenario.response_len() as f64)
    }

    pub fn estimate(
        &self,
        method: CeMethod,
        y: &[C64],
        noise_var: f64,
        pnp: &PnpConfig,
        truth: Option<&[C64]>,
    ) -> Result<CeResult> {
        let est = &self.scenario.estimator;
        let out = self.cfg.ce.output;
        let closed = |h: Vec<C64>| CeResult { h, nmse_trace: Vec::new(), iterations: 1 };
        match method {
            CeMethod::Ls => Ok(closed(est.ls(y)?)),
            CeMethod::Lmmse => Ok(closed(est.lmmse(y, noise_var, self.prior_var())?)),
            CeMethod::PnpEdn => est.pnp(y, self.denoisers.edn()?, pnp, out, truth),
            CeMethod::L1Adaptive => {
                let tau = est.threshold(ThresholdPolicy::Adaptive(self.cfg.ce.threshold_scale), noise_var, pnp.rho)?;
                est.admm_l1(y, tau, pnp, out, truth)
            }
            CeMethod::L1Fixed(tau) => est.admm_l1(y, tau, pnp, out, truth),
        }
    }
}

/// The fixed-low and fixed-high ℓ1 thresholds: the adaptive rule evaluated
/// at the highest and lowest SNR of `snr_db`.
pub fn fixed_threshold_pair(scenario: &Scenario, cfg: &ExperimentConfig, snr_db: &[f64]) -> Result<(f64, f64)> {
    let hi = snr_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = snr_db.iter().copied().fold(f64::INFINITY, f64::min);
    let tau = |snr| {
        scenario.estimator.threshold(
            ThresholdPolicy::Adaptive(cfg.ce.threshold_scale),
            noise_variance(scenario.es(), snr),
            cfg.ce.pnp.rho,
        )
    };
    Ok((tau(hi)?, tau(lo)?))
}

fn detect(
    det: &Detector,
    method: SdMethod,
    y: &[C64],
    noise_var: f64,
    pnp: &PnpConfig,
    denoisers: &Denoisers,
    truth_bits: Option<&[u8]>,
) -> Result<SdResult> {
    match method {
        SdMethod::Ls => det.ls(y),
        SdMethod::Lmmse => det.lmmse(y, noise_var),
        SdMethod::PnpExact => {
            let sm = SoftMapper { constellation: det.constellation.clone() };
            det.pnp(y, &sm, pnp, truth_bits)
        }
        SdMethod::PnpMlp => det.pnp(y, denoisers.mlp()? as &dyn Denoiser, pnp, truth_bits),
    }
}

/// NMSE per (method, SNR) over `cfg.trials` channel draws.
pub fn run_ce_sweep(cfg: &ExperimentConfig, denoisers: &Denoisers) -> Result<SweepOutput> {
    let scenario = Scenario::new(cfg.scenario.clone())?;
    let runner = CeRunner { scenario: &scenario, cfg, denoisers };
    let tree = SeedTree::new(cfg.seed);
    let names: Vec<String> = cfg.ce.methods.iter().map(ToString::to_string).collect();
    let cells: Vec<(f64, f64)> = cfg.snr_db.iter().map(|&s| (s, 0.0)).collect();
    sweep_cells(cfg, &names, &cells, true, |snr, _, t| {
        let paths = scenario.draw_channel(&mut tree.child("channel", t).rng())?;
        let trial = scenario.ce_trial(
            paths,
            snr,
            &mut tree.child("data", t).rng(),
            &mut tree.child_f64("noise", snr).child("trial", t).rng(),
        )?;
        cfg.ce
            .methods
            .iter()
            .map(|&m| {
                let r = runner.estimate(m, &trial.y_obs, trial.noise_var, &cfg.ce.pnp, None)?;
                Ok(Outcome { value: nmse(&r.h, &trial.truth), iterations: r.iterations })
            })
            .collect()
    })
}

/// BER per (method, SNR, ε) with known or perturbed CSI, or per
/// (pipeline, SNR) when `[sd].pipelines` is non-empty.
pub fn run_sd_sweep(cfg: &ExperimentConfig, denoisers: &Denoisers) -> Result<SweepOutput> {
    if cfg.sd.pipelines.is_empty() {
        known_csi_sweep(cfg, denoisers)
    } else {
        pipeline_sweep(cfg, denoisers)
    }
}

fn known_csi_sweep(cfg: &ExperimentConfig, denoisers: &Denoisers) -> Result<SweepOutput> {
    let scenario = Scenario::new(cfg.scenario.clone())?;
    let tree = SeedTree::new(cfg.seed);
    let names: Vec<String> = cfg.sd.methods.iter().map(ToString::to_string).collect();
    let cells: Vec<(f64, f64)> =
        cfg.snr_db.iter().flat_map(|&s| cfg.epsilon.iter().map(move |&e| (s, e))).collect();
    sweep_cells(cfg, &names, &cells, false, |snr, eps, t| {
        let paths = scenario.draw_channel(&mut tree.child("channel", t).rng())?;
        let trial = scenario.sd_trial(
            &paths,
            snr,
            &mut tree.child("data", t).rng(),
            &mut tree.child_f64("noise", snr).child("trial", t).rng(),
        )?;
        let (det, csi_var) = scenario.perturbed_detector(&paths, eps, &mut tree.child_f64("csi", eps).child("trial", t).rng())?;
        cfg.sd
            .methods
            .iter()
            .map(|&m| {
                let r = detect(&det, m, &trial.y, trial.noise_var + csi_var, &cfg.sd.pnp, denoisers, None)?;
                Ok(Outcome { value: r.ber(&trial.bits), iterations: r.iterations })
            })
            .collect()
    })
}

/// Estimate the channel from a pilot frame, then detect a data frame sent
/// through the same channel.
fn pipeline_sweep(cfg: &ExperimentConfig, denoisers: &Denoisers) -> Result<SweepOutput> {
    let scenario = Scenario::new(cfg.scenario.clone())?;
    let runner = CeRunner { scenario: &scenario, cfg, denoisers };
    let tree = SeedTree::new(cfg.seed);
    let pipes: &[Pipeline] = &cfg.sd.pipelines;
    let names: Vec<String> = pipes.iter().map(ToString::to_string).collect();
    let cells: Vec<(f64, f64)> = cfg.snr_db.iter().map(|&s| (s, 0.0)).collect();
    sweep_cells(cfg, &names, &cells, false, |snr, _, t| {
        let paths = scenario.draw_channel(&mut tree.child("channel", t).rng())?;
        let noise = tree.child_f64("noise", snr).child("trial", t);
        let pilot = scenario.ce_trial(
            paths.clone(),
            snr,
            &mut tree.child("pilot-data", t).rng(),
            &mut noise.child("pilot", 0).rng(),
        )?;
        let data = scenario.sd_trial(&paths, snr, &mut tree.child("data", t).rng(), &mut noise.rng())?;
        let mut estimates: Vec<(CeMethod, Detector)> = Vec::new();
        let mut out = Vec::with_capacity(pipes.len());
        for p in pipes {
            let i = match estimates.iter().position(|(m, _)| *m == p.ce) {
                Some(i) => i,
                None => {
                    let h = runner.estimate(p.ce, &pilot.y_obs, pilot.noise_var, &cfg.ce.pnp, None)?.h;
                    estimates.push((p.ce, scenario.estimated_detector(&h)?));
                    estimates.len() - 1
                }
            };
            let r = detect(&estimates[i].1, p.sd, &data.y, data.noise_var, &cfg.sd.pnp, denoisers, None)?;
            out.push(Outcome { value: r.ber(&data.bits), iterations: r.iterations });
        }
        Ok(out)
    })
}

/// Per-iteration NMSE of PnP-CE and BER of the traced detector over
/// `trace.seeds` runs; exactly `trace.iterations` rows per run.
pub fn run_convergence_trace(cfg: &ExperimentConfig, denoisers: &Denoisers) -> Result<Vec<TraceRow>> {
    let scenario = Scenario::new(cfg.scenario.clone())?;
    let runner = CeRunner { scenario: &scenario, cfg, denoisers };
    let tree = SeedTree::new(cfg.seed).child("trace", 0);
    let tr = &cfg.trace;
    let row = |kind: &str, method: String, run: usize, iteration: usize, v: f64| TraceRow {
        experiment: cfg.id.clone(),
        kind: kind.into(),
        method,
        run,
        iteration,
        nmse: (kind == "ce").then_some(v),
        ber: (kind == "sd").then_some(v),
    };
    let mut rows = Vec::new();
    if tr.kinds.contains(&TraceKind::Ce) {
        let pnp = PnpConfig { iterations: tr.iterations, early_exit: None, ..cfg.ce.pnp.clone() };
        let traces: Vec<Vec<f64>> = (0..tr.seeds as u64)
            .into_par_iter()
            .map(|s| {
                let paths = scenario.draw_channel(&mut tree.child("channel", s).rng())?;
                let t = scenario.ce_trial(
                    paths,
                    tr.ce_snr_db,
                    &mut tree.child("data", s).rng(),
                    &mut tree.child("noise", s).rng(),
                )?;
                Ok(runner.estimate(CeMethod::PnpEdn, &t.y_obs, t.noise_var, &pnp, Some(&t.truth))?.nmse_trace)
            })
            .collect::<Result<_>>()?;
        for (run, v) in traces.iter().enumerate() {
            rows.extend(v.iter().enumerate().map(|(k, &x)| row("ce", CeMethod::PnpEdn.to_string(), run, k + 1, x)));
        }
    }
    if tr.kinds.contains(&TraceKind::Sd) {
        if !matches!(tr.detector, SdMethod::PnpExact | SdMethod::PnpMlp) {
            return Err(Error::Config(format!("trace detector must be iterative, got {}", tr.detector)));
        }
        let pnp = PnpConfig { iterations: tr.iterations, early_exit: None, ..cfg.sd.pnp.clone() };
        let traces: Vec<Vec<f64>> = (0..tr.seeds as u64)
            .into_par_iter()
            .map(|s| {
                let paths = scenario.draw_channel(&mut tree.child("sd-channel", s).rng())?;
                let t = scenario.sd_trial(
                    &paths,
                    tr.sd_snr_db,
                    &mut tree.child("sd-data", s).rng(),
                    &mut tree.child("sd-noise", s).rng(),
                )?;
                let det = scenario.structured_detector(&paths)?;
                Ok(detect(&det, tr.detector, &t.y, t.noise_var, &pnp, denoisers, Some(&t.bits))?.ber_trace)
            })
            .collect::<Result<_>>()?;
        for (run, v) in traces.iter().enumerate() {
            rows.extend(v.iter().enumerate().map(|(k, &x)| row("sd", tr.detector.to_string(), run, k + 1, x)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelKind;
    use crate::harness::config::Pipeline;
    use crate::harness::sim::ScenarioSpec;

    fn small(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            trials,
            scenario: ScenarioSpec::standard(ChannelKind::Integer),
            ..Default::default()
        }
    }

    #[test]
    fn ce_sweep_emits_one_row_per_method_and_snr() {
        let mut cfg = small(4);
        cfg.ce.methods = vec![CeMethod::Ls, CeMethod::Lmmse, CeMethod::L1Adaptive, CeMethod::L1Fixed(0.1)];
        let out = run_ce_sweep(&cfg, &Denoisers::default()).unwrap();
        assert_eq!(out.rows.len(), 4 * 3);
        assert!(out.rows.iter().all(|r| r.nmse_mean.unwrap().is_finite() && r.ber_mean.is_none()));
        assert_eq!(out.samples("ls", 20.0, 0.0).unwrap().len(), 4);
        // rerun is bit-identical
        assert_eq!(run_ce_sweep(&cfg, &Denoisers::default()).unwrap(), out);
    }

    #[test]
    fn adding_a_method_leaves_other_draws_unchanged() {
        let mut cfg = small(3);
        cfg.snr_db = vec![20.0];
        cfg.ce.methods = vec![CeMethod::Ls];
        let a = run_ce_sweep(&cfg, &Denoisers::default()).unwrap();
        cfg.ce.methods = vec![CeMethod::Lmmse, CeMethod::Ls];
        let b = run_ce_sweep(&cfg, &Denoisers::default()).unwrap();
        assert_eq!(a.samples("ls", 20.0, 0.0), b.samples("ls", 20.0, 0.0));
    }

    #[test]
    fn missing_learned_denoiser_is_a_config_error() {
        let cfg = small(1);
        let e = run_ce_sweep(&cfg, &Denoisers::default()).unwrap_err();
        assert_eq!(e.category(), "config");
    }

    #[test]
    fn sd_sweeps_report_ber() {
        let mut cfg = small(2);
        cfg.snr_db = vec![40.0];
        cfg.epsilon = vec![0.0, 1e-2];
        let out = run_sd_sweep(&cfg, &Denoisers::default()).unwrap();
        assert_eq!(out.rows.len(), 3 * 2);
        assert!(out.rows.iter().all(|r| (0.0..=1.0).contains(&r.ber_mean.unwrap())));
        cfg.epsilon = vec![0.0];
        cfg.sd.pipelines = vec![Pipeline { ce: CeMethod::Lmmse, sd: SdMethod::PnpExact }, "ls>ls".parse().unwrap()];
        let out = run_sd_sweep(&cfg, &Denoisers::default()).unwrap();
        assert_eq!(out.rows.iter().map(|r| r.method.as_str()).collect::<Vec<_>>(), ["lmmse>pnp-exact", "ls>ls"]);
    }

    #[test]
    fn trace_has_exactly_the_iteration_budget_per_run() {
        let mut cfg = small(1);
        cfg.trace.kinds = vec![TraceKind::Sd];
        cfg.trace.seeds = 3;
        cfg.trace.iterations = 7;
        let rows = run_convergence_trace(&cfg, &Denoisers::default()).unwrap();
        assert_eq!(rows.len(), 21);
        assert!(super::super::metrics::trace_runs(&rows, "sd").iter().all(|r| r.len() == 7));
        cfg.trace.detector = SdMethod::Lmmse;
        assert!(run_convergence_trace(&cfg, &Denoisers::default()).is_err());
    }
}
