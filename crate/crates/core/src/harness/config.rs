//! Experiment configuration (TOML). Every section has defaults, so an empty
//! file is a valid default experiment.
//!
//! ```toml
//! id = "ce-integer"
//! seed = 1
//! trials = 500
//! snr_db = [10.0, 20.0, 30.0]
//!
//! [scenario.channel]
//! kind = "integer"
//!
//! [ce]
//! methods = ["ls", "lmmse", "pnp-edn", "l1-adaptive", "l1-fixed:0.4"]
//!
//! [denoisers]
//! edn = "models/edn.otpn"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sim::ScenarioSpec;
use crate::channel::ChannelKind;
use crate::denoise::{EdnConfig, MlpConfig};
use crate::error::{Error, Result};
use crate::nn::optim::AdamConfig;
use crate::pnp::PnpConfig;
use crate::receivers::ce::CeOutput;

/// Trial count used by `--paper-scale`.
pub const PAPER_SCALE_TRIALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CeMethod {
    Ls,
    Lmmse,
    PnpEdn,
    L1Adaptive,
    L1Fixed(f64),
}

impl fmt::Display for CeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CeMethod::Ls => f.write_str("ls"),
            CeMethod::Lmmse => f.write_str("lmmse"),
            CeMethod::PnpEdn => f.write_str("pnp-edn"),
            CeMethod::L1Adaptive => f.write_str("l1-adaptive"),
            CeMethod::L1Fixed(t) => write!(f, "l1-fixed:{t}"),
        }
    }
}

impl FromStr for CeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ls" => CeMethod::Ls,
            "lmmse" => CeMethod::Lmmse,
            "pnp-edn" => CeMethod::PnpEdn,
            "l1-adaptive" => CeMethod::L1Adaptive,
            _ => match s.strip_prefix("l1-fixed:").map(str::parse::<f64>) {
                Some(Ok(t)) if t >= 0.0 => CeMethod::L1Fixed(t),
                _ => return Err(Error::Config(format!("unknown channel estimator {s:?}"))),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdMethod {
    Ls,
    Lmmse,
    PnpExact,
    PnpMlp,
}

impl fmt::Display for SdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SdMethod::Ls => "ls",
            SdMethod::Lmmse => "lmmse",
            SdMethod::PnpExact => "pnp-exact",
            SdMethod::PnpMlp => "pnp-mlp",
        })
    }
}

impl FromStr for SdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ls" => SdMethod::Ls,
            "lmmse" => SdMethod::Lmmse,
            "pnp-exact" => SdMethod::PnpExact,
            "pnp-mlp" => SdMethod::PnpMlp,
            _ => return Err(Error::Config(format!("unknown detector {s:?}"))),
        })
    }
}

/// Estimate-then-detect chain, written `"<estimator>><detector>"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    pub ce: CeMethod,
    pub sd: SdMethod,
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.ce, self.sd)
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('>')
            .ok_or_else(|| Error::Config(format!("pipeline {s:?} is not \"estimator>detector\"")))?;
        Ok(Pipeline { ce: a.trim().parse()?, sd: b.trim().parse()? })
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(CeMethod);
string_serde!(SdMethod);
string_serde!(Pipeline);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeSection {
    pub methods: Vec<CeMethod>,
    pub pnp: PnpConfig,
    pub output: CeOutput,
    /// Isotropic LMMSE prior variance; `None` uses `1/L_n`.
    pub lmmse_prior_var: Option<f64>,
    /// `c` of the adaptive ℓ1 threshold.
    pub threshold_scale: f64,
}

/// Scale of the adaptive ℓ1 threshold used by the receivers, calibrated on
/// held-out seeds (see the `threshold_calibration` example).
pub const DEFAULT_THRESHOLD_SCALE: f64 = 6.0;

impl Default for CeSection {
    fn default() -> Self {
        Self {
            methods: vec![CeMethod::Ls, CeMethod::Lmmse, CeMethod::PnpEdn],
            pnp: PnpConfig::default(),
            output: CeOutput::Denoised,
            lmmse_prior_var: None,
            threshold_scale: DEFAULT_THRESHOLD_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdSection {
    pub methods: Vec<SdMethod>,
    pub pnp: PnpConfig,
    /// Sequential estimate-then-detect chains; when non-empty, `sd-sweep`
    /// runs these instead of the known-channel detectors.
    pub pipelines: Vec<Pipeline>,
}

impl Default for SdSection {
    fn default() -> Self {
        Self {
            methods: vec![SdMethod::Ls, SdMethod::Lmmse, SdMethod::PnpExact],
            pnp: PnpConfig::default(),
            pipelines: Vec::new(),
        }
    }
}

/// Weight files for the learned denoisers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserPaths {
    pub edn: Option<PathBuf>,
    pub mlp: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdnTraining {
    pub arch: EdnConfig,
    pub train_samples: usize,
    pub val_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub snr_db: (f64, f64),
    pub mixture: Vec<ChannelKind>,
}

impl Default for EdnTraining {
    fn default() -> Self {
        Self {
            arch: EdnConfig::default(),
            train_samples: 9000,
            val_samples: 1000,
            epochs: 12,
            batch_size: 32,
            adam: AdamConfig::default(),
            snr_db: (-10.0, 50.0),
            mixture: vec![ChannelKind::Integer, ChannelKind::FractionalDoppler, ChannelKind::FractionalDelayDoppler],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpTraining {
    pub arch: MlpConfig,
    pub train_samples: usize,
    pub val_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Noise-level range; must cover the PnP level `√(λ/2ρ)`.
    pub sigma: (f64, f64),
}

impl Default for MlpTraining {
    fn default() -> Self {
        Self {
            arch: MlpConfig::default(),
            train_samples: 100000,
            val_samples: 2000,
            epochs: 30,
            batch_size: 64,
            adam: AdamConfig { lr: 3e-3, ..AdamConfig::default() },
            sigma: (0.05, 2.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub edn: EdnTraining,
    pub mlp: MlpTraining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Ce,
    Sd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub kinds: Vec<TraceKind>,
    pub seeds: usize,
    pub ce_snr_db: f64,
    pub sd_snr_db: f64,
    /// Detector traced for [`TraceKind::Sd`].
    pub detector: SdMethod,
    /// Iterations traced; overrides the section's `pnp.iterations`.
    pub iterations: usize,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            kinds: vec![TraceKind::Ce, TraceKind::Sd],
            seeds: 100,
            ce_snr_db: 20.0,
            sd_snr_db: 12.0,
            detector: SdMethod::PnpExact,
            iterations: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub scenario: ScenarioSpec,
    pub ce: CeSection,
    pub sd: SdSection,
    pub denoisers: DenoiserPaths,
    pub train: TrainSection,
    pub trace: TraceSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            id: "experiment".into(),
            seed: 1,
            trials: 500,
            snr_db: vec![10.0, 20.0, 30.0],
            epsilon: vec![0.0],
            scenario: ScenarioSpec::standard(ChannelKind::Integer),
            ce: CeSection::default(),
            sd: SdSection::default(),
            denoisers: DenoiserPaths::default(),
            train: TrainSection::default(),
            trace: TraceSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative denoiser paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.denoisers.edn, &mut cfg.denoisers.mlp].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return bad("SNR grid contains NaN".into());
        }
        if self.epsilon.iter().any(|e| !(*e >= 0.0)) {
            return bad("epsilon values must be >= 0".into());
        }
        if self.trace.seeds == 0 || self.trace.iterations == 0 {
            return bad("trace needs at least one seed and one iteration".into());
        }
        if !(self.ce.threshold_scale >= 0.0) {
            return bad("threshold_scale must be >= 0".into());
        }
        let t = &self.train;
        if t.edn.train_samples == 0 || t.mlp.train_samples == 0 || t.edn.val_samples == 0 || t.mlp.val_samples == 0 {
            return bad("training and validation sets must be non-empty".into());
        }
        self.ce.pnp.validate().map_err(|e| Error::Config(format!("[ce.pnp] {e}")))?;
        self.sd.pnp.validate().map_err(|e| Error::Config(format!("[sd.pnp] {e}")))?;
        self.scenario.frame.validate().map_err(|e| Error::Config(format!("[scenario.frame] {e}")))?;
        self.scenario
            .pilot
            .validate(&self.scenario.frame)
            .map_err(|e| Error::Config(format!("[scenario.pilot] {e}")))?;
        let ch = &self.scenario.channel;
        if self.scenario.pilot.l_max != ch.l_max || self.scenario.pilot.k_hat_max != ch.k_hat_max() {
            return bad("pilot layout l_max/k_hat_max disagree with the channel parameters".into());
        }
        Ok(())
    }

    /// Learned denoisers named by the config must exist on disk.
    pub fn check_denoiser_files(&self, need_edn: bool, need_mlp: bool) -> Result<()> {
        for (need, path, name) in [(need_edn, &self.denoisers.edn, "edn"), (need_mlp, &self.denoisers.mlp, "mlp")] {
            if !need {
                continue;
            }
            match path {
                None => return Err(Error::Config(format!("a learned {name} denoiser is selected but [denoisers].{name} is unset"))),
                Some(p) if !p.exists() => {
                    return Err(Error::Config(format!("{name} weight file {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Raises trial counts and training-set sizes to the full-size figures.
    pub fn paper_scale(&mut self) {
        self.trials = self.trials.max(PAPER_SCALE_TRIALS);
        self.train.edn.train_samples = 90_000;
        self.train.edn.val_samples = 10_000;
    }

    pub fn needs_edn(&self) -> bool {
        self.ce.methods.contains(&CeMethod::PnpEdn) || self.sd.pipelines.iter().any(|p| p.ce == CeMethod::PnpEdn)
    }

    pub fn needs_mlp(&self) -> bool {
        self.sd.methods.contains(&SdMethod::PnpMlp)
            || self.sd.pipelines.iter().any(|p| p.sd == SdMethod::PnpMlp)
            || (self.trace.kinds.contains(&TraceKind::Sd) && self.trace.detector == SdMethod::PnpMlp)
    }
}
