//! Offline denoiser training.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::CurveRow;
use super::seeds::SeedTree;
use crate::denoise::dataset::{
    channel_training_set, edn_nmse, generate_channel_samples, generate_symbol_samples, identity_nmse,
    symbol_training_set, ChannelDatasetSpec, SymbolDatasetSpec,
};
use crate::denoise::edn::build_edn;
use crate::denoise::mlp::build_mlp;
use crate::denoise::{mean_tv_distance, posterior, EdnDenoiser, MlpDenoiser};
use crate::error::Result;
use crate::frame::Constellation;
use crate::nn::loss::LossKind;
use crate::nn::train::{train, TrainConfig};

/// Noise levels of the held-out posterior check.
pub const TV_SIGMAS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const TV_SAMPLES_PER_SIGMA: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub edn_params: usize,
    pub edn_val_nmse: f64,
    pub identity_val_nmse: f64,
    pub mlp_params: usize,
    pub mlp_val_loss: f64,
    /// Mean TV distance to the exact posterior over [`TV_SIGMAS`].
    pub mlp_tv: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedDenoisers {
    pub edn: EdnDenoiser,
    pub mlp: MlpDenoiser,
    pub curves: Vec<CurveRow>,
    pub summary: TrainSummary,
}

fn curves(network: &str, train_loss: &[f64], val_loss: &[f64]) -> Vec<CurveRow> {
    train_loss
        .iter()
        .zip(val_loss)
        .enumerate()
        .map(|(e, (&t, &v))| CurveRow { network: network.into(), epoch: e + 1, train_loss: t, val_loss: v })
        .collect()
}

/// Trains the channel EDN; returns it with its curve, validation NMSE and
/// the identity map's validation NMSE.
pub fn train_edn(cfg: &ExperimentConfig) -> Result<(EdnDenoiser, Vec<CurveRow>, f64, f64)> {
    let tree = SeedTree::new(cfg.seed).child("edn", 0);
    let t = &cfg.train.edn;
    let spec = |samples, label| ChannelDatasetSpec {
        samples,
        frame: cfg.scenario.frame.clone(),
        channel: cfg.scenario.channel.clone(),
        mixture: t.mixture.clone(),
        snr_db: t.snr_db,
        seed: tree.child(label, 0).seed(),
    };
    let train_spec = spec(t.train_samples, "train");
    train_spec.validate()?;
    let (rows, cols) = train_spec.grid();
    let tr = generate_channel_samples(&train_spec)?;
    let va = generate_channel_samples(&spec(t.val_samples, "val"))?;
    let mut net = build_edn(&t.arch, rows, cols, tree.child("init", 0).seed())?;
    let tc = TrainConfig {
        adam: t.adam,
        batch_size: t.batch_size,
        epochs: t.epochs,
        loss: LossKind::NormalizedMse,
        seed: tree.child("shuffle", 0).seed(),
    };
    let report = train(
        &mut net,
        &channel_training_set(&tr, rows, cols)?,
        Some(&channel_training_set(&va, rows, cols)?),
        &tc,
    )?;
    let edn = EdnDenoiser::new(net)?;
    let val = edn_nmse(&edn, &va)?;
    Ok((edn, curves("edn", &report.train_loss, &report.val_loss), val, identity_nmse(&va)))
}

/// Trains the symbol MLP; returns it with its curve and final validation
/// cross-entropy.
pub fn train_mlp(cfg: &ExperimentConfig) -> Result<(MlpDenoiser, Vec<CurveRow>, f64)> {
    let tree = SeedTree::new(cfg.seed).child("mlp", 0);
    let t = &cfg.train.mlp;
    let c = cfg.scenario.frame.constellation.clone();
    let spec = |samples, label| SymbolDatasetSpec {
        samples,
        qam_order: c.order(),
        sigma: t.sigma,
        seed: tree.child(label, 0).seed(),
    };
    let tr = symbol_training_set(&generate_symbol_samples(&spec(t.train_samples, "train"))?)?;
    let va = symbol_training_set(&generate_symbol_samples(&spec(t.val_samples, "val"))?)?;
    let mut net = build_mlp(&t.arch, c.order(), tree.child("init", 0).seed())?;
    let tc = TrainConfig {
        adam: t.adam,
        batch_size: t.batch_size,
        epochs: t.epochs,
        loss: LossKind::CrossEntropy,
        seed: tree.child("shuffle", 0).seed(),
    };
    let report = train(&mut net, &tr, Some(&va), &tc)?;
    let val = report.val_loss.last().copied().unwrap_or(f64::NAN);
    Ok((MlpDenoiser::new(net, c)?, curves("mlp", &report.train_loss, &report.val_loss), val))
}

/// Mean TV distance between the MLP and the exact Gaussian posterior on
/// fresh samples at each of `sigmas`.
pub fn mlp_tv_distance(mlp: &MlpDenoiser, sigmas: &[f64], per_sigma: usize, seed: u64) -> Result<f64> {
    let c: &Constellation = &mlp.constellation;
    let mut total = 0.0;
    for (i, &sigma) in sigmas.iter().enumerate() {
        let samples = generate_symbol_samples(&SymbolDatasetSpec {
            samples: per_sigma,
            qam_order: c.order(),
            sigma: (sigma, sigma),
            seed: SeedTree::new(seed).child("tv", i as u64).seed(),
        })?;
        let x: Vec<_> = samples.iter().map(|s| s.x).collect();
        let exact: Vec<Vec<f64>> = x.iter().map(|&z| posterior(z, sigma, c)).collect();
        total += mean_tv_distance(&mlp.posteriors(&x, sigma)?, &exact);
    }
    Ok(total / sigmas.len().max(1) as f64)
}

/// Trains both denoisers from the config's seed.
pub fn train_denoisers(cfg: &ExperimentConfig) -> Result<TrainedDenoisers> {
    let (edn, mut curve_rows, edn_val_nmse, identity_val_nmse) = train_edn(cfg)?;
    let (mlp, mlp_curve, mlp_val_loss) = train_mlp(cfg)?;
    curve_rows.extend(mlp_curve);
    let mlp_tv = mlp_tv_distance(&mlp, &TV_SIGMAS, TV_SAMPLES_PER_SIGMA, SeedTree::new(cfg.seed).child("mlp-eval", 0).seed())?;
    let summary = TrainSummary {
        edn_params: edn.net.param_count(),
        edn_val_nmse,
        identity_val_nmse,
        mlp_params: mlp.net.param_count(),
        mlp_val_loss,
        mlp_tv,
    };
    Ok(TrainedDenoisers { edn, mlp, curves: curve_rows, summary })
}
