//! Denoisers for the PnP `z`-update: analytic soft-thresholding, the exact
//! Gaussian-posterior soft mapper, and the trainable EDN (channel) and MLP
//! (symbol) networks with their training-set generators.

pub mod dataset;
pub mod edn;
pub mod mlp;

use crate::error::{Error, Result};
use crate::frame::Constellation;
use crate::linalg::C64;
use crate::pnp::Denoiser;

pub use edn::{EdnConfig, EdnDenoiser};
pub use mlp::{MlpConfig, MlpDenoiser};

/// Complex shrinkage `z = x·max(1 − τ/|x|, 0)`, independent of `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftThreshold {
    pub tau: f64,
}

pub fn soft_threshold(x: &[C64], tau: f64) -> Vec<C64> {
    x.iter()
        .map(|&v| {
            let r = v.norm();
            if r <= tau {
                C64::new(0.0, 0.0)
            } else {
                v * (1.0 - tau / r)
            }
        })
        .collect()
}

impl Denoiser for SoftThreshold {
    fn denoise(&self, x: &[C64], _sigma: f64) -> Result<Vec<C64>> {
        Ok(soft_threshold(x, self.tau))
    }

    fn name(&self) -> &str {
        "soft-threshold"
    }
}

/// Universal threshold `τ = c·σ·√(2 ln L_n)`.
pub fn adaptive_threshold(sigma: f64, dims: usize, c: f64) -> f64 {
    c * sigma * (2.0 * (dims as f64).ln()).sqrt()
}

/// Posterior `p(q | x) ∝ exp(−|x − q|²/σ²)` under a uniform prior, computed
/// with a max-shift for stability. `σ = 0` gives a one-hot nearest point.
pub fn posterior(x: C64, sigma: f64, constellation: &Constellation) -> Vec<f64> {
    let pts = constellation.points();
    if sigma == 0.0 {
        let mut p = vec![0.0; pts.len()];
        p[constellation.nearest(x)] = 1.0;
        return p;
    }
    let s2 = sigma * sigma;
    let logits: Vec<f64> = pts.iter().map(|q| -(x - q).norm_sqr() / s2).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Posterior mean `Σ_q p(q|x)·q` for every entry.
pub fn soft_mapper_exact(x: &[C64], sigma: f64, constellation: &Constellation) -> Result<Vec<C64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(x.iter()
        .map(|&v| {
            posterior(v, sigma, constellation)
                .iter()
                .zip(constellation.points())
                .map(|(p, q)| q * *p)
                .sum()
        })
        .collect())
}

/// [`soft_mapper_exact`] as a denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMapper {
    pub constellation: Constellation,
}

impl Denoiser for SoftMapper {
    fn denoise(&self, x: &[C64], sigma: f64) -> Result<Vec<C64>> {
        soft_mapper_exact(x, sigma, &self.constellation)
    }

    fn name(&self) -> &str {
        "soft-mapper"
    }
}

/// Mean total-variation distance between two families of distributions.
pub fn mean_tv_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let tv: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| 0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .sum();
    tv / a.len().max(1) as f64
}
