//! Seeded training-set generators. A dataset is fully described by its spec,
//! so only specs are stored on disk.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::edn::{grid_to_image, rms_scale, EdnDenoiser};
use crate::channel::{build_truncated_response, complex_gaussian, ChannelKind, ChannelParams};
use crate::error::{Error, Result};
use crate::frame::{Constellation, FrameConfig};
use crate::linalg::{norm_sqr, C64};
use crate::nn::train::{Dataset, Targets};
use crate::nn::Tensor;

/// Per-sample generator: sample `i` draws from stream `i` of the seed, so
/// any prefix or subset regenerates identically.
fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDatasetSpec {
    pub samples: usize,
    pub frame: FrameConfig,
    pub channel: ChannelParams,
    /// Channel kinds drawn uniformly per sample.
    pub mixture: Vec<ChannelKind>,
    /// Per-sample SNR range in dB, drawn uniformly.
    pub snr_db: (f64, f64),
    pub seed: u64,
}

/// Noisy truncated response `ψ = z + n` and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDenoiseSample {
    pub psi: Vec<C64>,
    pub z: Vec<C64>,
    pub snr_db: f64,
}

impl ChannelDatasetSpec {
    pub fn grid(&self) -> (usize, usize) {
        (self.channel.l_max + 1, 2 * self.channel.k_hat_max() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mixture.is_empty() {
            return Err(Error::InvalidParameter("channel mixture is empty".into()));
        }
        if !(self.snr_db.0 <= self.snr_db.1) {
            return Err(Error::InvalidParameter(format!("bad SNR range {:?}", self.snr_db)));
        }
        Ok(())
    }
}

/// Noise variance `σ_n² = (‖z‖²/L_n)·10^{−snr/10}`.
pub fn generate_channel_samples(spec: &ChannelDatasetSpec) -> Result<Vec<ChannelDenoiseSample>> {
    spec.validate()?;
    (0..spec.samples)
        .map(|i| {
            let mut rng = sample_rng(spec.seed, i);
            let kind = spec.mixture[rng.random_range(0..spec.mixture.len())];
            let params = ChannelParams { kind, ..spec.channel.clone() };
            let paths = params.sample(spec.frame.m, &mut rng)?;
            let z = build_truncated_response(&paths, &spec.frame)?.vec();
            let snr_db = if spec.snr_db.0 == spec.snr_db.1 {
                spec.snr_db.0
            } else {
                rng.random_range(spec.snr_db.0..spec.snr_db.1)
            };
            let var = norm_sqr(&z) / z.len() as f64 * 10f64.powf(-snr_db / 10.0);
            let psi = z.iter().map(|&v| v + complex_gaussian(&mut rng, var)).collect();
            Ok(ChannelDenoiseSample { psi, z, snr_db })
        })
        .collect()
}

/// Network-ready pairs, both scaled by the RMS of `ψ`.
pub fn channel_training_set(samples: &[ChannelDenoiseSample], rows: usize, cols: usize) -> Result<Dataset> {
    let mut x = Vec::with_capacity(samples.len() * 2 * rows * cols);
    let mut t = Vec::with_capacity(x.capacity());
    for s in samples {
        let scale = rms_scale(&s.psi);
        x.extend(grid_to_image(&s.psi, rows, cols, scale));
        t.extend(grid_to_image(&s.z, rows, cols, scale));
    }
    let shape = vec![samples.len(), 2, rows, cols];
    Dataset::new(Tensor::new(shape.clone(), x)?, Targets::Values(Tensor::new(shape, t)?))
}

fn nmse_pair(est: &[C64], truth: &[C64]) -> f64 {
    crate::linalg::nmse(est, truth)
}

/// Mean per-sample NMSE of the do-nothing estimate `ẑ = ψ`.
pub fn identity_nmse(samples: &[ChannelDenoiseSample]) -> f64 {
    samples.iter().map(|s| nmse_pair(&s.psi, &s.z)).sum::<f64>() / samples.len().max(1) as f64
}

/// Mean per-sample NMSE of the EDN output.
pub fn edn_nmse(edn: &EdnDenoiser, samples: &[ChannelDenoiseSample]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in samples.chunks(256) {
        let psis: Vec<Vec<C64>> = chunk.iter().map(|s| s.psi.clone()).collect();
        for (est, s) in edn.denoise_batch(&psis)?.iter().zip(chunk) {
            total += nmse_pair(est, &s.z);
        }
    }
    Ok(total / samples.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDatasetSpec {
    pub samples: usize,
    pub qam_order: usize,
    /// Noise level range; `ẋ = q + CN(0, σ²)`, `σ` uniform.
    pub sigma: (f64, f64),
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolDenoiseSample {
    pub x: C64,
    pub label: usize,
    pub sigma: f64,
}

pub fn generate_symbol_samples(spec: &SymbolDatasetSpec) -> Result<Vec<SymbolDenoiseSample>> {
    let c = Constellation::qam(spec.qam_order)?;
    if !(0.0 < spec.sigma.0 && spec.sigma.0 <= spec.sigma.1) {
        return Err(Error::InvalidParameter(format!("bad sigma range {:?}", spec.sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.samples)
        .map(|_| {
            let label = rng.random_range(0..c.order());
            let sigma = if spec.sigma.0 == spec.sigma.1 {
                spec.sigma.0
            } else {
                rng.random_range(spec.sigma.0..spec.sigma.1)
            };
            let x = c.points()[label] + complex_gaussian(&mut rng, sigma * sigma);
            SymbolDenoiseSample { x, label, sigma }
        })
        .collect())
}

pub fn symbol_training_set(samples: &[SymbolDenoiseSample]) -> Result<Dataset> {
    let x: Vec<f64> = samples.iter().flat_map(|s| [s.x.re, s.x.im, s.sigma]).collect();
    Dataset::new(
        Tensor::new(vec![samples.len(), 3], x)?,
        Targets::Labels(samples.iter().map(|s| s.label).collect()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(snr: (f64, f64)) -> ChannelDatasetSpec {
        ChannelDatasetSpec {
            samples: 100,
            frame: FrameConfig::standard(),
            channel: ChannelParams::standard(ChannelKind::Integer),
            mixture: vec![ChannelKind::Integer, ChannelKind::FractionalDoppler, ChannelKind::FractionalDelayDoppler],
            snr_db: snr,
            seed: 9,
        }
    }

    #[test]
    fn fixed_snr_and_support() {
        let s = generate_channel_samples(&spec((10.0, 10.0))).unwrap();
        assert_eq!(s.len(), 100);
        for x in &s {
            assert_eq!(x.snr_db, 10.0);
            assert_eq!(x.z.len(), 55);
            assert_eq!(x.psi.len(), 55);
        }
        // empirical SNR over the set ≈ 10 dB
        let sig: f64 = s.iter().map(|x| norm_sqr(&x.z)).sum();
        let noise: f64 = s.iter().map(|x| x.psi.iter().zip(&x.z).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()).sum();
        assert!((10.0 * (sig / noise).log10() - 10.0).abs() < 0.5);
    }

    #[test]
    fn regenerates_identically() {
        let a = generate_channel_samples(&spec((0.0, 50.0))).unwrap();
        let b = generate_channel_samples(&spec((0.0, 50.0))).unwrap();
        assert_eq!(a, b);
        let mut short = spec((0.0, 50.0));
        short.samples = 10;
        assert_eq!(generate_channel_samples(&short).unwrap()[..], a[..10]);
    }

    #[test]
    fn symbol_set_labels_match_points() {
        let s = generate_symbol_samples(&SymbolDatasetSpec { samples: 1000, qam_order: 4, sigma: (1e-6, 1e-6), seed: 1 }).unwrap();
        let c = Constellation::qam(4).unwrap();
        assert!(s.iter().all(|x| c.nearest(x.x) == x.label));
        let d = symbol_training_set(&s).unwrap();
        assert_eq!(d.len(), 1000);
    }
}
