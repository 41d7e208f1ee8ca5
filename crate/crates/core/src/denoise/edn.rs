//! Encoder-decoder channel denoiser operating on the truncated DD response
//! as a 2-channel (real, imaginary) image of shape `(l_max+1) × (2k̂_max+1)`.
//!
//! ```text
//! input ─ conv3×3 ─ ReLU ─ BN ─ res(w) ─┬──────────────── (+) ─ res(w) ─ conv3×3 → 2 ch
//!                                       └ pool ─ res(2w) ─ up ─ conv1×1 ┘
//! ```
//!
//! Each residual block is `N_c` 3×3 convolutions (ReLU between them) plus a
//! 1×1 projection shortcut, followed by ReLU. Inputs are normalized by their
//! RMS before the network and the output rescaled, so one set of weights
//! serves every channel power; the network is blind to `σ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::nn::{LayerKind, Mode, Network, NetworkSpec, Tensor};
use crate::pnp::Denoiser;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdnConfig {
    /// Channel width `w` of the full-resolution path.
    pub width: usize,
    /// Convolutions per residual block (`N_c`).
    pub block_convs: usize,
}

impl Default for EdnConfig {
    fn default() -> Self {
        Self { width: 16, block_convs: 2 }
    }
}

fn residual_block(spec: &mut NetworkSpec, input: usize, cin: usize, cout: usize, convs: usize) -> usize {
    let mut h = input;
    let mut c = cin;
    for i in 0..convs {
        h = spec.push(LayerKind::Conv2d { in_channels: c, out_channels: cout, kernel: 3 }, &[h]);
        c = cout;
        if i + 1 < convs {
            h = spec.then(LayerKind::Relu);
        }
    }
    let short = spec.push(LayerKind::Conv2d { in_channels: cin, out_channels: cout, kernel: 1 }, &[input]);
    spec.push(LayerKind::Add, &[h, short]);
    spec.then(LayerKind::Relu)
}

/// Network spec for an `rows × cols` grid.
pub fn edn_spec(cfg: &EdnConfig, rows: usize, cols: usize) -> Result<NetworkSpec> {
    if cfg.width == 0 || cfg.block_convs == 0 {
        return Err(Error::InvalidParameter("EDN width and block depth must be >= 1".into()));
    }
    let w = cfg.width;
    let mut spec = NetworkSpec::new(vec![2, rows, cols]);
    spec.then(LayerKind::Conv2d { in_channels: 2, out_channels: w, kernel: 3 });
    spec.then(LayerKind::Relu);
    let stem = spec.then(LayerKind::BatchNorm2d { channels: w });
    let enc = residual_block(&mut spec, stem, w, w, cfg.block_convs);
    let pooled = spec.push(LayerKind::AvgPool2, &[enc]);
    residual_block(&mut spec, pooled, w, 2 * w, cfg.block_convs);
    spec.then(LayerKind::Upsample { height: rows, width: cols });
    let up = spec.then(LayerKind::Conv2d { in_channels: 2 * w, out_channels: w, kernel: 1 });
    let joined = spec.push(LayerKind::Add, &[up, enc]);
    let dec = residual_block(&mut spec, joined, w, w, cfg.block_convs);
    spec.push(LayerKind::Conv2d { in_channels: w, out_channels: 2, kernel: 3 }, &[dec]);
    Ok(spec)
}

pub fn build_edn(cfg: &EdnConfig, rows: usize, cols: usize, seed: u64) -> Result<Network> {
    Network::new(edn_spec(cfg, rows, cols)?, seed)
}

/// Column-major complex grid (`l + rows·c`) → `[2, rows, cols]` image.
pub fn grid_to_image(v: &[C64], rows: usize, cols: usize, scale: f64) -> Vec<f64> {
    let plane = rows * cols;
    let mut img = vec![0.0; 2 * plane];
    for c in 0..cols {
        for l in 0..rows {
            let z = v[l + rows * c] / scale;
            img[l * cols + c] = z.re;
            img[plane + l * cols + c] = z.im;
        }
    }
    img
}

pub fn image_to_grid(img: &[f64], rows: usize, cols: usize, scale: f64) -> Vec<C64> {
    let plane = rows * cols;
    let mut v = vec![C64::new(0.0, 0.0); plane];
    for c in 0..cols {
        for l in 0..rows {
            v[l + rows * c] = C64::new(img[l * cols + c], img[plane + l * cols + c]) * scale;
        }
    }
    v
}

/// RMS normalization constant; 1 for an all-zero input.
pub fn rms_scale(v: &[C64]) -> f64 {
    let s = (crate::linalg::norm_sqr(v) / v.len().max(1) as f64).sqrt();
    if s > 0.0 { s } else { 1.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdnDenoiser {
    pub net: Network,
    rows: usize,
    cols: usize,
}

impl EdnDenoiser {
    pub fn new(net: Network) -> Result<Self> {
        let s = net.input_shape();
        if s.len() != 3 || s[0] != 2 || net.output_shape() != s {
            return Err(Error::Network(format!(
                "EDN must map [2, H, W] to itself, got {:?} -> {:?}",
                s,
                net.output_shape()
            )));
        }
        let (rows, cols) = (s[1], s[2]);
        Ok(Self { net, rows, cols })
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Denoises several grids in one batch.
    pub fn denoise_batch(&self, grids: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let n = self.rows * self.cols;
        let mut scales = Vec::with_capacity(grids.len());
        let mut data = Vec::with_capacity(grids.len() * 2 * n);
        for g in grids {
            if g.len() != n {
                return Err(Error::dim(n, g.len()));
            }
            let s = rms_scale(g);
            scales.push(s);
            data.extend(grid_to_image(g, self.rows, self.cols, s));
        }
        let x = Tensor::new(vec![grids.len(), 2, self.rows, self.cols], data)?;
        let y = self.net.forward(&x, Mode::Eval)?;
        Ok(scales
            .iter()
            .enumerate()
            .map(|(i, &s)| image_to_grid(y.sample(i), self.rows, self.cols, s))
            .collect())
    }
}

impl Denoiser for EdnDenoiser {
    fn denoise(&self, x: &[C64], _sigma: f64) -> Result<Vec<C64>> {
        Ok(self.denoise_batch(&[x.to_vec()])?.pop().expect("one grid in, one out"))
    }

    fn name(&self) -> &str {
        "edn"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::check::finite_difference;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_preserved_and_zero_net_outputs_zero() {
        let mut net = build_edn(&EdnConfig::default(), 5, 11, 1).unwrap();
        let d = EdnDenoiser::new(net.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<C64> = (0..55).map(|_| C64::new(rng.random(), rng.random())).collect();
        assert_eq!(d.denoise(&x, 0.1).unwrap().len(), 55);
        net.zero_params();
        let d = EdnDenoiser::new(net).unwrap();
        assert!(d.denoise(&x, 0.1).unwrap().iter().all(|z| z.norm() == 0.0));
        assert!(d.denoise(&x[..10], 0.1).is_err());
    }

    #[test]
    fn image_roundtrip() {
        let v: Vec<C64> = (0..15).map(|i| C64::new(i as f64, -(i as f64))).collect();
        let img = grid_to_image(&v, 3, 5, 2.0);
        assert_eq!(img[1], 0.5 * 3.0); // (l=0, c=1) is vec index 3
        assert_eq!(image_to_grid(&img, 3, 5, 2.0), v);
    }

    #[test]
    fn whole_edn_gradient_check() {
        let net = build_edn(&EdnConfig { width: 3, block_convs: 2 }, 5, 7, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::new(vec![2, 2, 5, 7], (0..140).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let r = finite_difference(&net, &x, Mode::Train, 1e-4, 6).unwrap();
        assert!(r.worst() < 1e-4, "{r:?}");
    }
}
