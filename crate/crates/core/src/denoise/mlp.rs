//! Per-symbol MLP soft mapper: features `(Re ẋ, Im ẋ, σ)` → class
//! probabilities over the constellation → posterior-mean symbol.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Constellation;
use crate::linalg::C64;
use crate::nn::{LayerKind, Mode, Network, NetworkSpec, Tensor};
use crate::pnp::Denoiser;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    pub layers: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: 32, layers: 3 }
    }
}

pub fn mlp_spec(cfg: &MlpConfig, classes: usize) -> Result<NetworkSpec> {
    if cfg.hidden == 0 || cfg.layers == 0 || classes < 2 {
        return Err(Error::InvalidParameter("MLP needs >= 1 hidden layer of width >= 1 and >= 2 classes".into()));
    }
    let mut spec = NetworkSpec::new(vec![3]);
    let mut fin = 3;
    for _ in 0..cfg.layers {
        spec.then(LayerKind::Dense { inputs: fin, outputs: cfg.hidden });
        spec.then(LayerKind::Relu);
        fin = cfg.hidden;
    }
    spec.then(LayerKind::Dense { inputs: fin, outputs: classes });
    spec.then(LayerKind::Softmax);
    Ok(spec)
}

pub fn build_mlp(cfg: &MlpConfig, classes: usize, seed: u64) -> Result<Network> {
    Network::new(mlp_spec(cfg, classes)?, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpDenoiser {
    pub net: Network,
    pub constellation: Constellation,
}

impl MlpDenoiser {
    pub fn new(net: Network, constellation: Constellation) -> Result<Self> {
        if net.input_shape() != [3] || net.output_shape() != [constellation.order()] {
            return Err(Error::Network(format!(
                "symbol MLP must map [3] to [{}], got {:?} -> {:?}",
                constellation.order(),
                net.input_shape(),
                net.output_shape()
            )));
        }
        Ok(Self { net, constellation })
    }

    /// Class probabilities for every symbol.
    pub fn posteriors(&self, x: &[C64], sigma: f64) -> Result<Vec<Vec<f64>>> {
        if x.is_empty() {
            return Ok(Vec::new());
        }
        let feats: Vec<f64> = x.iter().flat_map(|z| [z.re, z.im, sigma]).collect();
        let y = self.net.forward(&Tensor::new(vec![x.len(), 3], feats)?, Mode::Eval)?;
        Ok((0..x.len()).map(|i| y.sample(i).to_vec()).collect())
    }
}

impl Denoiser for MlpDenoiser {
    fn denoise(&self, x: &[C64], sigma: f64) -> Result<Vec<C64>> {
        Ok(self
            .posteriors(x, sigma)?
            .iter()
            .map(|p| p.iter().zip(self.constellation.points()).map(|(w, q)| q * *w).sum())
            .collect())
    }

    fn name(&self) -> &str {
        "mlp"
    }
}
