//! Mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, LossKind, Target};
use super::optim::{Adam, AdamConfig};
use super::{Mode, Network, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Values(Tensor),
    Labels(Vec<usize>),
}

/// Inputs `[S, …]` with one target per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub targets: Targets,
}

impl Dataset {
    pub fn new(inputs: Tensor, targets: Targets) -> Result<Self> {
        let n = match &targets {
            Targets::Values(t) => t.batch(),
            Targets::Labels(l) => l.len(),
        };
        if n != inputs.batch() {
            return Err(Error::dim(format!("{} targets", inputs.batch()), n));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Batch made of the listed samples, plus owned targets.
    fn gather(&self, idx: &[usize]) -> Result<(Tensor, Gathered)> {
        let xs: Vec<&[f64]> = idx.iter().map(|&i| self.inputs.sample(i)).collect();
        let x = Tensor::from_samples(&self.inputs.shape()[1..], &xs)?;
        let t = match &self.targets {
            Targets::Values(t) => Gathered::Values(idx.iter().flat_map(|&i| t.sample(i).iter().copied()).collect()),
            Targets::Labels(l) => Gathered::Labels(idx.iter().map(|&i| l[i]).collect()),
        };
        Ok((x, t))
    }
}

enum Gathered {
    Values(Vec<f64>),
    Labels(Vec<usize>),
}

impl Gathered {
    fn as_target(&self) -> Target<'_> {
        match self {
            Gathered::Values(v) => Target::Values(v),
            Gathered::Labels(l) => Target::Labels(l),
        }
    }
}

/// Per-epoch loss curves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// Trains in place. Sample order is reshuffled every epoch from `cfg.seed`;
/// batch-norm layers use batch statistics and update their running
/// statistics.
pub fn train(net: &mut Network, data: &Dataset, val: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainReport> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    let mut adam = Adam::new(cfg.adam, net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, t) = data.gather(chunk)?;
            let cache = net.forward_cached(&x, Mode::Train)?;
            let (loss, g) = loss_and_grad(cfg.loss, cache.output(), t.as_target())?;
            if !loss.is_finite() {
                return Err(Error::Network(format!("non-finite training loss {loss}")));
            }
            let grads = net.backward(&cache, &g)?;
            net.absorb_batch_stats(&cache);
            adam.step(net, &grads);
            sum += loss * chunk.len() as f64;
        }
        report.train_loss.push(sum / data.len() as f64);
        if let Some(v) = val {
            report.val_loss.push(evaluate(net, v, cfg.loss, cfg.batch_size)?);
        }
    }
    Ok(report)
}

/// Mean loss in evaluation mode.
pub fn evaluate(net: &Network, data: &Dataset, loss: LossKind, batch_size: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut sum = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, t) = data.gather(chunk)?;
        let y = net.forward(&x, Mode::Eval)?;
        sum += loss_and_grad(loss, &y, t.as_target())?.0 * chunk.len() as f64;
    }
    Ok(sum / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerKind, NetworkSpec};

    fn mlp(seed: u64) -> Network {
        let mut spec = NetworkSpec::new(vec![2]);
        spec.then(LayerKind::Dense { inputs: 2, outputs: 32 });
        spec.then(LayerKind::Relu);
        spec.then(LayerKind::Dense { inputs: 32, outputs: 32 });
        spec.then(LayerKind::Relu);
        spec.then(LayerKind::Dense { inputs: 32, outputs: 1 });
        Network::new(spec, seed).unwrap()
    }

    fn four_points() -> Dataset {
        let x = Tensor::new(vec![4, 2], vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let t = Tensor::new(vec![4, 1], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        Dataset::new(x, Targets::Values(t)).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            adam: AdamConfig { lr: 1e-2, ..Default::default() },
            batch_size: 4,
            epochs,
            loss: LossKind::Mse,
            seed: 1,
        }
    }

    #[test]
    fn memorizes_four_points() {
        let mut net = mlp(3);
        let data = four_points();
        let r = train(&mut net, &data, None, &cfg(500)).unwrap();
        assert!(*r.train_loss.last().unwrap() < 1e-3, "{:?}", r.train_loss.last());
        assert!(evaluate(&net, &data, LossKind::Mse, 4).unwrap() < 1e-3);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = four_points();
        let mut a = mlp(5);
        let mut b = mlp(5);
        train(&mut a, &data, None, &cfg(20)).unwrap();
        train(&mut b, &data, None, &cfg(20)).unwrap();
        assert_eq!(a.state_vec(), b.state_vec());
        assert!(a.state_vec().iter().all(|v| *v == *v as f32 as f64));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut net = mlp(0);
        let mut c = cfg(1);
        c.batch_size = 0;
        assert!(train(&mut net, &four_points(), None, &c).is_err());
        let x = Tensor::zeros(vec![3, 2]);
        assert!(Dataset::new(x, Targets::Labels(vec![0, 1])).is_err());
    }
}
