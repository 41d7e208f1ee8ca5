//! Adam.

use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, net: &Network) -> Result<Self> {
        if !(cfg.lr > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be > 0, got {}", cfg.lr)));
        }
        let zeros: Vec<Vec<f64>> = (0..net.node_count()).map(|i| vec![0.0; net.params(i).len()]).collect();
        Ok(Self {
            cfg,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        })
    }

    /// One bias-corrected Adam step; parameters are then rounded to `f32`.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.cfg.beta1.powi(self.t);
        let c2 = 1.0 - self.cfg.beta2.powi(self.t);
        for (i, g) in grads.params.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for ((p, g), (m, v)) in net.params_mut(i).iter_mut().zip(g).zip(m.iter_mut().zip(v.iter_mut())) {
                *m = self.cfg.beta1 * *m + (1.0 - self.cfg.beta1) * g;
                *v = self.cfg.beta2 * *v + (1.0 - self.cfg.beta2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= self.cfg.lr * mh / (vh.sqrt() + self.cfg.eps);
            }
        }
        net.round_to_f32();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerKind, NetworkSpec};

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first step is lr·sign(g) (up to ε).
        let mut spec = NetworkSpec::new(vec![1]);
        spec.then(LayerKind::Dense { inputs: 1, outputs: 1 });
        let mut net = Network::new(spec, 0).unwrap();
        net.params_mut(0).copy_from_slice(&[0.5, 0.0]);
        let mut adam = Adam::new(AdamConfig { lr: 0.01, ..Default::default() }, &net).unwrap();
        let grads = Gradients {
            params: vec![vec![3.0, -0.2]],
            input: crate::nn::Tensor::zeros(vec![1, 1]),
        };
        adam.step(&mut net, &grads);
        assert!((net.params(0)[0] - 0.49).abs() < 1e-7);
        assert!((net.params(0)[1] - 0.01).abs() < 1e-7);
        assert!(Adam::new(AdamConfig { lr: 0.0, ..Default::default() }, &net).is_err());
    }
}
