//! Central finite-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LayerKind, Mode, Network, NetworkSpec, Tensor};
use crate::error::Result;

/// Outcome of one check: relative errors of parameter and input gradients,
/// `‖g_analytic − g_fd‖ / max(‖g_analytic‖, ‖g_fd‖)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub label: String,
    pub param_rel_err: f64,
    pub input_rel_err: f64,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.param_rel_err.max(self.input_rel_err)
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if n == 0.0 { 0.0 } else { d / n }
}

/// Compares backprop against central differences of `L = Σ c ⊙ f(x)` with a
/// fixed random `c`.
pub fn finite_difference(net: &Network, x: &Tensor, mode: Mode, step: f64, seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = net.forward(x, mode)?;
    let c: Vec<f64> = (0..out.data().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |n: &Network, t: &Tensor| -> Result<f64> {
        Ok(n.forward(t, mode)?.data().iter().zip(&c).map(|(a, b)| a * b).sum())
    };
    let cache = net.forward_cached(x, mode)?;
    let grads = net.backward(&cache, &Tensor::new(out.shape().to_vec(), c.clone())?)?;

    let mut fd_params = Vec::new();
    let mut probe = net.clone();
    for i in 0..net.node_count() {
        for j in 0..net.params(i).len() {
            let orig = net.params(i)[j];
            probe.params_mut(i)[j] = orig + step;
            let a = loss(&probe, x)?;
            probe.params_mut(i)[j] = orig - step;
            let b = loss(&probe, x)?;
            probe.params_mut(i)[j] = orig;
            fd_params.push((a - b) / (2.0 * step));
        }
    }
    let mut fd_input = Vec::with_capacity(x.data().len());
    let mut xp = x.clone();
    for j in 0..x.data().len() {
        let orig = x.data()[j];
        xp.data_mut()[j] = orig + step;
        let a = loss(net, &xp)?;
        xp.data_mut()[j] = orig - step;
        let b = loss(net, &xp)?;
        xp.data_mut()[j] = orig;
        fd_input.push((a - b) / (2.0 * step));
    }
    Ok(GradCheck {
        label: String::new(),
        param_rel_err: rel(&grads.flat(), &fd_params),
        input_rel_err: rel(grads.input.data(), &fd_input),
    })
}

fn random_input(shape: Vec<usize>, rng: &mut ChaCha8Rng, away_from_zero: bool) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(-1.0..1.0);
            if away_from_zero { v.signum() * (0.1 + v.abs()) } else { v }
        })
        .collect();
    Tensor::new(shape, data).expect("shape matches")
}

/// Checks every layer kind in isolation on small random shapes, batch
/// normalization in both modes, and a small composite graph.
pub fn layer_suite(seed: u64, step: f64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let single = |kind: LayerKind, shape: Vec<usize>| {
        let mut spec = NetworkSpec::new(shape);
        spec.then(kind);
        spec
    };
    let mut cases: Vec<(String, NetworkSpec, Mode, bool)> = vec![
        ("dense".into(), single(LayerKind::Dense { inputs: 4, outputs: 3 }, vec![4]), Mode::Eval, false),
        (
            "conv3x3".into(),
            single(LayerKind::Conv2d { in_channels: 2, out_channels: 3, kernel: 3 }, vec![2, 4, 5]),
            Mode::Eval,
            false,
        ),
        (
            "conv1x1".into(),
            single(LayerKind::Conv2d { in_channels: 3, out_channels: 2, kernel: 1 }, vec![3, 3, 4]),
            Mode::Eval,
            false,
        ),
        ("batchnorm-train".into(), single(LayerKind::BatchNorm2d { channels: 2 }, vec![2, 3, 3]), Mode::Train, false),
        ("batchnorm-eval".into(), single(LayerKind::BatchNorm2d { channels: 2 }, vec![2, 3, 3]), Mode::Eval, false),
        ("relu".into(), single(LayerKind::Relu, vec![6]), Mode::Eval, true),
        ("softmax".into(), single(LayerKind::Softmax, vec![5]), Mode::Eval, false),
        ("avgpool".into(), single(LayerKind::AvgPool2, vec![2, 3, 5]), Mode::Eval, false),
        ("upsample".into(), single(LayerKind::Upsample { height: 3, width: 5 }, vec![2, 2, 3]), Mode::Eval, false),
    ];
    let mut add = NetworkSpec::new(vec![2, 3, 3]);
    let a = add.then(LayerKind::Conv2d { in_channels: 2, out_channels: 2, kernel: 1 });
    add.push(LayerKind::Add, &[0, a]);
    cases.push(("add".into(), add, Mode::Eval, false));

    let mut composite = NetworkSpec::new(vec![2, 5, 7]);
    let c1 = composite.then(LayerKind::Conv2d { in_channels: 2, out_channels: 4, kernel: 3 });
    composite.then(LayerKind::BatchNorm2d { channels: 4 });
    composite.then(LayerKind::AvgPool2);
    composite.then(LayerKind::Conv2d { in_channels: 4, out_channels: 4, kernel: 3 });
    let u = composite.then(LayerKind::Upsample { height: 5, width: 7 });
    let s = composite.push(LayerKind::Add, &[c1, u]);
    composite.push(LayerKind::Conv2d { in_channels: 4, out_channels: 2, kernel: 1 }, &[s]);
    cases.push(("composite".into(), composite, Mode::Train, false));

    let mut out = Vec::new();
    for (label, spec, mode, away) in cases {
        let shape = spec.input_shape.clone();
        let mut net = Network::new(spec, rng.random())?;
        // nontrivial BN affine parameters
        for i in 0..net.node_count() {
            if matches!(net.spec().nodes[i].layer, LayerKind::BatchNorm2d { .. }) {
                for v in net.params_mut(i) {
                    *v += rng.random_range(-0.5..0.5);
                }
            }
        }
        let x = random_input([vec![3], shape].concat(), &mut rng, away);
        let mut r = finite_difference(&net, &x, mode, step, rng.random())?;
        r.label = label;
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_kind_passes() {
        let results = layer_suite(11, 1e-3).unwrap();
        assert_eq!(results.len(), 11);
        for r in &results {
            assert!(r.worst() < 1e-4, "{}: {:?}", r.label, r);
        }
    }

    #[test]
    fn dense_quadratic_gradient_is_analytic() {
        // L = ‖Wx − t‖² ⇒ ∂L/∂W = 2(Wx − t)xᵀ
        let mut spec = NetworkSpec::new(vec![2]);
        spec.then(LayerKind::Dense { inputs: 2, outputs: 2 });
        let mut net = Network::new(spec, 0).unwrap();
        net.params_mut(0).copy_from_slice(&[1.0, 2.0, -1.0, 0.5, 0.0, 0.0]);
        let x = Tensor::new(vec![1, 2], vec![0.3, -0.4]).unwrap();
        let t = [1.0, 0.0];
        let cache = net.forward_cached(&x, Mode::Eval).unwrap();
        let y = cache.output().data().to_vec();
        let gy: Vec<f64> = y.iter().zip(&t).map(|(a, b)| 2.0 * (a - b)).collect();
        let g = net.backward(&cache, &Tensor::new(vec![1, 2], gy.clone()).unwrap()).unwrap();
        let expected = [gy[0] * 0.3, gy[0] * -0.4, gy[1] * 0.3, gy[1] * -0.4, gy[0], gy[1]];
        for (a, b) in g.params[0].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
