//! A small reverse-mode network toolkit: dense and 3×3/1×1 convolution
//! layers, batch normalization, ReLU, softmax, residual additions, 2× pooling
//! and upsampling, wired as a DAG of nodes.
//!
//! Computation runs in `f64`. Parameters are kept representable in `f32`
//! (see [`Network::round_to_f32`]) so saved weights reload bit-exactly.

mod layers;
pub mod check;
pub mod loss;
pub mod optim;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use layers::{BnCache, ConvGeom};

/// Dense row-major array; the leading axis is the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!("{n} elements for shape {shape:?}"), data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    /// Stacks equally shaped samples into a batch.
    pub fn from_samples(sample_shape: &[usize], samples: &[&[f64]]) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        let mut data = Vec::with_capacity(per * samples.len());
        for s in samples {
            if s.len() != per {
                return Err(Error::dim(per, s.len()));
            }
            data.extend_from_slice(s);
        }
        let mut shape = vec![samples.len()];
        shape.extend_from_slice(sample_shape);
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    /// Same-padded convolution, `kernel` ∈ {1, 3}.
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize },
    BatchNorm2d { channels: usize },
    Relu,
    Softmax,
    /// Elementwise sum of two inputs (residual/skip joint).
    Add,
    /// 2×2 average pooling, ceil mode.
    AvgPool2,
    /// Nearest 2× upsampling cropped to the given size.
    Upsample { height: usize, width: usize },
}

impl LayerKind {
    fn arity(&self) -> usize {
        if matches!(self, LayerKind::Add) { 2 } else { 1 }
    }

    fn param_len(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, outputs } => outputs * inputs + outputs,
            LayerKind::Conv2d { in_channels, out_channels, kernel } => {
                out_channels * in_channels * kernel * kernel + out_channels
            }
            LayerKind::BatchNorm2d { channels } => 2 * channels,
            _ => 0,
        }
    }

    /// Stable short name, used by the gradient-check report.
    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv2d { kernel: 1, .. } => "conv1x1",
            LayerKind::Conv2d { .. } => "conv3x3",
            LayerKind::BatchNorm2d { .. } => "batchnorm",
            LayerKind::Relu => "relu",
            LayerKind::Softmax => "softmax",
            LayerKind::Add => "add",
            LayerKind::AvgPool2 => "avgpool",
            LayerKind::Upsample { .. } => "upsample",
        }
    }
}

/// One node: a layer applied to earlier values. Value 0 is the network
/// input; node `i` produces value `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub layer: LayerKind,
    pub inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Per-sample input shape, e.g. `[2, H, W]` or `[F]`.
    pub input_shape: Vec<usize>,
    pub nodes: Vec<NodeSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>) -> Self {
        Self { input_shape, nodes: Vec::new() }
    }

    /// Appends a node and returns the index of the value it produces.
    pub fn push(&mut self, layer: LayerKind, inputs: &[usize]) -> usize {
        self.nodes.push(NodeSpec { layer, inputs: inputs.to_vec() });
        self.nodes.len()
    }

    /// Appends a node fed by the most recent value.
    pub fn then(&mut self, layer: LayerKind) -> usize {
        let last = self.nodes.len();
        self.push(layer, &[last])
    }

    /// Per-sample shape of every value, validating compatibility.
    pub fn infer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let bad = |i: usize, msg: String| Err(Error::Network(format!("node {i}: {msg}")));
        let mut shapes = vec![self.input_shape.clone()];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.inputs.len() != node.layer.arity() {
                return bad(i, format!("expects {} inputs, got {}", node.layer.arity(), node.inputs.len()));
            }
            if node.inputs.iter().any(|&v| v > i) {
                return bad(i, "input refers to a later node".into());
            }
            let s = shapes[node.inputs[0]].clone();
            let out = match node.layer {
                LayerKind::Dense { inputs, outputs } => {
                    if s.iter().product::<usize>() != inputs {
                        return bad(i, format!("dense expects {inputs} features, got {s:?}"));
                    }
                    vec![outputs]
                }
                LayerKind::Conv2d { in_channels, out_channels, kernel } => {
                    if s.len() != 3 || s[0] != in_channels {
                        return bad(i, format!("conv expects [{in_channels}, H, W], got {s:?}"));
                    }
                    if kernel != 1 && kernel != 3 {
                        return bad(i, format!("unsupported kernel size {kernel}"));
                    }
                    vec![out_channels, s[1], s[2]]
                }
                LayerKind::BatchNorm2d { channels } => {
                    if s.len() != 3 || s[0] != channels {
                        return bad(i, format!("batchnorm expects [{channels}, H, W], got {s:?}"));
                    }
                    s
                }
                LayerKind::Relu => s,
                LayerKind::Softmax => {
                    if s.len() != 1 {
                        return bad(i, format!("softmax expects a flat input, got {s:?}"));
                    }
                    s
                }
                LayerKind::Add => {
                    if shapes[node.inputs[1]] != s {
                        return bad(i, format!("add of {s:?} and {:?}", shapes[node.inputs[1]]));
                    }
                    s
                }
                LayerKind::AvgPool2 => {
                    if s.len() != 3 {
                        return bad(i, format!("pooling expects [C, H, W], got {s:?}"));
                    }
                    vec![s[0], s[1].div_ceil(2), s[2].div_ceil(2)]
                }
                LayerKind::Upsample { height, width } => {
                    if s.len() != 3 || height.div_ceil(2) != s[1] || width.div_ceil(2) != s[2] {
                        return bad(i, format!("cannot upsample {s:?} to {height}x{width}"));
                    }
                    vec![s[0], height, width]
                }
            };
            shapes.push(out);
        }
        if self.nodes.is_empty() {
            return Err(Error::Network("network has no layers".into()));
        }
        Ok(shapes)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    kind: LayerKind,
    params: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

/// Batch normalization uses batch statistics in `Train` and running
/// statistics in `Eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Everything a backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    values: Vec<Tensor>,
    bn: Vec<Option<BnCache>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        self.values.last().expect("at least the input value")
    }

    pub fn into_output(mut self) -> Tensor {
        self.values.pop().expect("at least the input value")
    }
}

/// Parameter gradients per node plus the gradient w.r.t. the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<Vec<f64>>,
    pub input: Tensor,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.params.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Vec<usize>>,
    layers: Vec<Layer>,
}

/// Weights drawn `U[−a, a]` with `a = √(6/fan_in)`.
pub const INIT_GAIN: f64 = 6.0;

impl Network {
    /// Builds the network with seeded fan-in uniform initialization (biases
    /// and BN shifts 0, BN scales 1).
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let shapes = spec.infer_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .nodes
            .iter()
            .map(|node| {
                let kind = node.layer;
                let mut params = vec![0.0; kind.param_len()];
                let (mut running_mean, mut running_var) = (Vec::new(), Vec::new());
                match kind {
                    LayerKind::Dense { inputs, outputs } => {
                        let a = (INIT_GAIN / inputs as f64).sqrt();
                        for p in &mut params[..inputs * outputs] {
                            *p = rng.random_range(-a..a) as f32 as f64;
                        }
                    }
                    LayerKind::Conv2d { in_channels, out_channels, kernel } => {
                        let fan_in = in_channels * kernel * kernel;
                        let a = (INIT_GAIN / fan_in as f64).sqrt();
                        for p in &mut params[..out_channels * fan_in] {
                            *p = rng.random_range(-a..a) as f32 as f64;
                        }
                    }
                    LayerKind::BatchNorm2d { channels } => {
                        params[..channels].iter_mut().for_each(|p| *p = 1.0);
                        running_mean = vec![0.0; channels];
                        running_var = vec![1.0; channels];
                    }
                    _ => {}
                }
                Layer { kind, params, running_mean, running_var }
            })
            .collect();
        Ok(Self { spec, shapes, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.spec.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("validated")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    /// Trainable parameters of node `i`.
    pub fn params(&self, i: usize) -> &[f64] {
        &self.layers[i].params
    }

    pub fn params_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.layers[i].params
    }

    pub fn node_count(&self) -> usize {
        self.layers.len()
    }

    pub fn zero_params(&mut self) {
        for l in &mut self.layers {
            l.params.iter_mut().for_each(|p| *p = 0.0);
        }
    }

    /// Rounds every parameter and running statistic to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for l in &mut self.layers {
            for v in l.params.iter_mut().chain(&mut l.running_mean).chain(&mut l.running_var) {
                *v = *v as f32 as f64;
            }
        }
    }

    /// All stored numbers in a fixed order: per node, parameters then BN
    /// running mean and variance.
    pub fn state_vec(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params.iter().chain(&l.running_mean).chain(&l.running_var).copied())
            .collect()
    }

    pub fn state_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.params.len() + l.running_mean.len() + l.running_var.len())
            .sum()
    }

    pub fn load_state_vec(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.state_len() {
            return Err(Error::Network(format!(
                "state vector has {} values, network needs {}",
                v.len(),
                self.state_len()
            )));
        }
        let mut it = v.iter().copied();
        for l in &mut self.layers {
            for p in l.params.iter_mut().chain(&mut l.running_mean).chain(&mut l.running_var) {
                *p = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != self.spec.input_shape.len() + 1 || x.shape()[1..] != self.spec.input_shape[..] {
            return Err(Error::dim(
                format!("[B, {:?}]", self.spec.input_shape),
                format!("{:?}", x.shape()),
            ));
        }
        if x.batch() == 0 {
            return Err(Error::Network("empty batch".into()));
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate value.
    pub fn forward_cached(&self, x: &Tensor, mode: Mode) -> Result<ForwardCache> {
        self.check_input(x)?;
        let batch = x.batch();
        let mut values = vec![x.clone()];
        let mut bn = Vec::with_capacity(self.layers.len());
        for (i, (node, layer)) in self.spec.nodes.iter().zip(&self.layers).enumerate() {
            let input = &values[node.inputs[0]];
            let s = &self.shapes[node.inputs[0]];
            let mut bn_cache = None;
            let data = match layer.kind {
                LayerKind::Dense { inputs, outputs } => {
                    let (w, b) = layer.params.split_at(inputs * outputs);
                    layers::dense_forward(input.data(), w, b, batch, inputs, outputs)
                }
                LayerKind::Conv2d { in_channels, out_channels, kernel } => {
                    let (w, b) = layer.params.split_at(out_channels * in_channels * kernel * kernel);
                    let g = ConvGeom { batch, cin: in_channels, cout: out_channels, h: s[1], w: s[2], k: kernel };
                    layers::conv_forward(input.data(), w, b, g)
                }
                LayerKind::BatchNorm2d { channels } => {
                    let (gamma, beta) = layer.params.split_at(channels);
                    let (y, c) = layers::bn_forward(
                        input.data(),
                        gamma,
                        beta,
                        &layer.running_mean,
                        &layer.running_var,
                        batch,
                        channels,
                        s[1] * s[2],
                        mode == Mode::Train,
                    );
                    bn_cache = Some(c);
                    y
                }
                LayerKind::Relu => input.data().iter().map(|v| v.max(0.0)).collect(),
                LayerKind::Softmax => layers::softmax_forward(input.data(), batch, s[0]),
                LayerKind::Add => {
                    let other = &values[node.inputs[1]];
                    input.data().iter().zip(other.data()).map(|(a, b)| a + b).collect()
                }
                LayerKind::AvgPool2 => layers::pool_forward(input.data(), batch * s[0], s[1], s[2]),
                LayerKind::Upsample { height, width } => {
                    layers::upsample_forward(input.data(), batch * s[0], s[1], s[2], height, width)
                }
            };
            let mut shape = vec![batch];
            shape.extend_from_slice(&self.shapes[i + 1]);
            values.push(Tensor { shape, data });
            bn.push(bn_cache);
        }
        Ok(ForwardCache { values, bn })
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        Ok(self.forward_cached(x, mode)?.into_output())
    }

    /// Reverse pass from `grad_out = ∂L/∂output`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Tensor) -> Result<Gradients> {
        if cache.values.len() != self.layers.len() + 1 {
            return Err(Error::Network("forward cache does not belong to this network".into()));
        }
        if grad_out.shape() != cache.output().shape() {
            return Err(Error::dim(format!("{:?}", cache.output().shape()), format!("{:?}", grad_out.shape())));
        }
        let batch = grad_out.batch();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; cache.values.len()];
        *grads.last_mut().expect("nonempty") = Some(grad_out.data().to_vec());
        let mut pgrads = vec![Vec::new(); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let Some(gy) = grads[i + 1].take() else {
                pgrads[i] = vec![0.0; self.layers[i].params.len()];
                continue;
            };
            let node = &self.spec.nodes[i];
            let layer = &self.layers[i];
            let x = &cache.values[node.inputs[0]];
            let s = &self.shapes[node.inputs[0]];
            let mut extra = None;
            let dx = match layer.kind {
                LayerKind::Dense { inputs, outputs } => {
                    let w = &layer.params[..inputs * outputs];
                    let (dx, dw, db) = layers::dense_backward(x.data(), w, &gy, batch, inputs, outputs);
                    pgrads[i] = [dw, db].concat();
                    dx
                }
                LayerKind::Conv2d { in_channels, out_channels, kernel } => {
                    let w = &layer.params[..out_channels * in_channels * kernel * kernel];
                    let g = ConvGeom { batch, cin: in_channels, cout: out_channels, h: s[1], w: s[2], k: kernel };
                    let (dx, dw, db) = layers::conv_backward(x.data(), w, &gy, g);
                    pgrads[i] = [dw, db].concat();
                    dx
                }
                LayerKind::BatchNorm2d { channels } => {
                    let c = cache.bn[i].as_ref().expect("batchnorm forward stores its cache");
                    let (dx, dg, db) = layers::bn_backward(&gy, &layer.params[..channels], c, batch, channels, s[1] * s[2]);
                    pgrads[i] = [dg, db].concat();
                    dx
                }
                LayerKind::Relu => x.data().iter().zip(&gy).map(|(v, g)| if *v > 0.0 { *g } else { 0.0 }).collect(),
                LayerKind::Softmax => layers::softmax_backward(cache.values[i + 1].data(), &gy, batch, s[0]),
                LayerKind::Add => {
                    extra = Some((node.inputs[1], gy.clone()));
                    gy
                }
                LayerKind::AvgPool2 => layers::pool_backward(&gy, batch * s[0], s[1], s[2]),
                LayerKind::Upsample { height, width } => {
                    layers::upsample_backward(&gy, batch * s[0], s[1], s[2], height, width)
                }
            };
            accumulate(&mut grads[node.inputs[0]], dx);
            if let Some((j, g)) = extra {
                accumulate(&mut grads[j], g);
            }
        }
        let input = Tensor {
            shape: cache.values[0].shape().to_vec(),
            data: grads[0].take().unwrap_or_else(|| vec![0.0; cache.values[0].data().len()]),
        };
        Ok(Gradients { params: pgrads, input })
    }

    /// Exponential-moving-average update of BN running statistics from a
    /// training-mode forward pass (unbiased variance).
    pub fn absorb_batch_stats(&mut self, cache: &ForwardCache) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let Some(c) = cache.bn.get(i).and_then(|c| c.as_ref()) else { continue };
            if !c.batch_stats {
                continue;
            }
            let s = &self.shapes[self.spec.nodes[i].inputs[0]];
            let n = (cache.values[0].batch() * s[1] * s[2]) as f64;
            let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
            for ch in 0..layer.running_mean.len() {
                layer.running_mean[ch] =
                    (1.0 - layers::BN_MOMENTUM) * layer.running_mean[ch] + layers::BN_MOMENTUM * c.mean[ch];
                layer.running_var[ch] =
                    (1.0 - layers::BN_MOMENTUM) * layer.running_var[ch] + layers::BN_MOMENTUM * c.var[ch] * unbias;
            }
        }
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dense() {
        let mut spec = NetworkSpec::new(vec![3]);
        spec.then(LayerKind::Dense { inputs: 3, outputs: 3 });
        let mut net = Network::new(spec, 0).unwrap();
        let p = net.params_mut(0);
        p.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..3 {
            p[i * 3 + i] = 1.0;
        }
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0]).unwrap();
        assert_eq!(net.forward(&x, Mode::Eval).unwrap(), x);
    }

    #[test]
    fn relu_and_softmax_values() {
        let mut spec = NetworkSpec::new(vec![2]);
        spec.then(LayerKind::Relu);
        let net = Network::new(spec, 0).unwrap();
        let y = net.forward(&Tensor::new(vec![1, 2], vec![-1.0, 2.0]).unwrap(), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);

        let mut spec = NetworkSpec::new(vec![4]);
        spec.then(LayerKind::Softmax);
        let net = Network::new(spec, 0).unwrap();
        let y = net.forward(&Tensor::zeros(vec![1, 4]), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[0.25; 4]);
    }

    #[test]
    fn shape_errors() {
        let mut spec = NetworkSpec::new(vec![2, 4, 4]);
        spec.then(LayerKind::Dense { inputs: 5, outputs: 1 });
        assert!(matches!(Network::new(spec, 0), Err(Error::Network(_))));
        let mut spec = NetworkSpec::new(vec![2, 4, 4]);
        let a = spec.then(LayerKind::Conv2d { in_channels: 2, out_channels: 3, kernel: 3 });
        spec.push(LayerKind::Add, &[0, a]);
        assert!(Network::new(spec, 0).is_err());
        let mut spec = NetworkSpec::new(vec![3]);
        spec.then(LayerKind::Relu);
        let net = Network::new(spec, 0).unwrap();
        assert!(net.forward(&Tensor::zeros(vec![1, 4]), Mode::Eval).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let mut spec = NetworkSpec::new(vec![2, 3, 3]);
        spec.then(LayerKind::Conv2d { in_channels: 2, out_channels: 2, kernel: 3 });
        spec.then(LayerKind::BatchNorm2d { channels: 2 });
        let net = Network::new(spec, 3).unwrap();
        let x = Tensor::new(vec![2, 2, 3, 3], (0..36).map(|v| (v as f64).sin()).collect()).unwrap();
        let cache = net.forward_cached(&x, Mode::Train).unwrap();
        let g = net.backward(&cache, &Tensor::zeros(cache.output().shape().to_vec())).unwrap();
        assert!(g.flat().iter().all(|v| *v == 0.0));
        assert!(g.input.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn batchnorm_eval_is_affine() {
        let mut spec = NetworkSpec::new(vec![2, 2, 2]);
        spec.then(LayerKind::BatchNorm2d { channels: 2 });
        let mut net = Network::new(spec, 0).unwrap();
        let x = Tensor::new(vec![3, 2, 2, 2], (0..24).map(|v| (v as f64 * 0.7).cos() * 3.0).collect()).unwrap();
        let c = net.forward_cached(&x, Mode::Train).unwrap();
        net.absorb_batch_stats(&c);
        net.params_mut(0).copy_from_slice(&[1.5, -0.5, 0.2, 0.3]);
        let f = |t: &Tensor| net.forward(t, Mode::Eval).unwrap();
        let zero = f(&Tensor::zeros(vec![3, 2, 2, 2]));
        let y1 = f(&x);
        let mut x2 = x.clone();
        x2.data_mut().iter_mut().for_each(|v| *v *= 2.5);
        let y2 = f(&x2);
        for ((a, b), z) in y1.data().iter().zip(y2.data()).zip(zero.data()) {
            // f(αx) − f(0) = α(f(x) − f(0))
            assert!(((b - z) - 2.5 * (a - z)).abs() < 1e-12);
        }
    }

    #[test]
    fn state_roundtrip() {
        let mut spec = NetworkSpec::new(vec![2, 2, 2]);
        spec.then(LayerKind::Conv2d { in_channels: 2, out_channels: 2, kernel: 1 });
        spec.then(LayerKind::BatchNorm2d { channels: 2 });
        let a = Network::new(spec.clone(), 1).unwrap();
        let mut b = Network::new(spec, 2).unwrap();
        assert_ne!(a, b);
        b.load_state_vec(&a.state_vec()).unwrap();
        assert_eq!(a, b);
        assert!(b.load_state_vec(&[0.0]).is_err());
    }
}
