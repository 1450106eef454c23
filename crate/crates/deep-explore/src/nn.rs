//! Minimal dense-network numerics: forward pass with cached activations,
//! exact reverse-mode gradients, Glorot initialization, and sgd/adam updates.
//!
//! Everything is `f64` and value-semantic. Networks are small fixed-topology
//! stacks of affine layers with rectified-linear hidden activations and an
//! identity output layer, which is all the value functions here need.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative recovered from the post-activation value.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer. Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// An affine-then-activation stack. Hidden layers are rectified-linear, the
/// output layer is identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Activations recorded by a forward pass: `activations[0]` is the input and
/// `activations[k]` the post-activation output of layer `k`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds the input")
    }

    pub fn scalar_output(&self) -> f64 {
        self.output()[0]
    }

    /// Post-activation output of the last hidden layer (the layer feeding the
    /// output layer). For a single-layer net this is the input itself.
    pub fn last_hidden(&self) -> &[f64] {
        &self.activations[self.activations.len() - 2]
    }
}

/// Per-layer gradients, shape-congruent with the [`DenseNet`] they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    d_weights: vec![0.0; l.weights.len()],
                    d_bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.layers.len(), other.layers.len(), "gradient layer count");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.d_weights.iter_mut().zip(&b.d_weights) {
                *x += y;
            }
            for (x, y) in a.d_bias.iter_mut().zip(&b.d_bias) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for x in &mut l.d_weights {
                *x *= factor;
            }
            for x in &mut l.d_bias {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.d_weights.iter().chain(&l.d_bias).all(|x| x.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.d_weights.iter().chain(&l.d_bias))
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::config(format!(
            "need at least an input and an output size, got {:?}",
            layer_sizes
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::config(format!(
            "layer sizes must be positive, got {:?}",
            layer_sizes
        )));
    }
    Ok(())
}

impl DenseNet {
    /// Glorot-uniform initialization: weights drawn from
    /// `U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`
    /// (variance `2/(fan_in+fan_out)`), biases zero.
    pub fn glorot<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let n = layer_sizes.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for k in 0..n {
            let (fan_in, fan_out) = (layer_sizes[k], layer_sizes[k + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::config(format!("glorot range: {e}")))?;
            let weights = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
            layers.push(Layer {
                weights,
                bias: vec![0.0; fan_out],
                in_dim: fan_in,
                out_dim: fan_out,
                activation: if k + 1 == n { Activation::Identity } else { Activation::Relu },
            });
        }
        Ok(DenseNet { layers })
    }

    /// All-zero parameters with the same activation pattern as [`DenseNet::glorot`].
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let n = layer_sizes.len() - 1;
        let layers = (0..n)
            .map(|k| Layer {
                weights: vec![0.0; layer_sizes[k] * layer_sizes[k + 1]],
                bias: vec![0.0; layer_sizes[k + 1]],
                in_dim: layer_sizes[k],
                out_dim: layer_sizes[k + 1],
                activation: if k + 1 == n { Activation::Identity } else { Activation::Relu },
            })
            .collect();
        Ok(DenseNet { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a network needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::shape(format!(
                    "adjacent layers do not chain: {} -> {}",
                    w[0].out_dim, w[1].in_dim
                )));
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::shape("layer parameter lengths do not match dims"));
            }
        }
        Ok(DenseNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    /// Width of the representation feeding the output layer.
    pub fn last_hidden_dim(&self) -> usize {
        self.layers.last().expect("non-empty").in_dim
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Order-stable hash of all parameter bits; used for freeze and staleness checks.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for l in &self.layers {
            l.in_dim.hash(&mut h);
            l.out_dim.hash(&mut h);
            for w in l.weights.iter().chain(&l.bias) {
                w.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Forward pass, recording every activation for a later backward pass.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input length {} does not match input dim {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let prev = activations.last().expect("non-empty");
            let mut out = Vec::with_capacity(layer.out_dim);
            for o in 0..layer.out_dim {
                let row = o * layer.in_dim;
                let mut sum = layer.bias[o];
                for (i, &xi) in prev.iter().enumerate() {
                    sum += layer.weights[row + i] * xi;
                }
                out.push(layer.activation.apply(sum));
            }
            activations.push(out);
        }
        Ok(ForwardCache { activations })
    }

    /// Scalar-output convenience wrapper around [`DenseNet::forward`].
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let cache = self.forward(x)?;
        if self.output_dim() != 1 {
            return Err(Error::shape(format!(
                "value() needs a scalar output, net has {}",
                self.output_dim()
            )));
        }
        Ok(cache.scalar_output())
    }

    /// Reverse-mode gradients of `output . upstream` with respect to every
    /// parameter, plus the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        self.backward_injected(cache, upstream, &[])
    }

    /// [`DenseNet::backward`] with extra gradient contributions injected at
    /// intermediate activations: each `(k, g)` adds `g` to the gradient
    /// arriving at the output of layer `k` (1-based over layers, so `k = 0`
    /// would be the input). Used to route gradients into a hidden
    /// representation that feeds another network.
    pub fn backward_injected(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        injections: &[(usize, &[f64])],
    ) -> Result<(Gradients, Vec<f64>)> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::usage(
                "forward cache does not correspond to this network (layer count)",
            ));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if cache.activations[k].len() != layer.in_dim
                || cache.activations[k + 1].len() != layer.out_dim
            {
                return Err(Error::usage(
                    "forward cache does not correspond to this network (activation shape)",
                ));
            }
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "upstream length {} does not match output dim {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        for (k, g) in injections {
            if *k == 0 || *k > self.layers.len() {
                return Err(Error::usage(format!("injection layer {k} out of range")));
            }
            if g.len() != self.layers[k - 1].out_dim {
                return Err(Error::shape("injection gradient length mismatch"));
            }
        }

        let mut grads = Gradients::zeros_like(self);
        let mut d_out = upstream.to_vec();
        for k in (0..self.layers.len()).rev() {
            for (at, g) in injections {
                if *at == k + 1 {
                    for (d, gi) in d_out.iter_mut().zip(*g) {
                        *d += gi;
                    }
                }
            }
            let layer = &self.layers[k];
            let inputs = &cache.activations[k];
            let outputs = &cache.activations[k + 1];
            let mut d_in = vec![0.0; layer.in_dim];
            let lg = &mut grads.layers[k];
            for o in 0..layer.out_dim {
                let d_z = d_out[o] * layer.activation.grad_from_output(outputs[o]);
                lg.d_bias[o] = d_z;
                let row = o * layer.in_dim;
                for i in 0..layer.in_dim {
                    lg.d_weights[row + i] = d_z * inputs[i];
                    d_in[i] += layer.weights[row + i] * d_z;
                }
            }
            d_out = d_in;
        }
        Ok((grads, d_out))
    }
}

/// Gradient-descent flavors for a single parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer state bound to one [`DenseNet`]-shaped parameter set.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    moments: Option<AdamMoments>,
}

#[derive(Debug, Clone)]
struct AdamMoments {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Optimizer { kind, learning_rate, moments: None })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Applies one update in place. Adam keeps bias-corrected first and second
    /// moments per parameter; moment arrays are allocated lazily to match the
    /// first net seen and must stay shape-congruent afterwards.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len()
            || grads
                .layers
                .iter()
                .zip(net.layers())
                .any(|(g, l)| g.d_weights.len() != l.weights.len() || g.d_bias.len() != l.bias.len())
        {
            return Err(Error::shape("gradients not congruent with parameters"));
        }
        if !grads.is_finite() {
            return Err(Error::numeric("non-finite gradient in optimizer step"));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
                    for (p, d) in layer.weights.iter_mut().zip(&g.d_weights) {
                        *p -= self.learning_rate * d;
                    }
                    for (p, d) in layer.bias.iter_mut().zip(&g.d_bias) {
                        *p -= self.learning_rate * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let flat_len: Vec<usize> = grads
                    .layers
                    .iter()
                    .map(|g| g.d_weights.len() + g.d_bias.len())
                    .collect();
                let moments = self.moments.get_or_insert_with(|| AdamMoments {
                    m: flat_len.iter().map(|&n| vec![0.0; n]).collect(),
                    v: flat_len.iter().map(|&n| vec![0.0; n]).collect(),
                    step: 0,
                });
                if moments.m.len() != grads.layers.len()
                    || moments.m.iter().zip(&flat_len).any(|(m, &n)| m.len() != n)
                {
                    return Err(Error::shape("adam moments not congruent with gradients"));
                }
                moments.step += 1;
                let t = moments.step as i32;
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                for (k, (layer, g)) in net.layers_mut().iter_mut().zip(&grads.layers).enumerate() {
                    let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                    let grads_flat = g.d_weights.iter().chain(g.d_bias.iter());
                    for (j, (p, &d)) in params.zip(grads_flat).enumerate() {
                        let m = &mut moments.m[k][j];
                        let v = &mut moments.v[k][j];
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * d;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * d * d;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *p -= self.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}
