//! Dense feed-forward classifier with a softmax head and exact backpropagation.
//!
//! A [`Network`] is a chain of affine layers, each followed by an element-wise
//! activation. The final layer's output is treated as class logits and passed
//! through a row-wise softmax. Weights are stored row-major with shape
//! `(out_dim, in_dim)`; batches are `(rows, in_dim)` matrices.
//!
//! Losses are always evaluated on probabilities (after softmax). The logits
//! are exposed through [`Network::forward_logits`] for tests that need an
//! affine model output.

mod checkpoint;
mod loss;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_HEADER,
};
pub use loss::{cross_entropy, mse, softmax_rows, LossSpec, LOG_CLAMP};

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::hash::Fnv64;
use crate::matrix::Matrix;

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

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Dense layer `activation(x W^T + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::Dimension(format!(
                "layer has {} weight rows but {} biases",
                weights.rows(),
                bias.len()
            )));
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Dimension("layer dimensions must be > 0".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Uniform init in `±limit`, biases zero.
    fn uniform<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        limit: f64,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite init limit");
        let data = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Self {
            weights: Matrix::new(out_dim, in_dim, data).expect("sized above"),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn pre_activation(&self, x: &Matrix) -> Matrix {
        let mut z = x.matmul_transposed(&self.weights);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }
}

/// Per-layer parameter gradients, shaped like the owning [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGradient>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// True when every buffer matches the corresponding layer of `net`.
    pub fn congruent_with(&self, net: &Network) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.shape() == l.weights.shape() && g.bias.len() == l.bias.len()
            })
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::Dimension(
                "gradient sets have different depth".into(),
            ));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights
                .ensure_same_shape(&b.weights, "gradient weights")?;
            for (x, y) in a
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(b.weights.as_slice())
            {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    /// Parameters in the same order as [`Network::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Index of the first layer holding a NaN or infinite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| !l.weights.is_finite() || l.bias.iter().any(|v| !v.is_finite()))
    }
}

/// Feed-forward classifier `softmax(layer_n(... layer_1(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Intermediate values of a forward pass, kept for backpropagation.
struct Trace {
    /// `inputs[k]` is the input to layer `k`; the last entry is the logits.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// ReLU MLP with an identity output layer.
    ///
    /// Hidden layers use He-uniform init (`±sqrt(6 / fan_in)`), the output layer
    /// Glorot-uniform (`±sqrt(6 / (fan_in + fan_out))`); all biases start at zero.
    pub fn mlp<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || classes < 2 || hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "mlp needs input_dim > 0, classes >= 2 and non-empty hidden layers \
                 (got {input_dim}, {classes}, {hidden:?})"
            )));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &h in hidden {
            let limit = (6.0 / fan_in as f64).sqrt();
            layers.push(Layer::uniform(fan_in, h, limit, Activation::Relu, rng));
            fan_in = h;
        }
        let limit = (6.0 / (fan_in + classes) as f64).sqrt();
        layers.push(Layer::uniform(
            fan_in,
            classes,
            limit,
            Activation::Identity,
            rng,
        ));
        Self::new(layers)
    }

    /// All-zero network with the given layer widths, ReLU between layers.
    pub fn zeros(dims: &[usize], hidden_activation: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Dimension(
                "need at least input and output widths".into(),
            ));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, d)| {
                let act = if k + 1 == n {
                    Activation::Identity
                } else {
                    hidden_activation
                };
                Layer::zeros(d[0], d[1], act)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.in_dim() * l.out_dim() + l.out_dim())
            .sum()
    }

    /// Same depth and per-layer shapes.
    pub fn same_shape(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.shape() == b.weights.shape())
    }

    pub(crate) fn ensure_same_shape(&self, other: &Network) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Dimension(
                "networks have different layer shapes".into(),
            ));
        }
        Ok(())
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut rest = values;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.as_slice().len());
            l.weights.as_mut_slice().copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Hash of the exact parameter bits.
    pub fn param_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        for l in &self.layers {
            h.write_u64(l.in_dim() as u64);
            h.write_u64(l.out_dim() as u64);
            h.write(l.activation.name().as_bytes());
        }
        for v in self.flat_params() {
            h.write_f64(v);
        }
        h.finish()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn trace(&self, x: &Matrix) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(x.clone());
        for layer in &self.layers {
            let z = layer.pre_activation(inputs.last().expect("non-empty"));
            let act = layer.activation;
            inputs.push(z.map(|v| act.apply(v)));
            pre.push(z);
        }
        Trace { inputs, pre }
    }

    pub fn forward_logits(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            let act = layer.activation;
            a = layer.pre_activation(&a).map(|v| act.apply(v));
        }
        Ok(a)
    }

    /// Class probabilities, one row per input row.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.forward_logits(x)?))
    }

    /// Loss value and its exact gradient with respect to every parameter.
    ///
    /// Targets are treated as constants.
    pub fn backward(&self, x: &Matrix, loss: &LossSpec<'_>) -> Result<(f64, GradientSet)> {
        self.check_input(x)?;
        let target = loss.target();
        if target.shape() != (x.rows(), self.num_classes()) {
            return Err(Error::Dimension(format!(
                "target is {}x{}, expected {}x{}",
                target.rows(),
                target.cols(),
                x.rows(),
                self.num_classes()
            )));
        }
        let trace = self.trace(x);
        let logits = trace.inputs.last().expect("non-empty");
        let probs = softmax_rows(logits);
        let value = loss.evaluate(&probs)?;
        let mut delta = loss.logit_gradient(&probs);

        let mut grads = GradientSet::zeros_like(self);
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let z = &trace.pre[k];
            let act = layer.activation;
            for (d, &zv) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d *= act.derivative(zv);
            }
            let g = &mut grads.layers[k];
            g.weights = delta.transposed_matmul(&trace.inputs[k]);
            for row in delta.iter_rows() {
                for (b, d) in g.bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if k > 0 {
                delta = delta.matmul(&layer.weights);
            }
        }
        Ok((value, grads))
    }
}
