//! Minimal deterministic neural-network engine.
//!
//! Layers operate on single samples (no batch axis); the training loop
//! accumulates gradients across a batch and applies one optimizer step.
//! Everything is `f64` internally and fully deterministic given a seed.

mod activation;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod lstm;
mod optim;
mod pool;
mod reshape;

pub use activation::{Activation, ActivationKind};
pub use conv::{Conv2d, Conv3d, Padding};
pub use dense::Dense;
pub use dropout::Dropout;
pub use gradcheck::{grad_check, grad_check_resampling, GradCheckReport};
pub use loss::{bce_loss, mse_loss, LossKind};
pub use lstm::BiLstm;
pub use optim::{Optimizer, OptimizerKind};
pub use pool::{MaxPool2d, MaxPool3d};
pub use reshape::{Flatten, Reshape};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used for init, dropout, shuffling and synthesis.
pub type Rng = ChaCha8Rng;

/// Forward-pass mode.
///
/// `Frozen` replays the stochastic state (dropout masks) captured by the
/// previous `Train` pass; gradient checking uses it so the perturbed and
/// unperturbed losses see identical masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
    Frozen,
}

/// One trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Param {
        let grad = Tensor::zeros(value.shape());
        Param {
            name: name.into(),
            value,
            grad,
        }
    }
}

pub trait Layer {
    fn name(&self) -> &str;

    /// Shape algebra without running the layer.
    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>>;

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor>;

    /// Gradient w.r.t. the layer input; parameter gradients are accumulated
    /// into each `Param::grad`.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// Distance of the last forward pass from the nearest non-differentiable
    /// point (relu zero crossing, maxpool tie). Smooth layers report infinity.
    fn kink_margin(&self) -> f64 {
        f64::INFINITY
    }
}

/// Glorot-uniform initialization over `[-limit, limit]`,
/// `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-limit..=limit);
    }
    t
}

/// A straight pipeline of layers with a fixed input shape.
pub struct Sequential {
    layers: Vec<Box<dyn Layer>>,
    input_shape: Vec<usize>,
}

impl Sequential {
    pub fn new(input_shape: &[usize]) -> Sequential {
        Sequential {
            layers: Vec::new(),
            input_shape: input_shape.to_vec(),
        }
    }

    pub fn push(&mut self, layer: Box<dyn Layer>) {
        self.layers.push(layer);
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.layers
    }

    /// Output shape of the whole stack; also validates parameter-name
    /// uniqueness, so builders call it once as a construction check.
    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut names = std::collections::HashSet::new();
        for p in self.params() {
            if !names.insert(p.name.clone()) {
                return Err(Error::validation(format!(
                    "duplicate parameter name `{}`",
                    p.name
                )));
            }
        }
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
        }
        Ok(shape)
    }

    /// Shape after `n` layers; used to assert internal shapes at build time.
    pub fn shape_after(&self, n: usize) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for layer in self.layers.iter().take(n) {
            shape = layer.output_shape(&shape)?;
        }
        Ok(shape)
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        input.ensure_finite("model input")?;
        input.expect_shape(&self.input_shape, "input")?;
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, rng)?;
            x.ensure_finite(layer.name())?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn min_kink_margin(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.kink_margin())
            .fold(f64::INFINITY, f64::min)
    }

    /// Copies of all parameter values, for early-stopping snapshots.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params().iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor]) {
        let mut params = self.params_mut();
        assert_eq!(params.len(), snapshot.len(), "snapshot arity mismatch");
        for (p, s) in params.iter_mut().zip(snapshot) {
            p.value = s.clone();
        }
    }
}
