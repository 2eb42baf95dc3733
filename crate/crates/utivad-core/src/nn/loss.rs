use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Clamp bound for binary cross-entropy probabilities.
const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Bce,
    Mse,
}

impl LossKind {
    pub fn evaluate(&self, pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
        match self {
            LossKind::Bce => bce_loss(pred, target),
            LossKind::Mse => mse_loss(pred, target),
        }
    }
}

/// Mean binary cross-entropy with clamped probabilities. Targets must be
/// exactly 0 or 1. Returns the loss and its gradient w.r.t. `prob`.
pub fn bce_loss(prob: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    prob.expect_shape(target.shape(), "target")?;
    if target.data().iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::validation(
            "bce targets must be exactly 0 or 1".to_string(),
        ));
    }
    let n = prob.len() as f64;
    let mut grad = Tensor::zeros(prob.shape());
    let mut loss = 0.0;
    for ((&p, &t), g) in prob
        .data()
        .iter()
        .zip(target.data())
        .zip(grad.data_mut().iter_mut())
    {
        let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        // Zero gradient where the clamp is active: the clamped loss is
        // locally constant in p there.
        if p > BCE_EPS && p < 1.0 - BCE_EPS {
            *g = (pc - t) / (pc * (1.0 - pc)) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean squared error over all elements.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    pred.expect_shape(target.shape(), "target")?;
    let n = pred.len() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut loss = 0.0;
    for ((&p, &t), g) in pred
        .data()
        .iter()
        .zip(target.data())
        .zip(grad.data_mut().iter_mut())
    {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}
