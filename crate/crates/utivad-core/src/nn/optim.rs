use super::Param;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer state: learning rate, step counter and (for Adam) first/second
/// moment estimates per parameter. Moments are allocated on first use and
/// keyed by parameter order, which is fixed for a given model.
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    moments: Vec<(Tensor, Tensor)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Optimizer> {
        if learning_rate <= 0.0 {
            return Err(Error::validation(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            step: 0,
            moments: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. `scale` multiplies every gradient first (the
    /// training loop passes `1/batch_size` after summing per-sample grads).
    pub fn step(&mut self, params: &mut [&mut Param], scale: f64) -> Result<()> {
        for p in params.iter() {
            if !p.grad.data().iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
            }
        }
        if self.moments.is_empty() && self.kind == OptimizerKind::Adam {
            self.moments = params
                .iter()
                .map(|p| {
                    (
                        Tensor::zeros(p.value.shape()),
                        Tensor::zeros(p.value.shape()),
                    )
                })
                .collect();
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                let lr = self.learning_rate;
                for p in params.iter_mut() {
                    let grads = p.grad.data();
                    // Split borrow: value and grad are distinct fields.
                    for (v, &g) in p.value.data_mut().iter_mut().zip(grads.iter()) {
                        *v -= lr * g * scale;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.moments.len() != params.len() {
                    return Err(Error::validation(format!(
                        "optimizer state built for {} parameters, got {}",
                        self.moments.len(),
                        params.len()
                    )));
                }
                let lr = self.learning_rate;
                let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
                for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
                    let grads = p.grad.data();
                    for (((pv, &graw), mv), vv) in p
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(grads.iter())
                        .zip(m.data_mut().iter_mut())
                        .zip(v.data_mut().iter_mut())
                    {
                        let g = graw * scale;
                        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * g;
                        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = *mv / bc1;
                        let v_hat = *vv / bc2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(value: f64) -> Param {
        Param::new("p", Tensor::scalar(value))
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut opt = Optimizer::new(kind, 0.1).unwrap();
            let mut p = param(1.5);
            opt.step(&mut [&mut p], 1.0).unwrap();
            assert_eq!(p.value.data()[0], 1.5);
        }
    }

    #[test]
    fn sgd_single_step() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1).unwrap();
        let mut p = param(1.0);
        p.grad.data_mut()[0] = 1.0;
        opt.step(&mut [&mut p], 1.0).unwrap();
        assert!((p.value.data()[0] - 0.9).abs() < 1e-15);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // Bias correction makes the first update exactly lr/(1 + eps').
        let lr = 0.0002;
        let mut opt = Optimizer::new(OptimizerKind::Adam, lr).unwrap();
        let mut p = param(0.0);
        p.grad.data_mut()[0] = 1.0;
        opt.step(&mut [&mut p], 1.0).unwrap();
        assert!((p.value.data()[0] + lr).abs() < 1e-9);
    }

    #[test]
    fn nonfinite_gradient_names_parameter() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1).unwrap();
        let mut p = param(0.0);
        p.grad.data_mut()[0] = f64::NAN;
        let err = opt.step(&mut [&mut p], 1.0).unwrap_err();
        assert!(err.to_string().contains("`p`"));
    }

    #[test]
    fn step_counter_increments_once_per_update() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.001).unwrap();
        let mut p = param(0.0);
        for i in 1..=5 {
            p.grad.data_mut()[0] = 0.5;
            opt.step(&mut [&mut p], 1.0).unwrap();
            assert_eq!(opt.step_count(), i);
        }
    }
}
