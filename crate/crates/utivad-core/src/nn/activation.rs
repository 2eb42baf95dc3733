use super::{Layer, Mode, Rng};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Linear,
}

/// Numerically stable sigmoid: split form avoids exp overflow for |x| large.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise activation layer.
pub struct Activation {
    name: String,
    kind: ActivationKind,
    input: Tensor,
    output: Tensor,
}

impl Activation {
    pub fn new(name: impl Into<String>, kind: ActivationKind) -> Activation {
        Activation {
            name: name.into(),
            kind,
            input: Tensor::zeros(&[1]),
            output: Tensor::zeros(&[1]),
        }
    }
}

impl Layer for Activation {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        Ok(input_shape.to_vec())
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let out = match self.kind {
            ActivationKind::Relu => input.map(|v| v.max(0.0)),
            ActivationKind::Sigmoid => input.map(sigmoid),
            ActivationKind::Linear => input.clone(),
        };
        self.input = input.clone();
        self.output = out.clone();
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.expect_shape(self.output.shape(), "grad")?;
        let mut g = grad_out.clone();
        match self.kind {
            ActivationKind::Relu => {
                for (gv, &x) in g.data_mut().iter_mut().zip(self.input.data()) {
                    if x <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            ActivationKind::Sigmoid => {
                for (gv, &y) in g.data_mut().iter_mut().zip(self.output.data()) {
                    *gv *= y * (1.0 - y);
                }
            }
            ActivationKind::Linear => {}
        }
        Ok(g)
    }

    fn kink_margin(&self) -> f64 {
        match self.kind {
            ActivationKind::Relu => self
                .input
                .data()
                .iter()
                .map(|v| v.abs())
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn relu_clamps_negatives() {
        let mut rng = Rng::seed_from_u64(0);
        let mut a = Activation::new("relu", ActivationKind::Relu);
        let x = Tensor::from_vec(&[2], vec![-1.0, 2.0]).unwrap();
        let y = a.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        assert_eq!(sigmoid(0.0), 0.5);
        // Stable split form: no overflow, saturates to {1, 0} within 1e-15.
        assert!((sigmoid(40.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-40.0).abs() < 1e-15);
        assert!(sigmoid(750.0).is_finite());
        assert!(sigmoid(-750.0).is_finite());
    }

    #[test]
    fn sigmoid_backward_uses_output() {
        let mut rng = Rng::seed_from_u64(0);
        let mut a = Activation::new("sig", ActivationKind::Sigmoid);
        let x = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        a.forward(&x, Mode::Infer, &mut rng).unwrap();
        let g = a.backward(&Tensor::from_vec(&[1], vec![1.0]).unwrap()).unwrap();
        assert!((g.data()[0] - 0.25).abs() < 1e-15);
    }
}
