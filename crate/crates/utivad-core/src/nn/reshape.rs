use super::{Layer, Mode, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Collapses any input to a rank-1 tensor.
pub struct Flatten {
    name: String,
    input_shape: Vec<usize>,
}

impl Flatten {
    pub fn new(name: impl Into<String>) -> Flatten {
        Flatten {
            name: name.into(),
            input_shape: Vec::new(),
        }
    }
}

impl Layer for Flatten {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input_shape.iter().product()])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        self.input_shape = input.shape().to_vec();
        input.reshaped(&[input.len()])
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.reshaped(&self.input_shape)
    }
}

/// Fixed-target reshape; used for the time-major `(T, features)` view
/// ahead of the recurrent layer.
pub struct Reshape {
    name: String,
    target: Vec<usize>,
    input_shape: Vec<usize>,
}

impl Reshape {
    pub fn new(name: impl Into<String>, target: &[usize]) -> Reshape {
        Reshape {
            name: name.into(),
            target: target.to_vec(),
            input_shape: Vec::new(),
        }
    }
}

impl Layer for Reshape {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let n: usize = input_shape.iter().product();
        let m: usize = self.target.iter().product();
        if n != m {
            return Err(Error::dimension(
                "shape",
                format!(
                    "{}: cannot reshape {input_shape:?} ({n}) to {:?} ({m})",
                    self.name, self.target
                ),
            ));
        }
        Ok(self.target.clone())
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        self.output_shape(input.shape())?;
        self.input_shape = input.shape().to_vec();
        input.reshaped(&self.target)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.reshaped(&self.input_shape)
    }
}
