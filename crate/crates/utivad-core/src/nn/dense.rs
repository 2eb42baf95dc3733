use super::{glorot_uniform, Layer, Mode, Param, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected layer: `y = x · W + b` with `W: [n, m]`.
/// Activation is a separate layer.
pub struct Dense {
    name: String,
    weights: Param,
    bias: Param,
    n_in: usize,
    n_out: usize,
    input: Tensor,
}

impl Dense {
    pub fn new(name: impl Into<String>, n_in: usize, n_out: usize, rng: &mut Rng) -> Dense {
        let name = name.into();
        let weights = glorot_uniform(&[n_in, n_out], n_in, n_out, rng);
        Dense {
            weights: Param::new(format!("{name}.weight"), weights),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[n_out])),
            name,
            n_in,
            n_out,
            input: Tensor::zeros(&[1]),
        }
    }

    pub fn set_weights(&mut self, weights: Tensor, bias: Tensor) -> Result<()> {
        weights.expect_shape(&[self.n_in, self.n_out], "weights")?;
        bias.expect_shape(&[self.n_out], "bias")?;
        self.weights.value = weights;
        self.bias.value = bias;
        Ok(())
    }
}

impl Layer for Dense {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        if input_shape != [self.n_in] {
            return Err(Error::dimension(
                "length",
                format!(
                    "{}: expected input [{}], got {input_shape:?}",
                    self.name, self.n_in
                ),
            ));
        }
        Ok(vec![self.n_out])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        self.output_shape(input.shape())?;
        let mut out = Tensor::zeros(&[self.n_out]);
        let od = out.data_mut();
        od.copy_from_slice(self.bias.value.data());
        let wd = self.weights.value.data();
        for (i, &x) in input.data().iter().enumerate() {
            let row = &wd[i * self.n_out..(i + 1) * self.n_out];
            for (o, &wv) in od.iter_mut().zip(row) {
                *o += x * wv;
            }
        }
        self.input = input.clone();
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.expect_shape(&[self.n_out], "grad")?;
        let g = grad_out.data();
        for (dbv, &gv) in self.bias.grad.data_mut().iter_mut().zip(g) {
            *dbv += gv;
        }
        let mut grad_in = Tensor::zeros(&[self.n_in]);
        let wd = self.weights.value.data();
        let dw = self.weights.grad.data_mut();
        for (i, (&x, gi)) in self
            .input
            .data()
            .iter()
            .zip(grad_in.data_mut().iter_mut())
            .enumerate()
        {
            let row = &wd[i * self.n_out..(i + 1) * self.n_out];
            let drow = &mut dw[i * self.n_out..(i + 1) * self.n_out];
            let mut s = 0.0;
            for (co, &gv) in g.iter().enumerate() {
                drow[co] += x * gv;
                s += row[co] * gv;
            }
            *gi = s;
        }
        Ok(grad_in)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weights, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identity_weights_pass_input() {
        let mut rng = Rng::seed_from_u64(0);
        let mut d = Dense::new("d", 3, 3, &mut rng);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        d.set_weights(eye, Tensor::zeros(&[3])).unwrap();
        let x = Tensor::from_vec(&[3], vec![1.5, -2.0, 0.25]).unwrap();
        let y = d.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn hand_sum() {
        let mut rng = Rng::seed_from_u64(0);
        let mut d = Dense::new("d", 2, 1, &mut rng);
        d.set_weights(
            Tensor::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap(),
            Tensor::from_vec(&[1], vec![1.0]).unwrap(),
        )
        .unwrap();
        let y = d
            .forward(&Tensor::from_vec(&[2], vec![2.0, 3.0]).unwrap(), Mode::Infer, &mut rng)
            .unwrap();
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn random_matches_dot_product_oracle() {
        let mut rng = Rng::seed_from_u64(11);
        let mut d = Dense::new("d", 10, 4, &mut rng);
        let x = glorot_uniform(&[10], 1, 1, &mut rng);
        let y = d.forward(&x, Mode::Infer, &mut rng).unwrap();
        for o in 0..4 {
            let mut s = d.bias.value.data()[o];
            for i in 0..10 {
                s += x.data()[i] * d.weights.value.data()[i * 4 + o];
            }
            assert!((y.data()[o] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let mut rng = Rng::seed_from_u64(0);
        let mut d = Dense::new("d", 3, 2, &mut rng);
        let x = Tensor::zeros(&[4]);
        assert!(d.forward(&x, Mode::Infer, &mut rng).is_err());
    }
}
