use super::{Layer, Mode, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::Rng as _;

/// Inverted dropout: kept activations are scaled by `1/(1-rate)` in train
/// mode so inference is the identity. `Mode::Frozen` replays the mask from
/// the last train pass (used by gradient checking).
pub struct Dropout {
    name: String,
    rate: f64,
    mask: Vec<f64>,
    active: bool,
}

impl Dropout {
    pub fn new(name: impl Into<String>, rate: f64) -> Result<Dropout> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::validation(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout {
            name: name.into(),
            rate,
            mask: Vec::new(),
            active: false,
        })
    }
}

impl Layer for Dropout {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        Ok(input_shape.to_vec())
    }

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        match mode {
            Mode::Infer => {
                self.active = false;
                Ok(input.clone())
            }
            Mode::Train => {
                if self.rate == 0.0 {
                    self.active = false;
                    return Ok(input.clone());
                }
                let scale = 1.0 / (1.0 - self.rate);
                self.mask = (0..input.len())
                    .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { scale })
                    .collect();
                self.active = true;
                let mut out = input.clone();
                for (v, &m) in out.data_mut().iter_mut().zip(&self.mask) {
                    *v *= m;
                }
                Ok(out)
            }
            Mode::Frozen => {
                if !self.active {
                    return Ok(input.clone());
                }
                if self.mask.len() != input.len() {
                    return Err(Error::validation(format!(
                        "{}: frozen mask size {} != input size {}",
                        self.name,
                        self.mask.len(),
                        input.len()
                    )));
                }
                let mut out = input.clone();
                for (v, &m) in out.data_mut().iter_mut().zip(&self.mask) {
                    *v *= m;
                }
                Ok(out)
            }
        }
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        if !self.active {
            return Ok(grad_out.clone());
        }
        let mut g = grad_out.clone();
        for (v, &m) in g.data_mut().iter_mut().zip(&self.mask) {
            *v *= m;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rate_zero_and_infer_are_identity() {
        let mut rng = Rng::seed_from_u64(0);
        let x = Tensor::from_vec(&[4], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        let mut d0 = Dropout::new("d", 0.0).unwrap();
        assert_eq!(d0.forward(&x, Mode::Train, &mut rng).unwrap().data(), x.data());
        let mut d = Dropout::new("d", 0.2).unwrap();
        assert_eq!(d.forward(&x, Mode::Infer, &mut rng).unwrap().data(), x.data());
    }

    #[test]
    fn invalid_rate_rejected() {
        assert!(Dropout::new("d", 1.0).is_err());
        assert!(Dropout::new("d", -0.1).is_err());
    }

    #[test]
    fn kept_fraction_and_mean_are_preserved() {
        let mut rng = Rng::seed_from_u64(42);
        let n = 100_000;
        let x = Tensor::filled(&[n], 1.0);
        let mut d = Dropout::new("d", 0.2).unwrap();
        let y = d.forward(&x, Mode::Train, &mut rng).unwrap();
        let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((kept - 0.8).abs() < 0.01, "kept fraction {kept}");
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "inverted-dropout mean {mean}");
    }

    #[test]
    fn frozen_replays_last_mask() {
        let mut rng = Rng::seed_from_u64(1);
        let x = Tensor::filled(&[64], 1.0);
        let mut d = Dropout::new("d", 0.5).unwrap();
        let a = d.forward(&x, Mode::Train, &mut rng).unwrap();
        let b = d.forward(&x, Mode::Frozen, &mut rng).unwrap();
        assert_eq!(a.data(), b.data());
    }
}
