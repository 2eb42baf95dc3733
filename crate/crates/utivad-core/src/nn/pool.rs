use super::{Layer, Mode, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Max pooling over `[H, W, C]`, window == stride, trailing remainder
/// dropped (floor semantics). Argmax indices are kept for gradient routing.
pub struct MaxPool2d {
    name: String,
    window: (usize, usize),
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
    kink: f64,
}

impl MaxPool2d {
    pub fn new(name: impl Into<String>, window: (usize, usize)) -> MaxPool2d {
        MaxPool2d {
            name: name.into(),
            window,
            input_shape: Vec::new(),
            argmax: Vec::new(),
            kink: f64::INFINITY,
        }
    }
}

fn pooled_extent(in_dim: usize, window: usize, axis: &'static str) -> Result<usize> {
    if window == 0 || window > in_dim {
        return Err(Error::dimension(
            axis,
            format!("pool window {window} invalid for input extent {in_dim}"),
        ));
    }
    Ok(in_dim / window)
}

impl Layer for MaxPool2d {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let [h, w, c] = input_shape else {
            return Err(Error::dimension(
                "rank",
                format!("{}: expected [H, W, C] input, got {input_shape:?}", self.name),
            ));
        };
        Ok(vec![
            pooled_extent(*h, self.window.0, "height")?,
            pooled_extent(*w, self.window.1, "width")?,
            *c,
        ])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let (h_o, w_o, c) = (out_shape[0], out_shape[1], out_shape[2]);
        let w = input.shape()[1];
        let (wh, ww) = self.window;
        let id = input.data();

        let mut out = Tensor::zeros(&out_shape);
        self.argmax = vec![0; out.len()];
        self.kink = f64::INFINITY;
        let od = out.data_mut();

        for oy in 0..h_o {
            for ox in 0..w_o {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut second = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ky in 0..wh {
                        for kx in 0..ww {
                            let idx = ((oy * wh + ky) * w + ox * ww + kx) * c + ch;
                            let v = id[idx];
                            if v > best {
                                second = best;
                                best = v;
                                best_idx = idx;
                            } else if v > second {
                                second = v;
                            }
                        }
                    }
                    let o = (oy * w_o + ox) * c + ch;
                    od[o] = best;
                    self.argmax[o] = best_idx;
                    if second.is_finite() {
                        self.kink = self.kink.min(best - second);
                    }
                }
            }
        }
        self.input_shape = input.shape().to_vec();
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        if grad_out.len() != self.argmax.len() {
            return Err(Error::dimension(
                "grad",
                format!("{}: grad size {} != pooled size {}", self.name, grad_out.len(), self.argmax.len()),
            ));
        }
        let mut grad_in = Tensor::zeros(&self.input_shape);
        let gid = grad_in.data_mut();
        for (o, &src) in self.argmax.iter().enumerate() {
            gid[src] += grad_out.data()[o];
        }
        Ok(grad_in)
    }

    fn kink_margin(&self) -> f64 {
        self.kink
    }
}

/// Max pooling over `[T, H, W, C]` with a `(wt, wh, ww)` window.
pub struct MaxPool3d {
    name: String,
    window: (usize, usize, usize),
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
    kink: f64,
}

impl MaxPool3d {
    pub fn new(name: impl Into<String>, window: (usize, usize, usize)) -> MaxPool3d {
        MaxPool3d {
            name: name.into(),
            window,
            input_shape: Vec::new(),
            argmax: Vec::new(),
            kink: f64::INFINITY,
        }
    }
}

impl Layer for MaxPool3d {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let [t, h, w, c] = input_shape else {
            return Err(Error::dimension(
                "rank",
                format!("{}: expected [T, H, W, C] input, got {input_shape:?}", self.name),
            ));
        };
        Ok(vec![
            pooled_extent(*t, self.window.0, "time")?,
            pooled_extent(*h, self.window.1, "height")?,
            pooled_extent(*w, self.window.2, "width")?,
            *c,
        ])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let (t_o, h_o, w_o, c) = (out_shape[0], out_shape[1], out_shape[2], out_shape[3]);
        let (h, w) = (input.shape()[1], input.shape()[2]);
        let (wt, wh, ww) = self.window;
        let id = input.data();

        let mut out = Tensor::zeros(&out_shape);
        self.argmax = vec![0; out.len()];
        self.kink = f64::INFINITY;
        let od = out.data_mut();

        for ot in 0..t_o {
            for oy in 0..h_o {
                for ox in 0..w_o {
                    for ch in 0..c {
                        let mut best = f64::NEG_INFINITY;
                        let mut second = f64::NEG_INFINITY;
                        let mut best_idx = 0;
                        for kt in 0..wt {
                            for ky in 0..wh {
                                for kx in 0..ww {
                                    let idx = (((ot * wt + kt) * h + oy * wh + ky) * w
                                        + ox * ww
                                        + kx)
                                        * c
                                        + ch;
                                    let v = id[idx];
                                    if v > best {
                                        second = best;
                                        best = v;
                                        best_idx = idx;
                                    } else if v > second {
                                        second = v;
                                    }
                                }
                            }
                        }
                        let o = ((ot * h_o + oy) * w_o + ox) * c + ch;
                        od[o] = best;
                        self.argmax[o] = best_idx;
                        if second.is_finite() {
                            self.kink = self.kink.min(best - second);
                        }
                    }
                }
            }
        }
        self.input_shape = input.shape().to_vec();
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        if grad_out.len() != self.argmax.len() {
            return Err(Error::dimension(
                "grad",
                format!("{}: grad size {} != pooled size {}", self.name, grad_out.len(), self.argmax.len()),
            ));
        }
        let mut grad_in = Tensor::zeros(&self.input_shape);
        let gid = grad_in.data_mut();
        for (o, &src) in self.argmax.iter().enumerate() {
            gid[src] += grad_out.data()[o];
        }
        Ok(grad_in)
    }

    fn kink_margin(&self) -> f64 {
        self.kink
    }
}
