use super::{glorot_uniform, Layer, Mode, Param, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spatial padding scheme. `Same` zero-pads so the output size is
/// `ceil(in / stride)`, with the extra pad on the bottom/right when the
/// total is odd. `Valid` uses no padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

/// Output extent and leading pad for one axis.
fn axis_geometry(
    padding: Padding,
    in_dim: usize,
    k: usize,
    stride: usize,
    axis: &'static str,
) -> Result<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = in_dim.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(in_dim);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if k > in_dim {
                return Err(Error::dimension(
                    axis,
                    format!("kernel extent {k} exceeds input extent {in_dim} (valid padding)"),
                ));
            }
            Ok(((in_dim - k) / stride + 1, 0))
        }
    }
}

/// 2D convolution over `[H, W, Cin]` inputs with `[kh, kw, Cin, Cout]`
/// kernels. Channels are the fastest-varying axis, so the inner reduction
/// runs over contiguous kernel rows.
pub struct Conv2d {
    name: String,
    weights: Param,
    bias: Param,
    kh: usize,
    kw: usize,
    cin: usize,
    cout: usize,
    stride: (usize, usize),
    padding: Padding,
    input: Tensor,
}

impl Conv2d {
    pub fn new(
        name: impl Into<String>,
        kernel: (usize, usize),
        cin: usize,
        cout: usize,
        stride: (usize, usize),
        padding: Padding,
        rng: &mut Rng,
    ) -> Result<Conv2d> {
        let name = name.into();
        let (kh, kw) = kernel;
        if kh == 0 || kw == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::validation(format!(
                "{name}: kernel and stride must be >= 1"
            )));
        }
        let fan_in = kh * kw * cin;
        let fan_out = kh * kw * cout;
        let weights = glorot_uniform(&[kh, kw, cin, cout], fan_in, fan_out, rng);
        Ok(Conv2d {
            weights: Param::new(format!("{name}.weight"), weights),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[cout])),
            name,
            kh,
            kw,
            cin,
            cout,
            stride,
            padding,
            input: Tensor::zeros(&[1]),
        })
    }

    pub fn set_weights(&mut self, weights: Tensor, bias: Tensor) -> Result<()> {
        weights.expect_shape(&[self.kh, self.kw, self.cin, self.cout], "kernel")?;
        bias.expect_shape(&[self.cout], "bias")?;
        self.weights.value = weights;
        self.bias.value = bias;
        Ok(())
    }

    fn geometry(&self, h: usize, w: usize) -> Result<(usize, usize, usize, usize)> {
        let (h_out, pad_top) = axis_geometry(self.padding, h, self.kh, self.stride.0, "height")?;
        let (w_out, pad_left) = axis_geometry(self.padding, w, self.kw, self.stride.1, "width")?;
        Ok((h_out, w_out, pad_top, pad_left))
    }
}

impl Layer for Conv2d {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let [h, w, cin] = input_shape else {
            return Err(Error::dimension(
                "rank",
                format!("{}: expected [H, W, Cin] input, got {input_shape:?}", self.name),
            ));
        };
        if *cin != self.cin {
            return Err(Error::dimension(
                "channel",
                format!("{}: input has {cin} channels, kernels expect {}", self.name, self.cin),
            ));
        }
        let (h_out, w_out, _, _) = self.geometry(*h, *w)?;
        Ok(vec![h_out, w_out, self.cout])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let (h, w) = (input.shape()[0], input.shape()[1]);
        let (h_out, w_out, pad_top, pad_left) = self.geometry(h, w)?;
        let (cin, cout, kh, kw) = (self.cin, self.cout, self.kh, self.kw);
        let (sh, sw) = self.stride;

        let mut out = Tensor::zeros(&out_shape);
        let id = input.data();
        let kd = self.weights.value.data();
        let bias = self.bias.value.data();
        let od = out.data_mut();
        let mut acc = vec![0.0f64; cout];

        for oy in 0..h_out {
            let iy0 = (oy * sh) as isize - pad_top as isize;
            for ox in 0..w_out {
                let ix0 = (ox * sw) as isize - pad_left as isize;
                acc.copy_from_slice(bias);
                for ky in 0..kh {
                    let iy = iy0 + ky as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = ix0 + kx as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let ibase = (iy as usize * w + ix as usize) * cin;
                        let kbase = (ky * kw + kx) * cin * cout;
                        for ci in 0..cin {
                            let v = id[ibase + ci];
                            let krow = &kd[kbase + ci * cout..kbase + (ci + 1) * cout];
                            for (a, &kv) in acc.iter_mut().zip(krow) {
                                *a += v * kv;
                            }
                        }
                    }
                }
                od[(oy * w_out + ox) * cout..(oy * w_out + ox + 1) * cout].copy_from_slice(&acc);
            }
        }
        self.input = input.clone();
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (h, w) = (self.input.shape()[0], self.input.shape()[1]);
        let (h_out, w_out, pad_top, pad_left) = self.geometry(h, w)?;
        grad_out.expect_shape(&[h_out, w_out, self.cout], "grad")?;
        let (cin, cout, kh, kw) = (self.cin, self.cout, self.kh, self.kw);
        let (sh, sw) = self.stride;

        let mut grad_in = Tensor::zeros(self.input.shape());
        let id = self.input.data();
        let kd = self.weights.value.data();
        let god = grad_out.data();
        {
            let dw = self.weights.grad.data_mut();
            let db = self.bias.grad.data_mut();
            let gid = grad_in.data_mut();

            for oy in 0..h_out {
                let iy0 = (oy * sh) as isize - pad_top as isize;
                for ox in 0..w_out {
                    let ix0 = (ox * sw) as isize - pad_left as isize;
                    let g = &god[(oy * w_out + ox) * cout..(oy * w_out + ox + 1) * cout];
                    for (dbv, &gv) in db.iter_mut().zip(g) {
                        *dbv += gv;
                    }
                    for ky in 0..kh {
                        let iy = iy0 + ky as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = ix0 + kx as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let ibase = (iy as usize * w + ix as usize) * cin;
                            let kbase = (ky * kw + kx) * cin * cout;
                            for ci in 0..cin {
                                let v = id[ibase + ci];
                                let krow = &kd[kbase + ci * cout..kbase + (ci + 1) * cout];
                                let dwrow = &mut dw[kbase + ci * cout..kbase + (ci + 1) * cout];
                                let mut s = 0.0;
                                for co in 0..cout {
                                    let gv = g[co];
                                    dwrow[co] += v * gv;
                                    s += krow[co] * gv;
                                }
                                gid[ibase + ci] += s;
                            }
                        }
                    }
                }
            }
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

/// 3D convolution over `[T, H, W, Cin]` inputs with
/// `[kt, kh, kw, Cin, Cout]` kernels. The time axis is always valid-padded;
/// the spatial axes follow `padding_space`.
pub struct Conv3d {
    name: String,
    weights: Param,
    bias: Param,
    kt: usize,
    kh: usize,
    kw: usize,
    cin: usize,
    cout: usize,
    stride: (usize, usize, usize),
    padding_space: Padding,
    input: Tensor,
}

impl Conv3d {
    pub fn new(
        name: impl Into<String>,
        kernel: (usize, usize, usize),
        cin: usize,
        cout: usize,
        stride: (usize, usize, usize),
        padding_space: Padding,
        rng: &mut Rng,
    ) -> Result<Conv3d> {
        let name = name.into();
        let (kt, kh, kw) = kernel;
        if kt == 0 || kh == 0 || kw == 0 || stride.0 == 0 || stride.1 == 0 || stride.2 == 0 {
            return Err(Error::validation(format!(
                "{name}: kernel and stride must be >= 1"
            )));
        }
        let fan_in = kt * kh * kw * cin;
        let fan_out = kt * kh * kw * cout;
        let weights = glorot_uniform(&[kt, kh, kw, cin, cout], fan_in, fan_out, rng);
        Ok(Conv3d {
            weights: Param::new(format!("{name}.weight"), weights),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[cout])),
            name,
            kt,
            kh,
            kw,
            cin,
            cout,
            stride,
            padding_space,
            input: Tensor::zeros(&[1]),
        })
    }

    pub fn set_weights(&mut self, weights: Tensor, bias: Tensor) -> Result<()> {
        weights.expect_shape(&[self.kt, self.kh, self.kw, self.cin, self.cout], "kernel")?;
        bias.expect_shape(&[self.cout], "bias")?;
        self.weights.value = weights;
        self.bias.value = bias;
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn geometry(&self, t: usize, h: usize, w: usize) -> Result<(usize, usize, usize, usize, usize)> {
        let (t_out, _) = axis_geometry(Padding::Valid, t, self.kt, self.stride.0, "time")?;
        let (h_out, pad_top) = axis_geometry(self.padding_space, h, self.kh, self.stride.1, "height")?;
        let (w_out, pad_left) = axis_geometry(self.padding_space, w, self.kw, self.stride.2, "width")?;
        Ok((t_out, h_out, w_out, pad_top, pad_left))
    }
}

impl Layer for Conv3d {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let [t, h, w, cin] = input_shape else {
            return Err(Error::dimension(
                "rank",
                format!("{}: expected [T, H, W, Cin] input, got {input_shape:?}", self.name),
            ));
        };
        if *cin != self.cin {
            return Err(Error::dimension(
                "channel",
                format!("{}: input has {cin} channels, kernels expect {}", self.name, self.cin),
            ));
        }
        let (t_out, h_out, w_out, _, _) = self.geometry(*t, *h, *w)?;
        Ok(vec![t_out, h_out, w_out, self.cout])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let (t, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (t_out, h_out, w_out, pad_top, pad_left) = self.geometry(t, h, w)?;
        let (cin, cout) = (self.cin, self.cout);
        let (kt, kh, kw) = (self.kt, self.kh, self.kw);
        let (st, sh, sw) = self.stride;

        let mut out = Tensor::zeros(&out_shape);
        let id = input.data();
        let kd = self.weights.value.data();
        let bias = self.bias.value.data();
        let od = out.data_mut();
        let mut acc = vec![0.0f64; cout];

        for ot in 0..t_out {
            let it0 = ot * st; // time axis is valid: never out of range
            for oy in 0..h_out {
                let iy0 = (oy * sh) as isize - pad_top as isize;
                for ox in 0..w_out {
                    let ix0 = (ox * sw) as isize - pad_left as isize;
                    acc.copy_from_slice(bias);
                    for dt in 0..kt {
                        let it = it0 + dt;
                        for ky in 0..kh {
                            let iy = iy0 + ky as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = ix0 + kx as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let ibase = ((it * h + iy as usize) * w + ix as usize) * cin;
                                let kbase = (((dt * kh + ky) * kw + kx) * cin) * cout;
                                for ci in 0..cin {
                                    let v = id[ibase + ci];
                                    let krow = &kd[kbase + ci * cout..kbase + (ci + 1) * cout];
                                    for (a, &kv) in acc.iter_mut().zip(krow) {
                                        *a += v * kv;
                                    }
                                }
                            }
                        }
                    }
                    let obase = ((ot * h_out + oy) * w_out + ox) * cout;
                    od[obase..obase + cout].copy_from_slice(&acc);
                }
            }
        }
        self.input = input.clone();
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (t, h, w) = (
            self.input.shape()[0],
            self.input.shape()[1],
            self.input.shape()[2],
        );
        let (t_out, h_out, w_out, pad_top, pad_left) = self.geometry(t, h, w)?;
        grad_out.expect_shape(&[t_out, h_out, w_out, self.cout], "grad")?;
        let (cin, cout) = (self.cin, self.cout);
        let (kt, kh, kw) = (self.kt, self.kh, self.kw);
        let (st, sh, sw) = self.stride;

        let mut grad_in = Tensor::zeros(self.input.shape());
        let id = self.input.data();
        let kd = self.weights.value.data();
        let god = grad_out.data();
        {
            let dw = self.weights.grad.data_mut();
            let db = self.bias.grad.data_mut();
            let gid = grad_in.data_mut();

            for ot in 0..t_out {
                let it0 = ot * st;
                for oy in 0..h_out {
                    let iy0 = (oy * sh) as isize - pad_top as isize;
                    for ox in 0..w_out {
                        let ix0 = (ox * sw) as isize - pad_left as isize;
                        let obase = ((ot * h_out + oy) * w_out + ox) * cout;
                        let g = &god[obase..obase + cout];
                        for (dbv, &gv) in db.iter_mut().zip(g) {
                            *dbv += gv;
                        }
                        for dt in 0..kt {
                            let it = it0 + dt;
                            for ky in 0..kh {
                                let iy = iy0 + ky as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = ix0 + kx as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let ibase =
                                        ((it * h + iy as usize) * w + ix as usize) * cin;
                                    let kbase = (((dt * kh + ky) * kw + kx) * cin) * cout;
                                    for ci in 0..cin {
                                        let v = id[ibase + ci];
                                        let krow =
                                            &kd[kbase + ci * cout..kbase + (ci + 1) * cout];
                                        let dwrow =
                                            &mut dw[kbase + ci * cout..kbase + (ci + 1) * cout];
                                        let mut s = 0.0;
                                        for co in 0..cout {
                                            let gv = g[co];
                                            dwrow[co] += v * gv;
                                            s += krow[co] * gv;
                                        }
                                        gid[ibase + ci] += s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
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

    fn rng() -> Rng {
        Rng::seed_from_u64(7)
    }

    /// Direct quadruple-nested-loop convolution, independent of the layer.
    pub(crate) fn conv2d_oracle(
        input: &Tensor,
        kernels: &Tensor,
        bias: &[f64],
        stride: (usize, usize),
        padding: Padding,
    ) -> Tensor {
        let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (kh, kw, cout) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[3]);
        let (h_out, pad_top) = axis_geometry(padding, h, kh, stride.0, "height").unwrap();
        let (w_out, pad_left) = axis_geometry(padding, w, kw, stride.1, "width").unwrap();
        let mut out = Tensor::zeros(&[h_out, w_out, cout]);
        for oy in 0..h_out {
            for ox in 0..w_out {
                for co in 0..cout {
                    let mut s = bias[co];
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride.0 + ky) as isize - pad_top as isize;
                            let ix = (ox * stride.1 + kx) as isize - pad_left as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                s += input.data()[(iy as usize * w + ix as usize) * cin + ci]
                                    * kernels.data()[((ky * kw + kx) * cin + ci) * cout + co];
                            }
                        }
                    }
                    out.data_mut()[(oy * w_out + ox) * cout + co] = s;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut r = rng();
        let mut conv = Conv2d::new("c", (1, 1), 1, 1, (1, 1), Padding::Valid, &mut r).unwrap();
        conv.set_weights(Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap(), Tensor::zeros(&[1]))
            .unwrap();
        let x = Tensor::from_vec(&[2, 3, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = conv.forward(&x, Mode::Infer, &mut r).unwrap();
        assert_eq!(y.shape(), &[2, 3, 1]);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn same_padding_shape_law() {
        let mut r = rng();
        let conv = Conv2d::new("c", (3, 3), 1, 4, (1, 1), Padding::Same, &mut r).unwrap();
        assert_eq!(conv.output_shape(&[64, 128, 1]).unwrap(), vec![64, 128, 4]);
        let conv2 = Conv2d::new("c", (3, 3), 1, 4, (2, 2), Padding::Same, &mut r).unwrap();
        assert_eq!(conv2.output_shape(&[5, 5, 1]).unwrap(), vec![3, 3, 4]);
    }

    #[test]
    fn valid_conv_matches_bruteforce_oracle() {
        let mut r = rng();
        let mut conv = Conv2d::new("c", (3, 3), 1, 2, (1, 1), Padding::Valid, &mut r).unwrap();
        let x = glorot_uniform(&[5, 5, 1], 1, 1, &mut r);
        let y = conv.forward(&x, Mode::Infer, &mut r).unwrap();
        let expect = conv2d_oracle(
            &x,
            &conv.weights.value,
            conv.bias.value.data(),
            (1, 1),
            Padding::Valid,
        );
        assert_eq!(y.shape(), expect.shape());
        for (a, b) in y.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv3d_tablelike_first_layer_shape() {
        let mut r = rng();
        let conv = Conv3d::new("c", (5, 13, 13), 1, 30, (5, 2, 2), Padding::Same, &mut r).unwrap();
        assert_eq!(
            conv.output_shape(&[25, 64, 128, 1]).unwrap(),
            vec![5, 32, 64, 30]
        );
    }

    #[test]
    fn conv3d_identity_kernel() {
        let mut r = rng();
        let mut conv = Conv3d::new("c", (1, 1, 1), 1, 1, (1, 1, 1), Padding::Valid, &mut r).unwrap();
        conv.set_weights(
            Tensor::from_vec(&[1, 1, 1, 1, 1], vec![1.0]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        let x = glorot_uniform(&[3, 2, 2, 1], 1, 1, &mut r);
        let y = conv.forward(&x, Mode::Infer, &mut r).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv3d_matches_bruteforce_oracle() {
        let mut r = rng();
        let mut conv = Conv3d::new("c", (2, 2, 2), 1, 3, (1, 1, 1), Padding::Valid, &mut r).unwrap();
        let x = glorot_uniform(&[6, 4, 4, 1], 1, 1, &mut r);
        let y = conv.forward(&x, Mode::Infer, &mut r).unwrap();

        // Independent nested-loop evaluation.
        let (t, h, w, cin) = (6, 4, 4, 1);
        let (kt, kh, kw, cout) = (2, 2, 2, 3);
        let (t_o, h_o, w_o) = (5, 3, 3);
        assert_eq!(y.shape(), &[t_o, h_o, w_o, cout]);
        for ot in 0..t_o {
            for oy in 0..h_o {
                for ox in 0..w_o {
                    for co in 0..cout {
                        let mut s = conv.bias.value.data()[co];
                        for dt in 0..kt {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    for ci in 0..cin {
                                        let iv = x.data()
                                            [(((ot + dt) * h + oy + ky) * w + ox + kx) * cin + ci];
                                        let kv = conv.weights.value.data()
                                            [((((dt * kh) + ky) * kw + kx) * cin + ci) * cout + co];
                                        s += iv * kv;
                                    }
                                }
                            }
                        }
                        let got = y.data()[((ot * h_o + oy) * w_o + ox) * cout + co];
                        assert!((got - s).abs() < 1e-12, "mismatch at {ot},{oy},{ox},{co}");
                    }
                }
            }
        }
        let _ = (t, w);
    }

    #[test]
    fn valid_kernel_larger_than_input_is_dimension_error() {
        let mut r = rng();
        let conv = Conv2d::new("c", (7, 3), 1, 1, (1, 1), Padding::Valid, &mut r).unwrap();
        let err = conv.output_shape(&[5, 5, 1]).unwrap_err();
        assert!(err.to_string().contains("height"));
    }
}
