use super::activation::sigmoid;
use super::{glorot_uniform, Layer, Mode, Param, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const GATES: [&str; 4] = ["i", "f", "g", "o"];
const KERNEL: usize = 0;
const RECURRENT: usize = 1;
const BIAS: usize = 2;

/// Bidirectional LSTM over a `[T, F]` sequence, `return_sequences = false`:
/// the output is the forward direction's final hidden state concatenated
/// with the backward direction's final hidden state (`[2 * units]`).
///
/// Gate order is input/forget/cell/output; input, forget and output gates
/// use sigmoid, the cell candidate and cell output use tanh. The forget
/// gate bias starts at +1.
pub struct BiLstm {
    name: String,
    units: usize,
    n_in: usize,
    // 12 params per direction: [gate * 3 + {kernel, recurrent, bias}]
    fw: Vec<Param>,
    bw: Vec<Param>,
    input: Tensor,
    fw_cache: DirCache,
    bw_cache: DirCache,
}

#[derive(Default)]
struct DirCache {
    // All [T * units], in processing order.
    h: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    gates: [Vec<f64>; 4],
    steps: usize,
}

fn direction_params(name: &str, dir: &str, n_in: usize, units: usize, rng: &mut Rng) -> Vec<Param> {
    let mut params = Vec::with_capacity(12);
    for gate in GATES {
        params.push(Param::new(
            format!("{name}.{dir}.{gate}.kernel"),
            glorot_uniform(&[n_in, units], n_in, units, rng),
        ));
        params.push(Param::new(
            format!("{name}.{dir}.{gate}.recurrent"),
            glorot_uniform(&[units, units], units, units, rng),
        ));
        let bias = if gate == "f" {
            Tensor::filled(&[units], 1.0)
        } else {
            Tensor::zeros(&[units])
        };
        params.push(Param::new(format!("{name}.{dir}.{gate}.bias"), bias));
    }
    params
}

impl BiLstm {
    pub fn new(name: impl Into<String>, n_in: usize, units: usize, rng: &mut Rng) -> BiLstm {
        let name = name.into();
        BiLstm {
            fw: direction_params(&name, "fw", n_in, units, rng),
            bw: direction_params(&name, "bw", n_in, units, rng),
            name,
            units,
            n_in,
            input: Tensor::zeros(&[1, 1]),
            fw_cache: DirCache::default(),
            bw_cache: DirCache::default(),
        }
    }

    /// Forward one direction. `time_of_step(s)` maps processing step to the
    /// row index of the input.
    fn run_direction(
        params: &[Param],
        input: &Tensor,
        units: usize,
        time_of_step: impl Fn(usize) -> usize,
    ) -> DirCache {
        let t_len = input.shape()[0];
        let n_in = input.shape()[1];
        let id = input.data();
        let mut cache = DirCache {
            h: vec![0.0; t_len * units],
            c: vec![0.0; t_len * units],
            tanh_c: vec![0.0; t_len * units],
            gates: std::array::from_fn(|_| vec![0.0; t_len * units]),
            steps: t_len,
        };
        let mut h_prev = vec![0.0; units];
        let mut c_prev = vec![0.0; units];
        let mut pre = vec![0.0; units];

        for s in 0..t_len {
            let x = &id[time_of_step(s) * n_in..(time_of_step(s) + 1) * n_in];
            for (gi, _) in GATES.iter().enumerate() {
                let w = params[gi * 3 + KERNEL].value.data();
                let r = params[gi * 3 + RECURRENT].value.data();
                pre.copy_from_slice(params[gi * 3 + BIAS].value.data());
                for (f, &xv) in x.iter().enumerate() {
                    let row = &w[f * units..(f + 1) * units];
                    for (p, &wv) in pre.iter_mut().zip(row) {
                        *p += xv * wv;
                    }
                }
                for (v, &hv) in h_prev.iter().enumerate() {
                    let row = &r[v * units..(v + 1) * units];
                    for (p, &rv) in pre.iter_mut().zip(row) {
                        *p += hv * rv;
                    }
                }
                let act = &mut cache.gates[gi][s * units..(s + 1) * units];
                if gi == 2 {
                    for (a, &p) in act.iter_mut().zip(pre.iter()) {
                        *a = p.tanh();
                    }
                } else {
                    for (a, &p) in act.iter_mut().zip(pre.iter()) {
                        *a = sigmoid(p);
                    }
                }
            }
            for u in 0..units {
                let i = cache.gates[0][s * units + u];
                let f = cache.gates[1][s * units + u];
                let g = cache.gates[2][s * units + u];
                let o = cache.gates[3][s * units + u];
                let c = f * c_prev[u] + i * g;
                let tc = c.tanh();
                cache.c[s * units + u] = c;
                cache.tanh_c[s * units + u] = tc;
                cache.h[s * units + u] = o * tc;
            }
            h_prev.copy_from_slice(&cache.h[s * units..(s + 1) * units]);
            c_prev.copy_from_slice(&cache.c[s * units..(s + 1) * units]);
        }
        cache
    }

    /// BPTT for one direction from the final hidden state's gradient.
    /// Parameter gradients accumulate in place; input gradients accumulate
    /// into `grad_in` through `time_of_step`.
    #[allow(clippy::too_many_arguments)]
    fn backprop_direction(
        params: &mut [Param],
        cache: &DirCache,
        input: &Tensor,
        units: usize,
        dh_final: &[f64],
        grad_in: &mut Tensor,
        time_of_step: impl Fn(usize) -> usize,
    ) {
        let t_len = cache.steps;
        let n_in = input.shape()[1];
        let id = input.data();
        let mut dh = dh_final.to_vec();
        let mut dc = vec![0.0; units];
        let mut da = vec![vec![0.0; units]; 4];

        for s in (0..t_len).rev() {
            let base = s * units;
            for u in 0..units {
                let i = cache.gates[0][base + u];
                let f = cache.gates[1][base + u];
                let g = cache.gates[2][base + u];
                let o = cache.gates[3][base + u];
                let tc = cache.tanh_c[base + u];
                let c_prev = if s > 0 { cache.c[base - units + u] } else { 0.0 };

                let dcu = dc[u] + dh[u] * o * (1.0 - tc * tc);
                da[0][u] = (dcu * g) * i * (1.0 - i);
                da[1][u] = (dcu * c_prev) * f * (1.0 - f);
                da[2][u] = (dcu * i) * (1.0 - g * g);
                da[3][u] = (dh[u] * tc) * o * (1.0 - o);
                dc[u] = dcu * f;
            }

            let x = &id[time_of_step(s) * n_in..(time_of_step(s) + 1) * n_in];
            let gx = &mut grad_in.data_mut()
                [time_of_step(s) * n_in..(time_of_step(s) + 1) * n_in];
            let h_prev_slice: Option<&[f64]> =
                (s > 0).then(|| &cache.h[base - units..base]);

            dh.iter_mut().for_each(|v| *v = 0.0);
            for (gi, dag) in da.iter().enumerate() {
                {
                    let db = params[gi * 3 + BIAS].grad.data_mut();
                    for (b, &d) in db.iter_mut().zip(dag) {
                        *b += d;
                    }
                }
                {
                    let Param { value, grad, .. } = &mut params[gi * 3 + KERNEL];
                    let w = value.data();
                    let dw = grad.data_mut();
                    for (f, &xv) in x.iter().enumerate() {
                        let drow = &mut dw[f * units..(f + 1) * units];
                        let wrow = &w[f * units..(f + 1) * units];
                        let mut s_in = 0.0;
                        for u in 0..units {
                            drow[u] += xv * dag[u];
                            s_in += wrow[u] * dag[u];
                        }
                        gx[f] += s_in;
                    }
                }
                if let Some(h_prev) = h_prev_slice {
                    let Param { value, grad, .. } = &mut params[gi * 3 + RECURRENT];
                    let r = value.data();
                    let dr = grad.data_mut();
                    for (v, &hv) in h_prev.iter().enumerate() {
                        let drow = &mut dr[v * units..(v + 1) * units];
                        let rrow = &r[v * units..(v + 1) * units];
                        let mut s_h = 0.0;
                        for u in 0..units {
                            drow[u] += hv * dag[u];
                            s_h += rrow[u] * dag[u];
                        }
                        dh[v] += s_h;
                    }
                }
            }
        }
    }
}

impl Layer for BiLstm {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let [t, f] = input_shape else {
            return Err(Error::dimension(
                "rank",
                format!("{}: expected [T, F] input, got {input_shape:?}", self.name),
            ));
        };
        if *t == 0 {
            return Err(Error::validation(format!("{}: empty sequence", self.name)));
        }
        if *f != self.n_in {
            return Err(Error::dimension(
                "feature",
                format!("{}: expected {} features, got {f}", self.name, self.n_in),
            ));
        }
        Ok(vec![2 * self.units])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        self.output_shape(input.shape())?;
        let t_len = input.shape()[0];
        let units = self.units;
        self.fw_cache = Self::run_direction(&self.fw, input, units, |s| s);
        self.bw_cache = Self::run_direction(&self.bw, input, units, |s| t_len - 1 - s);
        self.input = input.clone();

        let mut out = Tensor::zeros(&[2 * units]);
        let last = (t_len - 1) * units;
        out.data_mut()[..units].copy_from_slice(&self.fw_cache.h[last..last + units]);
        out.data_mut()[units..].copy_from_slice(&self.bw_cache.h[last..last + units]);
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.expect_shape(&[2 * self.units], "grad")?;
        let t_len = self.input.shape()[0];
        let units = self.units;
        let mut grad_in = Tensor::zeros(self.input.shape());
        Self::backprop_direction(
            &mut self.fw,
            &self.fw_cache,
            &self.input,
            units,
            &grad_out.data()[..units],
            &mut grad_in,
            |s| s,
        );
        Self::backprop_direction(
            &mut self.bw,
            &self.bw_cache,
            &self.input,
            units,
            &grad_out.data()[units..],
            &mut grad_in,
            |s| t_len - 1 - s,
        );
        Ok(grad_in)
    }

    fn params(&self) -> Vec<&Param> {
        self.fw.iter().chain(self.bw.iter()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.fw.iter_mut().chain(self.bw.iter_mut()).collect()
    }
}
