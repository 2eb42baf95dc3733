use super::{LossKind, Mode, Rng, Sequential};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Minimum distance from a relu/maxpool kink for a trustworthy central
/// difference; callers re-sample the evaluation point below this.
const KINK_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub worst_param: String,
}

/// Compares analytic gradients against central differences at one
/// evaluation point. At most `max_per_tensor` elements are probed per
/// parameter tensor (evenly spread, deterministic); pass `usize::MAX` for
/// an exhaustive check.
///
/// Errors with a validation error if the forward pass lands within
/// `1e-4` of a relu or maxpool kink; see [`grad_check_resampling`].
pub fn grad_check(
    model: &mut Sequential,
    loss: LossKind,
    input: &Tensor,
    target: &Tensor,
    eps: f64,
    max_per_tensor: usize,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    model.zero_grads();
    let out = model.forward(input, Mode::Train, rng)?;
    let margin = model.min_kink_margin();
    if margin < KINK_MARGIN {
        return Err(Error::validation(format!(
            "evaluation point too close to a kink (margin {margin:.2e}); re-sample"
        )));
    }
    let (_, dloss) = loss.evaluate(&out, target)?;
    model.backward(&dloss)?;
    let analytic: Vec<Tensor> = model.params().iter().map(|p| p.grad.clone()).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst_param: String::new(),
    };
    let n_params = analytic.len();
    for pi in 0..n_params {
        let len = analytic[pi].len();
        let indices: Vec<usize> = if len <= max_per_tensor {
            (0..len).collect()
        } else {
            // Evenly spread sample with a half-stride offset.
            (0..max_per_tensor)
                .map(|j| (j * len + len / 2) / max_per_tensor)
                .collect()
        };
        for idx in indices {
            let orig = model.params()[pi].value.data()[idx];
            model.params_mut()[pi].value.data_mut()[idx] = orig + eps;
            let out_p = model.forward(input, Mode::Frozen, rng)?;
            let (loss_p, _) = loss.evaluate(&out_p, target)?;
            model.params_mut()[pi].value.data_mut()[idx] = orig - eps;
            let out_m = model.forward(input, Mode::Frozen, rng)?;
            let (loss_m, _) = loss.evaluate(&out_m, target)?;
            model.params_mut()[pi].value.data_mut()[idx] = orig;

            let numeric = (loss_p - loss_m) / (2.0 * eps);
            let a = analytic[pi].data()[idx];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = model.params()[pi].name.clone();
            }
        }
    }
    // Leave the model's cached activations consistent with its parameters.
    model.forward(input, Mode::Frozen, rng)?;
    Ok(report)
}

/// Runs [`grad_check`] on sampled (input, target) pairs, re-sampling up to
/// `tries` times when the evaluation point is too close to a kink.
pub fn grad_check_resampling(
    model: &mut Sequential,
    loss: LossKind,
    mut sample: impl FnMut(&mut Rng) -> (Tensor, Tensor),
    eps: f64,
    max_per_tensor: usize,
    tries: usize,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    let mut last_err = None;
    for _ in 0..tries {
        let (input, target) = sample(rng);
        match grad_check(model, loss, &input, &target, eps, max_per_tensor, rng) {
            Ok(report) => return Ok(report),
            Err(e @ Error::Validation(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::validation("no gradient-check attempt made")))
}
