use super::mlp::MlpParams;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: MlpParams,
    pub second_moment: MlpParams,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        AdamState {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }
}

/// Bias-corrected Adam update, in place.
pub fn adam_step(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState, lr: f64) -> Result<()> {
    if !params.same_shape(grads)
        || !params.same_shape(&state.first_moment)
        || !params.same_shape(&state.second_moment)
    {
        return Err(Error::shape("adam_step", "matching parameter shapes", "mismatch"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let correct1 = 1.0 - b1.powi(t);
    let correct2 = 1.0 - b2.powi(t);

    let p_arrays = params.arrays_mut();
    let g_arrays = grads.arrays();
    let m_arrays = state.first_moment.arrays_mut();
    let v_arrays = state.second_moment.arrays_mut();
    for (((p, g), m), v) in p_arrays.into_iter().zip(g_arrays).zip(m_arrays).zip(v_arrays) {
        let iter = p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice());
        for (((p, &g), m), v) in iter {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
