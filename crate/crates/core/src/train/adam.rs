use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub step: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(len: usize) -> Self {
        Self {
            m: alloc::vec![F::zero(); len],
            v: alloc::vec![F::zero(); len],
            step: 0,
        }
    }
}

/// One bias-corrected adaptive-moment update.
pub fn adam_step<F: Real>(
    params: &mut [F],
    grads: &[F],
    state: &mut AdamState<F>,
    hyper: &AdamHyper,
    learning_rate: f64,
) -> Result<()> {
    let n = params.len();
    for (what, len) in [
        ("gradient", grads.len()),
        ("first moment", state.m.len()),
        ("second moment", state.v.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = F::lit(hyper.beta1);
    let b2 = F::lit(hyper.beta2);
    let c1 = F::lit(1.0 - hyper.beta1);
    let c2 = F::lit(1.0 - hyper.beta2);
    let corr1 = 1.0 - hyper.beta1.powi(t);
    let corr2 = 1.0 - hyper.beta2.powi(t);
    let step = F::lit(learning_rate / corr1);
    let inv_corr2 = F::lit(1.0 / corr2);
    let eps = F::lit(hyper.epsilon);
    for i in 0..n {
        let g = grads[i];
        let m = b1 * state.m[i] + c1 * g;
        let v = b2 * state.v[i] + c2 * g * g;
        state.m[i] = m;
        state.v[i] = v;
        params[i] -= step * m / ((v * inv_corr2).sqrt() + eps);
    }
    Ok(())
}

/// Exponential decay from `start` at iteration 0 to `end` at `total`.
pub fn decayed_learning_rate(start: f64, end: f64, iteration: usize, total: usize) -> f64 {
    if total == 0 {
        return start;
    }
    let frac = (iteration as f64 / total as f64).min(1.0);
    start * (end / start).powf(frac)
}
