//! Per-ray loss terms and their gradients.

#[allow(unused_imports)]
use num_traits::Float;

use crate::ClassId;
use crate::UNLABELED;

/// Probabilities are clamped to this range before the logarithm.
pub const PROB_CLAMP: (f64, f64) = (1e-7, 1.0 - 1e-7);

/// `|C_c - C|^2 + |C_f - C|^2` summed over rays.
pub fn photometric_loss(coarse: &[[f64; 3]], fine: &[[f64; 3]], gt: &[[f64; 3]]) -> f64 {
    coarse
        .iter()
        .zip(fine)
        .zip(gt)
        .map(|((c, f), g)| {
            (0..3)
                .map(|i| (c[i] - g[i]).powi(2) + (f[i] - g[i]).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// `-(1 - p)^gamma log p` for the clamped probability `p` of the true class.
pub fn focal_term(p: f64, gamma: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP.0, PROB_CLAMP.1);
    let modulation = if gamma == 0.0 {
        1.0
    } else {
        (1.0 - p).powf(gamma)
    };
    -modulation * p.ln()
}

/// Derivative of [`focal_term`] with respect to `p`; zero where the clamp
/// is active.
pub fn focal_term_grad(p: f64, gamma: f64) -> f64 {
    if !(PROB_CLAMP.0..=PROB_CLAMP.1).contains(&p) {
        return 0.0;
    }
    if gamma == 0.0 {
        return -1.0 / p;
    }
    gamma * (1.0 - p).powf(gamma - 1.0) * p.ln() - (1.0 - p).powf(gamma) / p
}

/// Focal loss over both passes, summed over rays; unlabeled rays add zero.
pub fn focal_semantic_loss(
    coarse_probs: &[&[f64]],
    fine_probs: &[&[f64]],
    labels: &[ClassId],
    gamma: f64,
) -> f64 {
    let mut total = 0.0;
    for ((c, f), l) in coarse_probs.iter().zip(fine_probs).zip(labels) {
        if *l == UNLABELED {
            continue;
        }
        total += focal_term(c[*l as usize], gamma) + focal_term(f[*l as usize], gamma);
    }
    total
}

/// `L_p + lambda L_s`.
pub fn total_loss(loss_p: f64, loss_s: f64, lambda: f64) -> f64 {
    loss_p + lambda * loss_s
}

/// `(loss, d loss / d logits)` of the focal term for softmax probabilities
/// `probs` of composited logits and true class `label`.
pub(crate) fn focal_logit_grad(probs: &[f64], label: usize, gamma: f64, out: &mut [f64]) -> f64 {
    let p = probs[label];
    let dl_dp = focal_term_grad(p, gamma);
    for (j, q) in probs.iter().enumerate() {
        let dp = if j == label { p * (1.0 - q) } else { -p * q };
        out[j] = dl_dp * dp;
    }
    focal_term(p, gamma)
}
