//! The learned scene representation.
//!
//! Points are evaluated in batches: each dense layer is one GEMM over all
//! points. [`Field::geometry`] runs the direction-free part (trunk, density,
//! logits, feature) and [`Field::color`] the view-dependent branch, so a
//! renderer can skip color for rays it will not display. [`Field::backward`]
//! is the exact reverse pass for this architecture.

mod arch;
mod net;
mod params;

pub use arch::{LayerKind, LayerShape, NetworkArchitecture};
pub use net::{BackwardScratch, ColorPass, Field, FieldOutput, Geometry, OutputGrads};
pub use params::{init_params, ParameterSet};

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::real::Real;

/// Length of a frequency-encoded 3-vector.
pub const fn encoded_len(levels: usize, include_raw: bool) -> usize {
    3 * include_raw as usize + 6 * levels
}

/// `[v] ++ for k in 0..levels: [sin(2^k pi v), cos(2^k pi v)]`, componentwise.
pub fn positional_encode<F: Real>(v: [F; 3], levels: usize, include_raw: bool) -> Vec<F> {
    let mut out = vec![F::zero(); encoded_len(levels, include_raw)];
    encode_into(v, levels, include_raw, &mut out);
    out
}

pub(crate) fn encode_into<F: Real>(v: [F; 3], levels: usize, include_raw: bool, out: &mut [F]) {
    let mut i = 0;
    if include_raw {
        out[..3].copy_from_slice(&v);
        i = 3;
    }
    if levels == 0 {
        return;
    }
    // one sin/cos per component, higher octaves by the double-angle
    // identities in f64 (a few ulps of f64 after the default 6 levels)
    let mut s = [0.0f64; 3];
    let mut c = [0.0f64; 3];
    for k in 0..3 {
        (s[k], c[k]) = (v[k].to_f64_lossy() * core::f64::consts::PI).sin_cos();
    }
    for level in 0..levels {
        if level > 0 {
            for k in 0..3 {
                let (sk, ck) = (s[k], c[k]);
                s[k] = 2.0 * sk * ck;
                c[k] = (ck - sk) * (ck + sk);
            }
        }
        for k in 0..3 {
            out[i + k] = F::lit(s[k]);
            out[i + 3 + k] = F::lit(c[k]);
        }
        i += 6;
    }
}

/// Max-subtracted softmax.
pub fn softmax_probs<F: Real>(logits: &[F]) -> Vec<F> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub(crate) fn softmax_in_place<F: Real>(v: &mut [F]) {
    let max = v.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = F::one() / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<F: PartialOrd + Copy>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_zero_vector() {
        let e = positional_encode([0.0f64; 3], 2, true);
        assert_eq!(
            e,
            vec![0., 0., 0., 0., 0., 0., 1., 1., 1., 0., 0., 0., 1., 1., 1.]
        );
    }

    #[test]
    fn encode_without_levels_is_identity() {
        let v = [0.3f64, -1.2, 4.0];
        assert_eq!(positional_encode(v, 0, true), v.to_vec());
        assert!(positional_encode(v, 0, false).is_empty());
    }

    #[test]
    fn encode_half_unit_first_frequency() {
        let e = positional_encode([0.5f64, 0.0, 0.0], 1, false);
        assert!((e[0] - 1.0).abs() < 1e-15, "sin(pi/2)");
        assert!(e[3].abs() < 1e-15, "cos(pi/2)");
        assert_eq!(e.len(), 6);
    }

    #[test]
    fn recurrence_matches_direct_evaluation() {
        for v in [[0.3f64, -1.7, 2.9], [-3.0, 0.001, 1.25]] {
            let e = positional_encode(v, 8, false);
            for k in 0..8 {
                let f = core::f64::consts::PI * (1u32 << k) as f64;
                for c in 0..3 {
                    assert!((e[6 * k + c] - (f * v[c]).sin()).abs() < 1e-12);
                    assert!((e[6 * k + 3 + c] - (f * v[c]).cos()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_probs(&[0.0f64, 0.0, 0.0]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax_probs(&[1000.0f64, 0.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
        let shifted = softmax_probs(&[1.5f64 + 7.0, -0.5 + 7.0, 2.0 + 7.0]);
        let base = softmax_probs(&[1.5f64, -0.5, 2.0]);
        for (a, b) in shifted.iter().zip(&base) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((base.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
