//! Quadrature compositing along one ray and its reverse pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{argmax, softmax_probs, FieldOutput};
use crate::real::Real;
use crate::ClassId;

/// Opacity of a segment with optical depth `x`: `1 - exp(-x)`.
pub fn alpha_comp<F: Real>(x: F) -> F {
    -(-x).exp_m1()
}

/// Opacity below which [`expected_depth`] reports no surface.
pub const DEPTH_OPACITY_FLOOR: f64 = 0.01;
const DEPTH_EPS: f64 = 1e-8;

fn check_inputs<F: Real>(sigmas: &[F], deltas: &[F], mask: Option<&[bool]>) -> Result<()> {
    if sigmas.len() != deltas.len() {
        return Err(Error::LengthMismatch {
            what: "deltas",
            expected: sigmas.len(),
            found: deltas.len(),
        });
    }
    if let Some(m) = mask {
        if m.len() != sigmas.len() {
            return Err(Error::LengthMismatch {
                what: "mask",
                expected: sigmas.len(),
                found: m.len(),
            });
        }
    }
    for s in sigmas {
        if !s.is_finite() {
            return Err(Error::NonFinite("density"));
        }
        if *s < F::zero() {
            return Err(Error::NegativeDensity(s.to_f64_lossy()));
        }
    }
    if deltas.iter().any(|d| !(*d > F::zero()) || !d.is_finite()) {
        return Err(Error::InvalidConfig(
            "quadrature widths must be positive and finite".into(),
        ));
    }
    Ok(())
}

/// `T(t_k) = exp(-sum_{j<k} sigma_j delta_j)` for every sample.
pub fn transmittance<F: Real>(sigmas: &[F], deltas: &[F]) -> Result<Vec<F>> {
    check_inputs(sigmas, deltas, None)?;
    let k = sigmas.len();
    let mut w = vec![F::zero(); k];
    let mut trans = vec![F::zero(); k + 1];
    weights_into(sigmas, deltas, None, &mut w, &mut trans);
    trans.truncate(k);
    Ok(trans)
}

/// Compositing weights `w_k = T(t_k) alpha(sigma_k delta_k)` after zeroing
/// the density wherever `mask` is false.
pub fn weights<F: Real>(sigmas: &[F], deltas: &[F], mask: Option<&[bool]>) -> Result<Vec<F>> {
    check_inputs(sigmas, deltas, mask)?;
    let k = sigmas.len();
    let mut w = vec![F::zero(); k];
    let mut trans = vec![F::zero(); k + 1];
    weights_into(sigmas, deltas, mask, &mut w, &mut trans);
    Ok(w)
}

/// Unchecked core of [`weights`]. `trans` gets `K + 1` entries; the last is
/// the transmittance past the final sample.
pub(crate) fn weights_into<F: Real>(
    sigma: &[F],
    delta: &[F],
    mask: Option<&[bool]>,
    w: &mut [F],
    trans: &mut [F],
) {
    let mut acc = F::zero();
    for k in 0..sigma.len() {
        let s = match mask {
            Some(m) if !m[k] => F::zero(),
            _ => sigma[k],
        };
        let x = s * delta[k];
        let t = (-acc).exp();
        trans[k] = t;
        w[k] = t * alpha_comp(x);
        acc += x;
    }
    trans[sigma.len()] = (-acc).exp();
}

fn split<F: Real>(samples: &[FieldOutput<F>]) -> Vec<F> {
    samples.iter().map(|s| s.sigma).collect()
}

/// `C(r) = sum_k w_k c_k`, plus `(1 - sum_k w_k)` white when requested.
pub fn composite_color<F: Real>(
    samples: &[FieldOutput<F>],
    deltas: &[F],
    mask: Option<&[bool]>,
    white_background: bool,
) -> Result<[F; 3]> {
    let w = weights(&split(samples), deltas, mask)?;
    Ok(color_from_weights(
        &w,
        samples.iter().map(|s| s.rgb),
        white_background,
    ))
}

fn color_from_weights<F: Real>(
    w: &[F],
    rgb: impl Iterator<Item = [F; 3]>,
    white_background: bool,
) -> [F; 3] {
    let mut c = [F::zero(); 3];
    let mut opacity = F::zero();
    for (wk, ck) in w.iter().zip(rgb) {
        for ch in 0..3 {
            c[ch] += *wk * ck[ch];
        }
        opacity += *wk;
    }
    if white_background {
        for v in &mut c {
            *v += F::one() - opacity;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticComposite<F> {
    /// `sum_k w_k s_k`.
    pub logits: Vec<F>,
    pub probs: Vec<F>,
    pub label: ClassId,
}

/// Composited logits, their softmax and argmax.
pub fn composite_semantics<F: Real>(
    samples: &[FieldOutput<F>],
    deltas: &[F],
    mask: Option<&[bool]>,
) -> Result<SemanticComposite<F>> {
    let w = weights(&split(samples), deltas, mask)?;
    let l = samples.first().map_or(0, |s| s.logits.len());
    if let Some(bad) = samples.iter().find(|s| s.logits.len() != l) {
        return Err(Error::LengthMismatch {
            what: "sample logits",
            expected: l,
            found: bad.logits.len(),
        });
    }
    Ok(semantics_from_weights(
        &w,
        samples.iter().map(|s| s.logits.as_slice()),
        l,
    ))
}

fn semantics_from_weights<'a, F: Real>(
    w: &[F],
    logits: impl Iterator<Item = &'a [F]>,
    l: usize,
) -> SemanticComposite<F> {
    let mut acc = vec![F::zero(); l];
    for (wk, s) in w.iter().zip(logits) {
        for (a, v) in acc.iter_mut().zip(s) {
            *a += *wk * *v;
        }
    }
    let probs = softmax_probs(&acc);
    let label = argmax(&acc) as ClassId;
    SemanticComposite {
        logits: acc,
        probs,
        label,
    }
}

/// `sum w_k t_k / max(sum w_k, 1e-8)`, or `+inf` when the ray is nearly
/// transparent (opacity below [`DEPTH_OPACITY_FLOOR`]).
pub fn expected_depth<F: Real>(weights: &[F], t: &[F]) -> F {
    let opacity: F = weights.iter().copied().sum();
    if opacity < F::lit(DEPTH_OPACITY_FLOOR) {
        return F::infinity();
    }
    let num: F = weights.iter().zip(t).map(|(w, t)| *w * *t).sum();
    num / opacity.max(F::lit(DEPTH_EPS))
}

/// Per-pixel result of compositing one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderResult<F> {
    pub color: [F; 3],
    pub semantic_probs: Vec<F>,
    pub label: ClassId,
    /// `+inf` when the ray is nearly transparent.
    pub depth: F,
    pub weights: Vec<F>,
    pub opacity: F,
}

/// Color, semantics and depth of one ray from its samples at distances `t`.
pub fn composite_ray<F: Real>(
    samples: &[FieldOutput<F>],
    t: &[F],
    deltas: &[F],
    mask: Option<&[bool]>,
    white_background: bool,
) -> Result<RenderResult<F>> {
    if t.len() != samples.len() {
        return Err(Error::LengthMismatch {
            what: "sample distances",
            expected: samples.len(),
            found: t.len(),
        });
    }
    let w = weights(&split(samples), deltas, mask)?;
    let l = samples.first().map_or(0, |s| s.logits.len());
    let color = color_from_weights(&w, samples.iter().map(|s| s.rgb), white_background);
    let sem = semantics_from_weights(&w, samples.iter().map(|s| s.logits.as_slice()), l);
    Ok(RenderResult {
        color,
        semantic_probs: sem.probs,
        label: sem.label,
        depth: expected_depth(&w, t),
        opacity: w.iter().copied().sum(),
        weights: w,
    })
}

/// Reverse pass of one ray's composite.
///
/// Given `g_k = dL/dw_k` (built from the color and logit gradients), the
/// density gradient is `dL/dsigma_i = delta_i (g_i T_{i+1} - sum_{k>i} g_k w_k)`.
/// `rgb` is `K x 3` and may be `None` when no color gradient flows;
/// everything is accumulated into the output slices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn composite_backward<F: Real>(
    delta: &[F],
    w: &[F],
    trans: &[F],
    rgb: Option<&[F]>,
    logits: &[F],
    white_background: bool,
    d_color: Option<[F; 3]>,
    d_sem: &[F],
    d_sigma: &mut [F],
    mut d_rgb: Option<&mut [F]>,
    d_logits: &mut [F],
) {
    let k = w.len();
    let l = d_sem.len();
    let bg = if white_background {
        F::one()
    } else {
        F::zero()
    };
    let mut g = vec![F::zero(); k];
    for i in 0..k {
        let mut gi = F::zero();
        if let (Some(dc), Some(rgb)) = (d_color, rgb) {
            for ch in 0..3 {
                gi += dc[ch] * (rgb[3 * i + ch] - bg);
            }
            if let Some(dr) = d_rgb.as_deref_mut() {
                for ch in 0..3 {
                    dr[3 * i + ch] += w[i] * dc[ch];
                }
            }
        }
        for c in 0..l {
            gi += d_sem[c] * logits[i * l + c];
            d_logits[i * l + c] += w[i] * d_sem[c];
        }
        g[i] = gi;
    }
    let mut suffix = F::zero();
    for i in (0..k).rev() {
        d_sigma[i] += delta[i] * (g[i] * trans[i + 1] - suffix);
        suffix += g[i] * w[i];
    }
}
