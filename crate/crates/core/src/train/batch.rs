//! Loss and parameter gradient for a batch of supervised rays.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::loss::{focal_logit_grad, total_loss};
use crate::camera::Ray;
use crate::error::{Error, Result};
use crate::field::{
    softmax_probs, BackwardScratch, ColorPass, Field, Geometry, OutputGrads, ParameterSet,
};
use crate::real::Real;
use crate::render::{composite_backward, weights_into};
use crate::sampling::{deltas, merge_into};
use crate::{ClassId, UNLABELED};

/// Rays with fixed sample distances and their supervision.
#[derive(Debug, Clone, Copy)]
pub struct RayBatch<'a> {
    pub rays: &'a [Ray],
    /// `rays.len() x coarse`, ascending per ray.
    pub coarse_t: &'a [f64],
    /// `rays.len() x fine`, ascending per ray.
    pub fine_t: &'a [f64],
    pub coarse: usize,
    pub fine: usize,
    /// `[0, 1]` target colors.
    pub colors: &'a [[f64; 3]],
    pub labels: &'a [ClassId],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSettings {
    pub lambda: f64,
    pub gamma: f64,
    /// Include the photometric term (off during semantic-only training).
    pub photometric: bool,
    pub white_background: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLoss {
    /// Photometric term, summed over rays (0 when disabled).
    pub loss_p: f64,
    /// Focal term, summed over rays.
    pub loss_s: f64,
    /// The optimized objective.
    pub total: f64,
    /// Mean squared error of the fine color over rays and channels
    /// (NaN when the photometric term is off).
    pub fine_mse: f64,
}

impl<'a> RayBatch<'a> {
    fn check(&self) -> Result<()> {
        let b = self.rays.len();
        for (what, expected, found) in [
            ("coarse distances", b * self.coarse, self.coarse_t.len()),
            ("fine distances", b * self.fine, self.fine_t.len()),
            ("target colors", b, self.colors.len()),
            ("labels", b, self.labels.len()),
        ] {
            if expected != found {
                return Err(Error::LengthMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        if self.coarse < 2 {
            return Err(Error::InvalidConfig(
                "need at least 2 coarse samples per ray".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn ray_points<F: Real>(rays: &[Ray], t: &[f64], per_ray: usize) -> Vec<[F; 3]> {
    let mut out = Vec::with_capacity(t.len());
    for (i, ray) in rays.iter().enumerate() {
        for tk in &t[i * per_ray..(i + 1) * per_ray] {
            let p = ray.at(*tk);
            out.push([F::lit(p[0]), F::lit(p[1]), F::lit(p[2])]);
        }
    }
    out
}

fn replicated_directions<F: Real>(
    field: &Field<'_, F>,
    rays: &[Ray],
    per_ray: usize,
    out: &mut Vec<F>,
) {
    let dirs: Vec<[F; 3]> = rays.iter().map(|r| r.direction.0.map(F::lit)).collect();
    let enc = field.encode_directions(&dirs);
    let dd = field.params().architecture().direction_input_dim();
    out.clear();
    for row in enc.chunks_exact(dd.max(1)) {
        for _ in 0..per_ray {
            out.extend_from_slice(row);
        }
    }
}

/// Buffers reused across iterations. `geo_c` holds the coarse geometry on
/// entry to [`loss_with_coarse`].
pub(crate) struct BatchScratch<F> {
    pub geo_c: Geometry<F>,
    geo_f: Geometry<F>,
    col_c: ColorPass<F>,
    col_f: ColorPass<F>,
    dirs: Vec<F>,
    back: BackwardScratch<F>,
    d_sigma_c: Vec<F>,
    d_logits_c: Vec<F>,
    d_rgb_c: Vec<F>,
    d_sigma_f: Vec<F>,
    d_logits_f: Vec<F>,
    d_rgb_f: Vec<F>,
}

impl<F> Default for BatchScratch<F> {
    fn default() -> Self {
        Self {
            geo_c: Geometry::default(),
            geo_f: Geometry::default(),
            col_c: ColorPass::default(),
            col_f: ColorPass::default(),
            dirs: Vec::new(),
            back: BackwardScratch::default(),
            d_sigma_c: Vec::new(),
            d_logits_c: Vec::new(),
            d_rgb_c: Vec::new(),
            d_sigma_f: Vec::new(),
            d_logits_f: Vec::new(),
            d_rgb_f: Vec::new(),
        }
    }
}

fn zeroed<F: Real>(v: &mut Vec<F>, len: usize) {
    v.clear();
    v.resize(len, F::zero());
}

/// Loss of `batch` and, when `grads` is given, its gradient accumulated
/// into `grads` (aligned with the parameter vector). A non-finite loss is
/// returned as is; callers decide whether that is fatal.
///
/// Coarse colors and logits are composited from the coarse samples alone;
/// fine ones from coarse and fine samples merged. Sample positions are
/// inputs, so the result is a smooth function of the parameters.
pub fn batch_loss_and_grad<F: Real>(
    params: &ParameterSet<F>,
    batch: &RayBatch<'_>,
    settings: &LossSettings,
    grads: Option<&mut [F]>,
) -> Result<BatchLoss> {
    batch.check()?;
    let field = Field::new(params);
    let pos = ray_points::<F>(batch.rays, batch.coarse_t, batch.coarse);
    let mut scratch = BatchScratch::default();
    field.geometry_into(&pos, &mut scratch.geo_c);
    loss_with_coarse(&field, batch, settings, &mut scratch, grads)
}

pub(crate) fn loss_with_coarse<F: Real>(
    field: &Field<'_, F>,
    batch: &RayBatch<'_>,
    settings: &LossSettings,
    scratch: &mut BatchScratch<F>,
    grads: Option<&mut [F]>,
) -> Result<BatchLoss> {
    let arch = *field.params().architecture();
    let l = arch.class_count;
    let b = batch.rays.len();
    let (kc, nf) = (batch.coarse, batch.fine);
    let km = kc + nf;
    let photometric = settings.photometric;

    let BatchScratch {
        geo_c,
        geo_f,
        col_c,
        col_f,
        dirs,
        back,
        d_sigma_c,
        d_logits_c,
        d_rgb_c,
        d_sigma_f,
        d_logits_f,
        d_rgb_f,
    } = scratch;
    if photometric {
        replicated_directions(field, batch.rays, kc, dirs);
        field.color_into(&geo_c.feature, dirs, b * kc, col_c);
    }
    if nf > 0 {
        let pos = ray_points::<F>(batch.rays, batch.fine_t, nf);
        field.geometry_into(&pos, geo_f);
        if photometric {
            replicated_directions(field, batch.rays, nf, dirs);
            field.color_into(&geo_f.feature, dirs, b * nf, col_f);
        }
    }
    let (col_c, col_f) = if photometric {
        (Some(&*col_c), Some(&*col_f))
    } else {
        (None, None)
    };
    let geo_c = &*geo_c;
    let geo_f = &*geo_f;

    let want_grad = grads.is_some();
    zeroed(d_sigma_c, b * kc);
    zeroed(d_logits_c, b * kc * l);
    zeroed(d_rgb_c, if photometric { b * kc * 3 } else { 0 });
    zeroed(d_sigma_f, b * nf);
    zeroed(d_logits_f, b * nf * l);
    zeroed(d_rgb_f, if photometric { b * nf * 3 } else { 0 });

    let mut loss_p = 0.0;
    let mut loss_s = 0.0;
    let mut sq_err = 0.0;
    let lambda = settings.lambda;
    let bgv = if settings.white_background {
        F::one()
    } else {
        F::zero()
    };

    let mut w = vec![F::zero(); km];
    let mut trans = vec![F::zero(); km + 1];
    let mut t = Vec::with_capacity(km);
    let mut src = Vec::with_capacity(km);
    let mut sigma_m = Vec::with_capacity(km);
    let mut logits_m = Vec::with_capacity(km * l);
    let mut rgb_m = Vec::with_capacity(km * 3);
    let mut d_sigma_m = vec![F::zero(); km];
    let mut d_logits_m = vec![F::zero(); km * l];
    let mut d_rgb_m = vec![F::zero(); km * 3];
    let mut d_sem = vec![0.0f64; l];

    for i in 0..b {
        let ray = &batch.rays[i];
        let gt = batch.colors[i];
        let label = batch.labels[i];
        let tc = &batch.coarse_t[i * kc..(i + 1) * kc];
        let tf = &batch.fine_t[i * nf..(i + 1) * nf];

        // two composites: coarse samples alone, then coarse + fine merged
        for pass in 0..2 {
            let n_pts;
            let dl: Vec<F>;
            if pass == 0 {
                n_pts = kc;
                dl = deltas(tc, ray.t_near, ray.t_far)
                    .into_iter()
                    .map(F::lit)
                    .collect();
                sigma_m.clear();
                sigma_m.extend_from_slice(&geo_c.sigma[i * kc..(i + 1) * kc]);
                logits_m.clear();
                logits_m.extend_from_slice(&geo_c.logits[i * kc * l..(i + 1) * kc * l]);
                rgb_m.clear();
                if let Some(c) = &col_c {
                    rgb_m.extend_from_slice(&c.rgb[i * kc * 3..(i + 1) * kc * 3]);
                }
            } else {
                n_pts = km;
                merge_into(tc, tf, ray.t_near, ray.t_far, &mut t, &mut src);
                dl = deltas(&t, ray.t_near, ray.t_far)
                    .into_iter()
                    .map(F::lit)
                    .collect();
                sigma_m.clear();
                logits_m.clear();
                rgb_m.clear();
                for s in &src {
                    let s = *s as usize;
                    let (geo, col, j) = if s < kc {
                        (geo_c, col_c, i * kc + s)
                    } else {
                        (geo_f, col_f, i * nf + s - kc)
                    };
                    sigma_m.push(geo.sigma[j]);
                    logits_m.extend_from_slice(&geo.logits[j * l..(j + 1) * l]);
                    if let Some(c) = col {
                        rgb_m.extend_from_slice(&c.rgb[j * 3..(j + 1) * 3]);
                    }
                }
            }
            weights_into(
                &sigma_m,
                &dl,
                None,
                &mut w[..n_pts],
                &mut trans[..n_pts + 1],
            );

            let mut d_color = None;
            if photometric {
                let mut c = [F::zero(); 3];
                let mut opacity = F::zero();
                for k in 0..n_pts {
                    for ch in 0..3 {
                        c[ch] += w[k] * rgb_m[3 * k + ch];
                    }
                    opacity += w[k];
                }
                let mut dc = [F::zero(); 3];
                for ch in 0..3 {
                    let v = (c[ch] + (F::one() - opacity) * bgv).to_f64_lossy();
                    let r = v - gt[ch];
                    loss_p += r * r;
                    if pass == 1 {
                        sq_err += r * r;
                    }
                    dc[ch] = F::lit(2.0 * r);
                }
                d_color = Some(dc);
            }

            let labeled = label != UNLABELED;
            if labeled {
                let mut s = vec![0.0f64; l];
                for k in 0..n_pts {
                    let wk = w[k].to_f64_lossy();
                    for c in 0..l {
                        s[c] += wk * logits_m[k * l + c].to_f64_lossy();
                    }
                }
                let probs = softmax_probs(&s);
                loss_s += focal_logit_grad(&probs, label as usize, settings.gamma, &mut d_sem);
            }
            if !want_grad {
                continue;
            }
            let d_sem_f: Vec<F> = if labeled {
                d_sem.iter().map(|g| F::lit(g * lambda)).collect()
            } else {
                vec![F::zero(); l]
            };

            if pass == 0 {
                composite_backward(
                    &dl,
                    &w[..kc],
                    &trans[..kc + 1],
                    photometric.then_some(&rgb_m[..]),
                    &logits_m,
                    settings.white_background,
                    d_color,
                    &d_sem_f,
                    &mut d_sigma_c[i * kc..(i + 1) * kc],
                    photometric.then(|| &mut d_rgb_c[i * kc * 3..(i + 1) * kc * 3]),
                    &mut d_logits_c[i * kc * l..(i + 1) * kc * l],
                );
            } else {
                d_sigma_m.iter_mut().for_each(|v| *v = F::zero());
                d_logits_m.iter_mut().for_each(|v| *v = F::zero());
                d_rgb_m.iter_mut().for_each(|v| *v = F::zero());
                composite_backward(
                    &dl,
                    &w[..km],
                    &trans[..km + 1],
                    photometric.then_some(&rgb_m[..]),
                    &logits_m,
                    settings.white_background,
                    d_color,
                    &d_sem_f,
                    &mut d_sigma_m,
                    photometric.then_some(&mut d_rgb_m[..]),
                    &mut d_logits_m,
                );
                for (k, s) in src.iter().enumerate() {
                    let s = *s as usize;
                    let (ds, dlg, dr, j) = if s < kc {
                        (&mut *d_sigma_c, &mut *d_logits_c, &mut *d_rgb_c, i * kc + s)
                    } else {
                        (
                            &mut *d_sigma_f,
                            &mut *d_logits_f,
                            &mut *d_rgb_f,
                            i * nf + s - kc,
                        )
                    };
                    ds[j] += d_sigma_m[k];
                    for c in 0..l {
                        dlg[j * l + c] += d_logits_m[k * l + c];
                    }
                    if photometric {
                        for ch in 0..3 {
                            dr[j * 3 + ch] += d_rgb_m[k * 3 + ch];
                        }
                    }
                }
            }
        }
    }

    let total = if photometric {
        total_loss(loss_p, loss_s, lambda)
    } else {
        lambda * loss_s
    };
    if let Some(grads) = grads {
        let up = OutputGrads {
            sigma: d_sigma_c,
            logits: d_logits_c,
            rgb: photometric.then_some(&d_rgb_c[..]),
        };
        field.backward_with(geo_c, col_c, up, grads, back)?;
        if nf > 0 {
            let up = OutputGrads {
                sigma: d_sigma_f,
                logits: d_logits_f,
                rgb: photometric.then_some(&d_rgb_f[..]),
            };
            field.backward_with(geo_f, col_f, up, grads, back)?;
        }
    }
    Ok(BatchLoss {
        loss_p: if photometric { loss_p } else { 0.0 },
        loss_s,
        total,
        fine_mse: if photometric {
            sq_err / (3 * b) as f64
        } else {
            f64::NAN
        },
    })
}
