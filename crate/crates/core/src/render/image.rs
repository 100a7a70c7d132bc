use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::RngCore;

use super::composite::{expected_depth, weights_into, RenderResult};
use super::edit::{EditMode, RenderSettings};
use crate::camera::{generate_ray, CameraIntrinsics, Pose, Ray};
use crate::error::{Error, Result};
use crate::field::{argmax, softmax_probs, Field, ParameterSet};
use crate::real::Real;
use crate::sampling::{
    deltas, merge_into, sample_fine_into, stratified_into, PdfScratch, SampleSource,
};
use crate::seed::{stream, Purpose, Rng};
use crate::ClassId;

/// Samples per ray for rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SamplingConfig {
    pub coarse: usize,
    pub fine: usize,
    /// Jitter samples inside their strata (training); off gives bin centers.
    pub perturb: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            coarse: 32,
            fine: 32,
            perturb: false,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse < 2 {
            return Err(Error::InvalidConfig(
                "need at least 2 coarse samples per ray".into(),
            ));
        }
        Ok(())
    }
}

/// A camera with its scene bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    pub t_near: f64,
    pub t_far: f64,
}

impl View {
    pub fn ray(&self, row: usize, col: usize) -> Result<Ray> {
        generate_ray(
            &self.intrinsics,
            &self.pose,
            row,
            col,
            self.t_near,
            self.t_far,
        )
    }
}

/// Row-major per-pixel outputs. Depth is `+inf` where nothing was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f32; 3]>,
    pub labels: Vec<ClassId>,
    pub depth: Vec<f32>,
    pub opacity: Vec<f32>,
}

impl RenderedImage {
    fn with_capacity(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            rgb: Vec::with_capacity(n),
            labels: Vec::with_capacity(n),
            depth: Vec::with_capacity(n),
            opacity: Vec::with_capacity(n),
        }
    }

    fn push<F: Real>(&mut self, r: &RenderResult<F>) {
        self.rgb.push(r.color.map(|c| c.to_f64_lossy() as f32));
        self.labels.push(r.label);
        self.depth.push(r.depth.to_f64_lossy() as f32);
        self.opacity.push(r.opacity.to_f64_lossy() as f32);
    }

    /// Stacks row bands rendered separately, top to bottom.
    pub fn concat_rows(parts: Vec<RenderedImage>) -> Result<RenderedImage> {
        let width = parts.first().map_or(0, |p| p.width);
        let height = parts.iter().map(|p| p.height).sum();
        let mut out = RenderedImage::with_capacity(width, height);
        for p in parts {
            if p.width != width {
                return Err(Error::DimensionMismatch(width, 0, p.width, 0));
            }
            out.rgb.extend(p.rgb);
            out.labels.extend(p.labels);
            out.depth.extend(p.depth);
            out.opacity.extend(p.opacity);
        }
        Ok(out)
    }
}

const CHUNK: usize = 256;

/// Renders every pixel of `view`. Deterministic for a given `seed`; each
/// pixel draws from its own random stream, so any split into row bands
/// (see [`render_rows`]) gives the same image.
pub fn render_image<F: Real>(
    params: &ParameterSet<F>,
    view: &View,
    settings: &RenderSettings,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<RenderedImage> {
    render_rows(
        params,
        view,
        settings,
        sampling,
        seed,
        0..view.intrinsics.height,
    )
}

/// Like [`render_image`] but skips the color branch entirely; `rgb` is left
/// black. Labels, depth and opacity are identical to a full render.
pub fn render_semantics<F: Real>(
    params: &ParameterSet<F>,
    view: &View,
    settings: &RenderSettings,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<RenderedImage> {
    render_band(
        params,
        view,
        settings,
        sampling,
        seed,
        0..view.intrinsics.height,
        false,
    )
}

/// Renders the rows in `rows` only; the result has `rows.len()` rows.
pub fn render_rows<F: Real>(
    params: &ParameterSet<F>,
    view: &View,
    settings: &RenderSettings,
    sampling: &SamplingConfig,
    seed: u64,
    rows: Range<usize>,
) -> Result<RenderedImage> {
    render_band(params, view, settings, sampling, seed, rows, true)
}

fn render_band<F: Real>(
    params: &ParameterSet<F>,
    view: &View,
    settings: &RenderSettings,
    sampling: &SamplingConfig,
    seed: u64,
    rows: Range<usize>,
    with_color: bool,
) -> Result<RenderedImage> {
    settings.validate(params.architecture().class_count)?;
    sampling.validate()?;
    view.intrinsics.validate()?;
    let width = view.intrinsics.width;
    if rows.end > view.intrinsics.height {
        return Err(Error::PixelOutOfBounds {
            row: rows.end - 1,
            col: 0,
            width,
            height: view.intrinsics.height,
        });
    }
    let mut out = RenderedImage::with_capacity(width, rows.len());
    let mut renderer = RayRenderer::new(Field::new(params), *settings, *sampling, seed);
    renderer.with_color = with_color;
    let pixels: Vec<u64> = rows
        .flat_map(|r| (0..width).map(move |c| (r * width + c) as u64))
        .collect();
    let mut rays = Vec::with_capacity(CHUNK);
    let mut results = Vec::with_capacity(CHUNK);
    for ids in pixels.chunks(CHUNK) {
        rays.clear();
        for id in ids {
            let (r, c) = (*id as usize / width, *id as usize % width);
            rays.push(view.ray(r, c)?);
        }
        results.clear();
        renderer.render(&rays, ids, &mut results);
        for r in &results {
            out.push(r);
        }
    }
    Ok(out)
}

/// Renders arbitrary rays; `ray_ids` select each ray's random stream.
pub fn render_rays<F: Real>(
    params: &ParameterSet<F>,
    rays: &[Ray],
    ray_ids: &[u64],
    settings: &RenderSettings,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<Vec<RenderResult<F>>> {
    if rays.len() != ray_ids.len() {
        return Err(Error::LengthMismatch {
            what: "ray ids",
            expected: rays.len(),
            found: ray_ids.len(),
        });
    }
    settings.validate(params.architecture().class_count)?;
    sampling.validate()?;
    let mut renderer = RayRenderer::new(Field::new(params), *settings, *sampling, seed);
    let mut out = Vec::with_capacity(rays.len());
    for (r, ids) in rays.chunks(CHUNK).zip(ray_ids.chunks(CHUNK)) {
        renderer.render(r, ids, &mut out);
    }
    Ok(out)
}

/// Coarse pass, resampling, fine pass and compositing for batches of rays.
///
/// Edit masks apply in both passes, so fine samples concentrate on what is
/// actually displayed. Color is evaluated only for points that keep their
/// density on rays that will show it; under unique display that is just
/// the rays labeled with the target class.
struct RayRenderer<'a, F> {
    field: Field<'a, F>,
    settings: RenderSettings,
    sampling: SamplingConfig,
    seed: u64,
    with_color: bool,
    pdf: PdfScratch,
}

struct MergedRay<F> {
    src: Vec<SampleSource>,
    mask: Vec<bool>,
    w: Vec<F>,
}

impl<'a, F: Real> RayRenderer<'a, F> {
    fn new(
        field: Field<'a, F>,
        settings: RenderSettings,
        sampling: SamplingConfig,
        seed: u64,
    ) -> Self {
        Self {
            field,
            settings,
            sampling,
            seed,
            with_color: true,
            pdf: PdfScratch::default(),
        }
    }

    fn point_mask(&self, logits: &[F], l: usize, mask: &mut Vec<bool>) {
        mask.clear();
        let bg = self.settings.bg;
        match self.settings.edit {
            EditMode::FullScene => mask.resize(logits.len() / l, true),
            mode => mask.extend(
                logits
                    .chunks_exact(l)
                    .map(|row| mode.keeps(argmax(row) as ClassId, bg)),
            ),
        }
    }

    fn render(&mut self, rays: &[Ray], ids: &[u64], out: &mut Vec<RenderResult<F>>) {
        let n = rays.len();
        let kc = self.sampling.coarse;
        let nf = self.sampling.fine;
        let l = self.field.class_count();
        let mut rngs: Vec<Option<Rng>> = ids
            .iter()
            .map(|id| {
                self.sampling
                    .perturb
                    .then(|| stream(self.seed, Purpose::Render, *id))
            })
            .collect();

        let mut tc: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n * kc);
        for (ray, rng) in rays.iter().zip(&mut rngs) {
            let mut t = Vec::with_capacity(kc);
            stratified_into(
                ray.t_near,
                ray.t_far,
                kc,
                rng.as_mut().map(|r| r as &mut dyn RngCore),
                &mut t,
            );
            push_points(ray, &t, &mut pos);
            tc.push(t);
        }
        let geo_c = self.field.geometry(&pos);

        let mut tf: Vec<Vec<f64>> = Vec::with_capacity(n);
        let geo_f = if nf > 0 {
            pos.clear();
            let mut mask = Vec::new();
            let mut w = vec![F::zero(); kc];
            let mut trans = vec![F::zero(); kc + 1];
            for (i, (ray, rng)) in rays.iter().zip(&mut rngs).enumerate() {
                let d: Vec<F> = deltas(&tc[i], ray.t_near, ray.t_far)
                    .into_iter()
                    .map(F::lit)
                    .collect();
                self.point_mask(&geo_c.logits[i * kc * l..(i + 1) * kc * l], l, &mut mask);
                weights_into(
                    &geo_c.sigma[i * kc..(i + 1) * kc],
                    &d,
                    Some(&mask),
                    &mut w,
                    &mut trans,
                );
                let w64: Vec<f64> = w.iter().map(|v| v.to_f64_lossy()).collect();
                let mut t = Vec::with_capacity(nf);
                sample_fine_into(
                    &tc[i],
                    &w64,
                    ray.t_near,
                    ray.t_far,
                    nf,
                    rng.as_mut().map(|r| r as &mut dyn RngCore),
                    &mut self.pdf,
                    &mut t,
                );
                push_points(ray, &t, &mut pos);
                tf.push(t);
            }
            Some(self.field.geometry(&pos))
        } else {
            tf.resize(n, Vec::new());
            None
        };

        // composite semantics on the merged samples
        let km = kc + nf;
        let base = out.len();
        let mut merged: Vec<MergedRay<F>> = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(km);
        let mut sigma = Vec::with_capacity(km);
        let mut logits = Vec::with_capacity(km * l);
        let mut trans = vec![F::zero(); km + 1];
        for (i, ray) in rays.iter().enumerate() {
            let mut src = Vec::with_capacity(km);
            merge_into(&tc[i], &tf[i], ray.t_near, ray.t_far, &mut t, &mut src);
            let d: Vec<F> = deltas(&t, ray.t_near, ray.t_far)
                .into_iter()
                .map(F::lit)
                .collect();
            sigma.clear();
            logits.clear();
            for s in &src {
                let (geo, j) = locate(*s, i, kc, nf, &geo_c, geo_f.as_ref());
                sigma.push(geo.sigma[j]);
                logits.extend_from_slice(&geo.logits[j * l..(j + 1) * l]);
            }
            let mut mask = Vec::with_capacity(km);
            self.point_mask(&logits, l, &mut mask);
            let mut w = vec![F::zero(); km];
            weights_into(&sigma, &d, Some(&mask), &mut w, &mut trans);
            let mut sem = vec![F::zero(); l];
            for (wk, row) in w.iter().zip(logits.chunks_exact(l)) {
                for (a, v) in sem.iter_mut().zip(row) {
                    *a += *wk * *v;
                }
            }
            let tt: Vec<F> = t.iter().map(|v| F::lit(*v)).collect();
            out.push(RenderResult {
                color: [F::zero(); 3],
                semantic_probs: softmax_probs(&sem),
                label: argmax(&sem) as ClassId,
                depth: expected_depth(&w, &tt),
                opacity: w.iter().copied().sum(),
                weights: w.clone(),
            });
            merged.push(MergedRay { src, mask, w });
        }

        if !self.with_color {
            if let EditMode::UniqueDisplay { ob } = self.settings.edit {
                let sentinel = self.settings.sentinel.map(F::lit);
                for res in &mut out[base..] {
                    if res.label != ob {
                        res.color = sentinel;
                    }
                }
            }
            return;
        }

        // color only where it will be shown
        let width = self.field.params().architecture().trunk_width;
        let dir_dim = self.field.params().architecture().direction_input_dim();
        let sentinel = self.settings.sentinel.map(F::lit);
        let mut feature = Vec::new();
        let mut dir_enc = Vec::new();
        let mut owners: Vec<(usize, usize)> = Vec::new();
        for (i, ray) in rays.iter().enumerate() {
            let res = &mut out[base + i];
            let shown = match self.settings.edit {
                EditMode::UniqueDisplay { ob } => res.label == ob,
                _ => true,
            };
            if !shown {
                res.color = sentinel;
                continue;
            }
            let d = ray.direction;
            let enc = self
                .field
                .encode_directions(&[[F::lit(d[0]), F::lit(d[1]), F::lit(d[2])]]);
            let m = &merged[i];
            for (k, s) in m.src.iter().enumerate() {
                if !m.mask[k] {
                    continue;
                }
                let (geo, j) = locate(*s, i, kc, nf, &geo_c, geo_f.as_ref());
                feature.extend_from_slice(&geo.feature[j * width..(j + 1) * width]);
                dir_enc.extend_from_slice(&enc[..dir_dim]);
                owners.push((i, k));
            }
        }
        let col = self.field.color(&feature, &dir_enc, owners.len());
        let mut acc = vec![[F::zero(); 3]; n];
        for (p, (i, k)) in owners.iter().enumerate() {
            let wk = merged[*i].w[*k];
            for ch in 0..3 {
                acc[*i][ch] += wk * col.rgb[3 * p + ch];
            }
        }
        for (i, c) in acc.into_iter().enumerate() {
            let res = &mut out[base + i];
            let shown = match self.settings.edit {
                EditMode::UniqueDisplay { ob } => res.label == ob,
                _ => true,
            };
            if !shown {
                continue;
            }
            let mut c = c;
            if self.settings.white_background {
                for v in &mut c {
                    *v += F::one() - res.opacity;
                }
            }
            res.color = c;
        }
    }
}

fn push_points<F: Real>(ray: &Ray, t: &[f64], out: &mut Vec<[F; 3]>) {
    for tk in t {
        let p = ray.at(*tk);
        out.push([F::lit(p[0]), F::lit(p[1]), F::lit(p[2])]);
    }
}

fn locate<'g, F>(
    s: SampleSource,
    ray: usize,
    kc: usize,
    nf: usize,
    coarse: &'g crate::field::Geometry<F>,
    fine: Option<&'g crate::field::Geometry<F>>,
) -> (&'g crate::field::Geometry<F>, usize) {
    let s = s as usize;
    if s < kc {
        (coarse, ray * kc + s)
    } else {
        (
            fine.expect("fine sources imply a fine pass"),
            ray * nf + s - kc,
        )
    }
}
