//! Quadrature points along rays and the order in which training rays are
//! visited.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::camera::Ray;
use crate::error::{Error, Result};
use crate::seed::{stream, Purpose};

/// Ascending sample distances with their quadrature widths.
///
/// `delta[k] = t[k+1] - t[k]`; the last width runs to `t_far`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraturePoints {
    pub t: Vec<f64>,
    pub delta: Vec<f64>,
    pub t_near: f64,
    pub t_far: f64,
}

impl QuadraturePoints {
    pub fn from_sorted(t: Vec<f64>, t_near: f64, t_far: f64) -> Self {
        let delta = deltas(&t, t_near, t_far);
        Self {
            t,
            delta,
            t_near,
            t_far,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn min_gap(t_near: f64, t_far: f64) -> f64 {
    (t_far - t_near) * 1e-9
}

pub(crate) fn deltas(t: &[f64], t_near: f64, t_far: f64) -> Vec<f64> {
    let eps = min_gap(t_near, t_far);
    let mut out = Vec::with_capacity(t.len());
    for k in 0..t.len() {
        let next = if k + 1 < t.len() { t[k + 1] } else { t_far };
        out.push((next - t[k]).max(eps));
    }
    out
}

/// One sample per equal-width bin of `[t_near, t_far]`: uniform within the
/// bin when `rng` is given, the bin midpoint otherwise.
pub fn stratified_samples(
    ray: &Ray,
    k: usize,
    rng: Option<&mut dyn RngCore>,
) -> Result<QuadraturePoints> {
    if k < 2 {
        return Err(Error::InvalidConfig(
            "need at least 2 coarse samples".into(),
        ));
    }
    let mut t = Vec::with_capacity(k);
    stratified_into(ray.t_near, ray.t_far, k, rng, &mut t);
    Ok(QuadraturePoints::from_sorted(t, ray.t_near, ray.t_far))
}

pub(crate) fn stratified_into(
    t_near: f64,
    t_far: f64,
    k: usize,
    mut rng: Option<&mut dyn RngCore>,
    out: &mut Vec<f64>,
) {
    out.clear();
    let width = (t_far - t_near) / k as f64;
    for i in 0..k {
        let u: f64 = match rng.as_deref_mut() {
            Some(r) => r.gen(),
            None => 0.5,
        };
        let lo = t_near + width * i as f64;
        let hi = if i + 1 == k {
            t_far
        } else {
            t_near + width * (i + 1) as f64
        };
        let t = lo + u * width;
        // keep the sample inside its own bin despite rounding
        out.push(if t >= hi { lo + 0.5 * (hi - lo) } else { t });
    }
}

/// Fine samples drawn by inverse-CDF from the piecewise-constant density
/// that gives coarse sample `k` the bin between its neighbours' midpoints
/// (the outer bins reach `t_near` / `t_far`) with mass `weights[k]`.
///
/// Uses one stratified uniform per sample (jittered with `rng`, centered
/// otherwise), so the result is sorted. Weights that are all zero or not
/// finite fall back to a uniform density.
pub fn sample_fine(
    coarse: &QuadraturePoints,
    weights: &[f64],
    nf: usize,
    rng: Option<&mut dyn RngCore>,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(nf);
    let mut scratch = PdfScratch::default();
    sample_fine_into(
        &coarse.t,
        weights,
        coarse.t_near,
        coarse.t_far,
        nf,
        rng,
        &mut scratch,
        &mut out,
    );
    out
}

#[derive(Default)]
pub(crate) struct PdfScratch {
    edges: Vec<f64>,
    cdf: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_fine_into(
    t: &[f64],
    weights: &[f64],
    t_near: f64,
    t_far: f64,
    nf: usize,
    mut rng: Option<&mut dyn RngCore>,
    scratch: &mut PdfScratch,
    out: &mut Vec<f64>,
) {
    out.clear();
    let k = t.len();
    debug_assert_eq!(weights.len(), k);
    let edges = &mut scratch.edges;
    edges.clear();
    edges.push(t_near);
    for i in 1..k {
        edges.push(0.5 * (t[i - 1] + t[i]));
    }
    edges.push(t_far);

    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let cdf = &mut scratch.cdf;
    cdf.clear();
    cdf.push(0.0);
    if total > 0.0 && total.is_finite() {
        let mut acc = 0.0;
        for w in weights {
            acc += w.max(0.0);
            cdf.push(acc / total);
        }
    } else {
        log::debug!("degenerate coarse weights (sum {total}); using uniform fine samples");
        // uniform in distance, not in bin index
        let span = t_far - t_near;
        for e in &edges[1..] {
            cdf.push((e - t_near) / span);
        }
    }
    cdf[k] = 1.0;

    for i in 0..nf {
        let jitter: f64 = match rng.as_deref_mut() {
            Some(r) => r.gen(),
            None => 0.5,
        };
        let u = ((i as f64 + jitter) / nf as f64).min(1.0 - f64::EPSILON);
        // first index whose cdf exceeds u; bin is the one before it
        let hi = cdf.partition_point(|c| *c <= u).clamp(1, k);
        let bin = hi - 1;
        let (c0, c1) = (cdf[bin], cdf[bin + 1]);
        let frac = if c1 > c0 {
            ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let (e0, e1) = (edges[bin], edges[bin + 1]);
        let s = e0 + frac * (e1 - e0);
        out.push(s.clamp(t_near, t_far));
    }
    // inverse CDF is monotone in u; this only guards rounding
    out.sort_by(f64::total_cmp);
}

/// Fine pass sample set: `nf` inverse-CDF samples from the coarse weights,
/// merged with the coarse samples. The second vector records where each
/// merged sample came from (see [`SampleSource`]).
pub fn hierarchical_resample(
    coarse: &QuadraturePoints,
    weights: &[f64],
    nf: usize,
    rng: Option<&mut dyn RngCore>,
) -> (QuadraturePoints, Vec<SampleSource>) {
    let fine = sample_fine(coarse, weights, nf, rng);
    merge_samples(&coarse.t, &fine, coarse.t_near, coarse.t_far)
}

/// Origin of a merged sample: coarse index `< coarse_len`, otherwise
/// `coarse_len + fine index`.
pub type SampleSource = u32;

/// Merges sorted coarse and fine distances into one strictly ascending set.
pub fn merge_samples(
    coarse: &[f64],
    fine: &[f64],
    t_near: f64,
    t_far: f64,
) -> (QuadraturePoints, Vec<SampleSource>) {
    let mut t = Vec::with_capacity(coarse.len() + fine.len());
    let mut src = Vec::with_capacity(t.capacity());
    merge_into(coarse, fine, t_near, t_far, &mut t, &mut src);
    (QuadraturePoints::from_sorted(t, t_near, t_far), src)
}

pub(crate) fn merge_into(
    coarse: &[f64],
    fine: &[f64],
    t_near: f64,
    t_far: f64,
    t: &mut Vec<f64>,
    src: &mut Vec<SampleSource>,
) {
    t.clear();
    src.clear();
    let eps = min_gap(t_near, t_far);
    let (mut i, mut j) = (0, 0);
    while i < coarse.len() || j < fine.len() {
        let take_coarse = j >= fine.len() || (i < coarse.len() && coarse[i] <= fine[j]);
        let (mut v, s) = if take_coarse {
            i += 1;
            (coarse[i - 1], (i - 1) as SampleSource)
        } else {
            j += 1;
            (fine[j - 1], (coarse.len() + j - 1) as SampleSource)
        };
        if let Some(&prev) = t.last() {
            if v <= prev {
                v = prev + eps;
            }
        }
        t.push(v);
        src.push(s);
    }
}

/// Order in which training rays are visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RayOrder {
    /// A fresh uniform permutation of every record each epoch.
    #[default]
    Shuffled,
    /// Records in (frame, row, col) order; only useful as an ablation.
    RowMajor,
}

/// Record order for one epoch. Records are assumed to be stored in
/// (frame, row, col) order, so `RowMajor` is the identity.
pub fn epoch_permutation(n: usize, order: RayOrder, seed: u64, epoch: u64) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..n as u32).collect();
    if order == RayOrder::Shuffled {
        let mut rng = stream(seed, Purpose::Shuffle, epoch);
        perm.shuffle(&mut rng);
    }
    perm
}

/// Stateless batch schedule: iteration `i` takes records
/// `[i * batch, (i + 1) * batch)` of the concatenation of epoch
/// permutations, so resuming at any iteration reproduces the same batches.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    n: usize,
    batch: usize,
    order: RayOrder,
    seed: u64,
    cached_epoch: Option<(u64, Vec<u32>)>,
}

impl BatchSchedule {
    pub fn new(n: usize, batch: usize, order: RayOrder, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if batch == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(Self {
            n,
            batch,
            order,
            seed,
            cached_epoch: None,
        })
    }

    pub fn batch(&mut self, iteration: usize, out: &mut Vec<u32>) {
        out.clear();
        let start = iteration as u64 * self.batch as u64;
        for g in start..start + self.batch as u64 {
            let epoch = g / self.n as u64;
            let pos = (g % self.n as u64) as usize;
            if self.cached_epoch.as_ref().map(|(e, _)| *e) != Some(epoch) {
                self.cached_epoch = Some((
                    epoch,
                    epoch_permutation(self.n, self.order, self.seed, epoch),
                ));
            }
            out.push(self.cached_epoch.as_ref().unwrap().1[pos]);
        }
    }
}
