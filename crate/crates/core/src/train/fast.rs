//! Target-focused supervision: negative rays recolored to one high-contrast
//! color and thinned out, plus label thinning for weak supervision.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::scene::SceneDataset;
use crate::seed::{stream, Purpose};
use crate::{ClassId, UNLABELED};

/// Written as `"adaptive"` or an `[r, g, b]` array in config files.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ResetColor {
    /// Chosen by [`find_reset_color`] from the mean target color.
    #[default]
    Adaptive,
    /// 8-bit RGB.
    Fixed([u8; 3]),
}

#[cfg(feature = "serde")]
impl serde::Serialize for ResetColor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            ResetColor::Adaptive => s.serialize_str("adaptive"),
            ResetColor::Fixed(c) => c.serialize(s),
        }
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ResetColor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(alloc::string::String),
            Rgb([u8; 3]),
        }
        match Repr::deserialize(d)? {
            Repr::Name(n) if n == "adaptive" => Ok(ResetColor::Adaptive),
            Repr::Name(n) => Err(serde::de::Error::custom(alloc::format!(
                "reset color must be \"adaptive\" or [r, g, b], got \"{n}\""
            ))),
            Repr::Rgb(c) => Ok(ResetColor::Fixed(c)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct FastTrainConfig {
    /// Classes whose rays are positives; empty means every non-background class.
    pub target_classes: Vec<ClassId>,
    /// Fraction of negative rays kept.
    pub negative_sampling_rate: f64,
    pub reset_color: ResetColor,
}

impl Default for FastTrainConfig {
    fn default() -> Self {
        Self {
            target_classes: Vec::new(),
            negative_sampling_rate: 0.15,
            reset_color: ResetColor::Adaptive,
        }
    }
}

impl FastTrainConfig {
    pub fn validate(&self, class_count: usize) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.negative_sampling_rate > 0.0 && self.negative_sampling_rate <= 1.0) {
            problems.push(alloc::format!(
                "negative_sampling_rate {} must lie in (0, 1]",
                self.negative_sampling_rate
            ));
        }
        if let Some(t) = self
            .target_classes
            .iter()
            .find(|t| **t as usize >= class_count)
        {
            problems.push(alloc::format!(
                "fast target class {t} is not below class_count {class_count}"
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    pub fn resolved_targets(&self, ds: &SceneDataset) -> Vec<ClassId> {
        if self.target_classes.is_empty() {
            (0..ds.class_count as ClassId)
                .filter(|c| *c != ds.background_class)
                .collect()
        } else {
            self.target_classes.clone()
        }
    }
}

/// Share of all pixels, over all frames, labeled with a target class.
pub fn area_ratio(ds: &SceneDataset, targets: &[ClassId]) -> Result<f64> {
    let total: usize = ds.frames.iter().map(|f| f.labels.len()).sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let hits: usize = ds
        .frames
        .iter()
        .map(|f| f.labels.iter().filter(|l| targets.contains(l)).count())
        .sum();
    Ok(hits as f64 / total as f64)
}

/// Mean 8-bit color of all target-labeled pixels.
pub fn mean_target_color(ds: &SceneDataset, targets: &[ClassId]) -> Result<[f64; 3]> {
    let mut sum = [0u64; 3];
    let mut n = 0u64;
    for f in &ds.frames {
        for (c, l) in f.rgb.iter().zip(&f.labels) {
            if targets.contains(l) {
                for i in 0..3 {
                    sum[i] += c[i] as u64;
                }
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoTargetPixels);
    }
    Ok(sum.map(|s| s as f64 / n as f64))
}

/// Weighted-Euclidean RGB color difference on the 8-bit scale, with the red
/// and blue weights depending on the mean red level `(R1 + R2) / 2`.
pub fn color_difference(c1: [f64; 3], c2: [f64; 3]) -> Result<f64> {
    if let Some(bad) = c1.iter().chain(&c2).find(|v| !(0.0..=255.0).contains(*v)) {
        return Err(Error::ColorOutOfRange(*bad));
    }
    Ok(delta_c(c1, c2))
}

fn delta_c(c1: [f64; 3], c2: [f64; 3]) -> f64 {
    let tau = 0.5 * (c1[0] + c2[0]);
    let (dr, dg, db) = (c1[0] - c2[0], c1[1] - c2[1], c1[2] - c2[2]);
    ((2.0 + tau / 256.0) * dr * dr + 4.0 * dg * dg + (2.0 + (255.0 - tau) / 256.0) * db * db).sqrt()
}

/// Candidate reset colors: the 17-level grid `255 i / 16` per channel,
/// which contains all eight cube corners.
pub fn reset_color_candidates() -> impl Iterator<Item = [f64; 3]> {
    let level = |i: usize| 255.0 * i as f64 / 16.0;
    (0..17).flat_map(move |r| {
        (0..17).flat_map(move |g| (0..17).map(move |b| [level(r), level(g), level(b)]))
    })
}

/// The candidate farthest from `mean` in [`color_difference`]; ties go to
/// the lexicographically smallest `(R, G, B)`.
pub fn find_reset_color(mean: [f64; 3]) -> Result<[f64; 3]> {
    color_difference(mean, mean)?;
    let mut best = [0.0; 3];
    let mut best_d = f64::NEG_INFINITY;
    // candidates are generated in lexicographic order, so strict > keeps the first maximum
    for c in reset_color_candidates() {
        let d = delta_c(mean, c);
        if d > best_d {
            best = c;
            best_d = d;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleClass {
    Positive,
    Negative,
    /// Ordinary supervision outside fast training.
    FullScene,
}

/// One supervised ray: a pixel of a frame with its target color and label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySupervision {
    pub frame: u32,
    pub pixel: u32,
    /// `[0, 1]` scale; the reset color for negatives in fast training.
    pub gt_color: [f32; 3],
    pub gt_label: ClassId,
    pub sample_class: SampleClass,
}

fn unit(c: [u8; 3]) -> [f32; 3] {
    c.map(|v| v as f32 / 255.0)
}

/// Every pixel of every frame, in (frame, row, col) order.
pub fn full_scene_supervision(ds: &SceneDataset) -> Vec<RaySupervision> {
    let mut out = Vec::with_capacity(ds.frames.len() * ds.intrinsics.pixel_count());
    for (fi, f) in ds.frames.iter().enumerate() {
        for (p, (c, l)) in f.rgb.iter().zip(&f.labels).enumerate() {
            out.push(RaySupervision {
                frame: fi as u32,
                pixel: p as u32,
                gt_color: unit(*c),
                gt_label: *l,
                sample_class: SampleClass::FullScene,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastSupervision {
    pub records: Vec<RaySupervision>,
    /// 8-bit scale.
    pub reset_color: [f64; 3],
    pub targets: Vec<ClassId>,
    pub positives: usize,
    pub negatives_total: usize,
}

/// Drops unlabeled rays, keeps positives as they are, recolors negatives to
/// the reset color and keeps each negative with the configured probability.
pub fn prepare_fast_training(
    ds: &SceneDataset,
    fast: &FastTrainConfig,
    seed: u64,
) -> Result<FastSupervision> {
    fast.validate(ds.class_count)?;
    let targets = fast.resolved_targets(ds);
    let positives: usize = ds
        .frames
        .iter()
        .map(|f| f.labels.iter().filter(|l| targets.contains(l)).count())
        .sum();
    if positives == 0 {
        return Err(Error::NoPositiveRays);
    }
    let reset = match fast.reset_color {
        ResetColor::Adaptive => find_reset_color(mean_target_color(ds, &targets)?)?,
        ResetColor::Fixed(c) => c.map(f64::from),
    };
    let (records, negatives_total) =
        fast_records(ds, &targets, fast.negative_sampling_rate, reset, seed);
    Ok(FastSupervision {
        records,
        reset_color: reset,
        targets,
        positives,
        negatives_total,
    })
}

/// Record selection for fast training with an already chosen reset color
/// (8-bit scale).
pub(crate) fn fast_records(
    ds: &SceneDataset,
    targets: &[ClassId],
    rate: f64,
    reset: [f64; 3],
    seed: u64,
) -> (Vec<RaySupervision>, usize) {
    let reset_unit = reset.map(|v| (v / 255.0) as f32);
    let mut rng = stream(seed, Purpose::NegativeSample, 0);
    let mut records = Vec::new();
    let mut negatives_total = 0;
    for (fi, f) in ds.frames.iter().enumerate() {
        for (p, (c, l)) in f.rgb.iter().zip(&f.labels).enumerate() {
            if *l == UNLABELED {
                continue;
            }
            let (frame, pixel) = (fi as u32, p as u32);
            if targets.contains(l) {
                records.push(RaySupervision {
                    frame,
                    pixel,
                    gt_color: unit(*c),
                    gt_label: *l,
                    sample_class: SampleClass::Positive,
                });
            } else {
                negatives_total += 1;
                // always draw so the kept set only depends on the rate
                let u: f64 = rng.gen();
                if u < rate {
                    records.push(RaySupervision {
                        frame,
                        pixel,
                        gt_color: reset_unit,
                        gt_label: *l,
                        sample_class: SampleClass::Negative,
                    });
                }
            }
        }
    }
    (records, negatives_total)
}

/// Keeps each label with probability `rate` and marks the rest
/// [`UNLABELED`]; colors are untouched.
pub fn subsample_labels(ds: &SceneDataset, rate: f64, seed: u64) -> Result<SceneDataset> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "label sampling rate {rate} must lie in (0, 1]"
        )));
    }
    let mut out = ds.clone();
    if rate == 1.0 {
        return Ok(out);
    }
    let mut rng = stream(seed, Purpose::LabelSubsample, 0);
    for f in &mut out.frames {
        for l in &mut f.labels {
            if *l != UNLABELED {
                let u: f64 = rng.gen();
                if u >= rate {
                    *l = UNLABELED;
                }
            }
        }
    }
    Ok(out)
}
