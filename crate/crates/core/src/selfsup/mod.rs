//! Correcting rendered label maps and feeding them back as supervision.
//!
//! Unique-display renders of a target class are cleaned with a morphological
//! opening then closing, the remaining foreground is clustered with
//! k-means++ on pixel coordinates, and clusters that are too small are
//! dropped as noise.

mod kmeans;
mod morph;

pub use kmeans::{kmeanspp_cluster, seeding_probabilities, Clustering, Point2, MAX_ITERATIONS};
pub use morph::{disk, morph_close, morph_dilate, morph_erode, morph_open, BinaryMask};

use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::field::ParameterSet;
use crate::real::Real;
use crate::render::{render_semantics, EditMode, RenderSettings, SamplingConfig};
use crate::scene::SceneDataset;
use crate::seed::{stream, Purpose};
use crate::{ClassId, UNLABELED};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SelfSupSchedule {
    /// First iteration at which a correction runs.
    pub warmup_iterations: usize,
    /// Iterations between corrections.
    pub interval: usize,
    pub structuring_element_radius: usize,
    /// Clusters per target class.
    pub k: usize,
    /// Clusters holding less than this share of the foreground are dropped.
    pub min_cluster_fraction: f64,
    /// Classes to correct; empty means every non-background class.
    pub targets: Vec<ClassId>,
    /// Keep human labels where a correction would flip them between the
    /// target and anything else; only unlabeled pixels change.
    pub trust_human_labels: bool,
}

impl Default for SelfSupSchedule {
    fn default() -> Self {
        Self {
            warmup_iterations: 2000,
            interval: 1000,
            structuring_element_radius: 1,
            k: 1,
            min_cluster_fraction: 0.02,
            targets: Vec::new(),
            trust_human_labels: false,
        }
    }
}

impl SelfSupSchedule {
    pub fn validate(&self, class_count: usize) -> Result<()> {
        let mut problems = Vec::new();
        if self.interval == 0 {
            problems.push(alloc::string::String::from(
                "selfsup interval must be at least 1",
            ));
        }
        if self.structuring_element_radius == 0 {
            problems.push("selfsup structuring_element_radius must be at least 1".into());
        }
        if self.k == 0 {
            problems.push("selfsup k must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.min_cluster_fraction) {
            problems.push("selfsup min_cluster_fraction must lie in [0, 1)".into());
        }
        if let Some(t) = self.targets.iter().find(|t| **t as usize >= class_count) {
            problems.push(alloc::format!(
                "selfsup target class {t} is not below class_count {class_count}"
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    /// Whether a correction runs once `completed` iterations are done.
    pub fn is_due(&self, completed: usize) -> bool {
        completed > 0
            && completed >= self.warmup_iterations
            && (completed - self.warmup_iterations) % self.interval.max(1) == 0
    }

    pub fn resolved_targets(&self, class_count: usize, background: ClassId) -> Vec<ClassId> {
        if self.targets.is_empty() {
            (0..class_count as ClassId)
                .filter(|c| *c != background)
                .collect()
        } else {
            self.targets.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedMap {
    pub labels: Vec<ClassId>,
    /// The target class was absent after cleaning; `labels` is the input.
    pub empty_foreground: bool,
    /// Foreground pixels dropped because their cluster was too small.
    pub dropped_pixels: usize,
}

/// Cleans the `ob` region of a rendered label map.
///
/// Pixels that end up in the cleaned `ob` region are labeled `ob`; pixels
/// that were `ob` but did not survive become `bg`. Everything else is left
/// as rendered.
#[allow(clippy::too_many_arguments)]
pub fn correct_semantic_map(
    rendered: &[ClassId],
    width: usize,
    height: usize,
    ob: ClassId,
    bg: ClassId,
    schedule: &SelfSupSchedule,
    rng: &mut dyn RngCore,
) -> Result<CorrectedMap> {
    if rendered.len() != width * height {
        return Err(Error::LengthMismatch {
            what: "label map",
            expected: width * height,
            found: rendered.len(),
        });
    }
    let radius = schedule.structuring_element_radius.max(1);
    let raw = BinaryMask::new(width, height, rendered.iter().map(|l| *l == ob).collect())?;
    let cleaned = morph_close(&morph_open(&raw, radius), radius);
    let coords: Vec<Point2> = (0..width * height)
        .filter(|i| cleaned.data[*i])
        .map(|i| [(i / width) as f64, (i % width) as f64])
        .collect();
    if coords.is_empty() {
        log::warn!("class {ob}: nothing left after cleaning; label map kept as rendered");
        return Ok(CorrectedMap {
            labels: rendered.to_vec(),
            empty_foreground: true,
            dropped_pixels: 0,
        });
    }
    let k = schedule.k.min(coords.len());
    let clusters = kmeanspp_cluster(&coords, k, rng)?;
    let sizes = clusters.sizes();
    let min_size = schedule.min_cluster_fraction * coords.len() as f64;
    let mut keep = cleaned.clone();
    let mut dropped = 0;
    for (p, a) in coords.iter().zip(&clusters.assignments) {
        if (sizes[*a] as f64) < min_size {
            keep.data[p[0] as usize * width + p[1] as usize] = false;
            dropped += 1;
        }
    }
    let labels = rendered
        .iter()
        .zip(&keep.data)
        .map(|(l, k)| match (*k, *l == ob) {
            (true, _) => ob,
            (false, true) => bg,
            (false, false) => *l,
        })
        .collect();
    Ok(CorrectedMap {
        labels,
        empty_foreground: false,
        dropped_pixels: dropped,
    })
}

/// Outcome of one correction pass over the training frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleReport {
    pub changed_pixels: usize,
    /// Cleaned unique-display label map per (frame, target), for inspection.
    pub corrected: Vec<(usize, ClassId, Vec<ClassId>)>,
}

/// Renders every training frame, corrects its target regions and rewrites
/// `supervision` (one label map per frame of `dataset`) in place.
///
/// For each target `ob`, a pixel inside the cleaned unique-display region
/// becomes `ob` when the full-scene render shows `ob` or the background
/// there (an occluder in front keeps its label); a pixel supervised as `ob`
/// outside the region takes the full-scene label, or the background if that
/// is `ob` too. `human` holds the original labels for `trust_human_labels`.
#[allow(clippy::too_many_arguments)]
pub fn run_selfsup_cycle<F: Real>(
    params: &ParameterSet<F>,
    dataset: &SceneDataset,
    human: &[Vec<ClassId>],
    supervision: &mut [Vec<ClassId>],
    schedule: &SelfSupSchedule,
    sampling: &SamplingConfig,
    cycle: u64,
    seed: u64,
) -> Result<CycleReport> {
    schedule.validate(dataset.class_count)?;
    if supervision.len() != dataset.frames.len() || human.len() != dataset.frames.len() {
        return Err(Error::LengthMismatch {
            what: "supervision maps",
            expected: dataset.frames.len(),
            found: supervision.len(),
        });
    }
    let bg = dataset.background_class;
    let (w, h) = (dataset.width(), dataset.height());
    let targets = schedule.resolved_targets(dataset.class_count, bg);
    let sampling = SamplingConfig {
        perturb: false,
        ..*sampling
    };
    let mut report = CycleReport::default();
    for (f, sup) in supervision.iter_mut().enumerate() {
        let view = dataset.view(f);
        let base = RenderSettings {
            bg,
            white_background: dataset.white_background,
            ..Default::default()
        };
        let full = render_semantics(params, &view, &base, &sampling, seed)?;
        for &ob in &targets {
            let settings = RenderSettings {
                edit: EditMode::UniqueDisplay { ob },
                ..base
            };
            let unique = render_semantics(params, &view, &settings, &sampling, seed)?;
            let mut rng = stream(
                seed,
                Purpose::Clustering,
                cycle.wrapping_mul(1 << 20) ^ ((f as u64) << 8) ^ ob as u64,
            );
            let fixed = correct_semantic_map(&unique.labels, w, h, ob, bg, schedule, &mut rng)?;
            if fixed.empty_foreground {
                continue;
            }
            for i in 0..w * h {
                let inside = fixed.labels[i] == ob;
                let shown = full.labels[i];
                let proposal = if inside {
                    if shown == ob || shown == bg {
                        ob
                    } else {
                        sup[i]
                    }
                } else if sup[i] == ob {
                    if shown == ob {
                        bg
                    } else {
                        shown
                    }
                } else {
                    sup[i]
                };
                let locked = schedule.trust_human_labels && human[f][i] != UNLABELED;
                if proposal != sup[i] && !locked {
                    sup[i] = proposal;
                    report.changed_pixels += 1;
                }
            }
            report.corrected.push((f, ob, fixed.labels));
        }
    }
    Ok(report)
}
