//! Class-based editing: showing only a target class, or removing it.

use alloc::vec::Vec;

use super::composite::{weights, RenderResult};
use crate::error::{Error, Result};
use crate::field::{argmax, softmax_probs, FieldOutput};
use crate::real::Real;
use crate::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EditMode {
    #[default]
    FullScene,
    /// Keep points of class `ob` (and the background class); draw only rays
    /// that end up labeled `ob`.
    UniqueDisplay { ob: ClassId },
    /// Remove every point of class `ob`.
    MaskOut { ob: ClassId },
}

impl EditMode {
    pub fn target(&self) -> Option<ClassId> {
        match *self {
            EditMode::FullScene => None,
            EditMode::UniqueDisplay { ob } | EditMode::MaskOut { ob } => Some(ob),
        }
    }

    /// Whether a point whose most likely class is `label` keeps its density.
    #[inline]
    pub fn keeps(&self, label: ClassId, bg: ClassId) -> bool {
        match *self {
            EditMode::FullScene => true,
            EditMode::UniqueDisplay { ob } => label == ob || label == bg,
            EditMode::MaskOut { ob } => label != ob,
        }
    }
}

/// Per-point keep mask for `mode`.
pub fn edit_mask(point_labels: &[ClassId], mode: EditMode, bg: ClassId) -> Vec<bool> {
    point_labels.iter().map(|l| mode.keeps(*l, bg)).collect()
}

/// Everything that changes how a frame is rendered, apart from sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct RenderSettings {
    pub edit: EditMode,
    pub bg: ClassId,
    pub white_background: bool,
    /// Color of rays suppressed by unique display.
    pub sentinel: [f64; 3],
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            edit: EditMode::FullScene,
            bg: 0,
            white_background: false,
            sentinel: [1.0; 3],
        }
    }
}

impl RenderSettings {
    pub fn validate(&self, class_count: usize) -> Result<()> {
        let mut problems = Vec::new();
        if self.bg as usize >= class_count {
            problems.push(alloc::format!(
                "background class {} is not below class_count {}",
                self.bg,
                class_count
            ));
        }
        if let Some(ob) = self.edit.target() {
            if ob as usize >= class_count {
                problems.push(alloc::format!(
                    "target class {ob} is not below class_count {class_count}"
                ));
            }
            if ob == self.bg {
                problems.push(alloc::format!(
                    "target class {ob} equals the background class"
                ));
            }
        }
        if self.sentinel.iter().any(|c| !(0.0..=1.0).contains(c)) {
            problems.push("sentinel color must lie in [0, 1]".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Unique display of `ob` for one ray.
///
/// Points whose most likely class is neither `ob` nor `bg` lose their
/// density, semantics are composited over what is left, and the color is
/// composited only if the ray's label is `ob`; other rays get `sentinel`.
/// `weights` and `depth` describe the masked ray in both cases.
pub fn render_unique_display<F: Real>(
    samples: &[FieldOutput<F>],
    t: &[F],
    deltas: &[F],
    ob: ClassId,
    bg: ClassId,
    white_background: bool,
    sentinel: [F; 3],
) -> Result<RenderResult<F>> {
    if t.len() != samples.len() {
        return Err(Error::LengthMismatch {
            what: "sample distances",
            expected: samples.len(),
            found: t.len(),
        });
    }
    let labels: Vec<ClassId> = samples
        .iter()
        .map(|s| argmax(&s.logits) as ClassId)
        .collect();
    let mask = edit_mask(&labels, EditMode::UniqueDisplay { ob }, bg);
    let sigma: Vec<F> = samples.iter().map(|s| s.sigma).collect();
    let w = weights(&sigma, deltas, Some(&mask))?;

    let l = samples.first().map_or(0, |s| s.logits.len());
    let mut sem = alloc::vec![F::zero(); l];
    for (wk, s) in w.iter().zip(samples) {
        for (a, v) in sem.iter_mut().zip(&s.logits) {
            *a += *wk * *v;
        }
    }
    let label = argmax(&sem) as ClassId;
    let opacity: F = w.iter().copied().sum();
    let color = if label == ob {
        let mut c = [F::zero(); 3];
        for (wk, s) in w.iter().zip(samples) {
            for ch in 0..3 {
                c[ch] += *wk * s.rgb[ch];
            }
        }
        if white_background {
            for v in &mut c {
                *v += F::one() - opacity;
            }
        }
        c
    } else {
        sentinel
    };
    Ok(RenderResult {
        color,
        semantic_probs: softmax_probs(&sem),
        label,
        depth: super::composite::expected_depth(&w, t),
        weights: w,
        opacity,
    })
}
