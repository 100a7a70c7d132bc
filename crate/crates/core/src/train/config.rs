use alloc::string::String;
use alloc::vec::Vec;

use super::adam::AdamHyper;
use super::fast::FastTrainConfig;
use crate::error::{Error, Result};
use crate::render::SamplingConfig;
use crate::sampling::RayOrder;
use crate::selfsup::SelfSupSchedule;

/// Which objective the trainer optimizes after the warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TrainMode {
    /// Every pixel of every training frame, colors and labels.
    #[default]
    Full,
    /// Positive rays plus a thinned, recolored share of the negatives.
    Fast,
    /// Labels only, for the whole run.
    SemanticOnly,
}

/// Floating point width of the parameters and of the training arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub iterations: usize,
    /// Rays per iteration.
    pub batch_size: usize,
    /// Weight of the semantic term.
    pub lambda: f64,
    /// Focal exponent.
    pub gamma: f64,
    /// Leading iterations trained on the semantic term alone.
    pub semantic_only_iterations: usize,
    pub learning_rate: f64,
    /// Learning rate reached at the last iteration (exponential decay).
    pub final_learning_rate: f64,
    pub adam: AdamHyper,
    /// Master seed; config files carry it at the top level of a run.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub seed: u64,
    pub precision: Precision,
    pub ray_order: RayOrder,
    pub sampling: SamplingConfig,
    /// Fraction of labeled pixels kept.
    pub label_sampling_rate: f64,
    /// Used when `mode` is `Fast`.
    pub fast: FastTrainConfig,
    pub selfsup: Option<SelfSupSchedule>,
    /// Iterations between log entries; 0 disables logging.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Full,
            iterations: 20_000,
            batch_size: 1024,
            lambda: 0.04,
            gamma: 1.0,
            semantic_only_iterations: 2000,
            learning_rate: 5e-4,
            final_learning_rate: 5e-5,
            adam: AdamHyper::default(),
            seed: 0,
            precision: Precision::F32,
            ray_order: RayOrder::Shuffled,
            sampling: SamplingConfig {
                perturb: true,
                ..Default::default()
            },
            label_sampling_rate: 1.0,
            fast: FastTrainConfig::default(),
            selfsup: None,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, not just the first.
    pub fn problems(&self, class_count: usize) -> Vec<String> {
        let mut p: Vec<String> = Vec::new();
        if self.batch_size == 0 {
            p.push("batch_size must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            p.push(alloc::format!(
                "lambda {} must be finite and >= 0",
                self.lambda
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            p.push(alloc::format!(
                "gamma {} must be finite and >= 0",
                self.gamma
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            p.push(alloc::format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.final_learning_rate > 0.0 && self.final_learning_rate.is_finite()) {
            p.push(alloc::format!(
                "final_learning_rate {} must be positive",
                self.final_learning_rate
            ));
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            p.push("adam needs beta1, beta2 in [0, 1) and epsilon > 0".into());
        }
        if !(self.label_sampling_rate > 0.0 && self.label_sampling_rate <= 1.0) {
            p.push(alloc::format!(
                "label_sampling_rate {} must lie in (0, 1]",
                self.label_sampling_rate
            ));
        }
        if let Err(e) = self.sampling.validate() {
            p.push(alloc::format!("{e}"));
        }
        if self.mode == TrainMode::Fast {
            if let Err(Error::InvalidConfig(m)) = self.fast.validate(class_count) {
                p.push(m);
            }
        }
        if let Some(s) = &self.selfsup {
            if let Err(Error::InvalidConfig(m)) = s.validate(class_count) {
                p.push(m);
            }
        }
        p
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        let p = self.problems(class_count);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p.join("; ")))
        }
    }

    /// Whether iteration `it` (0-based) trains on labels only.
    pub fn is_semantic_only(&self, it: usize) -> bool {
        self.mode == TrainMode::SemanticOnly || it < self.semantic_only_iterations
    }
}
