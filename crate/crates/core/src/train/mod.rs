//! Losses, optimizer and the training loop.
//!
//! The objective is `L_p + lambda * L_s`: squared color error of the coarse
//! and fine composites plus a focal loss on the composited semantic
//! distribution of both passes. The first `semantic_only_iterations` train
//! on the semantic term alone. Fast mode trains on positive rays (target
//! classes) and a thinned share of negatives whose color is replaced by one
//! high-contrast reset color.

mod adam;
mod batch;
mod config;
mod fast;
mod loss;
mod trainer;

pub use adam::{adam_step, decayed_learning_rate, AdamHyper, AdamState};
pub use batch::{batch_loss_and_grad, BatchLoss, LossSettings, RayBatch};
pub use config::{Precision, TrainConfig, TrainMode};
pub use fast::{
    area_ratio, color_difference, find_reset_color, full_scene_supervision, mean_target_color,
    prepare_fast_training, reset_color_candidates, subsample_labels, FastSupervision,
    FastTrainConfig, RaySupervision, ResetColor, SampleClass,
};
pub use loss::{
    focal_semantic_loss, focal_term, focal_term_grad, photometric_loss, total_loss, PROB_CLAMP,
};
pub use trainer::{
    mse_to_psnr, train, LogEntry, NoObserver, RunOutcome, StepStats, TrainObserver, TrainState,
    Trainer,
};
