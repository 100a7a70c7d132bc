use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

#[allow(unused_imports)]
use num_traits::Float;

use super::adam::{adam_step, decayed_learning_rate, AdamState};
use super::batch::{loss_with_coarse, ray_points, BatchScratch, LossSettings, RayBatch};
use super::config::{TrainConfig, TrainMode};
use super::fast::{
    fast_records, find_reset_color, full_scene_supervision, mean_target_color, subsample_labels,
    RaySupervision, ResetColor,
};
use crate::camera::Ray;
use crate::error::{Error, Result};
use crate::field::{init_params, Field, NetworkArchitecture, ParameterSet};
use crate::real::Real;
use crate::render::weights_into;
use crate::sampling::{deltas, sample_fine_into, stratified_into, BatchSchedule, PdfScratch};
use crate::scene::SceneDataset;
use crate::seed::{stream, Purpose};
use crate::selfsup::{run_selfsup_cycle, CycleReport};
use crate::{ClassId, UNLABELED};

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<F> {
    /// Completed iterations.
    pub iteration: usize,
    pub params: ParameterSet<F>,
    pub adam: AdamState<F>,
    /// Current label map per training frame (differs from the dataset once
    /// label thinning or self-supervision has run).
    pub supervision: Vec<Vec<ClassId>>,
    pub selfsup_cycles: u64,
}

/// Outcome of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    /// Completed iterations after this step.
    pub iteration: usize,
    /// Per-ray means.
    pub loss_p: f64,
    pub loss_s: f64,
    pub total: f64,
    /// PSNR of the fine colors of the batch; `None` while training on
    /// labels only.
    pub batch_psnr: Option<f64>,
    pub learning_rate: f64,
    pub semantic_only: bool,
    /// Present when a self-supervision pass ran after this step.
    pub selfsup: Option<CycleReport>,
}

/// One row of the metrics log. `test_ssim` is filled in by observers that
/// evaluate held-out views.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    pub loss_p: f64,
    pub loss_s: f64,
    pub batch_psnr: Option<f64>,
    pub test_ssim: Option<f64>,
}

pub trait TrainObserver<F: Real> {
    /// Called after every iteration; `Break` stops the run.
    fn on_step(&mut self, _stats: &StepStats, _params: &ParameterSet<F>) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
    /// Called every `log_every` iterations.
    fn on_log(&mut self, _entry: &mut LogEntry, _params: &ParameterSet<F>) {}
}

/// Ignores everything.
pub struct NoObserver;

impl<F: Real> TrainObserver<F> for NoObserver {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Completed,
    Stopped,
}

pub struct Trainer<F: Real> {
    config: TrainConfig,
    dataset: SceneDataset,
    human: Vec<Vec<ClassId>>,
    supervision: Vec<Vec<ClassId>>,
    records: Vec<RaySupervision>,
    fast_targets: Vec<ClassId>,
    /// 8-bit scale.
    reset_color: Option<[f64; 3]>,
    schedule: BatchSchedule,
    params: ParameterSet<F>,
    adam: AdamState<F>,
    iteration: usize,
    selfsup_cycles: u64,
    grads: Vec<F>,
    scratch: BatchScratch<F>,
}

impl<F: Real> Trainer<F> {
    /// Fresh run on `dataset` (the training frames only).
    pub fn new(
        dataset: SceneDataset,
        arch: NetworkArchitecture,
        config: TrainConfig,
    ) -> Result<Self> {
        let params = init_params(arch, config.seed)?;
        let thinned = subsample_labels(&dataset, config.label_sampling_rate, config.seed)?;
        let supervision = thinned.frames.iter().map(|f| f.labels.clone()).collect();
        let adam = AdamState::new(params.len());
        Self::assemble(
            dataset,
            config,
            TrainState {
                iteration: 0,
                params,
                adam,
                supervision,
                selfsup_cycles: 0,
            },
        )
    }

    /// Continues from a saved state; the result is identical to never
    /// having stopped.
    pub fn resume(
        dataset: SceneDataset,
        config: TrainConfig,
        state: TrainState<F>,
    ) -> Result<Self> {
        Self::assemble(dataset, config, state)
    }

    fn assemble(dataset: SceneDataset, config: TrainConfig, state: TrainState<F>) -> Result<Self> {
        dataset.validate()?;
        if dataset.frames.is_empty() {
            return Err(Error::EmptyDataset);
        }
        config.validate(dataset.class_count)?;
        let arch = *state.params.architecture();
        if arch.class_count != dataset.class_count {
            return Err(Error::InvalidConfig(alloc::format!(
                "network predicts {} classes but the dataset has {}",
                arch.class_count,
                dataset.class_count
            )));
        }
        let n = dataset.intrinsics.pixel_count();
        if state.supervision.len() != dataset.frames.len()
            || state.supervision.iter().any(|s| s.len() != n)
        {
            return Err(Error::LengthMismatch {
                what: "supervision maps",
                expected: dataset.frames.len(),
                found: state.supervision.len(),
            });
        }
        if state.adam.m.len() != state.params.len() || state.adam.v.len() != state.params.len() {
            return Err(Error::LengthMismatch {
                what: "optimizer state",
                expected: state.params.len(),
                found: state.adam.m.len(),
            });
        }
        let thinned = subsample_labels(&dataset, config.label_sampling_rate, config.seed)?;
        let human = thinned.frames.into_iter().map(|f| f.labels).collect();

        let (fast_targets, reset_color) = if config.mode == TrainMode::Fast {
            // the reset color is fixed by the original labels, not by
            // later corrections
            let targets = config.fast.resolved_targets(&dataset);
            let reset = match config.fast.reset_color {
                ResetColor::Adaptive => find_reset_color(mean_target_color(&dataset, &targets)?)?,
                ResetColor::Fixed(c) => c.map(f64::from),
            };
            (targets, Some(reset))
        } else {
            (Vec::new(), None)
        };
        let grads = state.params.zeros_like();
        let mut t = Self {
            schedule: BatchSchedule::new(1, 1, config.ray_order, config.seed)?,
            config,
            dataset,
            human,
            supervision: state.supervision,
            records: Vec::new(),
            fast_targets,
            reset_color,
            params: state.params,
            adam: state.adam,
            iteration: state.iteration,
            selfsup_cycles: state.selfsup_cycles,
            grads,
            scratch: BatchScratch::default(),
        };
        t.rebuild_records()?;
        Ok(t)
    }

    fn rebuild_records(&mut self) -> Result<()> {
        let mut ds = self.dataset.clone();
        for (f, sup) in ds.frames.iter_mut().zip(&self.supervision) {
            f.labels.clone_from(sup);
        }
        self.records = match (self.config.mode, self.reset_color) {
            (TrainMode::Fast, Some(reset)) => {
                if !ds
                    .frames
                    .iter()
                    .any(|f| f.labels.iter().any(|l| self.fast_targets.contains(l)))
                {
                    return Err(Error::NoPositiveRays);
                }
                fast_records(
                    &ds,
                    &self.fast_targets,
                    self.config.fast.negative_sampling_rate,
                    reset,
                    self.config.seed,
                )
                .0
            }
            (TrainMode::SemanticOnly, _) => full_scene_supervision(&ds)
                .into_iter()
                .filter(|r| r.gt_label != UNLABELED)
                .collect(),
            _ => full_scene_supervision(&ds),
        };
        self.schedule = BatchSchedule::new(
            self.records.len(),
            self.config.batch_size,
            self.config.ray_order,
            self.config.seed,
        )?;
        Ok(())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet<F> {
        &self.params
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn records(&self) -> &[RaySupervision] {
        &self.records
    }

    /// 8-bit reset color of fast training.
    pub fn reset_color(&self) -> Option<[f64; 3]> {
        self.reset_color
    }

    pub fn supervision(&self) -> &[Vec<ClassId>] {
        &self.supervision
    }

    pub fn state(&self) -> TrainState<F> {
        TrainState {
            iteration: self.iteration,
            params: self.params.clone(),
            adam: self.adam.clone(),
            supervision: self.supervision.clone(),
            selfsup_cycles: self.selfsup_cycles,
        }
    }

    pub fn into_params(self) -> ParameterSet<F> {
        self.params
    }

    fn ray_of(&self, r: &RaySupervision) -> Result<Ray> {
        let w = self.dataset.width();
        let p = r.pixel as usize;
        self.dataset.view(r.frame as usize).ray(p / w, p % w)
    }

    /// One optimizer update, followed by a self-supervision pass when one
    /// is due.
    pub fn step(&mut self) -> Result<StepStats> {
        let it = self.iteration;
        let cfg = &self.config;
        let (kc, nf) = (cfg.sampling.coarse, cfg.sampling.fine);
        let mut ids = Vec::with_capacity(cfg.batch_size);
        self.schedule.batch(it, &mut ids);
        let b = ids.len();

        let mut rays = Vec::with_capacity(b);
        let mut colors = Vec::with_capacity(b);
        let mut labels = Vec::with_capacity(b);
        for id in &ids {
            let r = self.records[*id as usize];
            rays.push(self.ray_of(&r)?);
            colors.push(r.gt_color.map(f64::from));
            labels.push(r.gt_label);
        }

        let mut rng = stream(cfg.seed, Purpose::Sampling, it as u64);
        let perturb = cfg.sampling.perturb;
        let mut coarse_t = Vec::with_capacity(b * kc);
        let mut tmp = Vec::with_capacity(kc.max(nf));
        for ray in &rays {
            stratified_into(
                ray.t_near,
                ray.t_far,
                kc,
                perturb.then_some(&mut rng as _),
                &mut tmp,
            );
            coarse_t.extend_from_slice(&tmp);
        }

        let semantic_only = cfg.is_semantic_only(it);
        let settings = LossSettings {
            lambda: cfg.lambda,
            gamma: cfg.gamma,
            photometric: !semantic_only,
            white_background: self.dataset.white_background,
        };
        self.grads.iter_mut().for_each(|g| *g = F::zero());
        let field = Field::new(&self.params);
        field.geometry_into(
            &ray_points::<F>(&rays, &coarse_t, kc),
            &mut self.scratch.geo_c,
        );
        let geo_c = &self.scratch.geo_c;

        // fine samples follow the coarse weights; no gradient flows through
        // their placement
        let mut fine_t = Vec::with_capacity(b * nf);
        if nf > 0 {
            let mut w = vec![F::zero(); kc];
            let mut trans = vec![F::zero(); kc + 1];
            let mut wf = vec![0.0; kc];
            let mut scratch = PdfScratch::default();
            for (i, ray) in rays.iter().enumerate() {
                let tc = &coarse_t[i * kc..(i + 1) * kc];
                let dl: Vec<F> = deltas(tc, ray.t_near, ray.t_far)
                    .into_iter()
                    .map(F::lit)
                    .collect();
                weights_into(
                    &geo_c.sigma[i * kc..(i + 1) * kc],
                    &dl,
                    None,
                    &mut w,
                    &mut trans,
                );
                for (a, b) in wf.iter_mut().zip(&w) {
                    *a = b.to_f64_lossy();
                }
                sample_fine_into(
                    tc,
                    &wf,
                    ray.t_near,
                    ray.t_far,
                    nf,
                    perturb.then_some(&mut rng as _),
                    &mut scratch,
                    &mut tmp,
                );
                fine_t.extend_from_slice(&tmp);
            }
        }

        let batch = RayBatch {
            rays: &rays,
            coarse_t: &coarse_t,
            fine_t: &fine_t,
            coarse: kc,
            fine: nf,
            colors: &colors,
            labels: &labels,
        };
        let loss = loss_with_coarse(
            &field,
            &batch,
            &settings,
            &mut self.scratch,
            Some(&mut self.grads),
        )?;
        if !loss.total.is_finite() || self.grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                iteration: it,
                loss_p: loss.loss_p,
                loss_s: loss.loss_s,
            });
        }
        let lr = decayed_learning_rate(
            cfg.learning_rate,
            cfg.final_learning_rate,
            it,
            cfg.iterations,
        );
        adam_step(
            self.params.values_mut(),
            &self.grads,
            &mut self.adam,
            &self.config.adam,
            lr,
        )?;
        if !self.params.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                loss_p: loss.loss_p,
                loss_s: loss.loss_s,
            });
        }
        self.iteration += 1;

        let mut selfsup = None;
        if let Some(schedule) = &self.config.selfsup {
            if schedule.is_due(self.iteration) {
                let report = run_selfsup_cycle(
                    &self.params,
                    &self.dataset,
                    &self.human,
                    &mut self.supervision,
                    schedule,
                    &self.config.sampling,
                    self.selfsup_cycles,
                    self.config.seed,
                )?;
                self.selfsup_cycles += 1;
                if report.changed_pixels > 0 {
                    self.rebuild_records()?;
                }
                log::debug!(
                    "self-supervision pass at {}: {} labels changed",
                    self.iteration,
                    report.changed_pixels
                );
                selfsup = Some(report);
            }
        }

        let n = b as f64;
        Ok(StepStats {
            iteration: self.iteration,
            loss_p: loss.loss_p / n,
            loss_s: loss.loss_s / n,
            total: loss.total / n,
            batch_psnr: (!semantic_only).then(|| mse_to_psnr(loss.fine_mse)),
            learning_rate: lr,
            semantic_only,
            selfsup,
        })
    }

    /// Steps until `config.iterations` are done or the observer stops.
    pub fn run(&mut self, observer: &mut dyn TrainObserver<F>) -> Result<RunOutcome> {
        while self.iteration < self.config.iterations {
            let stats = self.step()?;
            let every = self.config.log_every;
            if every > 0 && stats.iteration % every == 0 {
                let mut entry = LogEntry {
                    iteration: stats.iteration,
                    loss_p: stats.loss_p,
                    loss_s: stats.loss_s,
                    batch_psnr: stats.batch_psnr,
                    test_ssim: None,
                };
                observer.on_log(&mut entry, &self.params);
            }
            if observer.on_step(&stats, &self.params).is_break() {
                return Ok(RunOutcome::Stopped);
            }
        }
        Ok(RunOutcome::Completed)
    }
}

/// `-10 log10(mse)` for unit-range colors; `+inf` for a perfect match.
pub fn mse_to_psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Trains from scratch on `dataset` (training frames) and returns the final
/// parameters.
pub fn train<F: Real>(
    dataset: SceneDataset,
    arch: NetworkArchitecture,
    config: TrainConfig,
    observer: &mut dyn TrainObserver<F>,
) -> Result<ParameterSet<F>> {
    let mut t = Trainer::new(dataset, arch, config)?;
    t.run(observer)?;
    Ok(t.into_params())
}
