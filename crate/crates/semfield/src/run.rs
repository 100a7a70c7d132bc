//! Training runs on disk: config snapshot, metrics log, checkpoints and
//! resumable state.
//!
//! A run directory holds `config.toml` (the resolved configuration),
//! `metrics.csv` (`iteration,wall_seconds,loss_p,loss_s,batch_psnr,test_ssim`,
//! one row every `log_every` iterations, empty fields for missing values),
//! `checkpoint.bin` (network weights) and `state.bin` (everything needed to
//! resume). Both binaries are rewritten every `checkpoint_every` iterations
//! and when the run ends or stops.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use semfield_core::field::ParameterSet;
use semfield_core::scene::SceneDataset;
use semfield_core::train::{Precision, StepStats, TrainMode, Trainer};
use semfield_core::Real;

use crate::checkpoint::{read_state, write_checkpoint, write_state};
use crate::config::RunConfig;
use crate::dataset::load_dataset;
use crate::error::{Error, Result};
use crate::eval::{mean_ssim, SsimRegion};
use crate::images::write_gray8;

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const STATE_FILE: &str = "state.bin";
const METRICS_HEADER: &str = "iteration,wall_seconds,loss_p,loss_s,batch_psnr,test_ssim";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue from `state.bin` in the output directory.
    pub resume: bool,
    /// Stop (saving state) once this many iterations are done in total.
    pub stop_after: Option<usize>,
    /// Render threads for held-out SSIM; 0 picks [`crate::render::thread_count`].
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub iteration: usize,
    pub completed: bool,
    pub params: ParameterSet<f32>,
    pub wall_seconds: f64,
}

/// SSIM region used for a configuration: the fast-mode targets, else the
/// whole image.
pub fn ssim_region(cfg: &RunConfig, ds: &SceneDataset) -> SsimRegion {
    match cfg.train.mode {
        TrainMode::Fast => SsimRegion::Target(cfg.train.fast.resolved_targets(ds)),
        _ => SsimRegion::Full,
    }
}

/// Loads the dataset and runs training as configured.
pub fn train_run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    let ds = load_dataset(&cfg.dataset)?;
    train_on(cfg, &ds, opts)
}

/// Like [`train_run`] with the dataset already loaded.
pub fn train_on(cfg: &RunConfig, ds: &SceneDataset, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate(ds.class_count)?;
    match cfg.train.precision {
        Precision::F32 => train_generic::<f32>(cfg, ds, opts),
        Precision::F64 => train_generic::<f64>(cfg, ds, opts),
    }
}

fn train_generic<F: Real>(
    cfg: &RunConfig,
    ds: &SceneDataset,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let dir = cfg.output.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let train = ds.train_split();
    let test = ds.test_split();
    let mut test_frames: Vec<usize> = (0..test.frames.len()).collect();
    if cfg.eval.views > 0 {
        test_frames.truncate(cfg.eval.views);
    }
    let region = ssim_region(cfg, ds);
    let threads = if opts.threads == 0 {
        crate::render::thread_count()
    } else {
        opts.threads
    };
    let metrics = dir.join(METRICS_FILE);

    let (mut trainer, wall_offset) = if opts.resume {
        let state = read_state::<F>(&dir.join(STATE_FILE))?;
        let offset = truncate_metrics(&metrics, state.iteration)?;
        (
            Trainer::<F>::resume(train, cfg.train_config(), state)?,
            offset,
        )
    } else {
        std::fs::write(&metrics, format!("{METRICS_HEADER}\n"))
            .map_err(|e| Error::io(&metrics, e))?;
        (
            Trainer::<F>::new(train, cfg.architecture, cfg.train_config())?,
            0.0,
        )
    };
    crate::checkpoint::write_atomic(&dir.join(CONFIG_FILE), snapshot(cfg)?.as_bytes())?;

    let start = Instant::now();
    let total = cfg.train.iterations;
    let limit = opts.stop_after.map_or(total, |s| s.min(total));
    while trainer.iteration() < limit {
        let stats = trainer.step()?;
        let it = stats.iteration;
        let wall = wall_offset + start.elapsed().as_secs_f64();
        if cfg.train.log_every > 0 && it % cfg.train.log_every == 0 {
            let test_ssim = if cfg.eval.ssim_every > 0
                && it % cfg.eval.ssim_every == 0
                && !test_frames.is_empty()
            {
                mean_ssim(
                    trainer.params(),
                    &test,
                    &test_frames,
                    &cfg.render.sampling,
                    &region,
                    cfg.seed,
                    threads,
                )?
            } else {
                None
            };
            append_metrics(&metrics, &stats, wall, test_ssim)?;
            log::info!(
                "iteration {it}: loss_p {:.5} loss_s {:.5}{}{}",
                stats.loss_p,
                stats.loss_s,
                stats
                    .batch_psnr
                    .map_or(String::new(), |p| format!(" batch psnr {p:.2}")),
                test_ssim.map_or(String::new(), |s| format!(" test ssim {s:.4}"))
            );
        }
        if let Some(report) = &stats.selfsup {
            log::info!(
                "iteration {it}: self-supervision changed {} pixels",
                report.changed_pixels
            );
            if cfg.dump_selfsup {
                dump_cycle(&dir, it, ds, report)?;
            }
        }
        if cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it < limit {
            save(&dir, &trainer)?;
        }
    }
    save(&dir, &trainer)?;
    Ok(RunSummary {
        dir,
        iteration: trainer.iteration(),
        completed: trainer.iteration() >= total,
        params: trainer.params().cast(),
        wall_seconds: wall_offset + start.elapsed().as_secs_f64(),
    })
}

fn save<F: Real>(dir: &Path, trainer: &Trainer<F>) -> Result<()> {
    write_state(&dir.join(STATE_FILE), &trainer.state())?;
    write_checkpoint(&dir.join(CHECKPOINT_FILE), trainer.params())
}

/// The configuration with absolute paths, so the snapshot works from anywhere.
fn snapshot(cfg: &RunConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.dataset = std::path::absolute(&c.dataset).map_err(|e| Error::io(&cfg.dataset, e))?;
    c.output = std::path::absolute(&c.output).map_err(|e| Error::io(&cfg.output, e))?;
    Ok(c.to_toml())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

fn append_metrics(path: &Path, s: &StepStats, wall: f64, test_ssim: Option<f64>) -> Result<()> {
    let mut f = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(
        f,
        "{},{:.3},{},{},{},{}",
        s.iteration,
        wall,
        s.loss_p,
        s.loss_s,
        opt(s.batch_psnr),
        opt(test_ssim)
    )
    .map_err(|e| Error::io(path, e))
}

/// Drops rows past `iteration`; returns the wall clock of the last kept row.
fn truncate_metrics(path: &Path, iteration: usize) -> Result<f64> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = format!("{METRICS_HEADER}\n");
    let mut wall = 0.0;
    for line in text.lines().skip(1) {
        let mut fields = line.split(',');
        let it: Option<usize> = fields.next().and_then(|v| v.parse().ok());
        match it {
            Some(it) if it <= iteration => {
                wall = fields.next().and_then(|v| v.parse().ok()).unwrap_or(wall);
                out.push_str(line);
                out.push('\n');
            }
            _ => {}
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
    Ok(wall)
}

fn dump_cycle(
    dir: &Path,
    it: usize,
    ds: &SceneDataset,
    report: &semfield_core::selfsup::CycleReport,
) -> Result<()> {
    let sub = dir.join("selfsup");
    std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let train_frames = ds.train_indices();
    for (f, ob, labels) in &report.corrected {
        let frame = train_frames[*f];
        let path = sub.join(format!("it{it:06}_frame{frame:03}_class{ob}.png"));
        write_gray8(&path, ds.width(), ds.height(), labels)?;
    }
    Ok(())
}
