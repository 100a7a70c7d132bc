//! One training run per value of a sampling rate, scored on held-out views.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use semfield_core::train::TrainMode;

use crate::config::RunConfig;
use crate::dataset::load_dataset;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::run::{ssim_region, train_on, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// `train.fast.negative_sampling_rate`; needs fast mode.
    NegativeSamplingRate,
    /// `train.label_sampling_rate`.
    LabelSamplingRate,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "negative_sampling_rate" | "negative-rate" => Ok(Self::NegativeSamplingRate),
            "label_sampling_rate" | "label-rate" => Ok(Self::LabelSamplingRate),
            _ => Err(format!(
                "unknown sweep parameter \"{s}\" (negative_sampling_rate or label_sampling_rate)"
            )),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NegativeSamplingRate => "negative_sampling_rate",
            Self::LabelSamplingRate => "label_sampling_rate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub mean_ssim: Option<f64>,
    pub mean_psnr: f64,
    pub pixel_accuracy: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Plot-ready `value,mean_ssim,mean_psnr,pixel_accuracy` file.
    pub csv: PathBuf,
}

impl SweepResult {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>24} {:>10} {:>10} {:>10}\n",
            self.param, "ssim", "psnr", "accuracy"
        );
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for r in &self.rows {
            s.push_str(&format!(
                "{:>24} {:>10} {:>10.2} {:>10}\n",
                r.value,
                f(r.mean_ssim),
                r.mean_psnr,
                f(r.pixel_accuracy)
            ));
        }
        s
    }
}

/// The configuration of the run for `value`, writing to
/// `output/sweep/<param>=<value>`.
pub fn point_config(base: &RunConfig, param: SweepParam, value: f64) -> RunConfig {
    let mut cfg = base.clone();
    match param {
        SweepParam::NegativeSamplingRate => cfg.train.fast.negative_sampling_rate = value,
        SweepParam::LabelSamplingRate => cfg.train.label_sampling_rate = value,
    }
    cfg.output = base.output.join("sweep").join(format!("{param}={value}"));
    cfg
}

/// Trains and evaluates one run per value, sequentially.
pub fn run_sweep(
    base: &RunConfig,
    param: SweepParam,
    values: &[f64],
    threads: usize,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    if param == SweepParam::NegativeSamplingRate && base.train.mode != TrainMode::Fast {
        return Err(Error::Config(vec![
            "negative_sampling_rate sweeps need train.mode = \"fast\"".into(),
        ]));
    }
    let threads = if threads == 0 {
        crate::render::thread_count()
    } else {
        threads
    };
    let ds = load_dataset(&base.dataset)?;
    let points: Vec<RunConfig> = values
        .iter()
        .map(|v| point_config(base, param, *v))
        .collect();
    let problems: Vec<String> = points
        .iter()
        .zip(values)
        .flat_map(|(c, v)| {
            c.problems(ds.class_count)
                .into_iter()
                .map(move |p| format!("{param}={v}: {p}"))
        })
        .collect();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let test = ds.test_split();
    let frames: Vec<usize> = (0..test.frames.len()).collect();
    let opts = RunOptions {
        threads,
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(values.len());
    for (cfg, &value) in points.iter().zip(values) {
        log::info!("sweep {param}={value}");
        let run = train_on(cfg, &ds, &opts)?;
        let report = evaluate(
            &run.params,
            &test,
            &frames,
            &cfg.render.sampling,
            &ssim_region(cfg, &ds),
            cfg.seed,
            threads,
        )?;
        std::fs::write(run.dir.join("eval.json"), report.to_json())
            .map_err(|e| Error::io(&run.dir, e))?;
        rows.push(SweepRow {
            value,
            mean_ssim: report.mean_ssim,
            mean_psnr: report.mean_psnr.0,
            pixel_accuracy: report.pixel_accuracy,
            wall_seconds: run.wall_seconds,
        });
    }
    let dir = base.output.join("sweep");
    let csv = dir.join(format!("{param}.csv"));
    let mut text = String::from("value,mean_ssim,mean_psnr,pixel_accuracy\n");
    let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.value,
            f(r.mean_ssim),
            r.mean_psnr,
            f(r.pixel_accuracy)
        ));
    }
    std::fs::write(&csv, text).map_err(|e| Error::io(&csv, e))?;
    Ok(SweepResult { param, rows, csv })
}
