//! Held-out evaluation reports.

use serde::{Serialize, Serializer};

use semfield_core::field::ParameterSet;
use semfield_core::metrics::{
    class_iou, pixel_accuracy, psnr, psnr_band, ssim, target_region_ssim, Image, SsimConfig,
};
use semfield_core::render::{RenderSettings, SamplingConfig};
use semfield_core::scene::SceneDataset;
use semfield_core::{ClassId, Real};

use crate::error::Result;
use crate::render::render_parallel;

/// Decibels; infinity is written as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decibels(pub f64);

impl Serialize for Decibels {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

/// What the SSIM of a view is computed over.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SsimRegion {
    #[default]
    Full,
    /// Only ground-truth pixels of these classes; everything else is set to
    /// white in both images first.
    Target(Vec<ClassId>),
}

/// A rendered view to be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Unit-range RGB, three channels.
    pub rgb: Image,
    pub labels: Vec<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewScore {
    pub frame: usize,
    pub psnr: Decibels,
    /// `None` when a target region has no scorable pixel in this view.
    pub ssim: Option<f64>,
    pub pixel_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub ssim_region: String,
    pub views: Vec<ViewScore>,
    pub mean_psnr: Decibels,
    pub psnr_band: String,
    pub mean_ssim: Option<f64>,
    /// Pooled over all views.
    pub pixel_accuracy: Option<f64>,
    /// Pooled over all views; `None` for classes absent everywhere.
    pub class_iou: Vec<Option<f64>>,
}

impl EvalReport {
    /// Pretty JSON with a trailing newline; identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Scores `preds[i]` against frame `frames[i]` of `ds`.
pub fn from_predictions(
    ds: &SceneDataset,
    frames: &[usize],
    preds: &[Prediction],
    region: &SsimRegion,
) -> Result<EvalReport> {
    assert_eq!(frames.len(), preds.len(), "one prediction per frame");
    let (w, h) = (ds.width(), ds.height());
    let cfg = SsimConfig::default();
    let mut views = Vec::with_capacity(frames.len());
    let (mut all_gt, mut all_pred) = (Vec::new(), Vec::new());
    for (&f, pred) in frames.iter().zip(preds) {
        let frame = &ds.frames[f];
        let gt = Image::from_rgb8_unit(w, h, &frame.rgb)?;
        let img = &pred.rgb;
        let s = match region {
            SsimRegion::Full => Some(ssim(&gt.luma(), &img.luma(), &cfg)?),
            SsimRegion::Target(classes) => {
                let mask: Vec<bool> = frame.labels.iter().map(|l| classes.contains(l)).collect();
                scored(target_region_ssim(
                    &gt.luma(),
                    &img.luma(),
                    &cfg,
                    &mask,
                    1.0,
                ))?
            }
        };
        views.push(ViewScore {
            frame: f,
            psnr: Decibels(psnr(&gt, img, 1.0)?),
            ssim: s,
            pixel_accuracy: scored(pixel_accuracy(&frame.labels, &pred.labels))?,
        });
        all_gt.extend_from_slice(&frame.labels);
        all_pred.extend_from_slice(&pred.labels);
    }
    let n = views.len().max(1) as f64;
    let mean_psnr = views.iter().map(|v| v.psnr.0).sum::<f64>() / n;
    let ssims: Vec<f64> = views.iter().filter_map(|v| v.ssim).collect();
    Ok(EvalReport {
        ssim_region: match region {
            SsimRegion::Full => "full".into(),
            SsimRegion::Target(c) => format!("target {c:?}"),
        },
        psnr_band: psnr_band(mean_psnr).into(),
        mean_psnr: Decibels(mean_psnr),
        mean_ssim: (!ssims.is_empty()).then(|| ssims.iter().sum::<f64>() / ssims.len() as f64),
        pixel_accuracy: scored(pixel_accuracy(&all_gt, &all_pred))?,
        class_iou: class_iou(&all_gt, &all_pred, ds.class_count)?,
        views,
    })
}

fn scored(r: semfield_core::Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(semfield_core::Error::NoTargetPixels) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Renders `frames` of `ds` (full scene) and scores them.
pub fn evaluate<F: Real>(
    params: &ParameterSet<F>,
    ds: &SceneDataset,
    frames: &[usize],
    sampling: &SamplingConfig,
    region: &SsimRegion,
    seed: u64,
    threads: usize,
) -> Result<EvalReport> {
    let settings = RenderSettings {
        bg: ds.background_class,
        white_background: ds.white_background,
        ..Default::default()
    };
    let preds = frames
        .iter()
        .map(|&f| {
            let img = render_parallel(params, &ds.view(f), &settings, sampling, seed, threads)?;
            Ok(Prediction {
                rgb: Image::from_rgb_f32(img.width, img.height, &img.rgb)?,
                labels: img.labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    from_predictions(ds, frames, &preds, region)
}

/// Mean SSIM over `frames`, as used for training logs and sweeps.
pub fn mean_ssim<F: Real>(
    params: &ParameterSet<F>,
    ds: &SceneDataset,
    frames: &[usize],
    sampling: &SamplingConfig,
    region: &SsimRegion,
    seed: u64,
    threads: usize,
) -> Result<Option<f64>> {
    Ok(evaluate(params, ds, frames, sampling, region, seed, threads)?.mean_ssim)
}
