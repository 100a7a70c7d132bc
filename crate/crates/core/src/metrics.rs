//! Image quality and segmentation scores.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::{ClassId, UNLABELED};

/// Planar-free, row-major image with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::LengthMismatch {
                what: "image data",
                expected: width * height * channels,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// 8-bit RGB pixels on the 0..=255 scale.
    pub fn from_rgb8(width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<Self> {
        Self::new(
            width,
            height,
            3,
            pixels.iter().flat_map(|p| p.map(f64::from)).collect(),
        )
    }

    /// 8-bit RGB pixels rescaled to 0..=1, comparable with rendered images.
    pub fn from_rgb8_unit(width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<Self> {
        Self::new(
            width,
            height,
            3,
            pixels
                .iter()
                .flat_map(|p| p.map(|v| f64::from(v) / 255.0))
                .collect(),
        )
    }

    /// Float RGB pixels on the 0..=1 scale.
    pub fn from_rgb_f32(width: usize, height: usize, pixels: &[[f32; 3]]) -> Result<Self> {
        Self::new(
            width,
            height,
            3,
            pixels.iter().flat_map(|p| p.map(f64::from)).collect(),
        )
    }

    /// Rec.601 luma (`0.299 R + 0.587 G + 0.114 B`); single-channel images are returned as is.
    pub fn luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    fn same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width
            || self.height != other.height
            || self.channels != other.channels
        {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Peak signal-to-noise ratio with the squared error pooled over every pixel
/// and channel. Identical images give `+inf`.
pub fn psnr(gt: &Image, pred: &Image, max_value: f64) -> Result<f64> {
    gt.same_shape(pred)?;
    if gt.data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mse = gt
        .data
        .iter()
        .zip(&pred.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / gt.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}

/// Coarse verbal reading of a PSNR value.
pub fn psnr_band(db: f64) -> &'static str {
    if db > 40.0 {
        "near-original"
    } else if db >= 30.0 {
        "acceptable"
    } else if db >= 20.0 {
        "poor"
    } else {
        "severe distortion"
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SsimConfig {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of pixel values.
    pub dynamic_range: f64,
    /// Odd window side length.
    pub window: usize,
    /// Standard deviation of the Gaussian window weights.
    pub sigma: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            window: 11,
            sigma: 1.5,
        }
    }
}

impl SsimConfig {
    pub fn with_range(dynamic_range: f64) -> Self {
        Self {
            dynamic_range,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0 && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(
                "SSIM constants must be positive".into(),
            ));
        }
        if self.window % 2 == 0 {
            return Err(Error::InvalidConfig("SSIM window size must be odd".into()));
        }
        Ok(())
    }

    fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let mut k = Vec::with_capacity(self.window * self.window);
        for a in &g {
            for b in &g {
                k.push(a * b);
            }
        }
        let total: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= total);
        k
    }
}

/// Per-window SSIM values for every valid window position, row-major over
/// window centers `(row, col)` with `r <= row < height - r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap {
    pub rows: usize,
    pub cols: usize,
    /// Offset of the first window center from the image border.
    pub margin: usize,
    pub values: Vec<f64>,
}

impl SsimMap {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Local SSIM over Gaussian-weighted windows on luma, with
/// `c1 = (k1 L)^2`, `c2 = (k2 L)^2`, `c3 = c2 / 2` and unit exponents, which
/// folds contrast and structure into `(2 s_xy + c2) / (s_x^2 + s_y^2 + c2)`.
pub fn ssim_map(x: &Image, y: &Image, cfg: &SsimConfig) -> Result<SsimMap> {
    cfg.validate()?;
    x.same_shape(y)?;
    let (x, y) = (x.luma(), y.luma());
    let win = cfg.window;
    if win > x.width || win > x.height {
        return Err(Error::WindowTooLarge {
            width: x.width,
            height: x.height,
            window: win,
        });
    }
    let kernel = cfg.kernel();
    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let rows = x.height - win + 1;
    let cols = x.width - win + 1;
    let mut values = Vec::with_capacity(rows * cols);
    for r0 in 0..rows {
        for c0 in 0..cols {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..win {
                let base = (r0 + i) * x.width + c0;
                let xs = &x.data[base..base + win];
                let ys = &y.data[base..base + win];
                let ks = &kernel[i * win..(i + 1) * win];
                for j in 0..win {
                    let k = ks[j];
                    mx += k * xs[j];
                    my += k * ys[j];
                    sxx += k * xs[j] * xs[j];
                    syy += k * ys[j] * ys[j];
                    sxy += k * xs[j] * ys[j];
                }
            }
            // identical expressions for x and y keep SSIM(x, x) exactly 1
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            let lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            values.push(lum * cs);
        }
    }
    Ok(SsimMap {
        rows,
        cols,
        margin: win / 2,
        values,
    })
}

/// Mean of [`ssim_map`].
pub fn ssim(x: &Image, y: &Image, cfg: &SsimConfig) -> Result<f64> {
    Ok(ssim_map(x, y, cfg)?.mean())
}

/// Mean SSIM over windows centered on pixels where `region` is true.
pub fn region_ssim(x: &Image, y: &Image, cfg: &SsimConfig, region: &[bool]) -> Result<f64> {
    if region.len() != x.width * x.height {
        return Err(Error::LengthMismatch {
            what: "region mask",
            expected: x.width * x.height,
            found: region.len(),
        });
    }
    let map = ssim_map(x, y, cfg)?;
    let (mut sum, mut count) = (0.0, 0usize);
    for r in 0..map.rows {
        for c in 0..map.cols {
            if region[(r + map.margin) * x.width + c + map.margin] {
                sum += map.values[r * map.cols + c];
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoTargetPixels);
    }
    Ok(sum / count as f64)
}

/// SSIM restricted to a region: pixels outside `region` are replaced by
/// `fill` in both images, then windows centered in the region are averaged.
/// Content outside the region therefore cannot affect the score.
pub fn target_region_ssim(
    x: &Image,
    y: &Image,
    cfg: &SsimConfig,
    region: &[bool],
    fill: f64,
) -> Result<f64> {
    if region.len() != x.width * x.height {
        return Err(Error::LengthMismatch {
            what: "region mask",
            expected: x.width * x.height,
            found: region.len(),
        });
    }
    let blank = |img: &Image| {
        let mut out = img.clone();
        for (i, inside) in region.iter().enumerate() {
            if !inside {
                for v in &mut out.data[i * img.channels..(i + 1) * img.channels] {
                    *v = fill;
                }
            }
        }
        out
    };
    region_ssim(&blank(x), &blank(y), cfg, region)
}

/// Fraction of labeled ground-truth pixels predicted correctly.
/// [`UNLABELED`] ground truth is skipped.
pub fn pixel_accuracy(gt: &[ClassId], pred: &[ClassId]) -> Result<f64> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "label map",
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (g, p) in gt.iter().zip(pred) {
        if *g != UNLABELED {
            total += 1;
            hit += (g == p) as usize;
        }
    }
    if total == 0 {
        return Err(Error::NoTargetPixels);
    }
    Ok(hit as f64 / total as f64)
}

/// Intersection over union per class; `None` for classes absent from both maps.
pub fn class_iou(gt: &[ClassId], pred: &[ClassId], class_count: usize) -> Result<Vec<Option<f64>>> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "label map",
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let mut inter = vec![0usize; class_count];
    let mut union = vec![0usize; class_count];
    for (g, p) in gt.iter().zip(pred) {
        if *g == UNLABELED {
            continue;
        }
        let (g, p) = (*g as usize, *p as usize);
        if g == p {
            if g < class_count {
                inter[g] += 1;
                union[g] += 1;
            }
        } else {
            if g < class_count {
                union[g] += 1;
            }
            if p < class_count {
                union[p] += 1;
            }
        }
    }
    Ok((0..class_count)
        .map(|c| (union[c] > 0).then(|| inter[c] as f64 / union[c] as f64))
        .collect())
}

/// Intersection over union of two binary masks (1 when both are empty).
pub fn mask_iou(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "mask",
            expected: a.len(),
            found: b.len(),
        });
    }
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}
