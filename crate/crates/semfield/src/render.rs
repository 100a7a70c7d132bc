//! Multi-threaded image rendering and image outputs.

use std::path::{Path, PathBuf};

use semfield_core::field::ParameterSet;
use semfield_core::render::{render_rows, RenderSettings, RenderedImage, SamplingConfig, View};
use semfield_core::Real;

use crate::error::{Error, Result};
use crate::images::{encode_depth, quantize, write_gray16, write_gray8, write_rgb8};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SEMFIELD_THREADS";

/// Worker threads: `SEMFIELD_THREADS` if set to a positive integer,
/// otherwise the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Renders `view` in row bands across `threads` workers. The result does
/// not depend on the thread count.
pub fn render_parallel<F: Real>(
    params: &ParameterSet<F>,
    view: &View,
    settings: &RenderSettings,
    sampling: &SamplingConfig,
    seed: u64,
    threads: usize,
) -> Result<RenderedImage> {
    let h = view.intrinsics.height;
    let threads = threads.clamp(1, h.max(1));
    if threads == 1 {
        return Ok(render_rows(params, view, settings, sampling, seed, 0..h)?);
    }
    let band = h.div_ceil(threads);
    let parts: Vec<semfield_core::Result<RenderedImage>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..h)
            .step_by(band)
            .map(|start| {
                let rows = start..(start + band).min(h);
                s.spawn(move || render_rows(params, view, settings, sampling, seed, rows))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("render worker panicked"))
            .collect()
    });
    let parts = parts
        .into_iter()
        .collect::<semfield_core::Result<Vec<_>>>()?;
    Ok(RenderedImage::concat_rows(parts)?)
}

/// Paths written by [`write_rendered`].
#[derive(Debug, Clone)]
pub struct RenderedFiles {
    pub rgb: PathBuf,
    pub labels: PathBuf,
    pub depth: PathBuf,
    pub opacity: PathBuf,
}

/// Writes `{stem}_rgb.png` (8-bit RGB), `{stem}_labels.png` (8-bit class
/// ids), `{stem}_depth.png` (16-bit, see [`encode_depth`]) and
/// `{stem}_opacity.png` (8-bit) into `dir`.
pub fn write_rendered(
    img: &RenderedImage,
    dir: &Path,
    stem: &str,
    t_near: f64,
    t_far: f64,
) -> Result<RenderedFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = RenderedFiles {
        rgb: dir.join(format!("{stem}_rgb.png")),
        labels: dir.join(format!("{stem}_labels.png")),
        depth: dir.join(format!("{stem}_depth.png")),
        opacity: dir.join(format!("{stem}_opacity.png")),
    };
    let (w, h) = (img.width, img.height);
    let rgb: Vec<[u8; 3]> = img.rgb.iter().map(|c| quantize(*c)).collect();
    write_rgb8(&files.rgb, w, h, &rgb)?;
    write_gray8(&files.labels, w, h, &img.labels)?;
    let depth: Vec<u16> = img
        .depth
        .iter()
        .map(|d| encode_depth(*d, t_near, t_far))
        .collect();
    write_gray16(&files.depth, w, h, &depth)?;
    let opacity: Vec<u8> = img
        .opacity
        .iter()
        .map(|o| (o.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    write_gray8(&files.opacity, w, h, &opacity)?;
    Ok(files)
}
