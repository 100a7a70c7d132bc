//! On-disk dataset: `manifest.json` plus one RGB and one label PNG per frame.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "intrinsics": { "fx": 87.9, "fy": 87.9, "cx": 32.0, "cy": 32.0, "width": 64, "height": 64 },
//!   "t_near": 1.2, "t_far": 5.6,
//!   "class_count": 4, "background_class": 0, "white_background": true,
//!   "frames": [ { "rgb": "rgb_000.png", "labels": "labels_000.png", "pose": [16 numbers, row-major camera-to-world] } ]
//! }
//! ```
//!
//! Label PNGs are single-channel 8-bit class ids, 255 marking unlabeled
//! pixels. Camera space looks down `-z` with `+y` up.

use std::path::Path;

use semfield_core::camera::{CameraIntrinsics, Pose};
use semfield_core::scene::{Frame, SceneDataset};
use semfield_core::UNLABELED;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::images::{read_gray8, read_rgb8, write_gray8, write_rgb8};

pub const MANIFEST: &str = "manifest.json";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub intrinsics: CameraIntrinsics,
    pub t_near: f64,
    pub t_far: f64,
    pub class_count: usize,
    pub background_class: u8,
    pub white_background: bool,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub rgb: String,
    pub labels: String,
    pub pose: [f64; 16],
}

pub fn write_dataset(ds: &SceneDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (w, h) = (ds.width(), ds.height());
    let mut frames = Vec::with_capacity(ds.frames.len());
    for (i, f) in ds.frames.iter().enumerate() {
        let entry = FrameEntry {
            rgb: format!("rgb_{i:03}.png"),
            labels: format!("labels_{i:03}.png"),
            pose: f.pose.to_row_major(),
        };
        write_rgb8(&dir.join(&entry.rgb), w, h, &f.rgb)?;
        write_gray8(&dir.join(&entry.labels), w, h, &f.labels)?;
        frames.push(entry);
    }
    let manifest = Manifest {
        format_version: DATASET_VERSION,
        intrinsics: ds.intrinsics,
        t_near: ds.t_near,
        t_far: ds.t_far,
        class_count: ds.class_count,
        background_class: ds.background_class,
        white_background: ds.white_background,
        frames,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<SceneDataset> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::format(&path, "manifest not found")
        } else {
            Error::io(&path, e)
        }
    })?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.format_version != DATASET_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported dataset version {}", m.format_version),
        ));
    }
    m.intrinsics
        .validate()
        .map_err(|e| Error::format(&path, e.to_string()))?;
    let (w, h) = (m.intrinsics.width, m.intrinsics.height);
    let mut frames = Vec::with_capacity(m.frames.len());
    for (i, entry) in m.frames.iter().enumerate() {
        let pose = Pose::from_row_major(&entry.pose)
            .map_err(|e| Error::format(&path, format!("frame {i}: {e}")))?;
        let rgb_path = dir.join(&entry.rgb);
        let (rw, rh, rgb) = read_rgb8(&rgb_path)?;
        if (rw, rh) != (w, h) {
            return Err(Error::format(
                &rgb_path,
                format!("image is {rw}x{rh}, manifest says {w}x{h}"),
            ));
        }
        let label_path = dir.join(&entry.labels);
        let (lw, lh, labels) = read_gray8(&label_path)?;
        if (lw, lh) != (w, h) {
            return Err(Error::format(
                &label_path,
                format!("label map is {lw}x{lh}, manifest says {w}x{h}"),
            ));
        }
        if let Some(bad) = labels
            .iter()
            .find(|l| **l != UNLABELED && **l as usize >= m.class_count)
        {
            return Err(semfield_core::Error::InvalidLabel {
                frame: i,
                value: *bad,
                class_count: m.class_count,
            }
            .into());
        }
        frames.push(Frame { pose, rgb, labels });
    }
    let ds = SceneDataset {
        intrinsics: m.intrinsics,
        frames,
        class_count: m.class_count,
        background_class: m.background_class,
        t_near: m.t_near,
        t_far: m.t_far,
        white_background: m.white_background,
    };
    ds.validate()?;
    Ok(ds)
}
