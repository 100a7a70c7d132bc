use alloc::vec::Vec;

use crate::camera::{CameraIntrinsics, Pose};
use crate::error::{Error, Result};
use crate::render::View;
use crate::{ClassId, UNLABELED};

/// One posed image with its label map, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub pose: Pose,
    pub rgb: Vec<[u8; 3]>,
    /// Class id per pixel, or [`UNLABELED`].
    pub labels: Vec<ClassId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDataset {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<Frame>,
    pub class_count: usize,
    pub background_class: ClassId,
    pub t_near: f64,
    pub t_far: f64,
    /// Rays that leave the scene see white (otherwise black).
    pub white_background: bool,
}

/// Every 8th view, starting with the first, is held out.
pub fn is_test_view(index: usize) -> bool {
    index % 8 == 0
}

impl SceneDataset {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !(0.0 <= self.t_near && self.t_near < self.t_far && self.t_far.is_finite()) {
            return Err(Error::InvalidDataset(alloc::format!(
                "bounds need 0 <= near < far, got near {} far {}",
                self.t_near,
                self.t_far
            )));
        }
        if self.class_count < 2 || self.class_count > UNLABELED as usize {
            return Err(Error::InvalidDataset(alloc::format!(
                "class_count {} out of range",
                self.class_count
            )));
        }
        if self.background_class as usize >= self.class_count {
            return Err(Error::InvalidDataset(alloc::format!(
                "background class {} is not below class_count {}",
                self.background_class,
                self.class_count
            )));
        }
        let n = self.intrinsics.pixel_count();
        for (i, f) in self.frames.iter().enumerate() {
            if f.rgb.len() != n || f.labels.len() != n {
                return Err(Error::InvalidDataset(alloc::format!(
                    "frame {i}: expected {n} pixels, got {} colors and {} labels",
                    f.rgb.len(),
                    f.labels.len()
                )));
            }
            if let Some(bad) = f
                .labels
                .iter()
                .find(|l| **l != UNLABELED && **l as usize >= self.class_count)
            {
                return Err(Error::InvalidLabel {
                    frame: i,
                    value: *bad,
                    class_count: self.class_count,
                });
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn view(&self, frame: usize) -> View {
        View {
            intrinsics: self.intrinsics,
            pose: self.frames[frame].pose,
            t_near: self.t_near,
            t_far: self.t_far,
        }
    }

    pub fn train_indices(&self) -> Vec<usize> {
        (0..self.frames.len())
            .filter(|i| !is_test_view(*i))
            .collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        (0..self.frames.len())
            .filter(|i| is_test_view(*i))
            .collect()
    }

    /// The same dataset restricted to `frames` (in that order).
    pub fn subset(&self, frames: &[usize]) -> SceneDataset {
        SceneDataset {
            frames: frames.iter().map(|i| self.frames[*i].clone()).collect(),
            ..self.clone_header()
        }
    }

    /// Held-in views only.
    pub fn train_split(&self) -> SceneDataset {
        self.subset(&self.train_indices())
    }

    /// Held-out views only.
    pub fn test_split(&self) -> SceneDataset {
        self.subset(&self.test_indices())
    }

    fn clone_header(&self) -> SceneDataset {
        SceneDataset {
            intrinsics: self.intrinsics,
            frames: Vec::new(),
            class_count: self.class_count,
            background_class: self.background_class,
            t_near: self.t_near,
            t_far: self.t_far,
            white_background: self.white_background,
        }
    }
}
