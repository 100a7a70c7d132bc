//! Pinhole cameras and primary rays.
//!
//! Camera space is right-handed with `-z` forward and `+y` up; pixel centers
//! sit at `+0.5`, so pixel `(row, col)` looks through
//! `((col + 0.5 - cx) / fx, -(row + 0.5 - cy) / fy, -1)`.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Square pixels, centered principal point, vertical field of view in degrees.
    pub fn from_fov(width: usize, height: usize, fov_y_deg: f64) -> Self {
        let f = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        Self {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidConfig(
                "intrinsics need fx, fy > 0 and a finite principal point".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("image size must be positive".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Camera-to-world rigid transform, row-major 4x4.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    m: [[f64; 4]; 4],
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        m: [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
    };

    /// Validates orthonormality (`R^T R = I` within 1e-6), `det R = +1` and
    /// the homogeneous last row.
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pose matrix"));
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidConfig("pose last row must be 0 0 0 1".into()));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|r| m[r][i] * m[r][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-6 {
                    return Err(Error::InvalidConfig(
                        "pose rotation is not orthonormal".into(),
                    ));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if det <= 0.0 {
            return Err(Error::InvalidConfig(
                "pose rotation has negative determinant".into(),
            ));
        }
        Ok(Self { m })
    }

    pub fn from_row_major(v: &[f64; 16]) -> Result<Self> {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row.copy_from_slice(&v[4 * i..4 * i + 4]);
        }
        Self::new(m)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for i in 0..4 {
            out[4 * i..4 * i + 4].copy_from_slice(&self.m[i]);
        }
        out
    }

    /// Camera at `eye` looking at `target`; `up` fixes the roll.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let back = (eye - target).normalized();
        let right = up.cross(back);
        if !(right.norm() > 1e-9) {
            return Err(Error::InvalidConfig(
                "look_at: up is parallel to the view direction".into(),
            ));
        }
        let right = right.normalized();
        let cam_up = back.cross(right);
        Self::new([
            [right[0], cam_up[0], back[0], eye[0]],
            [right[1], cam_up[1], back[1], eye[1]],
            [right[2], cam_up[2], back[2], eye[2]],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.m[0][3], self.m[1][3], self.m[2][3])
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.m[0][0] * v[0] + self.m[0][1] * v[1] + self.m[0][2] * v[2],
            self.m[1][0] * v[0] + self.m[1][1] * v[1] + self.m[1][2] * v[2],
            self.m[2][0] * v[0] + self.m[2][1] * v[1] + self.m[2][2] * v[2],
        )
    }

    /// Translates the camera in world space.
    pub fn translated(&self, by: Vec3) -> Self {
        let mut m = self.m;
        for i in 0..3 {
            m[i][3] += by[i];
        }
        Self { m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_near: f64, t_far: f64) -> Result<Self> {
        if !origin.is_finite() || !direction.is_finite() {
            return Err(Error::NonFinite("ray"));
        }
        if (direction.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(
                "ray direction must be unit length".into(),
            ));
        }
        if !(0.0 <= t_near && t_near < t_far && t_far.is_finite()) {
            return Err(Error::InvalidConfig(
                "ray bounds need 0 <= t_near < t_far".into(),
            ));
        }
        Ok(Self {
            origin,
            direction,
            t_near,
            t_far,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

pub fn generate_ray(
    intr: &CameraIntrinsics,
    pose: &Pose,
    row: usize,
    col: usize,
    t_near: f64,
    t_far: f64,
) -> Result<Ray> {
    if row >= intr.height || col >= intr.width {
        return Err(Error::PixelOutOfBounds {
            row,
            col,
            width: intr.width,
            height: intr.height,
        });
    }
    let cam = Vec3::new(
        (col as f64 + 0.5 - intr.cx) / intr.fx,
        -(row as f64 + 0.5 - intr.cy) / intr.fy,
        -1.0,
    );
    Ray::new(
        pose.translation(),
        pose.rotate(cam).normalized(),
        t_near,
        t_far,
    )
}
