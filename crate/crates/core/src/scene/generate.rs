use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;

use super::dataset::{Frame, SceneDataset};
use super::{raytrace_pixel, to_rgb8, Highlight, Lighting, Primitive, SceneSpec, Shape, Texture};
use crate::camera::{generate_ray, CameraIntrinsics, Pose};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::seed::{stream, Purpose};
use crate::ClassId;

/// Cameras spread around the scene at a fixed distance, looking at `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Orbit {
    pub radius: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub target: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Default for Orbit {
    fn default() -> Self {
        Self {
            radius: 3.2,
            elevation_min_deg: 30.0,
            elevation_max_deg: 60.0,
            fov_deg: 40.0,
            width: 64,
            height: 64,
            target: Vec3::new(0.0, 0.0, 0.2),
            t_near: 1.2,
            t_far: 5.6,
        }
    }
}

impl Orbit {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::from_fov(self.width, self.height, self.fov_deg)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.radius > 0.0
            && self.elevation_min_deg <= self.elevation_max_deg
            && self.elevation_min_deg > -90.0
            && self.elevation_max_deg < 90.0
            && self.fov_deg > 0.0
            && self.fov_deg < 180.0
            && 0.0 <= self.t_near
            && self.t_near < self.t_far;
        if !ok {
            return Err(Error::InvalidConfig("orbit needs radius > 0, elevations in (-90, 90), fov in (0, 180) and 0 <= near < far".into()));
        }
        self.intrinsics().validate()
    }
}

/// Evenly spaced azimuths (jittered by up to a quarter step) with random
/// elevations in the orbit's range.
pub fn orbit_poses(orbit: &Orbit, n_views: usize, seed: u64) -> Result<Vec<Pose>> {
    orbit.validate()?;
    let step = 2.0 * core::f64::consts::PI / n_views.max(1) as f64;
    (0..n_views)
        .map(|i| {
            let mut rng = stream(seed, Purpose::Scene, i as u64);
            let az = step * (i as f64 + rng.gen_range(-0.25..0.25));
            let u: f64 = rng.gen();
            let el = (orbit.elevation_min_deg
                + u * (orbit.elevation_max_deg - orbit.elevation_min_deg))
                .to_radians();
            let eye = orbit.target
                + Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * orbit.radius;
            Pose::look_at(eye, orbit.target, Vec3::new(0.0, 0.0, 1.0))
        })
        .collect()
}

/// Ray-traces `n_views` frames of `spec` from [`orbit_poses`].
pub fn generate_scene(
    spec: &SceneSpec,
    n_views: usize,
    orbit: &Orbit,
    seed: u64,
) -> Result<SceneDataset> {
    if n_views == 0 {
        return Err(Error::InvalidConfig("need at least one view".into()));
    }
    spec.validate()?;
    let poses = orbit_poses(orbit, n_views, seed)?;
    let intrinsics = orbit.intrinsics();
    let mut frames = Vec::with_capacity(n_views);
    for pose in poses {
        let n = intrinsics.pixel_count();
        let mut rgb = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for row in 0..intrinsics.height {
            for col in 0..intrinsics.width {
                let ray = generate_ray(&intrinsics, &pose, row, col, orbit.t_near, orbit.t_far)?;
                let hit = raytrace_pixel(spec, &ray);
                rgb.push(to_rgb8(hit.color));
                labels.push(hit.class_id);
            }
        }
        frames.push(Frame { pose, rgb, labels });
    }
    Ok(SceneDataset {
        intrinsics,
        frames,
        class_count: spec.class_count().max(2),
        background_class: spec.background_class,
        t_near: orbit.t_near,
        t_far: orbit.t_far,
        white_background: spec.background_color == [1.0; 3],
    })
}

/// Ground plane with a bright spot, two mutually occluding objects and a
/// small bright one: classes 0 (ground, background), 1 (box), 2 (sphere),
/// 3 (small sphere).
pub fn default_desk_scene() -> SceneSpec {
    SceneSpec {
        primitives: vec![
            Primitive {
                shape: Shape::Plane {
                    height: 0.0,
                    half_extent: 1.4,
                },
                albedo: [0.72, 0.68, 0.6],
                class_id: 0,
                texture: Texture::Checker {
                    cell: 0.35,
                    contrast: 0.15,
                },
            },
            Primitive {
                shape: Shape::Box {
                    center: Vec3::new(0.3, 0.3, 0.3),
                    half_extents: Vec3::new(0.25, 0.25, 0.3),
                },
                albedo: [0.2, 0.4, 0.85],
                class_id: 1,
                texture: Texture::Solid,
            },
            Primitive {
                shape: Shape::Sphere {
                    center: Vec3::new(-0.15, -0.15, 0.28),
                    radius: 0.28,
                },
                albedo: [0.9, 0.75, 0.15],
                class_id: 2,
                texture: Texture::Solid,
            },
            Primitive {
                shape: Shape::Sphere {
                    center: Vec3::new(-0.7, 0.6, 0.12),
                    radius: 0.12,
                },
                albedo: [0.95, 0.15, 0.1],
                class_id: 3,
                texture: Texture::Solid,
            },
        ],
        background_class: 0,
        background_color: [1.0; 3],
        lighting: Lighting::default(),
        highlights: vec![Highlight {
            center: Vec3::new(0.75, -0.55, 0.0),
            radius: 0.3,
            strength: 0.45,
        }],
        bounds_min: Vec3::new(-1.5, -1.5, -0.1),
        bounds_max: Vec3::new(1.5, 1.5, 1.5),
    }
}

fn scaled(spec: &SceneSpec, s: f64) -> SceneSpec {
    let mut out = spec.clone();
    for p in &mut out.primitives {
        if p.class_id == spec.background_class {
            continue;
        }
        p.shape = match p.shape {
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: center * s,
                radius: radius * s,
            },
            Shape::Box {
                center,
                half_extents,
            } => Shape::Box {
                center: center * s,
                half_extents: half_extents * s,
            },
            Shape::Plane {
                height,
                half_extent,
            } => Shape::Plane {
                height: height * s,
                half_extent: half_extent * s,
            },
        };
    }
    out
}

fn target_fraction(
    spec: &SceneSpec,
    poses: &[Pose],
    orbit: &Orbit,
    targets: &[ClassId],
) -> Result<f64> {
    let intr = orbit.intrinsics();
    let mut hits = 0usize;
    for pose in poses {
        for row in 0..intr.height {
            for col in 0..intr.width {
                let ray = generate_ray(&intr, pose, row, col, orbit.t_near, orbit.t_far)?;
                hits += targets.contains(&raytrace_pixel(spec, &ray).class_id) as usize;
            }
        }
    }
    Ok(hits as f64 / (poses.len() * intr.pixel_count()) as f64)
}

/// Scales the non-background primitives about the origin until the
/// fraction of pixels showing `targets` over all generated views is within
/// `tolerance` of `area`. Returns the scaled spec and the achieved fraction.
pub fn fit_target_area(
    spec: &SceneSpec,
    targets: &[ClassId],
    area: f64,
    tolerance: f64,
    n_views: usize,
    orbit: &Orbit,
    seed: u64,
) -> Result<(SceneSpec, f64)> {
    spec.validate()?;
    if !(0.0..1.0).contains(&area) || targets.is_empty() {
        return Err(Error::InvalidConfig(
            "target area must lie in [0, 1) with at least one target class".into(),
        ));
    }
    let poses = orbit_poses(orbit, n_views, seed)?;
    // largest scale that keeps everything inside the world bounds
    let (mut lo, mut hi) = (1e-3, 1.0);
    while scaled(spec, hi * 2.0).validate().is_ok() && hi < 64.0 {
        hi *= 2.0;
    }
    {
        let (mut a, mut b) = (hi, hi * 2.0);
        for _ in 0..30 {
            let m = 0.5 * (a + b);
            if scaled(spec, m).validate().is_ok() {
                a = m;
            } else {
                b = m;
            }
        }
        hi = a;
    }
    let f_hi = target_fraction(&scaled(spec, hi), &poses, orbit, targets)?;
    if f_hi < area - tolerance {
        return Err(Error::InvalidScene(alloc::format!(
            "targets cover at most {f_hi:.4} of the pixels at the largest scale that fits the bounds"
        )));
    }
    let mut best = (hi, f_hi);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let f = target_fraction(&scaled(spec, mid), &poses, orbit, targets)?;
        if (f - area).abs() < (best.1 - area).abs() {
            best = (mid, f);
        }
        if (f - area).abs() <= tolerance * 0.25 {
            break;
        }
        if f < area {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.1 - area).abs() > tolerance {
        return Err(Error::InvalidScene(alloc::format!(
            "closest reachable target fraction is {:.4}",
            best.1
        )));
    }
    Ok((scaled(spec, best.0), best.1))
}
