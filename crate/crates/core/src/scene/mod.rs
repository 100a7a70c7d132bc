//! Procedural scenes with exact ground truth, and the posed-image dataset
//! everything else trains on.

mod dataset;
mod generate;

pub use dataset::{is_test_view, Frame, SceneDataset};
pub use generate::{default_desk_scene, fit_target_area, generate_scene, orbit_poses, Orbit};

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::camera::Ray;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ClassId;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Shape {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        center: Vec3,
        half_extents: Vec3,
    },
    /// Horizontal square `z = height`, `|x|, |y| <= half_extent`, seen from both sides.
    Plane {
        height: f64,
        half_extent: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Texture {
    #[default]
    Solid,
    /// Albedo scaled by `1 +- contrast` on alternating `cell`-sized squares
    /// of the xy plane.
    Checker { cell: f64, contrast: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Primitive {
    pub shape: Shape,
    pub albedo: [f64; 3],
    pub class_id: ClassId,
    #[cfg_attr(feature = "serde", serde(default))]
    pub texture: Texture,
}

/// A bright spot added on top of the shading of any surface near `center`
/// (falls off quadratically to zero at `radius`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Highlight {
    pub center: Vec3,
    pub radius: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Lighting {
    pub ambient: f64,
    /// Direction towards the light.
    pub direction: Vec3,
    pub intensity: f64,
}

impl Default for Lighting {
    fn default() -> Self {
        Self {
            ambient: 0.35,
            direction: Vec3::new(0.4, -0.3, 0.85).normalized(),
            intensity: 0.65,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub background_class: ClassId,
    /// Color of rays that hit nothing.
    pub background_color: [f64; 3],
    pub lighting: Lighting,
    #[cfg_attr(feature = "serde", serde(default))]
    pub highlights: Vec<Highlight>,
    /// Axis-aligned world bounds every primitive must fit in.
    pub bounds_min: Vec3,
    pub bounds_max: Vec3,
}

impl SceneSpec {
    /// Number of classes: one past the largest id in use.
    pub fn class_count(&self) -> usize {
        self.primitives
            .iter()
            .map(|p| p.class_id)
            .chain(core::iter::once(self.background_class))
            .max()
            .map_or(0, |m| m as usize + 1)
    }

    /// Class ids used by primitives other than the background class.
    pub fn object_classes(&self) -> Vec<ClassId> {
        let mut c: Vec<ClassId> = self
            .primitives
            .iter()
            .map(|p| p.class_id)
            .filter(|c| *c != self.background_class)
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let l = self.class_count();
        if self.background_class == crate::UNLABELED {
            problems.push(alloc::format!(
                "background class may not be the unlabeled value {}",
                crate::UNLABELED
            ));
        }
        let mut used = alloc::vec![false; l];
        used[self.background_class as usize] = true;
        for p in &self.primitives {
            used[p.class_id as usize] = true;
        }
        if let Some(gap) = used.iter().position(|u| !u) {
            problems.push(alloc::format!(
                "class ids must be dense in [0, {l}); {gap} is unused"
            ));
        }
        if self.object_classes().is_empty() && !self.primitives.is_empty() {
            problems.push("need at least one primitive outside the background class".into());
        }
        let (lo, hi) = (self.bounds_min, self.bounds_max);
        if !(0..3).all(|i| lo[i] < hi[i]) {
            problems.push("bounds_min must be below bounds_max on every axis".into());
        }
        for (i, p) in self.primitives.iter().enumerate() {
            if p.albedo.iter().any(|c| !(0.0..=1.0).contains(c)) {
                problems.push(alloc::format!("primitive {i}: albedo outside [0, 1]"));
            }
            let (pmin, pmax) = match p.shape {
                Shape::Sphere { center, radius } => {
                    if !(radius > 0.0) {
                        problems.push(alloc::format!("primitive {i}: radius must be positive"));
                    }
                    let r = Vec3::new(radius, radius, radius);
                    (center - r, center + r)
                }
                Shape::Box {
                    center,
                    half_extents,
                } => {
                    if !(0..3).all(|k| half_extents[k] > 0.0) {
                        problems.push(alloc::format!(
                            "primitive {i}: box extents must be positive"
                        ));
                    }
                    (center - half_extents, center + half_extents)
                }
                Shape::Plane {
                    height,
                    half_extent,
                } => {
                    if !(half_extent > 0.0) {
                        problems.push(alloc::format!(
                            "primitive {i}: plane extent must be positive"
                        ));
                    }
                    (
                        Vec3::new(-half_extent, -half_extent, height),
                        Vec3::new(half_extent, half_extent, height),
                    )
                }
            };
            if !(0..3).all(|k| pmin[k] >= lo[k] - 1e-9 && pmax[k] <= hi[k] + 1e-9) {
                problems.push(alloc::format!("primitive {i} leaves the world bounds"));
            }
        }
        if !(self.lighting.direction.norm() > 0.0) {
            problems.push("light direction must be non-zero".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScene(problems.join("; ")))
        }
    }
}

/// What a primary ray sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub color: [f64; 3],
    pub class_id: ClassId,
    /// `+inf` on a miss.
    pub distance: f64,
}

const HIT_EPS: f64 = 1e-9;

fn intersect(shape: &Shape, ray: &Ray) -> Option<(f64, Vec3)> {
    let (o, d) = (ray.origin, ray.direction);
    match *shape {
        Shape::Sphere { center, radius } => {
            let oc = o - center;
            let b = oc.dot(d);
            let c = oc.dot(oc) - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            let t = if -b - s > HIT_EPS { -b - s } else { -b + s };
            (t > HIT_EPS).then(|| (t, (ray.at(t) - center) * (1.0 / radius)))
        }
        Shape::Box {
            center,
            half_extents,
        } => {
            let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
            let (mut axis0, mut axis1) = (0, 0);
            for k in 0..3 {
                let lo = center[k] - half_extents[k];
                let hi = center[k] + half_extents[k];
                if d[k] == 0.0 {
                    if o[k] < lo || o[k] > hi {
                        return None;
                    }
                    continue;
                }
                let (mut a, mut b) = ((lo - o[k]) / d[k], (hi - o[k]) / d[k]);
                if a > b {
                    core::mem::swap(&mut a, &mut b);
                }
                if a > t0 {
                    t0 = a;
                    axis0 = k;
                }
                if b < t1 {
                    t1 = b;
                    axis1 = k;
                }
            }
            if t0 > t1 {
                return None;
            }
            let (t, axis) = if t0 > HIT_EPS {
                (t0, axis0)
            } else {
                (t1, axis1)
            };
            if !(t > HIT_EPS) {
                return None;
            }
            let mut n = [0.0; 3];
            n[axis] = if ray.at(t)[axis] > center[axis] {
                1.0
            } else {
                -1.0
            };
            Some((t, Vec3(n)))
        }
        Shape::Plane {
            height,
            half_extent,
        } => {
            if d[2] == 0.0 {
                return None;
            }
            let t = (height - o[2]) / d[2];
            let p = ray.at(t);
            (t > HIT_EPS && p[0].abs() <= half_extent && p[1].abs() <= half_extent)
                .then(|| (t, Vec3::new(0.0, 0.0, 1.0)))
        }
    }
}

fn shade(spec: &SceneSpec, prim: &Primitive, p: Vec3, mut n: Vec3, d: Vec3) -> [f64; 3] {
    if n.dot(d) > 0.0 {
        n = -n;
    }
    let light = spec.lighting.direction.normalized();
    let lambert = n.dot(light).max(0.0);
    let mut albedo = prim.albedo;
    if let Texture::Checker { cell, contrast } = prim.texture {
        let parity = ((p[0] / cell).floor() as i64 + (p[1] / cell).floor() as i64).rem_euclid(2);
        let f = if parity == 0 {
            1.0 + contrast
        } else {
            1.0 - contrast
        };
        albedo = albedo.map(|a| a * f);
    }
    let shading = spec.lighting.ambient + spec.lighting.intensity * lambert;
    let mut c = albedo.map(|a| a * shading);
    for h in &spec.highlights {
        let r = (p - h.center).norm() / h.radius;
        if r < 1.0 {
            let boost = h.strength * (1.0 - r * r);
            c = c.map(|v| v + boost);
        }
    }
    c.map(|v| v.clamp(0.0, 1.0))
}

/// Closest intersection along `ray` (any `t > 0`; the ray's near/far bounds
/// are ignored). A tangent ray counts as a hit.
pub fn raytrace_pixel(spec: &SceneSpec, ray: &Ray) -> Hit {
    let mut best: Option<(f64, Vec3, &Primitive)> = None;
    for prim in &spec.primitives {
        if let Some((t, n)) = intersect(&prim.shape, ray) {
            if best.map_or(true, |(bt, _, _)| t < bt) {
                best = Some((t, n, prim));
            }
        }
    }
    match best {
        Some((t, n, prim)) => Hit {
            color: shade(spec, prim, ray.at(t), n, ray.direction),
            class_id: prim.class_id,
            distance: t,
        },
        None => Hit {
            color: spec.background_color,
            class_id: spec.background_class,
            distance: f64::INFINITY,
        },
    }
}

/// Quantizes a `[0, 1]` color to 8 bits.
pub fn to_rgb8(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}
