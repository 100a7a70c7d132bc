//! Semantic radiance fields from posed RGB + label images.
//!
//! A small MLP maps a 3D position to volume density and semantic logits and,
//! together with a view direction, to color. Rays are rendered by quadrature
//! compositing with coarse stratified samples followed by inverse-CDF fine
//! samples. On top of that sit the pieces that make the field useful for
//! focusing on a handful of target classes:
//!
//! * [`train`] implements the joint photometric + focal semantic objective,
//!   the semantic-only warmup, the negative-ray recoloring used for fast
//!   target-focused training, and label subsampling for weak supervision.
//! * [`render`] composites color, semantics and depth, and implements the
//!   editing modes (unique display of a class, masking a class out).
//! * [`selfsup`] cleans rendered label maps with morphology and k-means++
//!   so they can be fed back as supervision.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats, the CLI and anything touching the clock live in the
//! `semfield` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

extern crate alloc;

pub mod camera;
pub mod error;
pub mod field;
pub mod geometry;
pub mod metrics;
pub mod real;
pub mod render;
pub mod sampling;
pub mod scene;
pub mod seed;
pub mod selfsup;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;

/// Index of a semantic class.
pub type ClassId = u8;

/// Label value for pixels without semantic supervision.
pub const UNLABELED: ClassId = 255;
