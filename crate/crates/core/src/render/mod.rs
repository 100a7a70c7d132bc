//! Compositing, editing and image rendering.

mod composite;
mod edit;
mod image;

pub use composite::{
    alpha_comp, composite_color, composite_ray, composite_semantics, expected_depth, transmittance,
    weights, RenderResult, SemanticComposite, DEPTH_OPACITY_FLOOR,
};
pub(crate) use composite::{composite_backward, weights_into};
pub use edit::{edit_mask, render_unique_display, EditMode, RenderSettings};
pub use image::{
    render_image, render_rays, render_rows, render_semantics, RenderedImage, SamplingConfig, View,
};
