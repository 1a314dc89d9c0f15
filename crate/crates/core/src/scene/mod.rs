//! Procedural synthetic radiance fields and the volume renderer providing
//! RGB, accumulated weights, and median-weight depth per ray.

mod camera;
mod field;
mod generate;
mod image;
mod render;

use thiserror::Error;

pub use camera::{look_at_camera, look_rotation, Camera, Ray};
pub use field::{FieldSample, RadianceField};
pub use generate::{
    make_scene, resolve_scene, scene_preset, voxelize, ClutterSpec, FamilyKind, FamilySpec,
    Primitive, PrimitiveSpec, ResolvedScene, SceneSpec, SdfOracle, Texture, TextureMode,
};
pub use image::{ImageBuf, RenderedImage, ScalarImage};
pub use render::{render_image, render_ray, Jitter, RenderOptions, RenderResult, OPACITY_FLOOR};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
}
