//! Registration of voxel radiance fields driven by viewshed fields: a
//! normalizing-flow density over oriented surface points that powers novel
//! camera generation, point-cloud extraction, coarse alignment, and masked
//! photometric SE(3) refinement.
//!
//! The numeric core is generic over the scalar type ([`math::Scalar`], f32 or
//! f64); the pipeline modules work in f64 through the aliases exported at the
//! crate root.

pub mod flow;
pub mod harness;
pub mod io_core;
pub mod math;
pub mod scene;
pub mod transform;
pub mod viewshed;

/// Pipeline scalar type.
pub type Real = f64;

pub type Vec3 = math::Vec3<Real>;
pub type Mat3 = math::Mat3<Real>;
pub type Aabb = math::Aabb<Real>;
pub type Vec6 = math::Vec6<Real>;
pub type Transform = transform::Transform<Real>;
pub type Se3Params = transform::Se3Params<Real>;
pub type Ray = scene::Ray<Real>;
pub type Camera = scene::Camera<Real>;
pub type RadianceField = scene::RadianceField<Real>;
pub type RenderOptions = scene::RenderOptions<Real>;
pub type RenderResult = scene::RenderResult<Real>;
pub type Mlp = flow::Mlp<Real>;
pub type FlowModel = flow::FlowModel<Real>;
