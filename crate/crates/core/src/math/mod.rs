//! Scalar-generic linear algebra used across the crate.

mod aabb;
mod eigen;
mod mat3;
mod scalar;
mod vec3;

pub use aabb::Aabb;
pub use eigen::sym_eigen3;
pub use mat3::Mat3;
pub use scalar::Scalar;
pub use vec3::Vec3;

/// Fixed-size 6-vector used by the oriented-point flow.
pub type Vec6<S> = [S; 6];

pub fn vec6_is_finite<S: Scalar>(v: &Vec6<S>) -> bool {
    v.iter().all(|x| x.is_finite())
}
