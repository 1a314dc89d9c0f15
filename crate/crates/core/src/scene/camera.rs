use serde::{Deserialize, Serialize};

use crate::math::{Mat3, Scalar, Vec3};
use crate::transform::Transform;

use super::SceneError;

/// World-space ray with a unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray<S> {
    pub origin: Vec3<S>,
    pub dir: Vec3<S>,
}

impl<S: Scalar> Ray<S> {
    pub fn new(origin: Vec3<S>, dir: Vec3<S>) -> Self {
        Self { origin, dir }
    }

    #[inline]
    pub fn at(&self, t: S) -> Vec3<S> {
        self.origin + self.dir * t
    }

    /// Direction must be unit length within 1e-9.
    pub fn validate(&self) -> Result<(), SceneError> {
        let n = self.dir.norm();
        if (n - S::one()).abs() > S::c(1e-9) || !self.origin.is_finite() {
            return Err(SceneError::Contract(format!(
                "ray direction norm {} is not 1 within 1e-9",
                n.to_f64_lossy()
            )));
        }
        Ok(())
    }
}

/// Pinhole camera: camera-to-world pose plus intrinsics in pixels.
///
/// Camera space is +x right, +y down, +z forward (optical axis).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Camera<S> {
    pub pose: Transform<S>,
    pub fx: S,
    pub fy: S,
    pub cx: S,
    pub cy: S,
    pub width: u32,
    pub height: u32,
}

impl<S: Scalar> Camera<S> {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fx > S::zero() && self.fy > S::zero()) {
            return Err(SceneError::Config("focal lengths must be positive".into()));
        }
        let w = S::c(self.width as f64);
        let h = S::c(self.height as f64);
        if !(self.cx >= S::zero() && self.cx < w && self.cy >= S::zero() && self.cy < h) {
            return Err(SceneError::Config(
                "principal point must lie inside the image".into(),
            ));
        }
        self.pose
            .validate(S::c(1e-9))
            .map_err(|e| SceneError::Config(format!("camera pose invalid: {e}")))
    }

    /// Square-pixel camera from a horizontal field of view in degrees.
    pub fn from_fov(pose: Transform<S>, width: u32, height: u32, fov_x_deg: S) -> Self {
        let half = fov_x_deg.to_radians() * S::c(0.5);
        let fx = S::c(width as f64) * S::c(0.5) / half.tan();
        Self {
            pose,
            fx,
            fy: fx,
            cx: S::c(width as f64) * S::c(0.5),
            cy: S::c(height as f64) * S::c(0.5),
            width,
            height,
        }
    }

    pub fn position(&self) -> Vec3<S> {
        self.pose.translation
    }

    /// World-space optical axis (+z of camera space).
    pub fn forward(&self) -> Vec3<S> {
        self.pose.rotation.col(2)
    }

    /// Ray through continuous pixel coordinates (u, v).
    pub fn ray_at(&self, u: S, v: S) -> Ray<S> {
        let dir_cam = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, S::one());
        let dir = (self.pose.rotation * dir_cam).normalized();
        Ray::new(self.position(), dir)
    }

    /// Ray through the center of integer pixel (u, v).
    pub fn pixel_ray(&self, u: u32, v: u32) -> Ray<S> {
        self.ray_at(
            S::c(u as f64) + S::c(0.5),
            S::c(v as f64) + S::c(0.5),
        )
    }

    pub fn pixel_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    /// Re-poses the camera by a world-space transform: `pose' = world * pose`.
    pub fn transformed(&self, world: &Transform<S>) -> Self {
        let mut out = *self;
        out.pose = world.compose(&self.pose);
        // Composition with a scaled transform must keep the rotation orthonormal.
        out.pose.scale = S::one();
        out
    }
}

/// Rotation whose +z column equals `forward`, with roll fixed by projecting
/// world +z onto the image plane (+y fallback when degenerate).
pub fn look_rotation<S: Scalar>(forward: Vec3<S>) -> Mat3<S> {
    let f = forward.normalized();
    let eps = S::c(1e-6);
    let project = |axis: Vec3<S>| {
        let p = axis - f * axis.dot(f);
        p.try_normalized(eps)
    };
    let up = project(Vec3::unit_z())
        .or_else(|| project(Vec3::unit_y()))
        .expect("forward cannot be parallel to both +z and +y");
    // Columns: right, down, forward; right-handed with det +1.
    let right = f.cross(up);
    Mat3::from_cols(right, -up, f)
}

/// Camera placed at `position` looking toward `target`.
pub fn look_at_camera<S: Scalar>(
    position: Vec3<S>,
    target: Vec3<S>,
    width: u32,
    height: u32,
    fov_x_deg: S,
) -> Camera<S> {
    let rotation = look_rotation(target - position);
    Camera::from_fov(
        Transform::rigid(rotation, position),
        width,
        height,
        fov_x_deg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_rotation_is_proper_and_points_forward() {
        for dir in [
            Vec3::new(1.0f64, 0.3, -0.2),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.2, -0.9, 0.1),
        ] {
            let r = look_rotation(dir);
            assert!(r.is_rotation(1e-9), "dir {dir:?}");
            assert!((r.col(2) - dir.normalized()).norm() < 1e-9);
        }
    }

    #[test]
    fn principal_ray_is_forward() {
        let cam = look_at_camera(Vec3::new(0.0f64, -3.0, 1.0), Vec3::zero(), 64, 48, 50.0);
        let r = cam.ray_at(cam.cx, cam.cy);
        assert!((r.dir - cam.forward()).norm() < 1e-12);
        assert!((r.dir.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_bad_principal_point() {
        let mut cam = look_at_camera(Vec3::new(0.0f64, -3.0, 0.0), Vec3::zero(), 64, 48, 50.0);
        cam.cx = 64.0;
        assert!(cam.validate().is_err());
    }
}
