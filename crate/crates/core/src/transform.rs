//! Rigid and similarity transforms plus the se(3) exponential/log maps used
//! by the fine registration stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat3, Scalar, Vec3};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("rotation matrix is not orthonormal within {tol}: max deviation {dev}")]
    NotRotation { dev: f64, tol: f64 },
    #[error("rotation matrix has non-positive determinant {det}")]
    Reflection { det: f64 },
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("rotation angle {angle} too close to pi for the log map")]
    LogDomain { angle: f64 },
}

/// SE(3) element with an optional uniform scale: `p -> scale * R * p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform<S> {
    pub rotation: Mat3<S>,
    pub translation: Vec3<S>,
    pub scale: S,
}

impl<S: Scalar> Transform<S> {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
            scale: S::one(),
        }
    }

    pub fn rigid(rotation: Mat3<S>, translation: Vec3<S>) -> Self {
        Self {
            rotation,
            translation,
            scale: S::one(),
        }
    }

    pub fn from_translation(translation: Vec3<S>) -> Self {
        Self::rigid(Mat3::identity(), translation)
    }

    pub fn with_scale(mut self, scale: S) -> Self {
        self.scale = scale;
        self
    }

    /// Checks the rotation/scale invariants at the given tolerance.
    pub fn validate(&self, tol: S) -> Result<(), TransformError> {
        let gram = self.rotation.transpose() * self.rotation;
        let dev = gram.max_abs_diff(&Mat3::identity());
        if dev >= tol {
            return Err(TransformError::NotRotation {
                dev: dev.to_f64_lossy(),
                tol: tol.to_f64_lossy(),
            });
        }
        let det = self.rotation.determinant();
        if det <= S::zero() {
            return Err(TransformError::Reflection {
                det: det.to_f64_lossy(),
            });
        }
        if !(self.scale > S::zero()) {
            return Err(TransformError::NonPositiveScale(self.scale.to_f64_lossy()));
        }
        Ok(())
    }

    #[inline]
    pub fn apply_point(&self, p: Vec3<S>) -> Vec3<S> {
        self.rotation * p * self.scale + self.translation
    }

    /// Rotates a direction (no translation or scale) and renormalizes.
    #[inline]
    pub fn apply_direction(&self, d: Vec3<S>) -> Vec3<S> {
        (self.rotation * d).normalized()
    }

    /// Composition: `(self * rhs)(p) = self(rhs(p))`.
    pub fn compose(&self, rhs: &Self) -> Self {
        Self {
            rotation: self.rotation * rhs.rotation,
            translation: self.apply_point(rhs.translation),
            scale: self.scale * rhs.scale,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = S::one() / self.scale;
        let rot_t = self.rotation.transpose();
        Self {
            rotation: rot_t,
            translation: rot_t * (-self.translation) * inv_scale,
            scale: inv_scale,
        }
    }

    /// Geodesic rotation angle between the rotations of two transforms, radians.
    pub fn rotation_angle_to(&self, other: &Self) -> S {
        let rel = self.rotation * other.rotation.transpose();
        let c = ((rel.trace() - S::one()) * S::c(0.5)).min(S::one()).max(-S::one());
        c.acos()
    }

    pub fn cast<T: Scalar>(&self) -> Transform<T> {
        Transform {
            rotation: self.rotation.cast(),
            translation: self.translation.cast(),
            scale: T::c(self.scale.to_f64_lossy()),
        }
    }
}

/// Tangent-space parameters: rotation `omega` (axis-angle), translation `v`,
/// and an optional log-scale for Sim(3) fits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se3Params<S> {
    pub xi: [S; 6],
    pub log_scale: Option<S>,
}

impl<S: Scalar> Se3Params<S> {
    pub fn zero(with_scale: bool) -> Self {
        Self {
            xi: [S::zero(); 6],
            log_scale: with_scale.then(S::zero),
        }
    }

    pub fn omega(&self) -> Vec3<S> {
        Vec3::new(self.xi[0], self.xi[1], self.xi[2])
    }

    pub fn v(&self) -> Vec3<S> {
        Vec3::new(self.xi[3], self.xi[4], self.xi[5])
    }

    pub fn dof(&self) -> usize {
        if self.log_scale.is_some() {
            7
        } else {
            6
        }
    }
}

const TAYLOR_SWITCH: f64 = 1e-6;

/// Rodrigues rotation from an axis-angle vector.
pub fn so3_exp<S: Scalar>(omega: Vec3<S>) -> Mat3<S> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = Mat3::skew(omega);
    let k2 = k * k;
    let (a, b) = if theta < S::c(TAYLOR_SWITCH) {
        // sin(t)/t and (1-cos(t))/t^2 expanded around zero.
        (
            S::one() - theta2 / S::c(6.0),
            S::c(0.5) - theta2 / S::c(24.0),
        )
    } else {
        (theta.sin() / theta, (S::one() - theta.cos()) / theta2)
    };
    Mat3::identity() + k.scale(a) + k2.scale(b)
}

/// Axis-angle vector of a rotation; errors when the angle reaches pi.
pub fn so3_log<S: Scalar>(r: &Mat3<S>) -> Result<Vec3<S>, TransformError> {
    let c = ((r.trace() - S::one()) * S::c(0.5)).min(S::one()).max(-S::one());
    let theta = c.acos();
    if theta >= S::c(std::f64::consts::PI - 1e-9) {
        return Err(TransformError::LogDomain {
            angle: theta.to_f64_lossy(),
        });
    }
    let w = Vec3::new(
        r.rows[2][1] - r.rows[1][2],
        r.rows[0][2] - r.rows[2][0],
        r.rows[1][0] - r.rows[0][1],
    );
    let factor = if theta < S::c(TAYLOR_SWITCH) {
        // theta / (2 sin theta) ~ 1/2 + theta^2/12
        S::c(0.5) + theta * theta / S::c(12.0)
    } else {
        theta / (S::c(2.0) * theta.sin())
    };
    Ok(w * factor)
}

fn se3_v_matrix<S: Scalar>(omega: Vec3<S>) -> Mat3<S> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = Mat3::skew(omega);
    let k2 = k * k;
    let (b, c) = if theta < S::c(TAYLOR_SWITCH) {
        (
            S::c(0.5) - theta2 / S::c(24.0),
            S::c(1.0 / 6.0) - theta2 / S::c(120.0),
        )
    } else {
        (
            (S::one() - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Mat3::identity() + k.scale(b) + k2.scale(c)
}

fn se3_v_inverse<S: Scalar>(omega: Vec3<S>) -> Mat3<S> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = Mat3::skew(omega);
    let k2 = k * k;
    let c = if theta < S::c(TAYLOR_SWITCH) {
        S::c(1.0 / 12.0) + theta2 / S::c(720.0)
    } else {
        S::one() / theta2 - (S::one() + theta.cos()) / (S::c(2.0) * theta * theta.sin())
    };
    Mat3::identity() - k.scale(S::c(0.5)) + k2.scale(c)
}

/// Exponential map from tangent parameters to a transform.
pub fn se3_exp<S: Scalar>(params: &Se3Params<S>) -> Transform<S> {
    let omega = params.omega();
    let rotation = so3_exp(omega);
    let translation = se3_v_matrix(omega) * params.v();
    let scale = params.log_scale.map_or(S::one(), |ls| ls.exp());
    Transform {
        rotation,
        translation,
        scale,
    }
}

/// Log map; fails when the rotation angle reaches pi.
pub fn se3_log<S: Scalar>(t: &Transform<S>) -> Result<Se3Params<S>, TransformError> {
    let omega = so3_log(&t.rotation)?;
    let v = se3_v_inverse(omega) * t.translation;
    let log_scale = if t.scale == S::one() {
        None
    } else {
        Some(t.scale.ln())
    };
    Ok(Se3Params {
        xi: [omega.x, omega.y, omega.z, v.x, v.y, v.z],
        log_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type T64 = Transform<f64>;

    #[test]
    fn exp_of_zero_is_identity() {
        let t = se3_exp(&Se3Params::<f64>::zero(false));
        assert!(t.rotation.max_abs_diff(&Mat3::identity()) == 0.0);
        assert_eq!(t.translation, Vec3::zero());
        assert_eq!(t.scale, 1.0);
    }

    #[test]
    fn exp_composes_with_negative_to_identity() {
        let p = Se3Params {
            xi: [0.3, -0.2, 0.9, 1.0, -2.0, 0.4],
            log_scale: None,
        };
        let n = Se3Params {
            xi: p.xi.map(|x| -x),
            log_scale: None,
        };
        let t = se3_exp(&p).compose(&se3_exp(&n));
        assert!(t.rotation.max_abs_diff(&Mat3::identity()) < 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let p = Se3Params {
            xi: [0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0],
            log_scale: None,
        };
        let t = se3_exp(&p);
        let y = t.apply_point(Vec3::unit_x());
        assert!((y - Vec3::unit_y()).norm() < 1e-12);
    }

    #[test]
    fn log_exp_round_trip() {
        let cases: [[f64; 6]; 3] = [
            [1e-9, 0.0, 0.0, 0.1, 0.2, 0.3],
            [0.4, -1.1, 0.8, -0.5, 2.0, 0.0],
            [3.0, 0.6, -0.4, 1.0, 1.0, 1.0],
        ];
        for xi in cases {
            let p = Se3Params {
                xi,
                log_scale: None,
            };
            let back = se3_log(&se3_exp(&p)).unwrap();
            for i in 0..6 {
                assert!(
                    (back.xi[i] - xi[i]).abs() < 1e-9,
                    "component {i}: {} vs {}",
                    back.xi[i],
                    xi[i]
                );
            }
        }
    }

    #[test]
    fn log_rejects_angle_pi() {
        let r = Mat3::rotation_z(std::f64::consts::PI);
        let t = T64::rigid(r, Vec3::zero());
        assert!(matches!(se3_log(&t), Err(TransformError::LogDomain { .. })));
    }

    #[test]
    fn inverse_and_compose_are_consistent() {
        let t = T64::rigid(
            Mat3::rotation_x(0.3) * Mat3::rotation_y(-1.2),
            Vec3::new(0.5, -2.0, 1.0),
        )
        .with_scale(1.7);
        let p = Vec3::new(0.1, 0.2, -0.9);
        let round = t.inverse().apply_point(t.apply_point(p));
        assert!((round - p).norm() < 1e-12);
        let composed = t.compose(&t.inverse());
        assert!(composed.rotation.max_abs_diff(&Mat3::identity()) < 1e-12);
        assert!(composed.translation.norm() < 1e-12);
        assert!((composed.scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_reflection() {
        let mut t = T64::identity();
        t.rotation.rows[0][0] = -1.0;
        assert!(t.validate(1e-9).is_err());
    }
}
