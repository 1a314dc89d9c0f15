use serde::{Deserialize, Serialize};

use crate::scene::look_at_camera;
use crate::viewshed::CameraShape;
use crate::{Camera, Real, Vec3};

/// Training-camera layouts; cameras are ordered as a capture sequence so
/// index-based overlap splits are contiguous arcs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RigKind {
    /// Single ring at a fixed elevation.
    Orbit { elevation_deg: Real },
    /// Several rings spread over an elevation range.
    Hemisphere {
        elevation_min_deg: Real,
        elevation_max_deg: Real,
        rings: usize,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RigConfig {
    pub kind: RigKind,
    pub n_cameras: usize,
    pub radius: Real,
    pub shape: CameraShape,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            kind: RigKind::Orbit {
                elevation_deg: 25.0,
            },
            n_cameras: 20,
            radius: 2.4,
            shape: CameraShape {
                width: 64,
                height: 64,
                fov_x_deg: 48.0,
            },
        }
    }
}

fn ring_position(radius: Real, azimuth: Real, elevation: Real) -> Vec3 {
    Vec3::new(
        radius * elevation.cos() * azimuth.cos(),
        radius * elevation.cos() * azimuth.sin(),
        radius * elevation.sin(),
    )
}

/// Builds the capture rig looking at the origin.
pub fn camera_rig(cfg: &RigConfig) -> Vec<Camera> {
    let n = cfg.n_cameras;
    let mut cams = Vec::with_capacity(n);
    match cfg.kind {
        RigKind::Orbit { elevation_deg } => {
            let elev = elevation_deg.to_radians();
            for i in 0..n {
                let az = std::f64::consts::TAU * i as Real / n as Real;
                cams.push(look_at_camera(
                    ring_position(cfg.radius, az, elev),
                    Vec3::zero(),
                    cfg.shape.width,
                    cfg.shape.height,
                    cfg.shape.fov_x_deg,
                ));
            }
        }
        RigKind::Hemisphere {
            elevation_min_deg,
            elevation_max_deg,
            rings,
        } => {
            let rings = rings.max(1);
            let base = n / rings;
            let extra = n % rings;
            let mut index = 0;
            for ring in 0..rings {
                let count = base + usize::from(ring < extra);
                let f = if rings == 1 {
                    0.5
                } else {
                    ring as Real / (rings - 1) as Real
                };
                let elev = (elevation_min_deg
                    + f * (elevation_max_deg - elevation_min_deg))
                    .to_radians();
                for k in 0..count {
                    // Stagger rings so azimuths interleave.
                    let az = std::f64::consts::TAU * (k as Real + 0.5 * ring as Real)
                        / count as Real;
                    cams.push(look_at_camera(
                        ring_position(cfg.radius, az, elev),
                        Vec3::zero(),
                        cfg.shape.width,
                        cfg.shape.height,
                        cfg.shape.fov_x_deg,
                    ));
                    index += 1;
                }
            }
            debug_assert_eq!(index, n);
        }
    }
    cams
}
