use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::viewshed::OrientedPoint;
use crate::{Mat3, Real, Transform, Vec3};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("pipeline stage '{stage}' failed: {message}")]
    Stage { stage: String, message: String },
}

/// Ranges the ground-truth transform is drawn from.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TransformPrior {
    /// Per-axis rotation range in degrees, within [0, 180).
    pub rotation_deg: [Real; 2],
    /// Per-component translation range in world units.
    pub translation: [Real; 2],
}

impl Default for TransformPrior {
    fn default() -> Self {
        Self {
            rotation_deg: [0.0, 45.0],
            translation: [-0.25, 0.25],
        }
    }
}

impl TransformPrior {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let [lo, hi] = self.rotation_deg;
        if !(0.0..180.0).contains(&lo) || !(0.0..180.0).contains(&hi) || lo > hi {
            return Err(HarnessError::Config(format!(
                "rotation range [{lo}, {hi}] must be inside [0, 180)"
            )));
        }
        let [tlo, thi] = self.translation;
        if !tlo.is_finite() || !thi.is_finite() || tlo > thi {
            return Err(HarnessError::Config("translation range must be finite".into()));
        }
        Ok(())
    }

    fn draw_in(range: [Real; 2], rng: &mut impl Rng) -> Real {
        if range[0] == range[1] {
            range[0]
        } else {
            rng.gen_range(range[0]..range[1])
        }
    }
}

/// Draws per-axis rotations uniform in the prior range, composed in fixed
/// X-then-Y-then-Z order, plus a uniform translation.
pub fn draw_gt_transform(prior: &TransformPrior, rng: &mut impl Rng) -> Transform {
    let ax = TransformPrior::draw_in(prior.rotation_deg, rng).to_radians();
    let ay = TransformPrior::draw_in(prior.rotation_deg, rng).to_radians();
    let az = TransformPrior::draw_in(prior.rotation_deg, rng).to_radians();
    let rotation = Mat3::rotation_z(az) * Mat3::rotation_y(ay) * Mat3::rotation_x(ax);
    let translation = Vec3::new(
        TransformPrior::draw_in(prior.translation, rng),
        TransformPrior::draw_in(prior.translation, rng),
        TransformPrior::draw_in(prior.translation, rng),
    );
    Transform::rigid(rotation, translation)
}

/// Camera-index overlap between the two scenes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    /// Even frames vs odd frames.
    Full,
    /// Even frames of the first 70% vs odd frames of the last 70%.
    Partial,
    /// First half vs second half.
    None,
}

/// Splits a capture sequence into the two registration sides.
pub fn split_cameras<T: Clone>(
    cameras: &[T],
    mode: OverlapMode,
) -> Result<(Vec<T>, Vec<T>), HarnessError> {
    let n = cameras.len();
    if n < 4 {
        return Err(HarnessError::Config(format!(
            "need at least 4 cameras to split, got {n}"
        )));
    }
    let pick = |pred: &dyn Fn(usize) -> bool| -> Vec<T> {
        cameras
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(*i))
            .map(|(_, c)| c.clone())
            .collect()
    };
    let (a, b) = match mode {
        OverlapMode::Full => (pick(&|i| i % 2 == 0), pick(&|i| i % 2 == 1)),
        OverlapMode::Partial => {
            let window = (0.7 * n as Real).ceil() as usize;
            (
                pick(&|i| i % 2 == 0 && i < window),
                pick(&|i| i % 2 == 1 && i >= n - window),
            )
        }
        OverlapMode::None => (pick(&|i| i < n / 2), pick(&|i| i >= n / 2)),
    };
    Ok((a, b))
}

/// Registration error metrics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegistrationErrors {
    /// Geodesic rotation error in degrees.
    pub rot_deg: Real,
    /// Translation error norm, multiplied by 1e2.
    pub trans_x100: Real,
    /// Relative scale error |s_hat / s_gt - 1|.
    pub scale: Real,
}

pub fn registration_errors(estimate: &Transform, gt: &Transform) -> RegistrationErrors {
    let rot_deg = estimate.rotation_angle_to(gt).to_degrees();
    let trans_x100 = (estimate.translation - gt.translation).norm() * 100.0;
    let scale = (estimate.scale / gt.scale - 1.0).abs();
    RegistrationErrors {
        rot_deg,
        trans_x100,
        scale,
    }
}

/// Root-mean-square aggregate across repeated runs.
pub fn rms(values: &[Real]) -> Real {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<Real>() / values.len() as Real).sqrt()
}

pub fn median(values: &[Real]) -> Real {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Adds independent zero-mean uniform noise of half-width
/// `pct/100 * scene_diagonal` to positions; directions are untouched.
pub fn add_oriented_point_noise(
    points: &mut [OrientedPoint],
    pct_of_scene_size: Real,
    scene_diagonal: Real,
    rng: &mut impl Rng,
) {
    assert!((0.0..=100.0).contains(&pct_of_scene_size));
    let half_width = pct_of_scene_size / 100.0 * scene_diagonal;
    if half_width == 0.0 {
        return;
    }
    for p in points {
        p.x.x += rng.gen_range(-half_width..half_width);
        p.x.y += rng.gen_range(-half_width..half_width);
        p.x.z += rng.gen_range(-half_width..half_width);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io_core::seeded_rng;

    #[test]
    fn zero_width_prior_gives_identity() {
        let prior = TransformPrior {
            rotation_deg: [0.0, 0.0],
            translation: [0.0, 0.0],
        };
        let mut rng = seeded_rng(1, "gt");
        let t = draw_gt_transform(&prior, &mut rng);
        assert!(t.rotation.max_abs_diff(&Mat3::identity()) == 0.0);
        assert_eq!(t.translation, Vec3::zero());
    }

    #[test]
    fn geodesic_angle_bounded_by_axis_sum() {
        let prior = TransformPrior::default();
        let mut rng = seeded_rng(2, "gt-bound");
        for _ in 0..500 {
            let t = draw_gt_transform(&prior, &mut rng);
            let angle = t.rotation_angle_to(&Transform::identity()).to_degrees();
            assert!(angle <= 3.0 * 45.0 + 1e-9);
        }
    }

    #[test]
    fn split_twenty_cameras_full() {
        let cams: Vec<usize> = (0..20).collect();
        let (a, b) = split_cameras(&cams, OverlapMode::Full).unwrap();
        assert_eq!(a, vec![0, 2, 4, 6, 8, 10, 12, 14, 16, 18]);
        assert_eq!(b, vec![1, 3, 5, 7, 9, 11, 13, 15, 17, 19]);
    }

    #[test]
    fn split_twenty_cameras_partial_has_40pct_window() {
        let cams: Vec<usize> = (0..20).collect();
        let (a, b) = split_cameras(&cams, OverlapMode::Partial).unwrap();
        assert_eq!(a, vec![0, 2, 4, 6, 8, 10, 12]);
        assert_eq!(b, vec![7, 9, 11, 13, 15, 17, 19]);
        // Index window shared by both sides: 6..=13, i.e. 8 of 20 frames.
        let window: Vec<usize> = (6..14).collect();
        assert_eq!(window.len() * 100 / cams.len(), 40);
    }

    #[test]
    fn split_twenty_cameras_none() {
        let cams: Vec<usize> = (0..20).collect();
        let (a, b) = split_cameras(&cams, OverlapMode::None).unwrap();
        assert_eq!(a, (0..10).collect::<Vec<_>>());
        assert_eq!(b, (10..20).collect::<Vec<_>>());
    }

    #[test]
    fn split_needs_four_cameras() {
        let cams = [0, 1, 2];
        assert!(split_cameras(&cams, OverlapMode::Full).is_err());
    }

    #[test]
    fn registration_error_examples() {
        let t = draw_gt_transform(&TransformPrior::default(), &mut seeded_rng(3, "t"));
        let e = registration_errors(&t, &t);
        assert_eq!(e.rot_deg, 0.0);
        assert_eq!(e.trans_x100, 0.0);
        assert_eq!(e.scale, 0.0);

        // One degree about an arbitrary axis.
        let one_deg = Transform::rigid(
            t.rotation * Mat3::rotation_y(1.0f64.to_radians()),
            t.translation,
        );
        let e = registration_errors(&one_deg, &t);
        assert!((e.rot_deg - 1.0).abs() < 1e-9);

        // The 3-4-5 translation example.
        let shifted = Transform::rigid(
            t.rotation,
            t.translation + Vec3::new(0.03, 0.04, 0.0),
        );
        let e = registration_errors(&shifted, &t);
        assert!((e.trans_x100 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn noise_respects_bounds_and_zero_pct_is_identity() {
        let mut rng = seeded_rng(4, "noise");
        let base = OrientedPoint::new(Vec3::new(0.1, 0.2, 0.3), Vec3::unit_x()).unwrap();
        let mut points = vec![base; 1000];
        add_oriented_point_noise(&mut points, 0.0, 2.0, &mut rng);
        assert!(points.iter().all(|p| p.x == base.x));

        add_oriented_point_noise(&mut points, 20.0, 2.0, &mut rng);
        let half = 0.2 * 2.0;
        for p in &points {
            assert!((p.x.x - base.x.x).abs() <= half);
            assert!((p.x.y - base.x.y).abs() <= half);
            assert!((p.x.z - base.x.z).abs() <= half);
            assert_eq!(p.d, base.d);
        }
    }

    #[test]
    fn noise_mean_is_centered() {
        let mut rng = seeded_rng(5, "noise-mean");
        let base = OrientedPoint::new(Vec3::zero(), Vec3::unit_z()).unwrap();
        let n = 100_000;
        let mut points = vec![base; n];
        let diag = 1.0;
        add_oriented_point_noise(&mut points, 10.0, diag, &mut rng);
        let half = 0.1;
        let sigma = half / 3.0f64.sqrt(); // std of U(-h, h)
        let tol = 4.0 * sigma / (n as f64).sqrt();
        for axis in 0..3 {
            let mean = points.iter().map(|p| p.x[axis]).sum::<f64>() / n as f64;
            assert!(mean.abs() < tol, "axis {axis} mean {mean} tol {tol}");
        }
    }
}
