//! Viewshed fields: train a flow over oriented surface points collected from
//! training cameras, generate high-likelihood novel cameras by latent
//! sampling, and render per-pixel viewshed maps and masks.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{train_flow, FlowError, FlowTrainConfig, TrainReport};
use crate::io_core::rng::splitmix64;
use crate::scene::{look_rotation, render_ray, Jitter, SceneError};
use crate::{Camera, FlowModel, RadianceField, Real, RenderOptions, Transform, Vec3, Vec6};

#[derive(Debug, Error)]
pub enum ViewshedError {
    #[error("degenerate scene: {0}")]
    DegenerateScene(String),
    #[error("novel view generation failed: {0}")]
    Generation(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// A surface position paired with the unit direction it was observed from;
/// the 6D sample space of the viewshed flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedPoint {
    pub x: Vec3,
    pub d: Vec3,
}

impl OrientedPoint {
    pub fn new(x: Vec3, d: Vec3) -> Result<Self, ViewshedError> {
        if !x.is_finite() || !d.is_finite() {
            return Err(ViewshedError::Contract("non-finite oriented point".into()));
        }
        if (d.norm() - 1.0).abs() > 1e-9 {
            return Err(ViewshedError::Contract(format!(
                "direction norm {} is not 1 within 1e-9",
                d.norm()
            )));
        }
        Ok(Self { x, d })
    }

    pub fn to_vec6(self) -> Vec6 {
        [self.x.x, self.x.y, self.x.z, self.d.x, self.d.y, self.d.z]
    }

    /// Rebuilds a point from raw flow output, renormalizing the direction.
    /// Returns `None` for non-finite values or a vanishing direction.
    pub fn from_vec6(v: &Vec6) -> Option<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let d = Vec3::new(v[3], v[4], v[5]).try_normalized(1e-9)?;
        Some(Self {
            x: Vec3::new(v[0], v[1], v[2]),
            d,
        })
    }

    /// Positions map affinely; directions rotate and stay unit length.
    pub fn transformed(&self, t: &Transform) -> Self {
        Self {
            x: t.apply_point(self.x),
            d: t.apply_direction(self.d),
        }
    }
}

/// Depth statistics of the collection rays, kept for camera-origin
/// reconstruction at generation time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DepthStats {
    pub median: Real,
    pub mean: Real,
    pub std: Real,
    pub min: Real,
    pub max: Real,
    pub count: usize,
}

impl DepthStats {
    pub fn from_depths(depths: &mut Vec<Real>) -> Option<Self> {
        if depths.is_empty() {
            return None;
        }
        depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = depths.len();
        let mean = depths.iter().sum::<Real>() / n as Real;
        let var = depths.iter().map(|d| (d - mean).powi(2)).sum::<Real>() / n as Real;
        let median = if n % 2 == 1 {
            depths[n / 2]
        } else {
            0.5 * (depths[n / 2 - 1] + depths[n / 2])
        };
        Some(Self {
            median,
            mean,
            std: var.sqrt(),
            min: depths[0],
            max: depths[n - 1],
            count: n,
        })
    }
}

/// Ray-collection parameters for viewshed training data.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CollectConfig {
    pub rays_per_camera: usize,
    pub n_samples: usize,
    pub t_near: Real,
    pub t_far: Real,
    pub seed: u64,
}

impl CollectConfig {
    /// Span that covers the field from every camera position.
    pub fn for_scene(field: &RadianceField, cameras: &[Camera]) -> Self {
        let center = field.bounds().center();
        let reach = cameras
            .iter()
            .map(|c| (c.position() - center).norm())
            .fold(0.0, Real::max);
        Self {
            rays_per_camera: 2000,
            n_samples: 192,
            t_near: 0.0,
            t_far: reach + field.bounds().diagonal(),
            seed: 0,
        }
    }

    fn render_options(&self, camera_index: usize) -> RenderOptions {
        RenderOptions::new(self.n_samples, self.t_near, self.t_far)
            .with_jitter(Jitter::Stratified(splitmix64(
                self.seed ^ (camera_index as u64).wrapping_mul(0x9e37),
            )))
    }
}

/// Casts random pixels from each camera and emits an oriented point wherever
/// the ray registers a surface (median-weight depth). Rays with accumulated
/// opacity below the floor are skipped.
pub fn collect_oriented_points(
    field: &RadianceField,
    cameras: &[Camera],
    cfg: &CollectConfig,
) -> Result<(Vec<OrientedPoint>, DepthStats), ViewshedError> {
    if cameras.is_empty() || cfg.rays_per_camera == 0 {
        return Err(ViewshedError::Contract(
            "need at least one camera and one ray per camera".into(),
        ));
    }
    let per_camera: Vec<(Vec<OrientedPoint>, Vec<Real>)> = cameras
        .par_iter()
        .enumerate()
        .map(|(ci, cam)| {
            let opts = cfg.render_options(ci);
            let mut rng = crate::io_core::seeded_rng(cfg.seed, &format!("collect-{ci}"));
            let mut points = Vec::new();
            let mut depths = Vec::new();
            for _ in 0..cfg.rays_per_camera {
                let u = rng.gen_range(0..cam.width);
                let v = rng.gen_range(0..cam.height);
                let ray = cam.pixel_ray(u, v);
                let index = (v * cam.width + u) as u64;
                let r = render_ray(field, &ray, &opts, index).expect("camera rays are unit");
                if let Some(depth) = r.depth {
                    points.push(OrientedPoint {
                        x: ray.at(depth),
                        d: ray.dir,
                    });
                    depths.push(depth);
                }
            }
            (points, depths)
        })
        .collect();

    let mut points = Vec::new();
    let mut depths = Vec::new();
    for (p, d) in per_camera {
        points.extend(p);
        depths.extend(d);
    }
    let stats = DepthStats::from_depths(&mut depths).ok_or_else(|| {
        ViewshedError::DegenerateScene("no camera ray registered a surface".into())
    })?;
    Ok((points, stats))
}

/// Trains the viewshed flow on an explicit list of oriented points.
pub fn train_vf_from_points(
    points: &[OrientedPoint],
    flow_cfg: &FlowTrainConfig,
) -> Result<(FlowModel, TrainReport), ViewshedError> {
    let data: Vec<Vec6> = points.iter().map(|p| p.to_vec6()).collect();
    Ok(train_flow(&data, flow_cfg)?)
}

/// Collects oriented points from the training cameras and trains the flow on
/// them; the returned depth statistics feed origin reconstruction.
pub fn build_vf(
    field: &RadianceField,
    cameras: &[Camera],
    flow_cfg: &FlowTrainConfig,
    collect_cfg: &CollectConfig,
) -> Result<(FlowModel, DepthStats, TrainReport), ViewshedError> {
    let (points, stats) = collect_oriented_points(field, cameras, collect_cfg)?;
    let (model, report) = train_vf_from_points(&points, flow_cfg)?;
    Ok((model, stats, report))
}

/// Strategy for the depth used when inverting the surface equation into a
/// camera origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthStrategy {
    /// Empirical median of training-ray depths.
    #[default]
    TrainingMedian,
    /// One refinement pass: re-read depth from the provisional origin and
    /// re-apply the inversion once.
    Refined,
}

/// Novel-view generation parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NovelViewConfig {
    pub n_candidates: usize,
    pub n_views: usize,
    /// Per-image log-likelihood quantile used by [`vf_mask`].
    pub mask_threshold: Real,
    pub depth_for_origin: DepthStrategy,
}

impl Default for NovelViewConfig {
    fn default() -> Self {
        Self {
            n_candidates: 1024,
            n_views: 16,
            mask_threshold: 0.3,
            depth_for_origin: DepthStrategy::TrainingMedian,
        }
    }
}

impl NovelViewConfig {
    pub fn validate(&self) -> Result<(), ViewshedError> {
        if self.n_views == 0 || self.n_views > self.n_candidates {
            return Err(ViewshedError::Contract(format!(
                "n_views {} must be in 1..=n_candidates {}",
                self.n_views, self.n_candidates
            )));
        }
        if !(0.0..=1.0).contains(&self.mask_threshold) {
            return Err(ViewshedError::Contract(
                "mask threshold quantile must lie in [0,1]".into(),
            ));
        }
        Ok(())
    }
}

/// Image shape and field of view given to generated cameras.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CameraShape {
    pub width: u32,
    pub height: u32,
    pub fov_x_deg: Real,
}

/// A generated view together with the oriented point it was built from.
#[derive(Clone, Debug)]
pub struct NovelView {
    pub camera: Camera,
    pub point: OrientedPoint,
    pub depth: Real,
    pub log_prob: Real,
}

/// Draws latents, inverts them to oriented points, and ranks by likelihood.
pub fn novel_view_candidates<R: Rng>(
    vf: &FlowModel,
    n_candidates: usize,
    rng: &mut R,
) -> Result<Vec<(OrientedPoint, Real)>, ViewshedError> {
    let latents = vf.sample(rng, n_candidates)?;
    let mut out = Vec::with_capacity(n_candidates);
    for raw in &latents {
        let Some(point) = OrientedPoint::from_vec6(raw) else {
            continue;
        };
        let lp = vf.log_prob(&point.to_vec6())?;
        if lp.is_finite() {
            out.push((point, lp));
        }
    }
    Ok(out)
}

/// Generates the top-scoring novel cameras from the viewshed field.
///
/// Each kept oriented point becomes a camera looking along its direction,
/// with the origin reconstructed by pushing the surface point back by the
/// chosen depth.
pub fn generate_novel_views<R: Rng>(
    vf: &FlowModel,
    depth_stats: &DepthStats,
    cfg: &NovelViewConfig,
    shape: &CameraShape,
    field: &RadianceField,
    rng: &mut R,
) -> Result<Vec<NovelView>, ViewshedError> {
    cfg.validate()?;
    let mut candidates = novel_view_candidates(vf, cfg.n_candidates, rng)?;
    if candidates.len() < cfg.n_views {
        return Err(ViewshedError::Generation(format!(
            "only {} finite-likelihood candidates for {} views",
            candidates.len(),
            cfg.n_views
        )));
    }
    // Stable sort keeps candidate order on ties, so selection is
    // deterministic.
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    candidates.truncate(cfg.n_views);

    let views = candidates
        .into_iter()
        .map(|(point, log_prob)| {
            let mut depth = depth_stats.median;
            if cfg.depth_for_origin == DepthStrategy::Refined {
                let provisional = point.x - point.d * depth;
                let opts = RenderOptions::new(192, 0.0, depth_stats.max + field.bounds().diagonal());
                if let Ok(r) = render_ray(field, &crate::Ray::new(provisional, point.d), &opts, 0) {
                    if let Some(d) = r.depth {
                        depth = d;
                    }
                }
            }
            let origin = point.x - point.d * depth;
            let pose = Transform::rigid(look_rotation(point.d), origin);
            let camera = Camera::from_fov(pose, shape.width, shape.height, shape.fov_x_deg);
            NovelView {
                camera,
                point,
                depth,
                log_prob,
            }
        })
        .collect();
    Ok(views)
}

/// Per-pixel viewshed log-likelihood aligned with a depth render.
#[derive(Clone, Debug)]
pub struct ViewshedMap {
    pub width: u32,
    pub height: u32,
    /// Log-likelihood in nats; meaningful only where `valid`.
    pub scores: Vec<f32>,
    /// True where the depth render found a surface.
    pub valid: Vec<bool>,
}

/// Renders depth through the camera and scores each surface pixel's oriented
/// point under the viewshed field.
pub fn render_viewshed_map(
    vf: &FlowModel,
    field: &RadianceField,
    camera: &Camera,
    opts: &RenderOptions,
) -> Result<ViewshedMap, ViewshedError> {
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let rows: Vec<Vec<(f32, bool)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let ray = camera.pixel_ray(u, v);
                    let index = (v * w + u) as u64;
                    let r = render_ray(field, &ray, opts, index).expect("camera rays are unit");
                    match r.depth {
                        Some(depth) => {
                            let p = OrientedPoint {
                                x: ray.at(depth),
                                d: ray.dir,
                            };
                            let lp = vf
                                .log_prob(&p.to_vec6())
                                .expect("surface points are finite");
                            (lp as f32, true)
                        }
                        None => (f32::NEG_INFINITY, false),
                    }
                })
                .collect()
        })
        .collect();

    let mut scores = Vec::with_capacity((w * h) as usize);
    let mut valid = Vec::with_capacity((w * h) as usize);
    for row in rows {
        for (s, ok) in row {
            scores.push(s);
            valid.push(ok);
        }
    }
    Ok(ViewshedMap {
        width: w,
        height: h,
        scores,
        valid,
    })
}

/// Thresholds a viewshed map at a per-image score quantile; pixels are kept
/// where they are valid and score at or above the threshold.
pub fn vf_mask(map: &ViewshedMap, threshold_quantile: Real) -> Result<Vec<bool>, ViewshedError> {
    if !(0.0..=1.0).contains(&threshold_quantile) {
        return Err(ViewshedError::Contract(
            "threshold quantile must lie in [0,1]".into(),
        ));
    }
    let mut valid_scores: Vec<f32> = map
        .scores
        .iter()
        .zip(&map.valid)
        .filter(|(_, ok)| **ok)
        .map(|(s, _)| *s)
        .collect();
    if valid_scores.is_empty() {
        return Ok(vec![false; map.scores.len()]);
    }
    valid_scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = (threshold_quantile * (valid_scores.len() - 1) as Real).floor() as usize;
    let threshold = valid_scores[idx.min(valid_scores.len() - 1)];
    Ok(map
        .scores
        .iter()
        .zip(&map.valid)
        .map(|(s, ok)| *ok && *s >= threshold)
        .collect())
}
