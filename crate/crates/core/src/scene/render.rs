use rayon::prelude::*;

use crate::io_core::rng::JitterRng;
use crate::math::Scalar;

use super::{
    Camera, ImageBuf, RadianceField, Ray, RenderedImage, ScalarImage, SceneError,
};

/// Rays with accumulated weight below this are declared "no surface" and
/// excluded from oriented-point collection.
pub const OPACITY_FLOOR: f64 = 0.1;

/// Transmittance below this ends the march early; the remaining weights are
/// zero to this precision.
const TRANSMITTANCE_CUTOFF: f64 = 1e-7;

/// Sample placement along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Jitter {
    /// Deterministic bin midpoints.
    Midpoint,
    /// Stratified jitter; the per-ray stream is derived from (seed, ray index).
    Stratified(u64),
}

#[derive(Clone, Copy, Debug)]
pub struct RenderOptions<S> {
    pub n_samples: usize,
    pub t_near: S,
    pub t_far: S,
    pub jitter: Jitter,
    /// Intersect [t_near, t_far] with the field bounds before sampling.
    pub clip_to_bounds: bool,
}

impl<S: Scalar> RenderOptions<S> {
    pub fn new(n_samples: usize, t_near: S, t_far: S) -> Self {
        Self {
            n_samples,
            t_near,
            t_far,
            jitter: Jitter::Midpoint,
            clip_to_bounds: true,
        }
    }

    /// Span covering the whole field from any reasonable external camera.
    pub fn covering(field: &RadianceField<S>, n_samples: usize) -> Self {
        let diag = field.bounds().diagonal();
        Self::new(n_samples, S::zero(), diag * S::c(2.0))
    }

    pub fn with_jitter(mut self, jitter: Jitter) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.n_samples < 2 {
            return Err(SceneError::Config("n_samples must be at least 2".into()));
        }
        if !(self.t_far > self.t_near && self.t_near >= S::zero()) {
            return Err(SceneError::Config(format!(
                "invalid sample range [{}, {}]",
                self.t_near.to_f64_lossy(),
                self.t_far.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// Nominal spacing between samples.
    pub fn sample_spacing(&self) -> S {
        (self.t_far - self.t_near) / S::c(self.n_samples as f64)
    }
}

/// Per-ray emission-absorption quadrature output.
#[derive(Clone, Debug)]
pub struct RenderResult<S> {
    pub rgb: [S; 3],
    /// Median-weight depth; `None` when opacity is below [`OPACITY_FLOOR`].
    pub depth: Option<S>,
    pub opacity: S,
    pub weights: Vec<S>,
}

/// Emission-absorption quadrature along one ray with median-weight depth.
pub fn render_ray<S: Scalar>(
    field: &RadianceField<S>,
    ray: &Ray<S>,
    opts: &RenderOptions<S>,
    ray_index: u64,
) -> Result<RenderResult<S>, SceneError> {
    ray.validate()?;
    opts.validate()?;

    let mut result = RenderResult {
        rgb: field.background(),
        depth: None,
        opacity: S::zero(),
        weights: vec![S::zero(); opts.n_samples],
    };

    let Some((t0, t1)) = integration_span(field, ray, opts) else {
        return Ok(result);
    };

    let n = opts.n_samples;
    let dt = (t1 - t0) / S::c(n as f64);
    let mut jitter = match opts.jitter {
        Jitter::Midpoint => None,
        Jitter::Stratified(seed) => Some(JitterRng::from_pair(seed, ray_index)),
    };

    let mut ts = vec![S::zero(); n];
    for (i, t) in ts.iter_mut().enumerate() {
        let u = match &mut jitter {
            None => S::c(0.5),
            Some(j) => S::c(j.next_unit()),
        };
        *t = t0 + dt * (S::c(i as f64) + u);
    }

    let mut transmittance = S::one();
    let mut rgb = [S::zero(); 3];
    let mut opacity = S::zero();
    for i in 0..n {
        let delta = if i + 1 < n { ts[i + 1] - ts[i] } else { t1 - ts[i] };
        let (sigma, color) = field.sample(ray.at(ts[i]));
        let alpha = S::one() - (-sigma * delta).exp();
        let w = transmittance * alpha;
        result.weights[i] = w;
        for ch in 0..3 {
            rgb[ch] = rgb[ch] + color[ch] * w;
        }
        opacity = opacity + w;
        transmittance = transmittance * (S::one() - alpha);
        if transmittance < S::c(TRANSMITTANCE_CUTOFF) {
            break;
        }
    }

    let bg = field.background();
    let residual = S::one() - opacity;
    for ch in 0..3 {
        result.rgb[ch] = rgb[ch] + bg[ch] * residual;
    }
    result.opacity = opacity;

    if opacity.to_f64_lossy() >= OPACITY_FLOOR {
        // First crossing of half the normalized cumulative weight; ties break
        // toward smaller t because of the >= comparison.
        let half = opacity * S::c(0.5);
        let mut cum = S::zero();
        for i in 0..n {
            cum = cum + result.weights[i];
            if cum >= half {
                result.depth = Some(ts[i]);
                break;
            }
        }
    }
    Ok(result)
}

fn integration_span<S: Scalar>(
    field: &RadianceField<S>,
    ray: &Ray<S>,
    opts: &RenderOptions<S>,
) -> Option<(S, S)> {
    if !opts.clip_to_bounds {
        return Some((opts.t_near, opts.t_far));
    }
    let (b0, b1) = field.bounds().ray_range(ray.origin, ray.dir)?;
    let t0 = opts.t_near.max(b0);
    let t1 = opts.t_far.min(b1);
    (t1 > t0).then_some((t0, t1))
}

/// Renders every pixel of a camera; rows are independent and the result is
/// deterministic for a given (field, camera, options).
pub fn render_image<S: Scalar>(
    field: &RadianceField<S>,
    camera: &Camera<S>,
    opts: &RenderOptions<S>,
) -> Result<RenderedImage, SceneError> {
    camera.validate()?;
    opts.validate()?;
    let (w, h) = (camera.width, camera.height);
    let mut rgb = ImageBuf::new(w, h);
    let mut depth = ScalarImage::filled(w, h, f32::NAN);
    let mut opacity = ScalarImage::new(w, h);

    let rows: Vec<Vec<RenderResult<S>>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let ray = camera.pixel_ray(u, v);
                    let index = (v * w + u) as u64;
                    render_ray(field, &ray, opts, index).expect("camera rays are unit length")
                })
                .collect()
        })
        .collect();

    for (v, row) in rows.into_iter().enumerate() {
        for (u, r) in row.into_iter().enumerate() {
            let idx = v * w as usize + u;
            rgb.data[idx] = [
                r.rgb[0].to_f64_lossy() as f32,
                r.rgb[1].to_f64_lossy() as f32,
                r.rgb[2].to_f64_lossy() as f32,
            ];
            if let Some(d) = r.depth {
                depth.data[idx] = d.to_f64_lossy() as f32;
            }
            opacity.data[idx] = r.opacity.to_f64_lossy() as f32;
        }
    }
    Ok(RenderedImage {
        rgb,
        depth,
        opacity,
    })
}
