use serde::{Deserialize, Serialize};

use crate::math::{Aabb, Scalar, Vec3};

use super::SceneError;

/// Dense voxel grid of (density, color) standing in for a trained radiance
/// field. Immutable after construction; all queries are pure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadianceField<S> {
    resolution: (usize, usize, usize),
    bounds: Aabb<S>,
    sigma: Vec<S>,
    rgb: Vec<[S; 3]>,
    background: [S; 3],
}

/// Trilinear sample value with spatial gradients, used by the analytic
/// registration gradient.
#[derive(Clone, Copy, Debug)]
pub struct FieldSample<S> {
    pub sigma: S,
    pub rgb: [S; 3],
    pub grad_sigma: Vec3<S>,
    pub grad_rgb: [Vec3<S>; 3],
}

impl<S: Scalar> RadianceField<S> {
    /// Builds a field, enforcing the density/color/bounds invariants.
    pub fn new(
        resolution: (usize, usize, usize),
        bounds: Aabb<S>,
        sigma: Vec<S>,
        rgb: Vec<[S; 3]>,
        background: [S; 3],
    ) -> Result<Self, SceneError> {
        let (nx, ny, nz) = resolution;
        if nx < 2 || ny < 2 || nz < 2 {
            return Err(SceneError::Config(format!(
                "resolution must be at least 2 per axis, got {nx}x{ny}x{nz}"
            )));
        }
        if !bounds.has_positive_extent() {
            return Err(SceneError::Config("bounds must have positive extent".into()));
        }
        let n = nx * ny * nz;
        if sigma.len() != n || rgb.len() != n {
            return Err(SceneError::Config(format!(
                "voxel payload length mismatch: sigma {} rgb {} expected {n}",
                sigma.len(),
                rgb.len()
            )));
        }
        if sigma.iter().any(|s| !s.is_finite() || *s < S::zero()) {
            return Err(SceneError::Config("densities must be finite and >= 0".into()));
        }
        let unit = |c: S| c.is_finite() && c >= S::zero() && c <= S::one();
        if rgb.iter().flatten().any(|c| !unit(*c)) || background.iter().any(|c| !unit(*c)) {
            return Err(SceneError::Config("colors must lie in [0,1]".into()));
        }
        Ok(Self {
            resolution,
            bounds,
            sigma,
            rgb,
            background,
        })
    }

    pub fn resolution(&self) -> (usize, usize, usize) {
        self.resolution
    }

    pub fn bounds(&self) -> Aabb<S> {
        self.bounds
    }

    pub fn background(&self) -> [S; 3] {
        self.background
    }

    pub fn sigma_data(&self) -> &[S] {
        &self.sigma
    }

    pub fn rgb_data(&self) -> &[[S; 3]] {
        &self.rgb
    }

    pub fn voxel_size(&self) -> Vec3<S> {
        let e = self.bounds.extent();
        Vec3::new(
            e.x / S::c(self.resolution.0 as f64),
            e.y / S::c(self.resolution.1 as f64),
            e.z / S::c(self.resolution.2 as f64),
        )
    }

    /// Length of a voxel body diagonal.
    pub fn voxel_diagonal(&self) -> S {
        self.voxel_size().norm()
    }

    #[inline]
    pub fn voxel_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.resolution.1 + iy) * self.resolution.0 + ix
    }

    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3<S> {
        let vs = self.voxel_size();
        self.bounds.min
            + Vec3::new(
                vs.x * (S::c(ix as f64) + S::c(0.5)),
                vs.y * (S::c(iy as f64) + S::c(0.5)),
                vs.z * (S::c(iz as f64) + S::c(0.5)),
            )
    }

    pub fn max_sigma(&self) -> S {
        self.sigma.iter().fold(S::zero(), |a, &b| a.max(b))
    }

    /// Lattice coordinates and interpolation weights for a point inside the
    /// bounds. Coordinates are clamped so border queries interpolate edge
    /// voxel values.
    #[inline]
    fn cell(&self, p: Vec3<S>) -> ([usize; 3], [usize; 3], [S; 3]) {
        let vs = self.voxel_size();
        let half = S::c(0.5);
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut frac = [S::zero(); 3];
        let res = [self.resolution.0, self.resolution.1, self.resolution.2];
        for axis in 0..3 {
            let n = res[axis];
            let u = (p[axis] - self.bounds.min[axis]) / vs[axis] - half;
            let u = u.max(S::zero()).min(S::c((n - 1) as f64));
            let base = u.floor();
            let bi = (base.to_f64_lossy() as usize).min(n - 2);
            i0[axis] = bi;
            i1[axis] = bi + 1;
            frac[axis] = (u - S::c(bi as f64)).max(S::zero()).min(S::one());
        }
        (i0, i1, frac)
    }

    /// Trilinear density/color at a world point; outside the bounds returns
    /// zero density and the background color.
    pub fn sample(&self, p: Vec3<S>) -> (S, [S; 3]) {
        if !self.bounds.contains(p) {
            return (S::zero(), self.background);
        }
        let (i0, i1, f) = self.cell(p);
        let mut sigma = S::zero();
        let mut rgb = [S::zero(); 3];
        for (dz, iz) in [(S::one() - f[2], i0[2]), (f[2], i1[2])] {
            if dz == S::zero() {
                continue;
            }
            for (dy, iy) in [(S::one() - f[1], i0[1]), (f[1], i1[1])] {
                let wyz = dz * dy;
                if wyz == S::zero() {
                    continue;
                }
                for (dx, ix) in [(S::one() - f[0], i0[0]), (f[0], i1[0])] {
                    let w = wyz * dx;
                    if w == S::zero() {
                        continue;
                    }
                    let idx = self.voxel_index(ix, iy, iz);
                    sigma = sigma + self.sigma[idx] * w;
                    let c = &self.rgb[idx];
                    rgb[0] = rgb[0] + c[0] * w;
                    rgb[1] = rgb[1] + c[1] * w;
                    rgb[2] = rgb[2] + c[2] * w;
                }
            }
        }
        (sigma, rgb)
    }

    /// Trilinear sample plus analytic spatial gradients.
    pub fn sample_with_grad(&self, p: Vec3<S>) -> FieldSample<S> {
        if !self.bounds.contains(p) {
            return FieldSample {
                sigma: S::zero(),
                rgb: self.background,
                grad_sigma: Vec3::zero(),
                grad_rgb: [Vec3::zero(); 3],
            };
        }
        let (i0, i1, f) = self.cell(p);
        let vs = self.voxel_size();
        let one = S::one();
        let wx = [one - f[0], f[0]];
        let wy = [one - f[1], f[1]];
        let wz = [one - f[2], f[2]];
        // d(weight)/d(frac): -1 for the low corner, +1 for the high corner.
        let dx = [-one, one];
        let ix = [i0[0], i1[0]];
        let iy = [i0[1], i1[1]];
        let iz = [i0[2], i1[2]];

        let mut sigma = S::zero();
        let mut rgb = [S::zero(); 3];
        let mut gs = Vec3::zero();
        let mut gr = [Vec3::zero(); 3];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let idx = self.voxel_index(ix[a], iy[b], iz[c]);
                    let w = wx[a] * wy[b] * wz[c];
                    let gx = dx[a] * wy[b] * wz[c] / vs.x;
                    let gy = wx[a] * dx[b] * wz[c] / vs.y;
                    let gz = wx[a] * wy[b] * dx[c] / vs.z;
                    let sv = self.sigma[idx];
                    sigma = sigma + sv * w;
                    gs.x = gs.x + sv * gx;
                    gs.y = gs.y + sv * gy;
                    gs.z = gs.z + sv * gz;
                    let col = &self.rgb[idx];
                    for ch in 0..3 {
                        rgb[ch] = rgb[ch] + col[ch] * w;
                        gr[ch].x = gr[ch].x + col[ch] * gx;
                        gr[ch].y = gr[ch].y + col[ch] * gy;
                        gr[ch].z = gr[ch].z + col[ch] * gz;
                    }
                }
            }
        }
        FieldSample {
            sigma,
            rgb,
            grad_sigma: gs,
            grad_rgb: gr,
        }
    }
}
