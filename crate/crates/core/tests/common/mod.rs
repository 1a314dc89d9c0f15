//! Test-only oracles, independent of the implementation paths they check.

#![allow(dead_code)]

use vfreg::math::Vec3;

/// Determinant of an n x n matrix by LU with partial pivoting.
pub fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_val == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    det
}

/// log|det| of the 6x6 Jacobian of `f` at `x` by central differences.
pub fn numerical_logdet(f: impl Fn(&[f64; 6]) -> [f64; 6], x: &[f64; 6], h: f64) -> f64 {
    let mut jac = vec![vec![0.0; 6]; 6];
    for j in 0..6 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        for i in 0..6 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    det(jac).abs().ln()
}

/// Kolmogorov-Smirnov statistic of samples against the uniform CDF on [0,1].
pub fn ks_uniform(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let lo = (x - i as f64 / n).abs();
            let hi = ((i + 1) as f64 / n - x).abs();
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Least-squares plane fit `n . x = d` (unit n); returns (n, d, residual std).
pub fn fit_plane(points: &[Vec3<f64>]) -> (Vec3<f64>, f64, f64) {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zero(), |a, p| a + *p) / n;
    // Covariance; smallest eigenvector is the plane normal.
    let mut cov = [[0.0f64; 3]; 3];
    for p in points {
        let d = *p - centroid;
        let v = [d.x, d.y, d.z];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += v[i] * v[j] / n;
            }
        }
    }
    let m = vfreg::math::Mat3::from_rows(cov);
    let (_, vecs) = vfreg::math::sym_eigen3(&m);
    let normal = vecs.col(2).normalized();
    let d = normal.dot(centroid);
    let var = points
        .iter()
        .map(|p| (normal.dot(*p) - d).powi(2))
        .sum::<f64>()
        / n;
    (normal, d, var.sqrt())
}

/// Distance from `p` to the convex hull of `verts` by Frank-Wolfe projection.
pub fn convex_hull_distance(verts: &[Vec3<f64>], p: Vec3<f64>, iters: usize) -> f64 {
    assert!(!verts.is_empty());
    let mut x = verts[0];
    for k in 0..iters {
        let g = (x - p) * 2.0;
        // Vertex minimizing the linearized objective.
        let s = *verts
            .iter()
            .min_by(|a, b| a.dot(g).partial_cmp(&b.dot(g)).unwrap())
            .unwrap();
        let dir = s - x;
        let denom = dir.norm_squared();
        if denom < 1e-18 {
            break;
        }
        let step = (-(x - p).dot(dir) / denom).clamp(0.0, 1.0);
        if step <= 0.0 && k > 0 {
            break;
        }
        x = x + dir * step;
    }
    (x - p).norm()
}

/// Scalar 1D emission-absorption quadrature oracle over a piecewise density
/// profile along a ray; mirrors the renderer contract without sharing code.
pub struct Quadrature1d {
    pub ts: Vec<f64>,
    pub weights: Vec<f64>,
    pub opacity: f64,
    pub depth: Option<f64>,
    pub rgb: [f64; 3],
}

pub fn quadrature_1d(
    sigma: impl Fn(f64) -> f64,
    color: impl Fn(f64) -> [f64; 3],
    background: [f64; 3],
    t0: f64,
    t1: f64,
    n: usize,
    opacity_floor: f64,
) -> Quadrature1d {
    let dt = (t1 - t0) / n as f64;
    let ts: Vec<f64> = (0..n).map(|i| t0 + (i as f64 + 0.5) * dt).collect();
    let mut transmittance = 1.0;
    let mut weights = vec![0.0; n];
    let mut rgb = [0.0; 3];
    let mut opacity = 0.0;
    for i in 0..n {
        let delta = if i + 1 < n { ts[i + 1] - ts[i] } else { t1 - ts[i] };
        let alpha = 1.0 - (-sigma(ts[i]) * delta).exp();
        let w = transmittance * alpha;
        weights[i] = w;
        let c = color(ts[i]);
        for ch in 0..3 {
            rgb[ch] += w * c[ch];
        }
        opacity += w;
        transmittance *= 1.0 - alpha;
    }
    for ch in 0..3 {
        rgb[ch] += (1.0 - opacity) * background[ch];
    }
    let mut depth = None;
    if opacity >= opacity_floor {
        let mut cum = 0.0;
        for i in 0..n {
            cum += weights[i];
            if cum >= 0.5 * opacity {
                depth = Some(ts[i]);
                break;
            }
        }
    }
    Quadrature1d {
        ts,
        weights,
        opacity,
        depth,
        rgb,
    }
}
