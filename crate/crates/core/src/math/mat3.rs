use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use super::{Scalar, Vec3};

/// Row-major 3x3 matrix over a generic scalar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3<S> {
    pub rows: [[S; 3]; 3],
}

impl<S: Scalar> Mat3<S> {
    #[inline]
    pub fn from_rows(rows: [[S; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn from_cols(c0: Vec3<S>, c1: Vec3<S>, c2: Vec3<S>) -> Self {
        Self {
            rows: [
                [c0.x, c1.x, c2.x],
                [c0.y, c1.y, c2.y],
                [c0.z, c1.z, c2.z],
            ],
        }
    }

    #[inline]
    pub fn identity() -> Self {
        let o = S::one();
        let z = S::zero();
        Self::from_rows([[o, z, z], [z, o, z], [z, z, o]])
    }

    #[inline]
    pub fn zero() -> Self {
        Self::from_rows([[S::zero(); 3]; 3])
    }

    pub fn diagonal(d: Vec3<S>) -> Self {
        let z = S::zero();
        Self::from_rows([[d.x, z, z], [z, d.y, z], [z, z, d.z]])
    }

    /// Skew-symmetric cross-product matrix: `skew(w) * v == w.cross(v)`.
    pub fn skew(w: Vec3<S>) -> Self {
        let z = S::zero();
        Self::from_rows([[z, -w.z, w.y], [w.z, z, -w.x], [-w.y, w.x, z]])
    }

    /// Outer product `a * b^T`.
    pub fn outer(a: Vec3<S>, b: Vec3<S>) -> Self {
        Self::from_rows([
            [a.x * b.x, a.x * b.y, a.x * b.z],
            [a.y * b.x, a.y * b.y, a.y * b.z],
            [a.z * b.x, a.z * b.y, a.z * b.z],
        ])
    }

    #[inline]
    pub fn col(&self, j: usize) -> Vec3<S> {
        Vec3::new(self.rows[0][j], self.rows[1][j], self.rows[2][j])
    }

    #[inline]
    pub fn row(&self, i: usize) -> Vec3<S> {
        Vec3::from_array(self.rows[i])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.rows;
        Self::from_rows([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn determinant(&self) -> S {
        let m = &self.rows;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> S {
        self.rows[0][0] + self.rows[1][1] + self.rows[2][2]
    }

    pub fn scale(&self, s: S) -> Self {
        let mut out = *self;
        for r in &mut out.rows {
            for v in r {
                *v = *v * s;
            }
        }
        out
    }

    /// Max absolute entry of `self - rhs`; handy for orthonormality checks.
    pub fn max_abs_diff(&self, rhs: &Self) -> S {
        let mut m = S::zero();
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.rows[i][j] - rhs.rows[i][j]).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }

    /// True when `R^T R = I` within `tol` and `det(R) > 0`.
    pub fn is_rotation(&self, tol: S) -> bool {
        let gram = self.transpose() * *self;
        gram.max_abs_diff(&Self::identity()) < tol && self.determinant() > S::zero()
    }

    pub fn cast<T: Scalar>(&self) -> Mat3<T> {
        let mut rows = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = T::c(self.rows[i][j].to_f64_lossy());
            }
        }
        Mat3::from_rows(rows)
    }

    /// Rotation about the x axis by `angle` radians.
    pub fn rotation_x(angle: S) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        let (o, z) = (S::one(), S::zero());
        Self::from_rows([[o, z, z], [z, c, -s], [z, s, c]])
    }

    pub fn rotation_y(angle: S) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        let (o, z) = (S::one(), S::zero());
        Self::from_rows([[c, z, s], [z, o, z], [-s, z, c]])
    }

    pub fn rotation_z(angle: S) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        let (o, z) = (S::one(), S::zero());
        Self::from_rows([[c, -s, z], [s, c, z], [z, z, o]])
    }
}

impl<S: Scalar> Mul<Vec3<S>> for Mat3<S> {
    type Output = Vec3<S>;
    #[inline]
    fn mul(self, v: Vec3<S>) -> Vec3<S> {
        Vec3::new(
            self.rows[0][0] * v.x + self.rows[0][1] * v.y + self.rows[0][2] * v.z,
            self.rows[1][0] * v.x + self.rows[1][1] * v.y + self.rows[1][2] * v.z,
            self.rows[2][0] * v.x + self.rows[2][1] * v.y + self.rows[2][2] * v.z,
        )
    }
}

impl<S: Scalar> Mul for Mat3<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [[S::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.rows[i][0] * rhs.rows[0][j]
                    + self.rows[i][1] * rhs.rows[1][j]
                    + self.rows[i][2] * rhs.rows[2][j];
            }
        }
        Self::from_rows(out)
    }
}

impl<S: Scalar> Add for Mat3<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.rows[i][j] = out.rows[i][j] + rhs.rows[i][j];
            }
        }
        out
    }
}

impl<S: Scalar> Sub for Mat3<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.rows[i][j] = out.rows[i][j] - rhs.rows[i][j];
            }
        }
        out
    }
}
