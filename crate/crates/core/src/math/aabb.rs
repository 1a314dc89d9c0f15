use serde::{Deserialize, Serialize};

use super::{Scalar, Vec3};

/// Axis-aligned box in world units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb<S> {
    pub min: Vec3<S>,
    pub max: Vec3<S>,
}

impl<S: Scalar> Aabb<S> {
    pub fn new(min: Vec3<S>, max: Vec3<S>) -> Self {
        Self { min, max }
    }

    /// Cube centered at the origin with the given half extent.
    pub fn centered_cube(half: S) -> Self {
        Self::new(Vec3::splat(-half), Vec3::splat(half))
    }

    #[inline]
    pub fn extent(&self) -> Vec3<S> {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3<S> {
        (self.min + self.max) * S::c(0.5)
    }

    pub fn diagonal(&self) -> S {
        self.extent().norm()
    }

    #[inline]
    pub fn contains(&self, p: Vec3<S>) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn has_positive_extent(&self) -> bool {
        let e = self.extent();
        e.x > S::zero() && e.y > S::zero() && e.z > S::zero()
    }

    pub fn inflated(&self, margin: S) -> Self {
        Self::new(self.min - Vec3::splat(margin), self.max + Vec3::splat(margin))
    }

    /// Parameter interval where the ray `o + t d` overlaps the box, if any.
    pub fn ray_range(&self, origin: Vec3<S>, dir: Vec3<S>) -> Option<(S, S)> {
        let mut t0 = S::neg_infinity();
        let mut t1 = S::infinity();
        for axis in 0..3 {
            let d = dir[axis];
            let o = origin[axis];
            if d.abs() < S::c(1e-300) {
                if o < self.min[axis] || o > self.max[axis] {
                    return None;
                }
                continue;
            }
            let inv = S::one() / d;
            let mut a = (self.min[axis] - o) * inv;
            let mut b = (self.max[axis] - o) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    pub fn cast<T: Scalar>(&self) -> Aabb<T> {
        Aabb::new(self.min.cast(), self.max.cast())
    }
}
