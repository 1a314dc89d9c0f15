use super::{Mat3, Scalar, Vec3};

/// Eigendecomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order together with the matrix of
/// eigenvectors as columns (`m = V * diag(vals) * V^T`). The eigenvector
/// basis is flipped to a proper rotation (`det(V) = +1`).
pub fn sym_eigen3<S: Scalar>(m: &Mat3<S>) -> (Vec3<S>, Mat3<S>) {
    let mut a = m.rows;
    let mut v = Mat3::identity().rows;

    // Quadratic convergence; 32 sweeps is far beyond what f64 needs.
    for _ in 0..32 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= S::epsilon() * S::epsilon() {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == S::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (S::c(2.0) * apq);
            let t = {
                let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                sign / (theta.abs() + (theta * theta + S::one()).sqrt())
            };
            let c = S::one() / (t * t + S::one()).sqrt();
            let s = t * c;

            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in &mut v {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }

    let mut pairs: [(S, usize); 3] = [(a[0][0], 0), (a[1][1], 1), (a[2][2], 2)];
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    let vm = Mat3::from_rows(v);
    let mut vecs = Mat3::from_cols(
        vm.col(pairs[0].1),
        vm.col(pairs[1].1),
        vm.col(pairs[2].1),
    );
    if vecs.determinant() < S::zero() {
        for i in 0..3 {
            vecs.rows[i][2] = -vecs.rows[i][2];
        }
    }
    (Vec3::new(pairs[0].0, pairs[1].0, pairs[2].0), vecs)
}
