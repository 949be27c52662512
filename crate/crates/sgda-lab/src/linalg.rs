//! Small dense linear-algebra kernels: symmetric eigenvalues via cyclic Jacobi,
//! spectral norms, and Euclidean ball projection.
//!
//! Everything here targets desk-scale symmetric matrices (gossip matrices with
//! a few hundred agents at most). Jacobi is quadratically convergent once the
//! off-diagonal mass is small and is bit-reproducible across platforms, which
//! the coupled-run determinism contract relies on.

use ndarray::Array2;

/// Eigenvalues of a symmetric matrix, sorted descending.
///
/// Cyclic Jacobi with the Numerical Recipes rotation choice. Accuracy is
/// limited only by rounding (off-diagonal mass is driven below
/// `1e-14 * ||A||_F`), which is far inside every tolerance used by callers.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    assert_eq!(a.nrows(), a.ncols(), "matrix must be square");
    let n = a.nrows();
    let mut m = a.clone();
    let scale = frobenius(a).max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if (2.0 * off).sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                // Smaller-root tangent keeps the rotation angle <= pi/4.
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let app = m[[p, p]];
                let aqq = m[[q, q]];
                m[[p, p]] = app - t * apq;
                m[[q, q]] = aqq + t * apq;
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = m[[i, p]];
                        let aiq = m[[i, q]];
                        m[[i, p]] = c * aip - s * aiq;
                        m[[p, i]] = m[[i, p]];
                        m[[i, q]] = s * aip + c * aiq;
                        m[[q, i]] = m[[i, q]];
                    }
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    eig
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn spectral_norm_symmetric(a: &Array2<f64>) -> f64 {
    symmetric_eigenvalues(a)
        .iter()
        .fold(0.0, |acc, &v| acc.max(v.abs()))
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean norm of a slice.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects `v` onto the closed Euclidean ball of the given radius, in place.
/// A non-finite radius means no constraint.
pub fn project_ball(v: &mut [f64], radius: f64) {
    if !radius.is_finite() {
        return;
    }
    let norm = l2_norm(v);
    if norm > radius {
        let scale = radius / norm;
        for x in v {
            *x *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn eigenvalues_of_saddle_block_are_plus_minus_sqrt_1_25() {
        // [[1, 0.5], [0.5, -1]] has trace 0 and determinant -1.25.
        let a = arr2(&[[1.0, 0.5], [0.5, -1.0]]);
        let eig = symmetric_eigenvalues(&a);
        let r = 1.25f64.sqrt();
        assert!((eig[0] - r).abs() < 1e-12, "got {}", eig[0]);
        assert!((eig[1] + r).abs() < 1e-12, "got {}", eig[1]);
        assert!((spectral_norm_symmetric(&a) - r).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_shifted_exchange_are_3_and_1() {
        let a = arr2(&[[2.0, 1.0], [1.0, 2.0]]);
        let eig = symmetric_eigenvalues(&a);
        assert!((eig[0] - 3.0).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix_returns_sorted_diagonal() {
        let a = arr2(&[[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, -2.0]]);
        assert_eq!(symmetric_eigenvalues(&a), vec![5.0, 1.0, -2.0]);
    }

    #[test]
    fn projection_is_identity_inside_and_rescales_outside() {
        let mut v = [3.0, 4.0];
        project_ball(&mut v, 10.0);
        assert_eq!(v, [3.0, 4.0]);
        project_ball(&mut v, 1.0);
        assert!((l2_norm(&v) - 1.0).abs() < 1e-15);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        let mut w = [1.0, 1.0];
        project_ball(&mut w, f64::INFINITY);
        assert_eq!(w, [1.0, 1.0]);
    }
}
