//! Cyclic Jacobi eigensolver for small symmetric matrices.

use nalgebra::{DMatrix, DVector};

/// Stop once the off-diagonal Frobenius norm falls below this fraction of the
/// full Frobenius norm.
pub const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Column `k` is the unit eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    pub sweeps: usize,
}

/// Diagonalizes a symmetric matrix by cyclic row-by-row Jacobi rotations.
///
/// Only the upper triangle is trusted. The result is deterministic: sweep
/// order is fixed, eigenpairs are sorted ascending, and each eigenvector is
/// signed so that its largest-magnitude entry (first one on ties) is positive.
pub fn jacobi_eigen(matrix: &DMatrix<f64>) -> SymmetricEigen {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "jacobi_eigen needs a square matrix");
    let mut a = matrix.clone();
    for i in 0..n {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal_norm(&a) > OFF_DIAGONAL_TOL * scale {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut vec = v.column(src).clone_owned();
        let max_abs = vec.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let lead = vec
            .iter()
            .position(|x| x.abs() >= max_abs * (1.0 - 1e-12))
            .unwrap_or(0);
        if vec[lead] < 0.0 {
            vec.neg_mut();
        }
        eigenvectors.set_column(col, &vec);
    }
    SymmetricEigen {
        eigenvalues,
        eigenvectors,
        sweeps,
    }
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

// A <- J^T A J, V <- V J with J the (p, q) Givens rotation.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_matrix_is_sorted() {
        let m = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let eig = jacobi_eigen(&m);
        assert_eq!(eig.eigenvalues.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(eig.sweeps, 0);
        assert_eq!(eig.eigenvectors[(1, 0)], 1.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = jacobi_eigen(&m);
        assert_relative_eq!(eig.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(eig.eigenvalues[1], 3.0, epsilon = 1e-14);
        let v1 = eig.eigenvectors.column(1);
        assert_relative_eq!(v1[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_relative_eq!(v1[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        // tie on magnitude: first entry is made positive
        let v0 = eig.eigenvectors.column(0);
        assert!(v0[0] > 0.0 && v0[1] < 0.0);
    }

    #[test]
    fn reconstructs_dense_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, -1.0, 0.5, -1.0, 3.0, 0.25, 0.5, 0.25, 1.0]);
        let eig = jacobi_eigen(&m);
        let rebuilt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues)
            * eig.eigenvectors.transpose();
        assert!((rebuilt - &m).norm() < 1e-12);
        let gram = eig.eigenvectors.transpose() * &eig.eigenvectors;
        assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-13);
    }
}
