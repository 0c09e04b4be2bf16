//! Dense symmetric eigendecomposition.
//!
//! Two independent routes: a cyclic Jacobi solver written here, and the
//! Householder/implicit-QR solver from `nalgebra`. Jacobi is the reference
//! for small matrices; the QR route is used for the N ~ 10³ covariance
//! matrices where Jacobi sweeps become too slow.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    Jacobi,
    #[default]
    HouseholderQr,
}

/// Eigenvalues in ascending order; eigenvectors are the matching columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
/// below `tol` (relative to the matrix norm).
pub fn jacobi_eigen(matrix: &DMatrix<f64>, tol: f64, max_sweeps: usize) -> Result<SymmetricEigen> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Eigen(format!("matrix is {}x{}, not square", n, matrix.ncols())));
    }
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);

    let mut converged = n <= 1;
    for _ in 0..max_sweeps {
        if off_diagonal_norm(&a) <= tol * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = (t * t + 1.0).sqrt().recip();
                let s = t * c;
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
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol * scale {
        return Err(Error::Eigen(format!(
            "Jacobi did not reach off-diagonal norm {:e} in {} sweeps",
            tol * scale,
            max_sweeps
        )));
    }
    let values = DVector::from_iterator(n, (0..n).map(|i| a[(i, i)]));
    Ok(sorted(values, v))
}

fn sorted(values: DVector<f64>, vectors: DMatrix<f64>) -> SymmetricEigen {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| values[i]));
    let mut vecs = DMatrix::<f64>::zeros(vectors.nrows(), n);
    for (dst, &src) in idx.iter().enumerate() {
        vecs.set_column(dst, &vectors.column(src));
    }
    SymmetricEigen {
        values: vals,
        vectors: vecs,
    }
}

pub fn symmetric_eigen(matrix: &DMatrix<f64>, method: EigenMethod) -> Result<SymmetricEigen> {
    match method {
        EigenMethod::Jacobi => jacobi_eigen(matrix, 1e-10, 100),
        EigenMethod::HouseholderQr => {
            let n = matrix.nrows();
            if n != matrix.ncols() {
                return Err(Error::Eigen(format!("matrix is {}x{}, not square", n, matrix.ncols())));
            }
            let eig = matrix
                .clone()
                .try_symmetric_eigen(f64::EPSILON, 10_000)
                .ok_or_else(|| Error::Eigen("implicit QR iteration did not converge".into()))?;
            Ok(sorted(eig.eigenvalues, eig.eigenvectors))
        }
    }
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut vals: Vec<f64> = nalgebra::SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("implicit QR iteration did not converge".into()))?
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// max |OᵀO − I|.
pub fn orthogonality_residual(o: &DMatrix<f64>) -> f64 {
    let g = o.transpose() * o;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn jacobi_agrees_with_householder_qr() {
        for (n, seed) in [(1usize, 1u64), (2, 2), (7, 3), (25, 4)] {
            let a = random_symmetric(n, seed);
            let j = symmetric_eigen(&a, EigenMethod::Jacobi).unwrap();
            let q = symmetric_eigen(&a, EigenMethod::HouseholderQr).unwrap();
            for i in 0..n {
                assert!((j.values[i] - q.values[i]).abs() < 1e-9, "n={n} i={i}");
            }
            assert!(orthogonality_residual(&j.vectors) < 1e-10);
            let recon = &j.vectors * DMatrix::from_diagonal(&j.values) * j.vectors.transpose();
            assert!((recon - &a).abs().max() < 1e-9);
        }
    }

    #[test]
    fn diagonal_matrix_is_fixed() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let e = jacobi_eigen(&a, 1e-12, 10).unwrap();
        assert_eq!(e.values.as_slice(), &[-1.0, 2.0, 3.0]);
    }
}
