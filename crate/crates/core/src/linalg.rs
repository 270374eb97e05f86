//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here targets desk-scale matrices (mode-level m ≤ ~24, Gram
//! matrices up to a few hundred); no external LAPACK backend is required.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub fn identity(n: usize) -> CMat {
    let mut id = CMat::zeros((n, n));
    for i in 0..n {
        id[[i, i]] = C64::new(1.0, 0.0);
    }
    id
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    let mut out = a.t().to_owned();
    out.mapv_inplace(|z| z.conj());
    out
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_dist(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// ‖A†A − I‖_F, zero for exactly unitary A.
pub fn unitarity_residual(a: &CMat) -> f64 {
    let gram = dagger(a).dot(a);
    frobenius_dist(&gram, &identity(a.nrows()))
}

/// ‖A − A†‖_F.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    frobenius_dist(a, &dagger(a))
}

/// ‖A + A†‖_F, zero for anti-Hermitian A.
pub fn anti_hermiticity_residual(a: &CMat) -> f64 {
    let ad = dagger(a);
    a.iter()
        .zip(ad.iter())
        .map(|(x, y)| (x + y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows()).map(|i| a[[i, i]]).sum()
}

/// Hilbert–Schmidt inner product Tr[A†B].
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues, eigenvectors) with `a == V · diag(λ) · Vᵀ`; columns of
/// `V` are the eigenvectors. Eigenvalues are sorted ascending.
pub fn sym_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid(format!(
            "sym_eigen requires a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        let vals = (0..n).map(|i| m[[i, i]]).collect();
        return Ok((vals, v));
    }

    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * norm.max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += m[[p, q]].abs();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol / (n * n) as f64 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, new_col]] = v[[r, old_col]];
        }
    }
    Ok((vals, vecs))
}

/// Solve a small dense real system by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::invalid("solve_dense: dimension mismatch"));
    }
    let mut m = a.to_owned();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_abs < 1e-300 {
            return Err(Error::validation("solve_dense: singular matrix"));
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m[[col, c]];
                m[[col, c]] = m[[pivot_row, c]];
                m[[pivot_row, c]] = tmp;
            }
            rhs.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let f = m[[r, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[[r, c]] -= f * m[[col, c]];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= m[[row, c]] * x[c];
        }
        x[row] = acc / m[[row, row]];
    }
    Ok(x)
}
