use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Thin SVD with singular values sorted in decreasing order. Columns of
/// `u` belonging to zero singular values are zero.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub values: Vec<f64>,
    pub v: DMatrix<f64>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Slower than bidiagonalization but
/// accurate to working precision relative to each column, and dependable on
/// exactly rank-deficient inputs.
pub(crate) fn sorted_svd(m: DMatrix<f64>) -> Result<SortedSvd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    if m.nrows() < m.ncols() {
        let t = sorted_svd(m.transpose())?;
        return Ok(SortedSvd {
            u: t.v,
            values: t.values,
            v: t.u,
        });
    }
    let (rows, cols) = m.shape();
    let mut a = m;
    let mut v = DMatrix::<f64>::identity(cols, cols);
    let tol = f64::EPSILON * rows as f64;
    // columns at rounding level of the whole matrix are left alone
    let floor = {
        let f = f64::EPSILON * a.norm();
        f * f
    };
    let mut converged = cols < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = {
                    let cp = a.column(p);
                    let cq = a.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma == 0.0 || alpha.min(beta) <= floor || gamma.abs() <= tol * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = DMatrix::zeros(rows, cols);
    let mut sv = DMatrix::zeros(cols, cols);
    let mut values = Vec::with_capacity(cols);
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            u.set_column(k, &(a.column(j) / norms[j]));
        }
        sv.set_column(k, &v.column(j));
        values.push(norms[j]);
    }
    Ok(SortedSvd { u, values, v: sv })
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)];
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

pub(crate) fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
