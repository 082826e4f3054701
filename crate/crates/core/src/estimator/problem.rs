use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::Penalty;
use crate::function_space::GridFunction;
use crate::operator::DiscreteOperator;
use crate::{Error, Result};

/// `‖S u − t‖²` with `S = [B; √λ L]`, `t = [W_z^{1/2} r; 0]`, where
/// `B = W_z^{1/2} K W_x^{-1/2}` and `LᵀL` is the penalty in `u`-coordinates.
pub(crate) struct LsProblem {
    pub b: DMatrix<f64>,
    pub data: DVector<f64>,
    /// `LᵀL`.
    pub gram: DMatrix<f64>,
    pub pen_rows: DMatrix<f64>,
    pub lambda: f64,
    pub sqrt_wx: Vec<f64>,
}

impl LsProblem {
    pub fn new(a: &DiscreteOperator, r: &GridFunction, lambda: f64, penalty: Penalty) -> Result<Self> {
        r.ensure_on(a.z_grid())?;
        let x_grid = a.x_grid();
        let n = x_grid.size();
        let sqrt_wx: Vec<f64> = x_grid.weights().iter().map(|w| libm::sqrt(*w)).collect();
        let data = DVector::from_iterator(
            r.len(),
            r.values().iter().zip(a.fz_weights()).map(|(v, w)| libm::sqrt(*w) * v),
        );
        let pen_rows = match penalty {
            Penalty::L2Only => DMatrix::identity(n, n),
            Penalty::SobolevFirstOrder => {
                let d = x_grid.differentiation_matrix();
                let mut rows = DMatrix::zeros(2 * n, n);
                rows.view_mut((0, 0), (n, n)).fill_with_identity();
                for i in 0..n {
                    for j in 0..n {
                        rows[(n + i, j)] = sqrt_wx[i] * d[(i, j)] / sqrt_wx[j];
                    }
                }
                rows
            }
        };
        let gram = pen_rows.tr_mul(&pen_rows);
        Ok(LsProblem {
            b: a.weighted_matrix(),
            data,
            gram,
            pen_rows,
            lambda,
            sqrt_wx,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.ncols()
    }

    /// `BᵀB + λ LᵀL`.
    pub fn hessian(&self) -> DMatrix<f64> {
        self.b.tr_mul(&self.b) + &self.gram * self.lambda
    }

    pub fn rhs(&self) -> DVector<f64> {
        self.b.tr_mul(&self.data)
    }

    /// The stacked design `S`.
    pub fn stacked(&self) -> DMatrix<f64> {
        if self.lambda == 0.0 {
            return self.b.clone();
        }
        let (m, n) = self.b.shape();
        let p = self.pen_rows.nrows();
        let mut s = DMatrix::zeros(m + p, n);
        s.view_mut((0, 0), (m, n)).copy_from(&self.b);
        s.view_mut((m, 0), (p, n)).copy_from(&(&self.pen_rows * libm::sqrt(self.lambda)));
        s
    }

    pub fn stacked_target(&self) -> DVector<f64> {
        if self.lambda == 0.0 {
            return self.data.clone();
        }
        let mut t = DVector::zeros(self.data.len() + self.pen_rows.nrows());
        t.rows_mut(0, self.data.len()).copy_from(&self.data);
        t
    }

    /// Half-gradient `Hu − Bᵀ(W_z^{1/2} r)`.
    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let fit = self.b.tr_mul(&(&self.b * u - &self.data));
        fit + (&self.gram * u) * self.lambda
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        let misfit = (&self.b * u - &self.data).norm_squared();
        if self.lambda == 0.0 {
            return misfit;
        }
        misfit + self.lambda * (&self.pen_rows * u).norm_squared()
    }

    pub fn to_phi(&self, a: &DiscreteOperator, u: &DVector<f64>) -> Result<GridFunction> {
        let values = u.iter().zip(&self.sqrt_wx).map(|(v, s)| v / s).collect();
        GridFunction::new(a.x_grid(), values)
    }

    #[cfg(test)]
    pub fn to_u(&self, phi: &GridFunction) -> DVector<f64> {
        DVector::from_iterator(
            phi.len(),
            phi.values().iter().zip(&self.sqrt_wx).map(|(v, s)| v * s),
        )
    }
}

pub(crate) fn smallest_eigenvalue(h: &DMatrix<f64>) -> Result<f64> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("system matrix has non-finite entries".into()));
    }
    let eig = h.clone().symmetric_eigen();
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}
