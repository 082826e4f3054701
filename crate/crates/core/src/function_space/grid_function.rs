use alloc::sync::Arc;
use alloc::vec::Vec;

use super::grid::{Grid, GridRule};
use crate::{Error, Result};

/// A real function sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::GridMismatch {
                expected: grid.size(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(alloc::format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(GridFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        GridFunction {
            grid: Arc::clone(grid),
            values: alloc::vec![c; grid.size()],
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridFunction::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of the grid interpolant at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    pub fn resample(&self, target: &Arc<Grid>) -> GridFunction {
        if self.grid.same_as(target) {
            return self.clone();
        }
        let values = target
            .nodes()
            .iter()
            .map(|&t| self.grid.interpolate(&self.values, t))
            .collect();
        GridFunction {
            grid: Arc::clone(target),
            values,
        }
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.grid.size(),
                found: other.grid.size(),
            })
        }
    }

    pub fn ensure_on(&self, grid: &Grid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: grid.size(),
                found: self.grid.size(),
            })
        }
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &GridFunction, c: f64) -> Result<GridFunction> {
        self.ensure_same_grid(other)?;
        Ok(GridFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.add_scaled(other, -1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `⟨f, g⟩ = Σ_i w_i f_i g_i`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.ensure_same_grid(g)?;
    Ok(f
        .grid
        .weights()
        .iter()
        .zip(f.values.iter().zip(&g.values))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

pub fn l2_norm(f: &GridFunction) -> f64 {
    let sq: f64 = f
        .grid
        .weights()
        .iter()
        .zip(&f.values)
        .map(|(w, v)| w * v * v)
        .sum();
    libm::sqrt(sq)
}

/// Finite-difference derivative of `f` on a uniform inspection grid:
/// central differences inside, second-order one-sided at both ends.
pub fn derivative(f: &GridFunction, inspection: &Arc<Grid>) -> Result<GridFunction> {
    if inspection.rule() != GridRule::UniformTrapezoid {
        return Err(Error::invalid("derivative needs a uniform inspection grid"));
    }
    if inspection.size() < 3 {
        return Err(Error::invalid(alloc::format!(
            "derivative needs at least 3 inspection nodes, got {}",
            inspection.size()
        )));
    }
    let v = f.resample(inspection).values;
    let n = v.len();
    let c = 0.5 * (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    out.push(c * (-3.0 * v[0] + 4.0 * v[1] - v[2]));
    for i in 1..n - 1 {
        out.push(c * (v[i + 1] - v[i - 1]));
    }
    out.push(c * (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]));
    GridFunction::new(inspection, out)
}

/// First-order Sobolev norm `(‖f‖² + ‖f'‖²)^{1/2}`.
///
/// On Gauss grids `f'` is the exact derivative of the interpolating
/// polynomial, so the norm is exact for polynomials of degree below the node
/// count. On uniform grids it falls back to finite differences.
pub fn sobolev_norm(f: &GridFunction) -> f64 {
    let d = f.grid.differentiation_matrix();
    let w = f.grid.weights();
    let mut grad_sq = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let di: f64 = d.row(i).iter().zip(&f.values).map(|(a, b)| a * b).sum();
        grad_sq += wi * di * di;
    }
    let l2 = l2_norm(f);
    libm::sqrt(l2 * l2 + grad_sq)
}
