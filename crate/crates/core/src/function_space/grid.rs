use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// 128 nodes integrate `(1 - x)^{2n}` exactly up to `n = 100`.
pub const DEFAULT_QUADRATURE_SIZE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridRule {
    GaussLegendre,
    UniformTrapezoid,
}

/// A quadrature rule on `[0, 1]`.
///
/// Nodes are strictly increasing and the weights are positive with unit sum.
/// Grids are shared behind an [`Arc`]; two functions live on the same grid
/// when their grids have the same rule and nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rule: GridRule,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // barycentric interpolation weights, only meaningful for Gauss grids
    bary: Vec<f64>,
}

/// Builds a grid with `size` nodes. Gauss–Legendre nodes are the Legendre
/// rule mapped affinely from `[-1, 1]`; trapezoid nodes are `i / (size - 1)`.
pub fn make_grid(size: usize, rule: GridRule) -> Result<Arc<Grid>> {
    Grid::new(size, rule)
}

impl Grid {
    pub fn new(size: usize, rule: GridRule) -> Result<Arc<Grid>> {
        if size < 2 {
            return Err(Error::invalid(alloc::format!(
                "a grid needs at least 2 nodes, got {size}"
            )));
        }
        let grid = match rule {
            GridRule::GaussLegendre => gauss_legendre(size),
            GridRule::UniformTrapezoid => uniform_trapezoid(size),
        };
        Ok(Arc::new(grid))
    }

    pub fn gauss_legendre(size: usize) -> Result<Arc<Grid>> {
        Grid::new(size, GridRule::GaussLegendre)
    }

    pub fn uniform(size: usize) -> Result<Arc<Grid>> {
        Grid::new(size, GridRule::UniformTrapezoid)
    }

    pub fn rule(&self) -> GridRule {
        self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Node spacing of a uniform grid.
    pub fn step(&self) -> Option<f64> {
        match self.rule {
            GridRule::UniformTrapezoid => Some(1.0 / (self.size() - 1) as f64),
            GridRule::GaussLegendre => None,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        core::ptr::eq(self, other) || (self.rule == other.rule && self.nodes == other.nodes)
    }

    /// Writes into `row` the weights `ℓ_j(t)` such that the interpolant of
    /// values `v` at `t` is `Σ_j ℓ_j(t) v_j`.
    pub(crate) fn interpolation_row(&self, t: f64, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.size());
        row.iter_mut().for_each(|r| *r = 0.0);
        match self.rule {
            GridRule::GaussLegendre => {
                let mut den = 0.0;
                for (j, (&x, &b)) in self.nodes.iter().zip(&self.bary).enumerate() {
                    let d = t - x;
                    if d == 0.0 {
                        row.iter_mut().for_each(|r| *r = 0.0);
                        row[j] = 1.0;
                        return;
                    }
                    let q = b / d;
                    row[j] = q;
                    den += q;
                }
                row.iter_mut().for_each(|r| *r /= den);
            }
            GridRule::UniformTrapezoid => {
                let last = self.size() - 1;
                let pos = t.clamp(0.0, 1.0) * last as f64;
                let i = (libm::floor(pos) as usize).min(last - 1);
                let frac = pos - i as f64;
                row[i] = 1.0 - frac;
                row[i + 1] = frac;
            }
        }
    }

    pub(crate) fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        match self.rule {
            GridRule::GaussLegendre => {
                let mut num = 0.0;
                let mut den = 0.0;
                for ((&x, &b), &v) in self.nodes.iter().zip(&self.bary).zip(values) {
                    let d = t - x;
                    if d == 0.0 {
                        return v;
                    }
                    let q = b / d;
                    num += q * v;
                    den += q;
                }
                num / den
            }
            GridRule::UniformTrapezoid => {
                let last = self.size() - 1;
                let pos = t.clamp(0.0, 1.0) * last as f64;
                let i = (libm::floor(pos) as usize).min(last - 1);
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Matrix mapping values on `self` to values on `target` (rows follow
    /// `target` nodes).
    pub fn interpolation_matrix(&self, target: &Grid) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(target.size(), self.size());
        let mut row = vec![0.0; self.size()];
        for (k, &t) in target.nodes.iter().enumerate() {
            self.interpolation_row(t, &mut row);
            for (j, &r) in row.iter().enumerate() {
                m[(k, j)] = r;
            }
        }
        m
    }

    /// Derivative matrix on this grid: the exact derivative of the
    /// interpolating polynomial on Gauss grids, second-order finite
    /// differences (one-sided at the ends) on uniform grids.
    pub fn differentiation_matrix(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut d = DMatrix::zeros(n, n);
        match self.rule {
            GridRule::GaussLegendre => {
                for i in 0..n {
                    let mut diag = 0.0;
                    for j in 0..n {
                        if i != j {
                            let v = (self.bary[j] / self.bary[i]) / (self.nodes[i] - self.nodes[j]);
                            d[(i, j)] = v;
                            diag -= v;
                        }
                    }
                    d[(i, i)] = diag;
                }
            }
            GridRule::UniformTrapezoid => {
                let h = 1.0 / (n - 1) as f64;
                if n == 2 {
                    for i in 0..2 {
                        d[(i, 0)] = -1.0 / h;
                        d[(i, 1)] = 1.0 / h;
                    }
                    return d;
                }
                let c = 0.5 / h;
                d[(0, 0)] = -3.0 * c;
                d[(0, 1)] = 4.0 * c;
                d[(0, 2)] = -c;
                for i in 1..n - 1 {
                    d[(i, i - 1)] = -c;
                    d[(i, i + 1)] = c;
                }
                d[(n - 1, n - 3)] = c;
                d[(n - 1, n - 2)] = -4.0 * c;
                d[(n - 1, n - 1)] = 3.0 * c;
            }
        }
        d
    }
}

/// Legendre polynomial `P_m(t)` and its derivative.
fn legendre(m: usize, t: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = t;
    for k in 2..=m {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * t * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let dp = m as f64 * (t * p - p_prev) / (t * t - 1.0);
    (p, dp)
}

fn gauss_legendre(m: usize) -> Grid {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mut bary = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // i-th largest root of P_m
        let mut t = libm::cos(PI * (i as f64 + 0.75) / (mf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if libm::fabs(dt) < 1e-16 {
                dp = legendre(m, t).1;
                break;
            }
        }
        let lambda = 2.0 / ((1.0 - t * t) * dp * dp);
        let b = libm::sqrt((1.0 - t * t) * lambda);
        let hi = m - 1 - i;
        nodes[hi] = 0.5 * (1.0 + t);
        nodes[i] = 0.5 * (1.0 - t);
        weights[hi] = 0.5 * lambda;
        weights[i] = 0.5 * lambda;
        bary[hi] = b;
        bary[i] = b;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.5;
    }
    for (j, b) in bary.iter_mut().enumerate() {
        if j % 2 == 1 {
            *b = -*b;
        }
    }
    Grid {
        rule: GridRule::GaussLegendre,
        nodes,
        weights,
        bary,
    }
}

fn uniform_trapezoid(m: usize) -> Grid {
    let last = (m - 1) as f64;
    let nodes: Vec<f64> = (0..m).map(|i| i as f64 / last).collect();
    let mut weights = vec![1.0 / last; m];
    weights[0] *= 0.5;
    weights[m - 1] *= 0.5;
    Grid {
        rule: GridRule::UniformTrapezoid,
        nodes,
        weights,
        bary: vec![0.0; m],
    }
}
