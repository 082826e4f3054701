use alloc::vec::Vec;

use nalgebra::DVector;

use super::problem::LsProblem;
use super::{EstimateResult, Penalty, Solver};
use crate::function_space::GridFunction;
use crate::linalg::sorted_svd;
use crate::operator::DiscreteOperator;
use crate::Result;

/// Singular values below this fraction of `σ_1` are discarded.
pub const NAIVE_TRUNCATION: f64 = 1e-12;

/// Minimum-norm least-squares minimiser of `Q` by truncated SVD: the
/// unregularized analog estimator.
pub fn naive_estimate(a: &DiscreteOperator, r: &GridFunction) -> Result<EstimateResult> {
    let problem = LsProblem::new(a, r, 0.0, Penalty::L2Only)?;
    let svd = sorted_svd(problem.b.clone())?;
    let top = svd.values.first().copied().unwrap_or(0.0);
    let mut u = DVector::zeros(problem.dim());
    let mut sigma_min = 0.0;
    for (k, &s) in svd.values.iter().enumerate() {
        if !(s > NAIVE_TRUNCATION * top) {
            break;
        }
        let coef = svd.u.column(k).dot(&problem.data) / s;
        u += svd.v.column(k) * coef;
        sigma_min = s;
    }
    let kkt = problem.gradient(&u).norm();
    Ok(EstimateResult {
        solver: Solver::Naive,
        phi_hat: problem.to_phi(a, &u)?,
        objective: problem.objective(&u),
        lambda_used: 0.0,
        kkt_residual: kkt,
        constraint_verdicts: Vec::new(),
        condition_diagnostic: sigma_min,
        iterations: 1,
    })
}
