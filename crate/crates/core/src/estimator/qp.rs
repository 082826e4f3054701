//! Primal active-set solver for `min ‖S u − t‖²` subject to `G u ≥ 0`.
//!
//! The constraints are homogeneous, so `u = 0` is a feasible start. Each
//! iteration minimises over the null space of the working set with a
//! truncated pseudo-inverse, which keeps the iteration well defined when
//! `λ = 0` and `S` is numerically rank deficient; the minimum-norm choice
//! leaves unidentified directions at zero.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::constraints::ConstraintSet;
use super::problem::{smallest_eigenvalue, LsProblem};
use super::{EstimateResult, Solver, TirConfig};
use crate::function_space::{check_shape_on, GridFunction};
use crate::linalg::sorted_svd;
use crate::operator::DiscreteOperator;
use crate::{Error, Result};

pub const QP_MAX_ITERATIONS: usize = 5000;

const PINV_TRUNCATION: f64 = 1e-12;
/// Reduced-gradient norm (relative to `‖Sᵀt‖`) at which a face counts as
/// solved.
const STATIONARITY_TOLERANCE: f64 = 1e-11;
/// Constraint values below this are treated as active.
const ACTIVE_TOLERANCE: f64 = 1e-14;
/// Proximal weight for `λ = 0`, relative to `‖S‖²_F`.
const PROX_WEIGHT: f64 = 1e-8;
const PROX_ROUNDS: usize = 20;
const PROX_TARGET: f64 = 1e-9;

/// Minimises `Q(φ) + λ‖φ‖²_P` subject to the shape constraints; `λ = 0` is
/// allowed.
pub fn constrained_estimate(
    a: &DiscreteOperator,
    r: &GridFunction,
    cfg: &TirConfig,
    constraints: &ConstraintSet,
) -> Result<EstimateResult> {
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "lambda must be nonnegative and finite, got {}",
            cfg.lambda
        )));
    }
    cfg.validate_mode()?;
    let problem = LsProblem::new(a, r, cfg.lambda, cfg.penalty)?;
    let g = normalized_constraints(constraints.encode(a.x_grid()), &problem.sqrt_wx);
    let (s, t) = compress(problem.stacked(), problem.stacked_target());

    let outcome = if cfg.lambda > 0.0 {
        active_set(&s, &t, &g, DVector::zeros(s.ncols()), QP_MAX_ITERATIONS)
    } else {
        proximal(&problem, &s, &t, &g)
    };
    let kkt = certificate(&problem, &g, &outcome.u, &outcome.working, &outcome.multipliers);
    let phi_hat = problem.to_phi(a, &outcome.u)?;
    if !outcome.converged {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            kkt_residual: kkt,
            best: phi_hat.into_values(),
        });
    }
    let verdicts = constraints
        .constraints()
        .iter()
        .map(|c| Ok((*c, check_shape_on(&phi_hat, c, constraints.inspection())?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateResult {
        solver: Solver::Constrained,
        objective: problem.objective(&outcome.u),
        phi_hat,
        lambda_used: cfg.lambda,
        kkt_residual: kkt,
        constraint_verdicts: verdicts,
        condition_diagnostic: smallest_eigenvalue(&problem.hessian())?,
        iterations: outcome.iterations,
    })
}

/// Expresses `G φ ≥ 0` in `u`-coordinates with unit-norm rows.
fn normalized_constraints(g_phi: DMatrix<f64>, sqrt_wx: &[f64]) -> DMatrix<f64> {
    let mut g = g_phi;
    for (j, s) in sqrt_wx.iter().enumerate() {
        g.column_mut(j).scale_mut(1.0 / s);
    }
    for mut row in g.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row.scale_mut(1.0 / n);
        }
    }
    g
}

/// Replaces a tall least-squares system by its triangular factor, which has
/// the same normal equations.
fn compress(s: DMatrix<f64>, t: DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = s.ncols();
    if s.nrows() <= n {
        return (s, t);
    }
    let qr = s.qr();
    let mut qt = t;
    qr.q_tr_mul(&mut qt);
    (qr.r(), qt.rows(0, n).into_owned())
}

struct Outcome {
    u: DVector<f64>,
    working: Vec<usize>,
    multipliers: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Orthonormal basis `[Y | Z]` of `R^n` with `Y` spanning the working-set
/// rows, and the triangular factor of `G_Wᵀ = Y R`.
fn factor_working_set(g: &DMatrix<f64>, working: &[usize], n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    if working.is_empty() {
        return (DMatrix::identity(n, n), DMatrix::zeros(0, 0));
    }
    let mut gw_t = DMatrix::zeros(n, working.len());
    for (c, &i) in working.iter().enumerate() {
        gw_t.set_column(c, &g.row(i).transpose());
    }
    let qr = gw_t.qr();
    let mut q_t = DMatrix::identity(n, n);
    qr.q_tr_mul(&mut q_t);
    (q_t.transpose(), qr.r())
}

fn pinv_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = sorted_svd(m).ok()?;
    let top = svd.values.first().copied().unwrap_or(0.0);
    let mut y = DVector::zeros(svd.v.nrows());
    for (k, &s) in svd.values.iter().enumerate() {
        if !(s > PINV_TRUNCATION * top) {
            break;
        }
        y += svd.v.column(k) * (svd.u.column(k).dot(rhs) / s);
    }
    Some(y)
}

/// With `λ = 0` the objective is only positive semidefinite. Proximal-point
/// rounds `min ‖Su − t‖² + μ‖u − u_k‖²` from `u_0 = 0` are strongly convex,
/// and each round's stationarity defect for the original problem is
/// `μ‖u_{k+1} − u_k‖`.
fn proximal(problem: &LsProblem, s: &DMatrix<f64>, t: &DVector<f64>, g: &DMatrix<f64>) -> Outcome {
    let n = s.ncols();
    let sqrt_mu = libm::sqrt(PROX_WEIGHT * s.norm_squared());
    let mut u = DVector::zeros(n);
    let mut iterations = 0;
    let mut last = None;
    for _ in 0..PROX_ROUNDS {
        let mut sa = DMatrix::zeros(s.nrows() + n, n);
        sa.view_mut((0, 0), s.shape()).copy_from(s);
        sa.view_mut((s.nrows(), 0), (n, n)).fill_with_identity();
        sa.view_mut((s.nrows(), 0), (n, n)).scale_mut(sqrt_mu);
        let mut ta = DVector::zeros(s.nrows() + n);
        ta.rows_mut(0, s.nrows()).copy_from(t);
        ta.rows_mut(s.nrows(), n).copy_from(&(&u * sqrt_mu));
        let (sa, ta) = compress(sa, ta);
        let mut out = active_set(&sa, &ta, g, u.clone(), QP_MAX_ITERATIONS.saturating_sub(iterations).max(1));
        iterations += out.iterations;
        out.iterations = iterations;
        if !out.converged {
            return out;
        }
        u = out.u.clone();
        let kkt = certificate(problem, g, &out.u, &out.working, &out.multipliers);
        last = Some(out);
        if kkt <= PROX_TARGET || iterations >= QP_MAX_ITERATIONS {
            break;
        }
    }
    last.expect("at least one proximal round runs")
}

fn active_set(s: &DMatrix<f64>, t: &DVector<f64>, g: &DMatrix<f64>, start: DVector<f64>, max_iterations: usize) -> Outcome {
    let n = s.ncols();
    let gtol = STATIONARITY_TOLERANCE * s.tr_mul(t).norm();
    let mut u = start;
    let mut working: Vec<usize> = Vec::new();
    let mut in_working = alloc::vec![false; g.nrows()];

    for iteration in 1..=max_iterations {
        let (q, r) = factor_working_set(g, &working, n);
        let k = working.len();
        let z = q.columns(k, n - k);
        let residual = t - s * &u;
        let grad = -s.tr_mul(&residual);
        let reduced = z.tr_mul(&grad);

        if reduced.norm() <= gtol || k == n {
            // Stationary on this face: inspect the multipliers.
            let multipliers = working_multipliers(&q, &r, k, &grad);
            let mu_tol = 1e-12 * (1.0 + gtol / STATIONARITY_TOLERANCE);
            let drop = multipliers
                .iter()
                .enumerate()
                .filter(|(_, &m)| m < -mu_tol)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(pos, _)| pos);
            match drop {
                None => {
                    return Outcome {
                        u,
                        working,
                        multipliers,
                        iterations: iteration,
                        converged: true,
                    }
                }
                Some(pos) => {
                    in_working[working[pos]] = false;
                    working.remove(pos);
                    continue;
                }
            }
        }

        let sz = s * z;
        let Some(y) = pinv_solve(sz, &residual) else {
            break;
        };
        let step = z * y;
        let step_norm = step.norm();
        if !(step_norm > 0.0) || step.iter().any(|v| !v.is_finite()) {
            break;
        }

        // Ratio test; ties at zero go to the most steeply violated row.
        let mut alpha = 1.0;
        let mut blocking: Option<(usize, f64)> = None;
        for (i, &active) in in_working.iter().enumerate() {
            if active {
                continue;
            }
            let gp = g.row(i).dot(&step.transpose());
            if gp >= -1e-12 * step_norm {
                continue;
            }
            let gu = g.row(i).dot(&u.transpose());
            let gu = if gu < ACTIVE_TOLERANCE { 0.0 } else { gu };
            let ai = gu / -gp;
            let better = ai < alpha || (ai == alpha && blocking.is_none_or(|(_, best)| gp < best));
            if better {
                alpha = ai;
                blocking = Some((i, gp));
            }
        }
        u += &step * alpha;
        if let Some((i, _)) = blocking {
            working.push(i);
            in_working[i] = true;
        }
    }
    let (q, r) = factor_working_set(g, &working, n);
    let grad = s.tr_mul(&(s * &u - t));
    let multipliers = working_multipliers(&q, &r, working.len(), &grad);
    Outcome {
        u,
        working,
        multipliers,
        iterations: max_iterations,
        converged: false,
    }
}

/// Least-squares solution of `G_Wᵀ μ = ∇f` from the working-set QR.
fn working_multipliers(q: &DMatrix<f64>, r: &DMatrix<f64>, k: usize, grad: &DVector<f64>) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let rhs = q.columns(0, k).tr_mul(grad);
    match r.solve_upper_triangular(&rhs) {
        Some(mu) => mu.iter().copied().collect(),
        None => alloc::vec![f64::NAN; k],
    }
}

/// Largest of stationarity, primal and dual infeasibility and
/// complementary slackness, with the gradient taken from the original
/// (uncompressed) problem.
fn certificate(problem: &LsProblem, g: &DMatrix<f64>, u: &DVector<f64>, working: &[usize], multipliers: &[f64]) -> f64 {
    let mut lagrangian = problem.gradient(u);
    for (&i, &mu) in working.iter().zip(multipliers) {
        lagrangian -= g.row(i).transpose() * mu;
    }
    let stationarity = lagrangian.norm();
    let gu = g * u;
    let primal = gu.iter().fold(0.0f64, |m, v| m.max(-v));
    let dual = multipliers.iter().fold(0.0f64, |m, v| m.max(-v));
    let slackness = working
        .iter()
        .zip(multipliers)
        .fold(0.0f64, |m, (&i, mu)| m.max((mu * gu[i]).abs()));
    let worst = stationarity.max(primal).max(dual).max(slackness);
    if worst.is_nan() {
        f64::INFINITY
    } else {
        worst
    }
}
