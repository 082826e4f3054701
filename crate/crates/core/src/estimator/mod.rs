//! Estimators for `φ` from the operator and the reduced form: the Tikhonov
//! (Sobolev-penalized) minimum-distance solve, the unregularized
//! pseudo-inverse, a shape-constrained quadratic program, a kernel plug-in
//! that builds the operator from a sample, and a perturbation probe.
//!
//! All solvers work in coordinates `u = W_x^{1/2} φ`, in which the `L²(X)`
//! norm is Euclidean, and minimise `Q(φ) + λ‖φ‖²_P`.

mod constraints;
mod naive;
mod plugin;
mod problem;
mod qp;
mod stability;
mod tir;

pub use constraints::ConstraintSet;
pub use naive::{naive_estimate, NAIVE_TRUNCATION};
pub use plugin::{rule_of_thumb_bandwidths, sampled_plugin, silverman_bandwidth, PluginEstimate, DENSITY_FLOOR, MIN_SAMPLE_SIZE};
pub use qp::{constrained_estimate, QP_MAX_ITERATIONS};
pub use stability::{stability_probe, ProbeDirection, ProbeRow};
pub use tir::tir_estimate;

use alloc::vec::Vec;

use crate::function_space::{GridFunction, ShapeConstraint, ShapeVerdict};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Penalty {
    /// `‖φ‖² + ‖φ'‖²`.
    SobolevFirstOrder,
    /// `‖φ‖²` (ridge).
    L2Only,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimationMode {
    Population,
    /// Kernel plug-in with bandwidths in `x` and `z`.
    Sampled { h_x: f64, h_z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TirConfig {
    pub lambda: f64,
    pub penalty: Penalty,
    pub mode: EstimationMode,
}

impl TirConfig {
    /// Sobolev penalty, population mode.
    pub fn new(lambda: f64) -> Self {
        TirConfig {
            lambda,
            penalty: Penalty::SobolevFirstOrder,
            mode: EstimationMode::Population,
        }
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn sampled(mut self, h_x: f64, h_z: f64) -> Self {
        self.mode = EstimationMode::Sampled { h_x, h_z };
        self
    }

    /// `λ > 0` and positive bandwidths. The constrained solver also admits
    /// `λ = 0` and checks that separately.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        self.validate_mode()
    }

    pub(crate) fn validate_mode(&self) -> Result<()> {
        if let EstimationMode::Sampled { h_x, h_z } = self.mode {
            if !(h_x > 0.0 && h_x.is_finite() && h_z > 0.0 && h_z.is_finite()) {
                return Err(Error::invalid(alloc::format!(
                    "bandwidths must be positive and finite, got h_x = {h_x}, h_z = {h_z}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    Naive,
    Tir,
    Constrained,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Naive => "naive",
            Solver::Tir => "tir",
            Solver::Constrained => "constrained",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub solver: Solver,
    pub phi_hat: GridFunction,
    /// `Q(φ̂) + λ‖φ̂‖²_P`.
    pub objective: f64,
    pub lambda_used: f64,
    /// Largest KKT violation in `L²(X)` units: the normal-equation residual
    /// for the closed-form solves; for the constrained solve the maximum of
    /// stationarity, primal infeasibility and complementary slackness.
    pub kkt_residual: f64,
    pub constraint_verdicts: Vec<(ShapeConstraint, ShapeVerdict)>,
    /// Smallest eigenvalue of the solved system; the smallest retained
    /// singular value for the pseudo-inverse.
    pub condition_diagnostic: f64,
    pub iterations: usize,
}

impl EstimateResult {
    pub fn constraints_ok(&self) -> bool {
        self.constraint_verdicts.iter().all(|(_, v)| v.is_satisfied())
    }
}
