//! Shape-preserving perturbation sequences that keep a fixed `L²` distance
//! from `φ_0` while their image under any bounded-density conditional
//! expectation operator vanishes.
//!
//! Two families, both with `‖ψ_n‖ = 1`:
//!
//! - monotone: `ψ_n(x) = -(2n+1)^{1/2} (1-x)^n`, nondecreasing, `≤ 0`;
//! - nonneg: `ψ_n(x) = (2n+1)^{1/2} (2^{2n+1}-1)^{-1/2} (1+x)^n`, positive
//!   with every derivative nonnegative, so adding it preserves
//!   nonnegativity, monotonicity and convexity.
//!
//! Powers of two are never formed directly; the nonneg family is evaluated
//! as `c_n ((1+x)/2)^n` with `c_n = ((2n+1) / (2 - 2^{-2n}))^{1/2}`, which is
//! the same function and stays finite for every admissible `n`.

use alloc::sync::Arc;

use crate::function_space::{Grid, GridFunction};
use crate::{Error, Result};

/// Largest supported sequence index.
pub const MAX_INDEX: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Monotone,
    Nonneg,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Monotone => "monotone",
            Family::Nonneg => "nonneg",
        }
    }
}

/// One perturbation `φ_n = φ_0 + ε ψ_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    family: Family,
    n: u32,
    epsilon: f64,
}

impl CounterexampleSpec {
    pub fn new(family: Family, n: u32, epsilon: f64) -> Result<Self> {
        if n > MAX_INDEX {
            return Err(Error::OutOfRange { n, max: MAX_INDEX });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(CounterexampleSpec { family, n, epsilon })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ψ_n(x)`.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.n as f64;
        match self.family {
            Family::Monotone => -libm::sqrt(2.0 * n + 1.0) * libm::pow(1.0 - x, n),
            Family::Nonneg => nonneg_scale(self.n) * libm::pow(0.5 * (1.0 + x), n),
        }
    }

    /// `ψ_n'(x)`.
    pub fn derivative_at(&self, x: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        match self.family {
            Family::Monotone => n * libm::sqrt(2.0 * n + 1.0) * libm::pow(1.0 - x, n - 1.0),
            Family::Nonneg => 0.5 * n * nonneg_scale(self.n) * libm::pow(0.5 * (1.0 + x), n - 1.0),
        }
    }
}

/// `((2n+1) / (2 - 2^{-2n}))^{1/2}`, the nonneg normalizer times `2^n`.
fn nonneg_scale(n: u32) -> f64 {
    let nf = n as f64;
    libm::sqrt((2.0 * nf + 1.0) / (2.0 - libm::exp2(-2.0 * nf)))
}

/// `ψ_n` at the nodes of `grid`.
pub fn psi(spec: &CounterexampleSpec, grid: &Arc<Grid>) -> Result<GridFunction> {
    GridFunction::from_fn(grid, |x| spec.value_at(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedFunction {
    pub base: GridFunction,
    pub spec: CounterexampleSpec,
    pub result: GridFunction,
}

impl PerturbedFunction {
    /// `φ_n - φ_0 = ε ψ_n`.
    pub fn displacement(&self) -> GridFunction {
        // both live on the base grid by construction
        self.result.sub(&self.base).expect("same grid")
    }
}

pub fn perturb(base: &GridFunction, spec: &CounterexampleSpec) -> Result<PerturbedFunction> {
    let direction = psi(spec, base.grid())?;
    let result = base.add_scaled(&direction, spec.epsilon)?;
    Ok(PerturbedFunction {
        base: base.clone(),
        spec: *spec,
        result,
    })
}

/// `∫_0^1 ψ_n(x) dx` in closed form.
pub fn psi_integral(spec: &CounterexampleSpec) -> f64 {
    let n = spec.n as f64;
    match spec.family {
        Family::Monotone => -libm::sqrt(2.0 * n + 1.0) / (n + 1.0),
        // (2^{n+1} - 1) / 2^n = 2 - 2^{-n}
        Family::Nonneg => nonneg_scale(spec.n) * (2.0 - libm::exp2(-n)) / (n + 1.0),
    }
}

/// The bound `sup_z |(Aψ_n)(z)| ≤ C ∫ |ψ_n|` with `C = sup f_{X|Z}`; for the
/// monotone family this is `C (2n+1)^{1/2} / (n+1)`.
pub fn analytic_sup_a_psi_bound(spec: &CounterexampleSpec, density_sup: f64) -> Result<f64> {
    if !(density_sup > 0.0 && density_sup.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "density_sup must be positive and finite, got {density_sup}"
        )));
    }
    Ok(density_sup * libm::fabs(psi_integral(spec)))
}

/// Closed-form first-order Sobolev norm of `ψ_n`; strictly increasing and
/// unbounded in `n`.
pub fn analytic_sobolev_norm(spec: &CounterexampleSpec) -> f64 {
    if spec.n == 0 {
        return 1.0;
    }
    let n = spec.n as f64;
    let base = n * n * (2.0 * n + 1.0) / (2.0 * n - 1.0);
    let grad_sq = match spec.family {
        Family::Monotone => base,
        // (2^{2n-1} - 1) / (2^{2n+1} - 1) = (1/2 - 2^{-2n}) / (2 - 2^{-2n})
        Family::Nonneg => {
            let t = libm::exp2(-2.0 * n);
            base * (0.5 - t) / (2.0 - t)
        }
    };
    libm::sqrt(1.0 + grad_sq)
}
