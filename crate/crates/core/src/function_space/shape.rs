use alloc::sync::Arc;
use alloc::vec::Vec;

use super::grid::{Grid, GridRule};
use super::grid_function::GridFunction;
use crate::{Error, Result};

/// Separates genuine violations from finite-difference rounding for
/// polynomials up to degree ~100.
pub const DEFAULT_SHAPE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Nonnegative,
    MonotoneNondecreasing,
    Convex,
    /// `f^{(m)} ≥ 0` for the given order `m ≥ 1`.
    DerivativeSign(u32),
}

impl ShapeKind {
    /// Order of the difference operator the check uses.
    pub fn order(self) -> usize {
        match self {
            ShapeKind::Nonnegative => 0,
            ShapeKind::MonotoneNondecreasing => 1,
            ShapeKind::Convex => 2,
            ShapeKind::DerivativeSign(m) => m as usize,
        }
    }

    pub fn name(self) -> alloc::string::String {
        match self {
            ShapeKind::Nonnegative => "nonnegative".into(),
            ShapeKind::MonotoneNondecreasing => "monotone_nondecreasing".into(),
            ShapeKind::Convex => "convex".into(),
            ShapeKind::DerivativeSign(m) => alloc::format!("derivative_sign_{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeConstraint {
    kind: ShapeKind,
    tolerance: f64,
}

impl ShapeConstraint {
    pub fn new(kind: ShapeKind, tolerance: f64) -> Result<Self> {
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "shape tolerance must be finite and nonnegative, got {tolerance}"
            )));
        }
        if kind == ShapeKind::DerivativeSign(0) {
            return Err(Error::invalid("derivative_sign needs order m >= 1"));
        }
        Ok(ShapeConstraint { kind, tolerance })
    }

    pub fn nonnegative() -> Self {
        ShapeConstraint {
            kind: ShapeKind::Nonnegative,
            tolerance: DEFAULT_SHAPE_TOLERANCE,
        }
    }

    pub fn monotone() -> Self {
        ShapeConstraint {
            kind: ShapeKind::MonotoneNondecreasing,
            tolerance: DEFAULT_SHAPE_TOLERANCE,
        }
    }

    pub fn convex() -> Self {
        ShapeConstraint {
            kind: ShapeKind::Convex,
            tolerance: DEFAULT_SHAPE_TOLERANCE,
        }
    }

    pub fn derivative_sign(order: u32) -> Result<Self> {
        ShapeConstraint::new(ShapeKind::DerivativeSign(order), DEFAULT_SHAPE_TOLERANCE)
    }

    pub fn with_tolerance(self, tolerance: f64) -> Result<Self> {
        ShapeConstraint::new(self.kind, tolerance)
    }

    pub fn kind(&self) -> ShapeKind {
        self.kind
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeVerdict {
    Satisfied,
    /// `node` is the inspection node where the stencil of the smallest
    /// difference starts; `slack` is that (negative) difference.
    Violated { node: usize, slack: f64 },
}

impl ShapeVerdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, ShapeVerdict::Satisfied)
    }
}

/// Coefficients `c_k = (-1)^{m-k} C(m, k)` of the forward difference
/// `Δ^m f_i = Σ_k c_k f_{i+k}`.
pub fn difference_coefficients(order: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(order + 1);
    let mut binom = 1.0;
    for k in 0..=order {
        let sign = if (order - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        c.push(sign * binom);
        binom = binom * (order - k) as f64 / (k + 1) as f64;
    }
    c
}

/// Smallest `m`-th forward difference and where it starts.
pub(crate) fn min_difference(values: &[f64], order: usize) -> (usize, f64) {
    let coeffs = difference_coefficients(order);
    values
        .windows(order + 1)
        .map(|w| w.iter().zip(&coeffs).map(|(v, c)| v * c).sum::<f64>())
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best })
}

/// Checks `f`, which must already live on a uniform inspection grid with at
/// least `order + 2` nodes. The statistic is the raw `m`-th difference, i.e.
/// the `m`-th derivative scaled by `step^m`.
pub fn check_shape(f: &GridFunction, c: &ShapeConstraint) -> Result<ShapeVerdict> {
    let grid = f.grid();
    if grid.rule() != GridRule::UniformTrapezoid {
        return Err(Error::invalid("shape checks need a uniform inspection grid"));
    }
    let order = c.kind.order();
    if grid.size() < order + 2 {
        return Err(Error::invalid(alloc::format!(
            "{} needs at least {} inspection nodes, got {}",
            c.kind.name(),
            order + 2,
            grid.size()
        )));
    }
    let (node, slack) = min_difference(f.values(), order);
    if slack >= -c.tolerance {
        Ok(ShapeVerdict::Satisfied)
    } else {
        Ok(ShapeVerdict::Violated { node, slack })
    }
}

/// Resamples `f` onto `inspection` and checks it.
pub fn check_shape_on(
    f: &GridFunction,
    c: &ShapeConstraint,
    inspection: &Arc<Grid>,
) -> Result<ShapeVerdict> {
    check_shape(&f.resample(inspection), c)
}
