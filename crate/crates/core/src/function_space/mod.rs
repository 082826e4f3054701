//! Grids, quadrature and the geometry of `L²[0, 1]`.
//!
//! Integrals are taken on Gauss–Legendre grids. Derivatives and shape checks
//! use a uniform *inspection* grid, onto which functions are resampled by
//! barycentric interpolation (Gauss source) or linear interpolation (uniform
//! source). Gauss nodes cluster at the endpoints, which makes plain finite
//! differences on them badly scaled.

mod grid;
mod grid_function;
mod shape;

pub use self::grid::{make_grid, Grid, GridRule, DEFAULT_QUADRATURE_SIZE};
pub use self::grid_function::{derivative, inner_product, l2_norm, sobolev_norm, GridFunction};
pub use self::shape::{
    check_shape, check_shape_on, difference_coefficients, ShapeConstraint, ShapeKind,
    ShapeVerdict, DEFAULT_SHAPE_TOLERANCE,
};
