//! Data-generating processes on `[0, 1]²` with uniform marginals.
//!
//! `Y = φ_0(X) + σ_U η` with `η` standard normal and independent of
//! `(X, Z)`, so `E[Y - φ_0(X) | Z] = 0` holds by construction and the
//! reduced form is `r = A φ_0`.
//!
//! The default dependence model is the Poisson-kernel (cosine) copula
//!
//! ```text
//! f(x, z) = ½ [P_ρ(π(x - z)) + P_ρ(π(x + z))],  P_ρ(θ) = (1 - ρ²) / (1 - 2ρ cos θ + ρ²)
//! ```
//!
//! whose conditional-expectation operator has singular values `|ρ|^k` with
//! cosine singular functions, and whose density is bounded by
//! `(1 + |ρ|) / (1 - |ρ|)`. The Gaussian copula is available too, but its
//! density is unbounded at the corners for `ρ ≠ 0` and it is poorly
//! resolved by Gauss–Legendre quadrature in `x`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::function_space::{Grid, GridFunction};
use crate::normal;
use crate::{Error, Result};

/// Points per axis of the lattice used for the density sup-bounds.
pub const SUP_LATTICE: usize = 512;

/// Sup-bounds at or above this are reported as unbounded.
pub const DENSITY_SUP_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub enum Phi0 {
    /// `x²`: nonnegative, nondecreasing and convex on `[0, 1]`.
    Square,
    Linear,
    /// `x + (e^x - 1) / 4`.
    AffinePlusExp,
    /// Piecewise-linear through `(x, value)` points with strictly increasing
    /// `x`, constant beyond the first and last point.
    Table(Vec<(f64, f64)>),
}

impl Phi0 {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Phi0::Square => x * x,
            Phi0::Linear => x,
            Phi0::AffinePlusExp => x + 0.25 * (libm::exp(x) - 1.0),
            Phi0::Table(points) => table_value(points, x),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Phi0::Table(points) = self {
            if points.len() < 2 {
                return Err(Error::invalid("a phi0 table needs at least 2 points"));
            }
            if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::invalid("phi0 table entries must be finite"));
            }
            if !points.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(Error::invalid("phi0 table x values must be strictly increasing"));
            }
        }
        Ok(())
    }
}

fn table_value(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let k = points.partition_point(|p| p.0 <= x);
    let (x0, y0) = points[k - 1];
    let (x1, y1) = points[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Copula {
    #[default]
    PoissonKernel,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub phi0: Phi0,
    /// Copula parameter `ρ ∈ (-1, 1)`.
    pub dependence: f64,
    /// `σ_U ≥ 0`.
    pub noise_sd: f64,
    /// Forces `f_{X|Z} ≡ 1` whatever `dependence` says.
    pub independent_case: bool,
    pub copula: Copula,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            phi0: Phi0::Square,
            dependence: 0.5,
            noise_sd: 0.0,
            independent_case: false,
            copula: Copula::PoissonKernel,
        }
    }
}

impl DgpSpec {
    pub fn independent() -> Self {
        DgpSpec {
            dependence: 0.0,
            independent_case: true,
            ..DgpSpec::default()
        }
    }

    pub fn with_dependence(rho: f64) -> Self {
        DgpSpec {
            dependence: rho,
            ..DgpSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dependence.abs() < 1.0) {
            return Err(Error::invalid(alloc::format!(
                "dependence must satisfy |rho| < 1, got {}",
                self.dependence
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "noise_sd must be finite and nonnegative, got {}",
                self.noise_sd
            )));
        }
        self.phi0.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dgp {
    spec: DgpSpec,
    sup_fz: f64,
    sup_fxz: f64,
}

pub fn make_dgp(spec: DgpSpec) -> Result<Dgp> {
    Dgp::new(spec)
}

impl Dgp {
    pub fn new(spec: DgpSpec) -> Result<Self> {
        spec.validate()?;
        let mut dgp = Dgp {
            spec,
            sup_fz: 0.0,
            sup_fxz: 0.0,
        };
        let (sup_fz, sup_fxz) = dgp.lattice_sups();
        dgp.sup_fz = sup_fz;
        dgp.sup_fxz = sup_fxz;
        Ok(dgp)
    }

    pub fn spec(&self) -> &DgpSpec {
        &self.spec
    }

    fn rho(&self) -> f64 {
        if self.spec.independent_case {
            0.0
        } else {
            self.spec.dependence
        }
    }

    pub fn phi0(&self, x: f64) -> f64 {
        self.spec.phi0.value(x)
    }

    pub fn phi0_on(&self, grid: &Arc<Grid>) -> Result<GridFunction> {
        GridFunction::from_fn(grid, |x| self.phi0(x))
    }

    /// Joint density `f_{X,Z}(x, z)`.
    pub fn joint_density(&self, x: f64, z: f64) -> f64 {
        let rho = self.rho();
        if rho == 0.0 {
            return 1.0;
        }
        match self.spec.copula {
            Copula::PoissonKernel => {
                0.5 * (poisson_kernel(rho, PI * (x - z)) + poisson_kernel(rho, PI * (x + z)))
            }
            Copula::Gaussian => gaussian_copula_density(rho, x, z),
        }
    }

    /// `f_Z(z)`; both copulas have uniform marginals.
    pub fn marginal_z(&self, z: f64) -> f64 {
        if (0.0..=1.0).contains(&z) {
            1.0
        } else {
            0.0
        }
    }

    pub fn conditional_density(&self, x: f64, z: f64) -> f64 {
        self.joint_density(x, z) / self.marginal_z(z)
    }

    pub fn sup_fz(&self) -> f64 {
        self.sup_fz
    }

    pub fn sup_fxz(&self) -> f64 {
        self.sup_fxz
    }

    /// Lattice bound on `f_{X|Z}`, the constant in the `|Aψ_n|` bound.
    pub fn sup_conditional(&self) -> f64 {
        // f_Z ≡ 1, so the conditional and joint sups coincide
        self.sup_fxz
    }

    fn lattice_sups(&self) -> (f64, f64) {
        let last = (SUP_LATTICE - 1) as f64;
        // the Gaussian copula is undefined on the boundary
        let range = match self.spec.copula {
            Copula::PoissonKernel => 0..SUP_LATTICE,
            Copula::Gaussian => 1..SUP_LATTICE - 1,
        };
        let mut sup_fz = 0.0f64;
        let mut sup_fxz = 0.0f64;
        for j in range.clone() {
            let z = j as f64 / last;
            sup_fz = sup_fz.max(self.marginal_z(z));
            for i in range.clone() {
                sup_fxz = sup_fxz.max(self.joint_density(i as f64 / last, z));
            }
        }
        (sup_fz, sup_fxz)
    }
}

fn poisson_kernel(rho: f64, theta: f64) -> f64 {
    (1.0 - rho * rho) / (1.0 - 2.0 * rho * libm::cos(theta) + rho * rho)
}

fn gaussian_copula_density(rho: f64, u: f64, v: f64) -> f64 {
    if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return 0.0;
    }
    let a = normal::quantile(u);
    let b = normal::quantile(v);
    let s = 1.0 - rho * rho;
    libm::exp(-(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * s)) / libm::sqrt(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBounds {
    pub sup_fz: f64,
    pub sup_fxz: f64,
    pub bounded: bool,
}

/// Reports the lattice sup-bounds and whether both are finite and below
/// [`DENSITY_SUP_LIMIT`].
pub fn bounded_density_check(dgp: &Dgp) -> DensityBounds {
    let ok = |v: f64| v.is_finite() && v < DENSITY_SUP_LIMIT;
    DensityBounds {
        sup_fz: dgp.sup_fz,
        sup_fxz: dgp.sup_fxz,
        bounded: ok(dgp.sup_fz) && ok(dgp.sup_fxz),
    }
}

/// `r(z_j) = ∫ φ_0(x) f_{X|Z}(x | z_j) dx` using the quadrature of `phi0`'s
/// grid.
pub fn reduced_form(dgp: &Dgp, phi0: &GridFunction, z_grid: &Arc<Grid>) -> Result<GridFunction> {
    let xg = phi0.grid();
    let values = z_grid
        .nodes()
        .iter()
        .map(|&z| {
            xg.nodes()
                .iter()
                .zip(xg.weights())
                .zip(phi0.values())
                .map(|((&x, &w), &p)| w * p * dgp.conditional_density(x, z))
                .sum()
        })
        .collect();
    GridFunction::new(z_grid, values)
}

/// Draws from a [`Dgp`]. Reproducible given `(spec, seed, size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub seed: u64,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.z)
            .map(|((&x, &y), &z)| (x, y, z))
    }
}

pub fn sample(dgp: &Dgp, m: usize, seed: u64) -> Result<Sample> {
    if m == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = dgp.rho();
    let sigma = dgp.spec.noise_sd;
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let mut zs = Vec::with_capacity(m);
    for _ in 0..m {
        let (x, z) = match dgp.spec.copula {
            Copula::PoissonKernel => {
                let z: f64 = rng.gen();
                let u: f64 = rng.gen();
                // wrapped Cauchy angle with concentration |ρ|, shifted by π for ρ < 0
                let k = (1.0 - rho.abs()) / (1.0 + rho.abs());
                let mut theta = 2.0 * libm::atan(k * libm::tan(PI * (u - 0.5)));
                if rho < 0.0 {
                    theta += PI;
                }
                let x = libm::acos(libm::cos(PI * z + theta)) / PI;
                (x.clamp(0.0, 1.0), z)
            }
            Copula::Gaussian => {
                let w: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                let v = rho * w + libm::sqrt(1.0 - rho * rho) * e;
                (normal::cdf(v), normal::cdf(w))
            }
        };
        let eta: f64 = rng.sample(StandardNormal);
        xs.push(x);
        zs.push(z);
        ys.push(dgp.phi0(x) + sigma * eta);
    }
    Ok(Sample {
        x: xs,
        y: ys,
        z: zs,
        seed,
    })
}
