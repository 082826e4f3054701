//! The conditional-expectation operator `(Aφ)(z) = ∫ φ(x) f_{X|Z}(x|z) dx`
//! as a matrix between grid functions, with the minimum-distance criterion
//! `Q_∞(φ) = E[m(φ, Z)²]` built on top of it.
//!
//! `L²(Z)` carries the product `⟨a, b⟩ = Σ_j w_j f_Z(z_j) a_j b_j`; the
//! adjoint and the singular values are taken between that space and `L²(X)`,
//! so they belong to the operator rather than to the node placement.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dgp::Dgp;
use crate::function_space::{Grid, GridFunction};
use crate::linalg::{self, sorted_svd};
use crate::{Error, Result};

/// Relative tolerance for the numerical rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    x_grid: Arc<Grid>,
    z_grid: Arc<Grid>,
    /// Entry `(j, i)` is `f_{X|Z}(x_i | z_j) w_i`.
    kernel: DMatrix<f64>,
    fz_weights: Vec<f64>,
    excluded: Vec<usize>,
}

pub fn discretize(dgp: &Dgp, x_grid: &Arc<Grid>, z_grid: &Arc<Grid>) -> Result<DiscreteOperator> {
    DiscreteOperator::discretize(dgp, x_grid, z_grid)
}

impl DiscreteOperator {
    pub fn discretize(dgp: &Dgp, x_grid: &Arc<Grid>, z_grid: &Arc<Grid>) -> Result<Self> {
        let xs = x_grid.nodes();
        let wx = x_grid.weights();
        let kernel = DMatrix::from_fn(z_grid.size(), x_grid.size(), |j, i| {
            dgp.conditional_density(xs[i], z_grid.nodes()[j]) * wx[i]
        });
        let fz_weights = z_grid
            .nodes()
            .iter()
            .zip(z_grid.weights())
            .map(|(&z, &w)| w * dgp.marginal_z(z))
            .collect();
        DiscreteOperator::from_parts(x_grid, z_grid, kernel, fz_weights)
    }

    /// Assembles an operator from an explicit kernel (rows on `z_grid`,
    /// columns on `x_grid`, x-weights folded in) and `L²(Z)` weights.
    pub fn from_parts(
        x_grid: &Arc<Grid>,
        z_grid: &Arc<Grid>,
        kernel: DMatrix<f64>,
        fz_weights: Vec<f64>,
    ) -> Result<Self> {
        if kernel.nrows() != z_grid.size() || kernel.ncols() != x_grid.size() {
            return Err(Error::invalid(alloc::format!(
                "kernel is {}x{}, grids need {}x{}",
                kernel.nrows(),
                kernel.ncols(),
                z_grid.size(),
                x_grid.size()
            )));
        }
        if fz_weights.len() != z_grid.size() {
            return Err(Error::GridMismatch {
                expected: z_grid.size(),
                found: fz_weights.len(),
            });
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("kernel has non-finite entries".into()));
        }
        if fz_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("fz weights must be finite and nonnegative"));
        }
        let excluded = fz_weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w == 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(DiscreteOperator {
            x_grid: Arc::clone(x_grid),
            z_grid: Arc::clone(z_grid),
            kernel,
            fz_weights,
            excluded,
        })
    }

    pub fn x_grid(&self) -> &Arc<Grid> {
        &self.x_grid
    }

    pub fn z_grid(&self) -> &Arc<Grid> {
        &self.z_grid
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn fz_weights(&self) -> &[f64] {
        &self.fz_weights
    }

    /// z-nodes carrying zero `L²(Z)` weight.
    pub fn excluded_nodes(&self) -> &[usize] {
        &self.excluded
    }

    /// `∫ f_{X|Z}(x | z_j) dx` per z-node.
    pub fn row_sums(&self) -> Vec<f64> {
        self.kernel.row_iter().map(|r| r.sum()).collect()
    }

    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        phi.ensure_on(&self.x_grid)?;
        let v = &self.kernel * DVector::from_column_slice(phi.values());
        GridFunction::new(&self.z_grid, linalg::to_vec(&v))
    }

    /// `m(φ, z) = (Aφ)(z) - r(z)`.
    pub fn residual_m(&self, phi: &GridFunction, r: &GridFunction) -> Result<GridFunction> {
        r.ensure_on(&self.z_grid)?;
        self.apply(phi)?.sub(r)
    }

    /// `Q_∞(φ) = Σ_j w_j f_Z(z_j) m(φ, z_j)²`.
    pub fn q_infinity(&self, phi: &GridFunction, r: &GridFunction) -> Result<f64> {
        let m = self.residual_m(phi, r)?;
        Ok(self.z_norm_sq(m.values()))
    }

    /// Adjoint with respect to the weighted `L²(Z)` and `L²(X)` products.
    pub fn adjoint_apply(&self, psi: &GridFunction) -> Result<GridFunction> {
        psi.ensure_on(&self.z_grid)?;
        let weighted = DVector::from_iterator(
            psi.len(),
            psi.values().iter().zip(&self.fz_weights).map(|(p, w)| p * w),
        );
        let v = self.kernel.tr_mul(&weighted);
        let values = v
            .iter()
            .zip(self.x_grid.weights())
            .map(|(a, w)| a / w)
            .collect();
        GridFunction::new(&self.x_grid, values)
    }

    pub fn z_inner_product(&self, a: &GridFunction, b: &GridFunction) -> Result<f64> {
        a.ensure_on(&self.z_grid)?;
        b.ensure_on(&self.z_grid)?;
        Ok(a
            .values()
            .iter()
            .zip(b.values())
            .zip(&self.fz_weights)
            .map(|((x, y), w)| w * x * y)
            .sum())
    }

    pub fn z_norm(&self, a: &GridFunction) -> Result<f64> {
        a.ensure_on(&self.z_grid)?;
        Ok(libm::sqrt(self.z_norm_sq(a.values())))
    }

    fn z_norm_sq(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.fz_weights)
            .map(|(v, w)| w * v * v)
            .sum()
    }

    /// `W_z^{1/2} K W_x^{-1/2}`: the operator in orthonormal coordinates.
    pub fn weighted_matrix(&self) -> DMatrix<f64> {
        let wx = self.x_grid.weights();
        DMatrix::from_fn(self.kernel.nrows(), self.kernel.ncols(), |j, i| {
            libm::sqrt(self.fz_weights[j]) * self.kernel[(j, i)] / libm::sqrt(wx[i])
        })
    }

    /// Singular triplets as grid functions: `A φ_k = σ_k ψ_k` with
    /// `‖φ_k‖_{L²(X)} = 1` and `‖ψ_k‖_{L²(Z)} = 1`. Left functions vanish at
    /// excluded z-nodes.
    pub fn singular_system(&self) -> Result<SingularSystem> {
        let svd = sorted_svd(self.weighted_matrix())?;
        let sx: Vec<f64> = self.x_grid.weights().iter().map(|w| libm::sqrt(*w)).collect();
        let sz: Vec<f64> = self.fz_weights.iter().map(|w| libm::sqrt(*w)).collect();
        let mut left = Vec::with_capacity(svd.values.len());
        let mut right = Vec::with_capacity(svd.values.len());
        for k in 0..svd.values.len() {
            let l = svd
                .u
                .column(k)
                .iter()
                .zip(&sz)
                .map(|(u, s)| if *s > 0.0 { u / s } else { 0.0 })
                .collect();
            let r = svd.v.column(k).iter().zip(&sx).map(|(v, s)| v / s).collect();
            left.push(GridFunction::new(&self.z_grid, l)?);
            right.push(GridFunction::new(&self.x_grid, r)?);
        }
        Ok(SingularSystem {
            values: svd.values,
            left,
            right,
        })
    }

    pub fn svd_report(&self, rank_tolerance: f64) -> Result<SvdReport> {
        if !(rank_tolerance >= 0.0 && rank_tolerance.is_finite()) {
            return Err(Error::invalid("rank tolerance must be finite and nonnegative"));
        }
        let values = sorted_svd(self.weighted_matrix())?.values;
        Ok(SvdReport::from_values(values, rank_tolerance))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularSystem {
    pub values: Vec<f64>,
    pub left: Vec<GridFunction>,
    pub right: Vec<GridFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdReport {
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub rank_tolerance: f64,
    /// Count of `σ_k > rank_tolerance · σ_1`.
    pub numerical_rank: usize,
    /// Least-squares slope of `ln σ_k` against `k` over the numerical rank;
    /// `None` with fewer than two retained values.
    pub decay_fit: Option<f64>,
}

impl SvdReport {
    fn from_values(singular_values: Vec<f64>, rank_tolerance: f64) -> Self {
        let top = singular_values.first().copied().unwrap_or(0.0);
        let numerical_rank = singular_values
            .iter()
            .take_while(|&&s| s > rank_tolerance * top && s > 0.0)
            .count();
        let decay_fit = (numerical_rank >= 2).then(|| {
            let n = numerical_rank as f64;
            let ks = (1..=numerical_rank).map(|k| k as f64);
            let ls: Vec<f64> = singular_values[..numerical_rank].iter().map(|s| libm::log(*s)).collect();
            let mk = (n + 1.0) / 2.0;
            let ml = ls.iter().sum::<f64>() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (k, l) in ks.zip(&ls) {
                sxy += (k - mk) * (l - ml);
                sxx += (k - mk) * (k - mk);
            }
            sxy / sxx
        });
        SvdReport {
            singular_values,
            rank_tolerance,
            numerical_rank,
            decay_fit,
        }
    }

    /// `σ_k` with 1-based `k`.
    pub fn sigma(&self, k: usize) -> f64 {
        self.singular_values[k - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexamples::{analytic_sup_a_psi_bound, psi, psi_integral, CounterexampleSpec, Family};
    use crate::dgp::{make_dgp, reduced_form, DgpSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn gauss(n: usize) -> Arc<Grid> {
        Grid::gauss_legendre(n).unwrap()
    }

    fn operator(spec: DgpSpec, n: usize) -> (Dgp, DiscreteOperator) {
        let d = make_dgp(spec).unwrap();
        let g = gauss(n);
        let a = discretize(&d, &g, &g).unwrap();
        (d, a)
    }

    fn random_function(grid: &Arc<Grid>, rng: &mut impl Rng) -> GridFunction {
        GridFunction::new(grid, (0..grid.size()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn independent_kernel_averages() {
        let (_, a) = operator(DgpSpec::independent(), 32);
        for j in 0..32 {
            for i in 0..32 {
                assert_eq!(a.kernel()[(j, i)], a.x_grid().weights()[i]);
            }
        }
        let f = GridFunction::from_fn(a.x_grid(), |x| libm::sin(3.0 * x) + x).unwrap();
        let mean = a.x_grid().integrate(|x| libm::sin(3.0 * x) + x);
        assert!(a.apply(&f).unwrap().values().iter().all(|v| (v - mean).abs() < 1e-14));
    }

    #[test]
    fn row_sums_are_one() {
        for rho in [0.5, -0.5] {
            let (_, a) = operator(DgpSpec::with_dependence(rho), 64);
            assert!(a.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-8));
            assert!(a.fz_weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn small_z_grid_is_legal() {
        let d = make_dgp(DgpSpec::with_dependence(0.5)).unwrap();
        let a = discretize(&d, &gauss(16), &gauss(2)).unwrap();
        assert_eq!(a.kernel().shape(), (2, 16));
        let v = a.apply(&GridFunction::constant(a.x_grid(), 1.0)).unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn apply_examples() {
        let (_, a) = operator(DgpSpec::independent(), 64);
        assert!(a.apply(&GridFunction::zeros(a.x_grid())).unwrap().max_abs() == 0.0);
        for n in [0u32, 1, 5, 20, 31] {
            let s = CounterexampleSpec::new(Family::Monotone, n, 0.1).unwrap();
            let image = a.apply(&psi(&s, a.x_grid()).unwrap()).unwrap();
            // ∫₀¹(1-x)^n dx = 1/(n+1)
            let expected = -libm::sqrt(2.0 * n as f64 + 1.0) / (n as f64 + 1.0);
            assert!(image.values().iter().all(|v| (v - expected).abs() < 1e-13));
        }
        assert!(matches!(
            a.apply(&GridFunction::zeros(&gauss(63))),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn images_respect_the_proof_bound() {
        for rho in [0.0, 0.5] {
            let (d, a) = operator(DgpSpec::with_dependence(rho), 128);
            for family in [Family::Monotone, Family::Nonneg] {
                for n in 0..=50 {
                    let s = CounterexampleSpec::new(family, n, 0.1).unwrap();
                    let sup = a.apply(&psi(&s, a.x_grid()).unwrap()).unwrap().max_abs();
                    let bound = analytic_sup_a_psi_bound(&s, d.sup_conditional()).unwrap();
                    assert!(sup <= bound * (1.0 + 1e-8), "rho={rho} {family:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn residual_and_criterion() {
        let (d, a) = operator(DgpSpec::with_dependence(0.5), 64);
        let phi0 = d.phi0_on(a.x_grid()).unwrap();
        let r = reduced_form(&d, &phi0, a.z_grid()).unwrap();
        assert!(a.residual_m(&phi0, &r).unwrap().max_abs() < 1e-15);
        assert!(a.q_infinity(&phi0, &r).unwrap() < 1e-20);

        let s = CounterexampleSpec::new(Family::Monotone, 9, 0.1).unwrap();
        let dir = psi(&s, a.x_grid()).unwrap();
        let phi_n = phi0.add_scaled(&dir, 0.1).unwrap();
        let m = a.residual_m(&phi_n, &r).unwrap();
        let expected = a.apply(&dir).unwrap().scale(0.1);
        assert!(m.sub(&expected).unwrap().max_abs() < 1e-12);

        let shifted = r.map(|v| v + 0.25);
        let m = a.residual_m(&phi0, &shifted).unwrap();
        assert!(m.values().iter().all(|v| (v + 0.25).abs() < 1e-14));

        let q1 = a.q_infinity(&phi_n, &r).unwrap();
        let q2 = a.q_infinity(&phi0.add_scaled(&dir, 0.2).unwrap(), &r).unwrap();
        assert!(q1 > 0.0);
        assert_abs_diff_eq!(q2, 4.0 * q1, epsilon = 1e-12 * q2);
    }

    // oracle: ε²(Aψ_n)² with Aψ_n = ∫ψ_n in closed form
    #[test]
    fn independent_criterion_closed_form() {
        let (d, a) = operator(DgpSpec::independent(), 128);
        let phi0 = d.phi0_on(a.x_grid()).unwrap();
        let r = a.apply(&phi0).unwrap();
        for n in 0..=100u32 {
            let s = CounterexampleSpec::new(Family::Monotone, n, 0.1).unwrap();
            let phi_n = phi0.add_scaled(&psi(&s, a.x_grid()).unwrap(), 0.1).unwrap();
            let nf = n as f64;
            let expected = 0.01 * (2.0 * nf + 1.0) / ((nf + 1.0) * (nf + 1.0));
            assert!((a.q_infinity(&phi_n, &r).unwrap() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn criterion_collapses_along_the_sequence() {
        let (d, a) = operator(DgpSpec::with_dependence(0.5), 128);
        let phi0 = d.phi0_on(a.x_grid()).unwrap();
        let r = a.apply(&phi0).unwrap();
        let q: Vec<f64> = (0..=100)
            .map(|n| {
                let s = CounterexampleSpec::new(Family::Monotone, n, 0.1).unwrap();
                let phi_n = phi0.add_scaled(&psi(&s, a.x_grid()).unwrap(), 0.1).unwrap();
                a.q_infinity(&phi_n, &r).unwrap()
            })
            .collect();
        assert!(q.iter().all(|&v| v > 0.0));
        assert!(q[5..].windows(2).all(|w| w[1] <= w[0]));
        // q_n (n+1)²/(2n+1) stays bounded: the O(1/n) collapse rate
        for (n, v) in q.iter().enumerate() {
            let nf = n as f64;
            assert!(v * (nf + 1.0) * (nf + 1.0) / (2.0 * nf + 1.0) <= 0.01 * 9.0);
        }
        assert!(q[100] < q[1] / 20.0);
    }

    #[test]
    fn weak_convergence_of_images() {
        let (_, a) = operator(DgpSpec::with_dependence(0.5), 128);
        let tests: [fn(f64) -> f64; 3] = [|_| 1.0, |z| z, |z| libm::sin(core::f64::consts::PI * z)];
        for g in tests {
            let gz = GridFunction::from_fn(a.z_grid(), g).unwrap();
            let adj_sup = a.adjoint_apply(&gz).unwrap().max_abs();
            let mut prev = f64::INFINITY;
            for n in 1..=100 {
                let s = CounterexampleSpec::new(Family::Monotone, n, 0.1).unwrap();
                let ip = a
                    .z_inner_product(&gz, &a.apply(&psi(&s, a.x_grid()).unwrap()).unwrap())
                    .unwrap()
                    .abs();
                assert!(ip <= adj_sup * psi_integral(&s).abs() * (1.0 + 1e-10));
                assert!(ip < prev);
                prev = ip;
            }
        }
    }

    #[test]
    fn adjoint_duality() {
        let (_, a) = operator(DgpSpec::with_dependence(0.5), 48);
        assert!(a.adjoint_apply(&GridFunction::zeros(a.z_grid())).unwrap().max_abs() == 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let phi = random_function(a.x_grid(), &mut rng);
            let psi_z = random_function(a.z_grid(), &mut rng);
            let lhs = a.z_inner_product(&a.apply(&phi).unwrap(), &psi_z).unwrap();
            let rhs = crate::function_space::inner_product(&phi, &a.adjoint_apply(&psi_z).unwrap()).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
        assert!(worst < 1e-12, "{worst}");

        let (_, ind) = operator(DgpSpec::independent(), 32);
        let one = GridFunction::constant(ind.z_grid(), 1.0);
        assert!(ind.adjoint_apply(&one).unwrap().values().iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn independent_operator_has_rank_one() {
        let (_, a) = operator(DgpSpec::independent(), 64);
        let rep = a.svd_report(DEFAULT_RANK_TOLERANCE).unwrap();
        assert!((rep.sigma(1) - 1.0).abs() < 1e-10);
        assert!(rep.sigma(2) < 1e-10);
        assert_eq!(rep.numerical_rank, 1);
        assert_eq!(rep.decay_fit, None);
    }

    // Oracle: the Poisson-kernel operator has singular values |ρ|^{k-1}.
    #[test]
    fn singular_values_match_the_cosine_expansion() {
        for rho in [0.5, -0.5, 0.3] {
            let (_, a) = operator(DgpSpec::with_dependence(rho), 64);
            let rep = a.svd_report(DEFAULT_RANK_TOLERANCE).unwrap();
            assert!(rep.singular_values.windows(2).all(|w| w[0] >= w[1]));
            for k in 1..=30 {
                let exact = libm::pow(libm::fabs(rho), (k - 1) as f64);
                assert!((rep.sigma(k) - exact).abs() < 1e-12, "rho={rho} k={k}");
            }
            let slope = rep.decay_fit.unwrap();
            assert!((slope - libm::log(libm::fabs(rho))).abs() < 0.05, "{slope}");
        }
    }

    #[test]
    fn compactness_and_refinement() {
        let (_, a64) = operator(DgpSpec::with_dependence(0.5), 64);
        let (_, a128) = operator(DgpSpec::with_dependence(0.5), 128);
        let r64 = a64.svd_report(DEFAULT_RANK_TOLERANCE).unwrap();
        let r128 = a128.svd_report(DEFAULT_RANK_TOLERANCE).unwrap();
        assert!(r64.sigma(32) / r64.sigma(1) < 1e-8);
        assert!(r64.singular_values.iter().any(|&s| s < 1e-10));
        for k in 1..=10 {
            assert!((r64.sigma(k) - r128.sigma(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_system_is_consistent() {
        let (_, a) = operator(DgpSpec::with_dependence(0.5), 32);
        let sys = a.singular_system().unwrap();
        for k in 0..6 {
            let image = a.apply(&sys.right[k]).unwrap();
            let expected = sys.left[k].scale(sys.values[k]);
            assert!(image.sub(&expected).unwrap().max_abs() < 1e-12);
            assert!((crate::function_space::l2_norm(&sys.right[k]) - 1.0).abs() < 1e-12);
            assert!((a.z_norm(&sys.left[k]).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn apply_is_linear(seed in 0u64..1000, c1 in -3.0..3.0f64, c2 in -3.0..3.0f64) {
            let (_, a) = operator(DgpSpec::with_dependence(0.5), 24);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = random_function(a.x_grid(), &mut rng);
            let g = random_function(a.x_grid(), &mut rng);
            let combo = f.scale(c1).add_scaled(&g, c2).unwrap();
            let lhs = a.apply(&combo).unwrap();
            let rhs = a.apply(&f).unwrap().scale(c1).add_scaled(&a.apply(&g).unwrap(), c2).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);
            let r = a.apply(&g).unwrap();
            prop_assert!(a.q_infinity(&f, &r).unwrap() >= 0.0);
        }
    }
}
