use npivlab::config::{Bandwidths, ExperimentConfig, ExperimentKind, FamilyConfig};
use npivlab::experiments::{self, run_estimator_comparison, run_illposedness_demo, run_montecarlo, run_svd_report};
use npivlab::table::{Cell, ResultTable};
use npivlab_core::counterexamples::{perturb, CounterexampleSpec, Family};
use npivlab_core::dgp::{make_dgp, DgpSpec};
use npivlab_core::function_space::{sobolev_norm, Grid};
use npivlab_core::operator::{discretize, DEFAULT_RANK_TOLERANCE};

fn floats(t: &ResultTable, name: &str) -> Vec<f64> {
    t.column(name).iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect()
}

fn rows_where<'a>(t: &'a ResultTable, pred: impl Fn(&dyn Fn(&str) -> &'a Cell) -> bool) -> Vec<&'a Vec<Cell>> {
    t.rows()
        .iter()
        .filter(|r| pred(&|name: &str| &r[t.column_index(name).unwrap()]))
        .collect()
}

fn demo(rho: f64, family: FamilyConfig) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::IllposednessDemo);
    cfg.dgp.rho = rho;
    cfg.family = family;
    cfg
}

#[test]
fn demo_has_one_row_per_index() {
    let t = run_illposedness_demo(&demo(0.5, FamilyConfig::Monotone)).unwrap();
    assert_eq!(t.len(), 101);
    assert_eq!(floats(&t, "n"), (0..=100).map(f64::from).collect::<Vec<_>>());
    assert!(t.check("l2_dist_equals_epsilon").unwrap().passed);
    assert!(t.check("q_infty_nonincreasing_after_5").unwrap().passed);
}

// Oracle: with f_{X|Z} ≡ 1, Aψ_n is the constant ∫ψ_n = -√(2n+1)/(n+1).
#[test]
fn independent_demo_matches_closed_form() {
    for cfg in [demo(0.0, FamilyConfig::Monotone), {
        let mut c = demo(0.7, FamilyConfig::Monotone);
        c.dgp.independent_case = true;
        c
    }] {
        let t = run_illposedness_demo(&cfg).unwrap();
        for (n, q) in floats(&t, "q_infty").into_iter().enumerate() {
            let n = n as f64;
            assert!((q - 0.01 * (2.0 * n + 1.0) / ((n + 1.0) * (n + 1.0))).abs() < 1e-10);
        }
        for (s, b) in floats(&t, "sup_A_psi").iter().zip(floats(&t, "analytic_bound")) {
            assert!(s * s * 0.01 <= b * (1.0 + 1e-8));
        }
    }
}

#[test]
fn constant_perturbation_row() {
    for family in [FamilyConfig::Monotone, FamilyConfig::Nonneg] {
        let cfg = demo(0.5, family);
        let t = run_illposedness_demo(&cfg).unwrap();
        let g = Grid::gauss_legendre(cfg.grids.quadrature).unwrap();
        let shift = if family == FamilyConfig::Monotone { -0.1 } else { 0.1 };
        let expected = sobolev_norm(&npivlab_core::function_space::GridFunction::from_fn(&g, |x| x * x + shift).unwrap());
        let got = floats(&t, "sobolev_norm_phi_n")[0];
        assert!((got - expected).abs() < 1e-12, "{family:?}: {got} vs {expected}");
    }
}

#[test]
fn nonneg_family_keeps_every_shape() {
    let t = run_illposedness_demo(&demo(0.5, FamilyConfig::Nonneg)).unwrap();
    for name in ["monotone_ok", "nonneg_ok", "convex_ok"] {
        assert!(t.column(name).iter().all(|c| c.as_bool() == Some(true)), "{name}");
    }
}

#[test]
fn sobolev_column_diverges() {
    let cfg = demo(0.5, FamilyConfig::Monotone);
    let t = run_illposedness_demo(&cfg).unwrap();
    let s = floats(&t, "sobolev_norm_phi_n");
    assert!(s[100] > 5.0 * s[1]);
    // against the perturbation computed directly
    let g = Grid::gauss_legendre(128).unwrap();
    let dgp = make_dgp(DgpSpec::default()).unwrap();
    let spec = CounterexampleSpec::new(Family::Monotone, 40, 0.1).unwrap();
    let direct = sobolev_norm(&perturb(&dgp.phi0_on(&g).unwrap(), &spec).unwrap().result);
    assert_eq!(s[40], direct);
}

#[test]
fn svd_examples() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::SvdReport);
    cfg.dgp.independent_case = true;
    let t = run_svd_report(&cfg).unwrap();
    assert_eq!(t.len(), 64 + 128);
    let check = t.check("independent_rank_one").unwrap();
    assert!(check.passed, "{}", check.detail);

    let cfg = ExperimentConfig::defaults(ExperimentKind::SvdReport);
    let t = run_svd_report(&cfg).unwrap();
    assert!(t.all_checks_pass(), "{:?}", t.checks);
    // ρ^{k-1} for the cosine-kernel copula
    let sig = floats(&t, "sigma_k");
    for (k, s) in sig.iter().take(20).enumerate() {
        assert!((s - 0.5f64.powi(k as i32)).abs() < 1e-12);
    }
}

fn comparison() -> ResultTable {
    let cfg = ExperimentConfig::defaults(ExperimentKind::EstimatorComparison);
    run_estimator_comparison(&cfg).unwrap()
}

#[test]
fn comparison_examples() {
    let t = comparison();
    let error_at = |solver: &str, lambda: Option<f64>, n: f64| {
        let rows = rows_where(&t, |c| {
            c("row_kind").as_str() == Some("solve")
                && c("solver").as_str() == Some(solver)
                && c("lambda").as_f64() == lambda
                && c("n").as_f64() == Some(n)
        });
        assert_eq!(rows.len(), 1);
        rows[0][t.column_index("reconstruction_error").unwrap()].as_f64().unwrap()
    };
    assert!(error_at("tir", Some(1e-4), 50.0) < error_at("constrained", Some(0.0), 50.0));

    let benign = [
        error_at("naive", None, 0.0),
        error_at("tir", Some(1e-4), 0.0),
        error_at("constrained", Some(0.0), 0.0),
        error_at("constrained", Some(1e-4), 0.0),
    ];
    let (lo, hi) = benign.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    assert!(hi <= 2.0 * lo, "{benign:?}");

    for n in [20.0, 50.0, 100.0] {
        assert!(error_at("constrained", Some(0.0), n) >= 0.05);
    }
    assert!(t.all_checks_pass(), "{:?}", t.checks);
}

#[test]
fn naive_rows_report_smallest_retained_singular_value() {
    let t = comparison();
    let dgp = make_dgp(DgpSpec::default()).unwrap();
    let g = Grid::gauss_legendre(64).unwrap();
    let rep = discretize(&dgp, &g, &g).unwrap().svd_report(DEFAULT_RANK_TOLERANCE).unwrap();
    let sigma_min = rep.sigma(rep.numerical_rank);
    let naive = rows_where(&t, |c| c("row_kind").as_str() == Some("solve") && c("solver").as_str() == Some("naive"));
    assert_eq!(naive.len(), 6);
    let col = t.column_index("condition_diagnostic").unwrap();
    for r in naive {
        let c = r[col].as_f64().unwrap();
        assert!((c - sigma_min).abs() <= 1e-3 * sigma_min, "{c} vs {sigma_min}");
    }
}

#[test]
fn comparison_lists_every_cell() {
    let t = comparison();
    // 6 perturbations × (naive + tir + 2 constrained), then 3 directions × 2 deltas × 3 solvers
    assert_eq!(t.len(), 6 * 4 + 18);
    let probe_bounds =
        rows_where(&t, |c| c("row_kind").as_str() == Some("probe") && c("solver").as_str() == Some("naive"));
    assert!(probe_bounds.iter().all(|r| r[t.column_index("amplification_bound").unwrap()] == Cell::Empty));
}

fn montecarlo(m: usize, replications: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Montecarlo);
    cfg.sample_sizes = vec![m];
    cfg.replications = replications;
    cfg.seed = seed;
    cfg
}

fn summary(t: &ResultTable, solver: &str) -> f64 {
    let rows = rows_where(t, |c| c("row_kind").as_str() == Some("summary") && c("solver").as_str() == Some(solver));
    rows[0][t.column_index("interior_error").unwrap()].as_f64().unwrap()
}

#[test]
fn montecarlo_single_replication_is_accurate() {
    let t = run_montecarlo(&montecarlo(10_000, 1, 1)).unwrap();
    // 2 replication rows + 2 summary rows
    assert_eq!(t.len(), 4);
    assert!(summary(&t, "tir") < 0.1);
}

#[test]
fn montecarlo_naive_is_worse_than_tir() {
    let t = run_montecarlo(&montecarlo(1_000, 20, 0)).unwrap();
    assert!(summary(&t, "naive") > summary(&t, "tir"));
    assert!(t.all_checks_pass(), "{:?}", t.checks);
    let n_ok = rows_where(&t, |c| c("row_kind").as_str() == Some("summary"));
    assert!(n_ok.iter().all(|r| r[t.column_index("n_ok").unwrap()] == Cell::Int(20)));
}

#[test]
fn montecarlo_is_deterministic() {
    let cfg = montecarlo(2_000, 3, 77);
    let a = experiments::run(&cfg).unwrap().to_csv_string(0).unwrap();
    let b = experiments::run(&cfg).unwrap().to_csv_string(0).unwrap();
    assert_eq!(a, b);
    let c = experiments::run(&montecarlo(2_000, 3, 78)).unwrap().to_csv_string(0).unwrap();
    assert_ne!(a, c);
}

#[test]
fn degenerate_samples_become_failed_rows() {
    let mut cfg = montecarlo(60, 2, 5);
    cfg.bandwidths = Some(Bandwidths { h_x: 1e-4, h_z: 1e-4 });
    let t = run_montecarlo(&cfg).unwrap();
    let status = t.column("status");
    assert!(status[..4].iter().all(|s| s.as_str().unwrap().starts_with("failed: degenerate sample")));
    assert!(!t.check("all_replications_succeeded").unwrap().passed);
    let summaries = rows_where(&t, |c| c("row_kind").as_str() == Some("summary"));
    assert!(summaries.iter().all(|r| r[t.column_index("n_ok").unwrap()] == Cell::Int(0)));
}

#[test]
fn runners_reject_the_wrong_config() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::SvdReport);
    assert_eq!(run_illposedness_demo(&cfg).unwrap_err().exit_code(), 2);
    let mut bad = ExperimentConfig::defaults(ExperimentKind::IllposednessDemo);
    bad.epsilon = 0.6;
    assert_eq!(experiments::run(&bad).unwrap_err().exit_code(), 2);
}
