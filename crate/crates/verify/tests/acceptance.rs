//! Acceptance criteria, one PASS/FAIL line each. Runtime limits are part of
//! each criterion. Exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use npivlab::config::{ExperimentConfig, ExperimentKind, FamilyConfig};
use npivlab::experiments::{self, run_estimator_comparison, run_illposedness_demo, run_svd_report};
use npivlab::table::{without_timestamp, ResultTable};
use npivlab_core::counterexamples::{analytic_sobolev_norm, psi, CounterexampleSpec, Family};
use npivlab_core::dgp::{make_dgp, DgpSpec};
use npivlab_core::function_space::{l2_norm, sobolev_norm, Grid};
use npivlab_core::operator::discretize;

type Outcome = Result<(bool, String), String>;

fn floats(t: &ResultTable, name: &str) -> Vec<f64> {
    t.column(name).iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect()
}

fn check<'a>(t: &'a ResultTable, name: &str) -> Result<&'a npivlab::table::Check, String> {
    t.check(name).ok_or_else(|| format!("missing check {name}"))
}

fn unit_norm() -> Outcome {
    let g = Grid::gauss_legendre(128).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for family in [Family::Monotone, Family::Nonneg] {
        for n in 0..=100 {
            let s = CounterexampleSpec::new(family, n, 1.0).map_err(|e| e.to_string())?;
            let norm = l2_norm(&psi(&s, &g).map_err(|e| e.to_string())?);
            worst = worst.max((norm - 1.0).abs());
        }
    }
    Ok((worst < 1e-9, format!("max |‖ψ_n‖ − 1| = {worst:.2e}")))
}

fn proof_bound() -> Outcome {
    let g = Grid::gauss_legendre(128).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for rho in [0.0, 0.5, 0.9] {
        let dgp = make_dgp(DgpSpec::with_dependence(rho)).map_err(|e| e.to_string())?;
        let a = discretize(&dgp, &g, &g).map_err(|e| e.to_string())?;
        for n in 0..=100u32 {
            let s = CounterexampleSpec::new(Family::Monotone, n, 1.0).map_err(|e| e.to_string())?;
            let sup = a.apply(&psi(&s, &g).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.max_abs();
            let nf = n as f64;
            let bound = dgp.sup_fxz() * (2.0 * nf + 1.0).sqrt() / (nf + 1.0);
            worst = worst.max(sup / bound);
        }
    }
    Ok((worst <= 1.0 + 1e-8, format!("max sup|Aψ_n| / bound = {worst:.6}")))
}

fn demo_config(rho: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::IllposednessDemo);
    cfg.dgp.rho = rho;
    cfg.epsilon = 0.1;
    cfg.ball_radius = 0.5;
    cfg
}

fn illposedness_exhibit() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for family in [FamilyConfig::Monotone, FamilyConfig::Nonneg] {
        let mut cfg = demo_config(0.5);
        cfg.family = family;
        let t = run_illposedness_demo(&cfg).map_err(|e| e.to_string())?;
        let names: &[&str] = match family {
            FamilyConfig::Monotone => &["monotone_ok_all_rows"],
            FamilyConfig::Nonneg => &["monotone_ok_all_rows", "nonneg_ok_all_rows", "convex_ok_all_rows"],
        };
        for name in ["l2_dist_equals_epsilon", "q_infty_final_below_q1_over_50"].iter().chain(names) {
            let c = check(&t, name)?;
            ok &= c.passed;
            if *name != "l2_dist_equals_epsilon" || !c.passed {
                details.push(format!("{family:?} {name}: {} ({})", if c.passed { "ok" } else { "FAILED" }, c.detail));
            }
        }
    }
    Ok((ok, details.join("; ")))
}

fn independent_closed_form() -> Outcome {
    let t = run_illposedness_demo(&demo_config(0.0)).map_err(|e| e.to_string())?;
    let q = floats(&t, "q_infty");
    let worst = q
        .iter()
        .enumerate()
        .map(|(n, v)| {
            let n = n as f64;
            (v - 0.01 * (2.0 * n + 1.0) / ((n + 1.0) * (n + 1.0))).abs()
        })
        .fold(0.0, f64::max);
    Ok((q.len() == 101 && worst <= 1e-10, format!("max deviation {worst:.2e} over {} rows", q.len())))
}

fn compactness() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::SvdReport);
    let t = run_svd_report(&cfg).map_err(|e| e.to_string())?;
    let ratio = check(&t, "sigma_32_over_sigma_1_below_1e-8")?;
    let stable = check(&t, "leading_10_stable_under_refinement")?;
    Ok((ratio.passed && stable.passed, format!("{}; {}", ratio.detail, stable.detail)))
}

fn comparison() -> Result<ResultTable, String> {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::EstimatorComparison);
    cfg.lambdas = vec![0.0, 1e-4];
    run_estimator_comparison(&cfg).map_err(|e| e.to_string())
}

fn regularization_contrast(t: &ResultTable) -> Outcome {
    let unstable = check(t, "constrained_lambda0_error_at_least_half_epsilon")?;
    let idx = |n: &str| t.column_index(n).unwrap();
    let (kind, lambda, solver, amp, bound) =
        (idx("row_kind"), idx("lambda"), idx("solver"), idx("amplification"), idx("amplification_bound"));
    let probes: Vec<_> = t
        .rows()
        .iter()
        .filter(|r| r[kind].as_str() == Some("probe") && r[solver].as_str() == Some("tir") && r[lambda].as_f64() == Some(1e-4))
        .collect();
    let worst = probes
        .iter()
        .map(|r| r[amp].as_f64().unwrap() / r[bound].as_f64().unwrap())
        .fold(0.0, f64::max);
    let ok = unstable.passed && !probes.is_empty() && worst <= 1.0;
    Ok((ok, format!("{}; TiR λ=1e-4: max amplification/bound = {worst:.4} over {} probes", unstable.detail, probes.len())))
}

fn sobolev_divergence() -> Outcome {
    let g = Grid::gauss_legendre(128).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut increasing = true;
    for family in [Family::Monotone, Family::Nonneg] {
        let mut prev = 0.0;
        for n in 0..=50 {
            let s = CounterexampleSpec::new(family, n, 1.0).map_err(|e| e.to_string())?;
            let measured = sobolev_norm(&psi(&s, &g).map_err(|e| e.to_string())?);
            worst = worst.max((measured - analytic_sobolev_norm(&s)).abs());
            increasing &= measured > prev;
            prev = measured;
        }
    }
    Ok((worst <= 1e-8 && increasing, format!("max deviation {worst:.2e}, strictly increasing: {increasing}")))
}

fn kkt_certificates(t: &ResultTable) -> Outcome {
    let kkt = check(t, "constrained_kkt_at_most_1e-6")?;
    let shapes = check(t, "constrained_shapes_hold")?;
    Ok((kkt.passed && shapes.passed, format!("{}; {}", kkt.detail, shapes.detail)))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("mc.csv");
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Montecarlo);
    cfg.sample_sizes = vec![10_000];
    cfg.replications = 20;
    cfg.seed = 20_240_601;
    cfg.output = Some(path.clone());
    let mut runs = Vec::new();
    for _ in 0..2 {
        let t = experiments::run(&cfg).map_err(|e| e.to_string())?;
        npivlab::table::emit_csv(&t, &path).map_err(|e| e.to_string())?;
        runs.push(std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
    }
    let same = without_timestamp(&runs[0]) == without_timestamp(&runs[1]);
    Ok((same, format!("{} bytes per run, identical: {same}", runs[0].len())))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
}

fn report(c: &Criterion, elapsed: Duration, outcome: Outcome) -> bool {
    let in_time = elapsed <= c.limit;
    let (passed, detail) = match outcome {
        Ok((ok, detail)) => (ok && in_time, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} criterion {} ({}): {} [{:.2}s, limit {}s{}]",
        if passed { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        detail,
        elapsed.as_secs_f64(),
        c.limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    passed
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn criterion(id: u32, name: &'static str, secs: u64) -> Criterion {
    Criterion {
        id,
        name,
        limit: Duration::from_secs(secs),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let (o, t) = timed(unit_norm);
    all &= report(&criterion(1, "unit norm", 1), t, o);
    let (o, t) = timed(proof_bound);
    all &= report(&criterion(2, "proof bound", 5), t, o);
    let (o, t) = timed(illposedness_exhibit);
    all &= report(&criterion(3, "ill-posedness exhibit", 10), t, o);
    let (o, t) = timed(independent_closed_form);
    all &= report(&criterion(4, "independent-case closed form", 5), t, o);
    let (o, t) = timed(compactness);
    all &= report(&criterion(5, "compactness diagnostic", 10), t, o);

    // criteria 6 and 8 share the comparison run and its time budget
    let (table, t) = timed(comparison);
    let (o6, o8) = match &table {
        Ok(tab) => (regularization_contrast(tab), kkt_certificates(tab)),
        Err(e) => (Err(e.clone()), Err(e.clone())),
    };
    all &= report(&criterion(6, "regularization contrast", 60), t, o6);
    let (o, t7) = timed(sobolev_divergence);
    all &= report(&criterion(7, "Sobolev divergence", 5), t7, o);
    all &= report(&criterion(8, "KKT certificates", 60), t, o8);
    let (o, t) = timed(reproducibility);
    all &= report(&criterion(9, "reproducibility", 120), t, o);

    if all {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("some acceptance criteria failed");
        ExitCode::FAILURE
    }
}
