use npivlab_core::dgp::sample;
use npivlab_core::estimator::{naive_estimate, rule_of_thumb_bandwidths, sampled_plugin, tir_estimate, TirConfig};
use npivlab_core::function_space::GridFunction;
use npivlab_core::Error as CoreError;

use super::{expect_kind, setup};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::parallel::map_cells;
use crate::table::{Cell, Check, ResultTable};

pub const COLUMNS: [&str; 13] = [
    "row_kind",
    "replication",
    "seed",
    "m",
    "lambda",
    "solver",
    "interior_error",
    "sd",
    "n_ok",
    "flagged",
    "h_x",
    "h_z",
    "status",
];

/// Range of x over which reconstruction error is measured; kernel estimates
/// carry boundary bias outside it.
pub const INTERIOR: (f64, f64) = (0.1, 0.9);

/// `L²` distance between `estimate` and `truth` over the x-nodes in
/// [`INTERIOR`].
pub fn interior_error(estimate: &GridFunction, truth: &GridFunction) -> f64 {
    let g = estimate.grid();
    g.nodes()
        .iter()
        .zip(g.weights())
        .zip(estimate.values().iter().zip(truth.values()))
        .filter(|((x, _), _)| (INTERIOR.0..=INTERIOR.1).contains(*x))
        .map(|((_, w), (e, t))| w * (e - t) * (e - t))
        .sum::<f64>()
        .sqrt()
}

struct Outcome {
    lambda: Option<f64>,
    solver: &'static str,
    error: Option<f64>,
    status: String,
}

struct Replication {
    flagged: Option<usize>,
    bandwidths: Option<(f64, f64)>,
    outcomes: Vec<Outcome>,
}

/// Draws `replications` samples at each size, builds the kernel plug-in
/// operator and compares the naive and Tikhonov estimates. Replication `i`
/// uses seed `seed + i`.
pub fn run_montecarlo(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::Montecarlo)?;
    let s = setup(cfg)?;
    let phi0 = s.dgp.phi0_on(&s.x)?;
    let solvers: Vec<(Option<f64>, &'static str)> = std::iter::once((None, "naive"))
        .chain(cfg.lambdas.iter().map(|&l| (Some(l), "tir")))
        .collect();

    let jobs: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&m| (0..cfg.replications).map(move |rep| (m, rep)))
        .collect();
    let results = map_cells(&jobs, |&(m, rep)| -> Result<Replication> {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let data = sample(&s.dgp, m, seed)?;
        let failed = |status: String| Replication {
            flagged: None,
            bandwidths: None,
            outcomes: solvers
                .iter()
                .map(|&(lambda, solver)| Outcome {
                    lambda,
                    solver,
                    error: None,
                    status: status.clone(),
                })
                .collect(),
        };
        let (h_x, h_z) = match cfg.bandwidths {
            Some(b) => (b.h_x, b.h_z),
            None => match rule_of_thumb_bandwidths(&data) {
                Ok(h) => h,
                Err(e) => return Ok(failed(format!("failed: {e}"))),
            },
        };
        let tir = |l: f64| TirConfig::new(l).with_penalty(cfg.penalty()).sampled(h_x, h_z);
        let plugin = match sampled_plugin(&data, &tir(cfg.lambdas[0]), &s.x, &s.z) {
            Ok(p) => p,
            Err(e @ CoreError::DegenerateSample { .. }) => return Ok(failed(format!("failed: {e}"))),
            Err(e) => return Err(e.into()),
        };
        let mut outcomes = Vec::new();
        for &(lambda, solver) in &solvers {
            let est = match lambda {
                None => naive_estimate(&plugin.operator, &plugin.r_hat),
                Some(l) => tir_estimate(&plugin.operator, &plugin.r_hat, &tir(l)),
            };
            outcomes.push(match est {
                Ok(e) => Outcome {
                    lambda,
                    solver,
                    error: Some(interior_error(&e.phi_hat, &phi0)),
                    status: "ok".into(),
                },
                Err(e @ CoreError::Numerical(_)) => Outcome {
                    lambda,
                    solver,
                    error: None,
                    status: format!("failed: {e}"),
                },
                Err(e) => return Err(e.into()),
            });
        }
        Ok(Replication {
            flagged: Some(plugin.flagged.len()),
            bandwidths: Some((h_x, h_z)),
            outcomes,
        })
    })?;

    let mut table = ResultTable::new(&COLUMNS);
    let mut summaries = Vec::new();
    for &m in &cfg.sample_sizes {
        for (k, &(lambda, solver)) in solvers.iter().enumerate() {
            summaries.push((m, lambda, solver, k, Vec::new()));
        }
    }
    for (&(m, rep), result) in jobs.iter().zip(results) {
        let result = result?;
        for (k, o) in result.outcomes.iter().enumerate() {
            table.push(vec![
                "replication".into(),
                rep.into(),
                cfg.seed.wrapping_add(rep as u64).into(),
                m.into(),
                o.lambda.into(),
                o.solver.into(),
                o.error.into(),
                Cell::Empty,
                Cell::Empty,
                result.flagged.map_or(Cell::Empty, Cell::from),
                result.bandwidths.map(|b| b.0).into(),
                result.bandwidths.map(|b| b.1).into(),
                o.status.clone().into(),
            ]);
            if let Some(e) = o.error {
                let slot = summaries
                    .iter_mut()
                    .find(|s| s.0 == m && s.3 == k)
                    .expect("every cell has a summary slot");
                slot.4.push(e);
            }
        }
    }
    for (m, lambda, solver, _, errors) in &summaries {
        let n = errors.len();
        let mean = (n > 0).then(|| errors.iter().sum::<f64>() / n as f64);
        let sd = mean.filter(|_| n > 1).map(|mu| {
            (errors.iter().map(|e| (e - mu) * (e - mu)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        table.push(vec![
            "summary".into(),
            Cell::Empty,
            Cell::Empty,
            (*m).into(),
            (*lambda).into(),
            (*solver).into(),
            mean.into(),
            sd.into(),
            n.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            if n == 0 { "no successful replications" } else { "ok" }.into(),
        ]);
    }

    let mut checks = Vec::new();
    for &m in &cfg.sample_sizes {
        let mean = |solver: &str, lambda: Option<f64>| {
            summaries
                .iter()
                .find(|s| s.0 == m && s.2 == solver && s.1 == lambda)
                .filter(|s| !s.4.is_empty())
                .map(|s| s.4.iter().sum::<f64>() / s.4.len() as f64)
        };
        if let Some(naive) = mean("naive", None) {
            for &l in &cfg.lambdas {
                if let Some(t) = mean("tir", Some(l)) {
                    checks.push(Check::new(
                        format!("naive_mean_exceeds_tir_lambda_{l:e}_at_m_{m}"),
                        naive > t,
                        format!("naive {naive:.6e} vs tir {t:.6e}"),
                    ));
                }
            }
        }
    }
    let failed = table
        .column("status")
        .iter()
        .zip(table.column("row_kind"))
        .filter(|(s, k)| k.as_str() == Some("replication") && s.as_str() != Some("ok"))
        .count();
    checks.push(Check::new(
        "all_replications_succeeded",
        failed == 0,
        format!("{failed} failed replication rows"),
    ));
    table.checks = checks;
    Ok(table)
}
