use npivlab_core::counterexamples::{psi, CounterexampleSpec};
use npivlab_core::estimator::{
    constrained_estimate, naive_estimate, stability_probe, tir_estimate, ConstraintSet, ProbeDirection, Solver,
    TirConfig,
};
use npivlab_core::function_space::{check_shape_on, l2_norm, GridFunction};
use npivlab_core::operator::{discretize, DiscreteOperator};
use npivlab_core::Error as CoreError;

use super::{expect_kind, setup};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::parallel::map_cells;
use crate::table::{Cell, Check, ResultTable};

pub const COLUMNS: [&str; 13] = [
    "row_kind",
    "direction",
    "n",
    "delta",
    "lambda",
    "solver",
    "reconstruction_error",
    "amplification",
    "amplification_bound",
    "kkt_residual",
    "constraints_ok",
    "condition_diagnostic",
    "status",
];

#[derive(Debug, Clone, Copy)]
struct Job {
    solver: Solver,
    lambda: Option<f64>,
}

/// A finished solve, or the best iterate of one that hit the iteration cap.
struct Solved {
    phi: GridFunction,
    kkt: f64,
    condition: Option<f64>,
    converged: bool,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    a: DiscreteOperator,
    constraints: ConstraintSet,
}

impl Ctx<'_> {
    fn tir_config(&self, lambda: f64) -> TirConfig {
        TirConfig::new(lambda).with_penalty(self.cfg.penalty())
    }

    fn solve(&self, cell: Job, r: &GridFunction) -> Result<Solved> {
        let lambda = cell.lambda.unwrap_or(0.0);
        let out = match cell.solver {
            Solver::Naive => naive_estimate(&self.a, r),
            Solver::Tir => tir_estimate(&self.a, r, &self.tir_config(lambda)),
            Solver::Constrained => constrained_estimate(&self.a, r, &self.tir_config(lambda), &self.constraints),
        };
        match out {
            Ok(res) => Ok(Solved {
                phi: res.phi_hat,
                kkt: res.kkt_residual,
                condition: Some(res.condition_diagnostic),
                converged: true,
            }),
            Err(CoreError::NonConvergence { kkt_residual, best, .. }) => Ok(Solved {
                phi: GridFunction::new(self.a.x_grid(), best)?,
                kkt: kkt_residual,
                condition: None,
                converged: false,
            }),
            Err(e) => Err(e.into()),
        }
    }

    fn shapes_ok(&self, phi: &GridFunction) -> Result<bool> {
        for c in self.constraints.constraints() {
            if !check_shape_on(phi, c, self.constraints.inspection())?.is_satisfied() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Naive, Tikhonov and shape-constrained estimates from the reduced form
/// shifted by `ε Aψ_n`, plus a stability probe of each solver.
pub fn run_estimator_comparison(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::EstimatorComparison)?;
    let s = setup(cfg)?;
    let a = discretize(&s.dgp, &s.x, &s.z)?;
    let phi0 = s.dgp.phi0_on(&s.x)?;
    let r = a.apply(&phi0)?;
    let ctx = Ctx {
        cfg,
        constraints: ConstraintSet::new(cfg.shape_constraints(), &s.inspection)?,
        a,
    };

    let mut cells = vec![Job { solver: Solver::Naive, lambda: None }];
    for &l in &cfg.lambdas {
        if l > 0.0 {
            cells.push(Job { solver: Solver::Tir, lambda: Some(l) });
        }
        cells.push(Job { solver: Solver::Constrained, lambda: Some(l) });
    }
    let baselines = map_cells(&cells, |&c| ctx.solve(c, &r))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let family = cfg.family();
    let jobs: Vec<(u32, usize)> = cfg
        .comparison_n
        .iter()
        .flat_map(|&n| (0..cells.len()).map(move |i| (n, i)))
        .collect();
    let rows = map_cells(&jobs, |&(n, i)| -> Result<Vec<Cell>> {
        let cell = cells[i];
        let spec = CounterexampleSpec::new(family, n, cfg.epsilon)?;
        let shift = ctx.a.apply(&psi(&spec, &s.x)?)?.scale(cfg.epsilon);
        let solved = ctx.solve(cell, &r.add(&shift)?)?;
        let moved = l2_norm(&solved.phi.sub(&baselines[i].phi)?);
        let bound = cell.lambda.filter(|&l| l > 0.0 && cell.solver != Solver::Naive).map(|l| 0.5 / l.sqrt());
        Ok(vec![
            "solve".into(),
            format!("psi_{}", family.name()).into(),
            n.into(),
            cfg.epsilon.into(),
            cell.lambda.into(),
            cell.solver.name().into(),
            l2_norm(&solved.phi.sub(&phi0)?).into(),
            (moved / ctx.a.z_norm(&shift)?).into(),
            bound.into(),
            solved.kkt.into(),
            ctx.shapes_ok(&solved.phi)?.into(),
            solved.condition.into(),
            if solved.converged { "ok" } else { "nonconverged" }.into(),
        ])
    })?;

    let probe_n = cfg.comparison_n.iter().copied().max().unwrap_or(cfg.n_max);
    let directions = [
        ProbeDirection::WorstSingular,
        ProbeDirection::CounterexampleImage(CounterexampleSpec::new(family, probe_n, 1.0)?),
        ProbeDirection::WhiteNoise { seed: cfg.seed },
    ];
    let positive: Vec<f64> = cfg.lambdas.iter().copied().filter(|&l| l > 0.0).collect();
    let probes = map_cells(&positive, |&l| {
        stability_probe(&ctx.a, &r, &cfg.probe_deltas, &ctx.tir_config(l), &ctx.constraints, &directions)
    })?;

    let mut table = ResultTable::new(&COLUMNS);
    for row in rows {
        table.push(row?);
    }
    for (&l, probe) in positive.iter().zip(probes) {
        for p in probe? {
            table.push(vec![
                "probe".into(),
                p.direction.into(),
                Cell::Empty,
                p.delta.into(),
                l.into(),
                p.solver.name().into(),
                Cell::Empty,
                p.amplification.into(),
                p.bound.into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                "ok".into(),
            ]);
        }
    }
    table.checks = checks(&table, cfg);
    Ok(table)
}

struct Row<'a> {
    kind: &'a str,
    n: Option<f64>,
    lambda: Option<f64>,
    solver: &'a str,
    error: Option<f64>,
    amplification: Option<f64>,
    bound: Option<f64>,
    kkt: Option<f64>,
    shapes: Option<bool>,
    status: &'a str,
}

fn parse_rows(table: &ResultTable) -> Vec<Row<'_>> {
    let idx = |name: &str| table.column_index(name).expect("known column");
    let (kind, n, lambda, solver) = (idx("row_kind"), idx("n"), idx("lambda"), idx("solver"));
    let (error, amp, bound) = (idx("reconstruction_error"), idx("amplification"), idx("amplification_bound"));
    let (kkt, shapes, status) = (idx("kkt_residual"), idx("constraints_ok"), idx("status"));
    table
        .rows()
        .iter()
        .map(|r| Row {
            kind: r[kind].as_str().unwrap_or(""),
            n: r[n].as_f64(),
            lambda: r[lambda].as_f64(),
            solver: r[solver].as_str().unwrap_or(""),
            error: r[error].as_f64(),
            amplification: r[amp].as_f64(),
            bound: r[bound].as_f64(),
            kkt: r[kkt].as_f64(),
            shapes: r[shapes].as_bool(),
            status: r[status].as_str().unwrap_or(""),
        })
        .collect()
}

fn checks(table: &ResultTable, cfg: &ExperimentConfig) -> Vec<Check> {
    let rows = parse_rows(table);
    let solves: Vec<&Row> = rows.iter().filter(|r| r.kind == "solve").collect();
    let mut out = Vec::new();

    let unstable: Vec<&&Row> = solves
        .iter()
        .filter(|r| r.solver == "constrained" && r.lambda == Some(0.0) && r.n.is_some_and(|n| n >= 20.0))
        .collect();
    if !unstable.is_empty() {
        let least = unstable.iter().filter_map(|r| r.error).fold(f64::INFINITY, f64::min);
        out.push(Check::new(
            "constrained_lambda0_error_at_least_half_epsilon",
            least >= 0.5 * cfg.epsilon,
            format!("smallest error for n >= 20: {least:.6e} (threshold {:.3e})", 0.5 * cfg.epsilon),
        ));
    }

    let at = |solver: &str, lambda: f64, n: f64| {
        solves
            .iter()
            .find(|r| r.solver == solver && r.lambda == Some(lambda) && r.n == Some(n))
            .and_then(|r| r.error)
    };
    if let Some(reference) = at("constrained", 0.0, 50.0) {
        for &l in cfg.lambdas.iter().filter(|&&l| l > 0.0) {
            if let Some(e) = at("tir", l, 50.0) {
                out.push(Check::new(
                    format!("tir_lambda_{l:e}_beats_constrained_lambda0_at_n50"),
                    e < reference,
                    format!("tir {e:.6e} vs constrained {reference:.6e}"),
                ));
            }
        }
    }

    let benign: Vec<f64> = solves.iter().filter(|r| r.n == Some(0.0)).filter_map(|r| r.error).collect();
    if benign.len() > 1 {
        let (lo, hi) = benign.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
        out.push(Check::new(
            "n0_errors_within_factor_2",
            hi <= 2.0 * lo,
            format!("errors span [{lo:.6e}, {hi:.6e}]"),
        ));
    }

    let bounded: Vec<&Row> = rows.iter().filter(|r| r.kind == "probe" && r.bound.is_some()).collect();
    let over = bounded
        .iter()
        .filter(|r| r.amplification.unwrap_or(f64::INFINITY) > r.bound.unwrap() * (1.0 + 1e-9))
        .count();
    out.push(Check::new(
        "probe_amplification_within_bound",
        over == 0,
        format!("{over} of {} bounded probe rows exceed 1/(2 sqrt(lambda))", bounded.len()),
    ));

    let constrained: Vec<&&Row> = solves.iter().filter(|r| r.solver == "constrained").collect();
    let worst_kkt = constrained.iter().map(|r| r.kkt.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    out.push(Check::new(
        "constrained_kkt_at_most_1e-6",
        worst_kkt <= 1e-6,
        format!("largest kkt_residual {worst_kkt:.3e} over {} solves", constrained.len()),
    ));
    let broken = constrained.iter().filter(|r| r.shapes != Some(true)).count();
    out.push(Check::new(
        "constrained_shapes_hold",
        broken == 0,
        format!("{broken} constrained solves violate a constraint"),
    ));
    let stuck = solves.iter().filter(|r| r.status != "ok").count();
    out.push(Check::new("all_solves_converged", stuck == 0, format!("{stuck} solves hit the iteration cap")));
    out
}
