use npivlab_core::counterexamples::{
    analytic_sup_a_psi_bound, perturb, psi, CounterexampleSpec, Family,
};
use npivlab_core::function_space::{check_shape_on, l2_norm, sobolev_norm, ShapeConstraint};
use npivlab_core::operator::discretize;

use super::{expect_kind, setup};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::parallel::map_cells;
use crate::table::{Check, Cell, ResultTable};

pub const COLUMNS: [&str; 9] = [
    "n",
    "l2_dist",
    "q_infty",
    "analytic_bound",
    "sup_A_psi",
    "sobolev_norm_phi_n",
    "monotone_ok",
    "nonneg_ok",
    "convex_ok",
];

/// Walks `φ_n = φ_0 + ε ψ_n` for `n = 0..=n_max`: the distance to `φ_0`
/// stays at `ε`, the criterion collapses, and the shape flags stay true.
pub fn run_illposedness_demo(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::IllposednessDemo)?;
    let s = setup(cfg)?;
    let a = discretize(&s.dgp, &s.x, &s.z)?;
    let phi0 = s.dgp.phi0_on(&s.x)?;
    let r = a.apply(&phi0)?;
    let c = s.dgp.sup_conditional();
    let family = cfg.family();
    let shapes = [ShapeConstraint::monotone(), ShapeConstraint::nonnegative(), ShapeConstraint::convex()];

    let ns: Vec<u32> = (0..=cfg.n_max).collect();
    let rows = map_cells(&ns, |&n| -> Result<Vec<Cell>> {
        let spec = CounterexampleSpec::new(family, n, cfg.epsilon)?;
        let p = perturb(&phi0, &spec)?;
        let bound = analytic_sup_a_psi_bound(&spec, c)?;
        let a_psi = a.apply(&psi(&spec, &s.x)?)?;
        let mut row = vec![
            n.into(),
            l2_norm(&p.displacement()).into(),
            a.q_infinity(&p.result, &r)?.into(),
            (cfg.epsilon * cfg.epsilon * s.dgp.sup_fz() * bound * bound).into(),
            a_psi.max_abs().into(),
            sobolev_norm(&p.result).into(),
        ];
        for shape in &shapes {
            row.push(check_shape_on(&p.result, shape, &s.inspection)?.is_satisfied().into());
        }
        Ok(row)
    })?;

    let mut table = ResultTable::new(&COLUMNS);
    for row in rows {
        table.push(row?);
    }
    table.checks = checks(&table, cfg, s.dgp.sup_fz());
    Ok(table)
}

fn floats(table: &ResultTable, name: &str) -> Vec<f64> {
    table.column(name).iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect()
}

fn checks(table: &ResultTable, cfg: &ExperimentConfig, sup_fz: f64) -> Vec<Check> {
    let mut out = Vec::new();
    let dist = floats(table, "l2_dist");
    let worst = dist.iter().map(|d| (d - cfg.epsilon).abs()).fold(0.0, f64::max);
    out.push(Check::new(
        "l2_dist_equals_epsilon",
        worst <= 1e-9,
        format!("max |l2_dist - epsilon| = {worst:.3e}"),
    ));

    let q = floats(table, "q_infty");
    let tail = q.get(5..).unwrap_or(&[]);
    let rises = tail.windows(2).filter(|w| w[1] > w[0]).count();
    out.push(Check::new(
        "q_infty_nonincreasing_after_5",
        rises == 0,
        format!("{rises} increases after n = 5"),
    ));
    if q.len() > 1 {
        let (q1, last) = (q[1], q[q.len() - 1]);
        out.push(Check::new(
            "q_infty_final_below_q1_over_50",
            last < q1 / 50.0,
            format!("q_infty(n_max)/q_infty(1) = {:.6}", last / q1),
        ));
    }

    let bound = floats(table, "analytic_bound");
    let sup = floats(table, "sup_A_psi");
    let c = cfg.epsilon * cfg.epsilon * sup_fz;
    // analytic_bound = ε² sup_fz B², compare on the sup scale
    let violations = sup
        .iter()
        .zip(&bound)
        .filter(|(s, b)| **s > (**b / c).sqrt() * (1.0 + 1e-8))
        .count();
    out.push(Check::new(
        "sup_A_psi_within_bound",
        violations == 0,
        format!("{violations} rows above the bound"),
    ));

    let required: &[&str] = match cfg.family() {
        Family::Monotone => &["monotone_ok"],
        Family::Nonneg => &["monotone_ok", "nonneg_ok", "convex_ok"],
    };
    for name in required {
        let bad = table.column(name).iter().filter(|c| c.as_bool() != Some(true)).count();
        out.push(Check::new(format!("{name}_all_rows"), bad == 0, format!("{bad} rows false")));
    }
    out
}
