use npivlab_core::dgp::make_dgp;
use npivlab_core::function_space::Grid;
use npivlab_core::operator::{discretize, SvdReport, DEFAULT_RANK_TOLERANCE};

use super::expect_kind;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::parallel::map_cells;
use crate::table::{Check, ResultTable};

pub const COLUMNS: [&str; 3] = ["grid_size", "k", "sigma_k"];

/// Dependence used for the comparative decay record.
const STRONG_DEPENDENCE: f64 = 0.9;

fn report(cfg: &ExperimentConfig, rho: f64, size: usize) -> Result<SvdReport> {
    let mut spec = cfg.dgp_spec();
    spec.dependence = rho;
    let dgp = make_dgp(spec)?;
    let grid = Grid::gauss_legendre(size)?;
    Ok(discretize(&dgp, &grid, &grid)?.svd_report(DEFAULT_RANK_TOLERANCE)?)
}

/// Singular values of the discretized operator on square Gauss grids of
/// each configured size.
pub fn run_svd_report(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::SvdReport)?;
    let reports = map_cells(&cfg.svd_sizes, |&size| report(cfg, cfg.dgp.rho, size))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut table = ResultTable::new(&COLUMNS);
    for (&size, rep) in cfg.svd_sizes.iter().zip(&reports) {
        for (k, &s) in rep.singular_values.iter().enumerate() {
            table.push(vec![size.into(), (k + 1).into(), s.into()]);
        }
    }

    let mut checks = Vec::new();
    if let [a, b, ..] = reports.as_slice() {
        let lead = 10.min(a.singular_values.len()).min(b.singular_values.len());
        let drift = (0..lead)
            .map(|i| (a.singular_values[i] - b.singular_values[i]).abs())
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "leading_10_stable_under_refinement",
            drift <= 1e-8,
            format!("max drift over {lead} values between sizes {} and {} = {drift:.3e}", cfg.svd_sizes[0], cfg.svd_sizes[1]),
        ));
    }
    let first = &reports[0];
    if cfg.dgp.independent_case {
        let (s1, s2) = (first.sigma(1), first.singular_values.get(1).copied().unwrap_or(0.0));
        checks.push(Check::new(
            "independent_rank_one",
            (s1 - 1.0).abs() <= 1e-10 && s2 < 1e-10,
            format!("sigma_1 = {s1:.17e}, sigma_2 = {s2:.3e}"),
        ));
    } else {
        if first.singular_values.len() >= 32 {
            let ratio = first.sigma(32) / first.sigma(1);
            checks.push(Check::new(
                "sigma_32_over_sigma_1_below_1e-8",
                ratio < 1e-8,
                format!("ratio = {ratio:.3e} at size {}", cfg.svd_sizes[0]),
            ));
        }
        let lead = &first.singular_values[..10.min(first.singular_values.len())];
        let decreasing = lead.windows(2).all(|w| w[1] < w[0]);
        checks.push(Check::new(
            "leading_10_strictly_decreasing",
            decreasing,
            format!("{} values inspected", lead.len()),
        ));
        if first.singular_values.len() >= 10 && cfg.dgp.rho.abs() < STRONG_DEPENDENCE {
            // recorded rather than assumed: stronger dependence should smooth less
            let strong = report(cfg, STRONG_DEPENDENCE, cfg.svd_sizes[0])?;
            let (here, there) = (first.sigma(10) / first.sigma(1), strong.sigma(10) / strong.sigma(1));
            checks.push(Check::new(
                "stronger_dependence_decays_slower",
                there > here,
                format!("sigma_10/sigma_1: rho = {} gives {here:.3e}, rho = {STRONG_DEPENDENCE} gives {there:.3e}", cfg.dgp.rho),
            ));
        }
    }
    table.checks = checks;
    Ok(table)
}
