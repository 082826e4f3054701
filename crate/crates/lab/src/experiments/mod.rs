//! The four experiments. Each runner returns a [`ResultTable`] whose checks
//! record the postconditions the experiment is meant to exhibit; a failed
//! check is data, not an error.

mod compare;
mod demo;
mod montecarlo;
mod svd;

use std::sync::Arc;

use npivlab_core::dgp::{make_dgp, Dgp};
use npivlab_core::function_space::Grid;

pub use self::compare::run_estimator_comparison;
pub use self::demo::run_illposedness_demo;
pub use self::montecarlo::{interior_error, run_montecarlo, INTERIOR};
pub use self::svd::run_svd_report;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{LabError, Result};
use crate::table::ResultTable;

/// Validates `cfg` and runs the experiment it names.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut table = match cfg.experiment {
        ExperimentKind::IllposednessDemo => run_illposedness_demo(cfg)?,
        ExperimentKind::SvdReport => run_svd_report(cfg)?,
        ExperimentKind::EstimatorComparison => run_estimator_comparison(cfg)?,
        ExperimentKind::Montecarlo => run_montecarlo(cfg)?,
    };
    table.metadata = vec![
        ("experiment".into(), cfg.experiment.name().into()),
        ("seed".into(), cfg.seed.to_string()),
        ("config".into(), cfg.to_json()),
    ];
    Ok(table)
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(LabError::config(format!(
            "expected a {} config, got {}",
            kind.name(),
            cfg.experiment.name()
        )));
    }
    cfg.validate()
}

struct Setup {
    dgp: Dgp,
    x: Arc<Grid>,
    z: Arc<Grid>,
    inspection: Arc<Grid>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    Ok(Setup {
        dgp: make_dgp(cfg.dgp_spec())?,
        x: Grid::gauss_legendre(cfg.grids.quadrature)?,
        z: Grid::gauss_legendre(cfg.grids.z_size())?,
        inspection: Grid::uniform(cfg.grids.inspection_size())?,
    })
}
