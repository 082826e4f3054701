//! Experiment runner for `npivlab-core`: JSON configs, the four experiments
//! (ill-posedness demo, SVD report, estimator comparison, Monte Carlo), and
//! CSV output.
//!
//! ```no_run
//! use npivlab::config::{ExperimentConfig, ExperimentKind};
//!
//! let cfg = ExperimentConfig::defaults(ExperimentKind::SvdReport);
//! let table = npivlab::experiments::run(&cfg)?;
//! npivlab::table::emit_csv(&table, "svd.csv".as_ref())?;
//! # Ok::<(), npivlab::LabError>(())
//! ```

pub mod config;
mod error;
pub mod experiments;
pub mod parallel;
pub mod table;

pub use crate::error::{LabError, Result};
