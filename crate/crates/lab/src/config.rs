//! Experiment configuration: one JSON object per experiment. Missing fields
//! take experiment-specific defaults, so `{"experiment": "svd_report"}` is a
//! complete config. The resolved config is echoed into every output table.

use std::path::{Path, PathBuf};

use npivlab_core::counterexamples::{Family, MAX_INDEX};
use npivlab_core::dgp::{Copula, DgpSpec, Phi0};
use npivlab_core::estimator::Penalty;
use npivlab_core::function_space::ShapeConstraint;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LabError, Result};

/// Largest x-grid the constrained solver is asked to handle.
pub const MAX_QUADRATURE: usize = 512;
pub const MIN_SAMPLE_SIZE: usize = npivlab_core::estimator::MIN_SAMPLE_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    IllposednessDemo,
    SvdReport,
    EstimatorComparison,
    Montecarlo,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::IllposednessDemo => "illposedness_demo",
            ExperimentKind::SvdReport => "svd_report",
            ExperimentKind::EstimatorComparison => "estimator_comparison",
            ExperimentKind::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi0Config {
    Square,
    Linear,
    AffinePlusExp,
    /// `[x, y]` knots for piecewise-linear interpolation.
    Table(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaConfig {
    PoissonKernel,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyConfig {
    Monotone,
    Nonneg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintConfig {
    Monotone,
    Nonnegative,
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyConfig {
    SobolevFirstOrder,
    L2Only,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub phi0: Phi0Config,
    pub rho: f64,
    pub noise_sd: f64,
    pub independent_case: bool,
    pub copula: CopulaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Gauss–Legendre nodes for `x`.
    pub quadrature: usize,
    /// Gauss–Legendre nodes for `z`; `null` means the same as `quadrature`.
    pub z: Option<usize>,
    /// Uniform inspection nodes for shape checks; `null` means
    /// `2·quadrature + 1`.
    pub inspection: Option<usize>,
}

impl GridConfig {
    pub fn z_size(&self) -> usize {
        self.z.unwrap_or(self.quadrature)
    }

    pub fn inspection_size(&self) -> usize {
        self.inspection.unwrap_or(2 * self.quadrature + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bandwidths {
    pub h_x: f64,
    pub h_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dgp: DgpConfig,
    pub grids: GridConfig,
    pub family: FamilyConfig,
    pub n_max: u32,
    pub epsilon: f64,
    pub ball_radius: f64,
    pub lambdas: Vec<f64>,
    pub penalty: PenaltyConfig,
    pub constraints: Vec<ConstraintConfig>,
    pub replications: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Perturbation indices for the estimator comparison.
    pub comparison_n: Vec<u32>,
    /// Perturbation scales for the stability probe.
    pub probe_deltas: Vec<f64>,
    /// Grid sizes compared in the SVD report.
    pub svd_sizes: Vec<usize>,
    /// Monte Carlo sample sizes.
    pub sample_sizes: Vec<usize>,
    /// Kernel bandwidths; `null` selects the rule of thumb per sample.
    pub bandwidths: Option<Bandwidths>,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let quadrature = match kind {
            ExperimentKind::IllposednessDemo => 128,
            _ => 64,
        };
        let lambdas = match kind {
            ExperimentKind::EstimatorComparison => vec![0.0, 1e-4],
            ExperimentKind::Montecarlo => vec![1e-3],
            _ => vec![1e-4],
        };
        ExperimentConfig {
            experiment: kind,
            dgp: DgpConfig {
                phi0: Phi0Config::Square,
                rho: 0.5,
                noise_sd: 0.0,
                independent_case: false,
                copula: CopulaConfig::PoissonKernel,
            },
            grids: GridConfig {
                quadrature,
                z: None,
                inspection: None,
            },
            family: FamilyConfig::Monotone,
            n_max: 100,
            epsilon: 0.1,
            ball_radius: 0.5,
            lambdas,
            penalty: PenaltyConfig::SobolevFirstOrder,
            constraints: vec![ConstraintConfig::Monotone],
            replications: if kind == ExperimentKind::Montecarlo { 20 } else { 1 },
            seed: 0,
            output: None,
            comparison_n: vec![0, 5, 10, 20, 50, 100],
            probe_deltas: vec![1e-6, 1e-3],
            svd_sizes: vec![64, 128],
            sample_sizes: vec![10_000],
            bandwidths: None,
        }
    }

    /// Parses a config, filling unspecified fields from the defaults of its
    /// experiment. `kind` is used when the file has no `experiment` field and
    /// must agree with it otherwise.
    pub fn from_json_str(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| LabError::config(format!("malformed JSON: {e}")))?;
        ExperimentConfig::from_value(user, kind)
    }

    /// As [`ExperimentConfig::from_json_str`], for an already parsed document.
    pub fn from_value(user: Value, kind: Option<ExperimentKind>) -> Result<Self> {
        let Value::Object(map) = &user else {
            return Err(LabError::config("config must be a JSON object"));
        };
        let declared = match map.get("experiment") {
            Some(v) => Some(
                serde_json::from_value::<ExperimentKind>(v.clone())
                    .map_err(|e| LabError::config(format!("experiment: {e}")))?,
            ),
            None => None,
        };
        let kind = match (declared, kind) {
            (Some(d), Some(k)) if d != k => {
                return Err(LabError::config(format!(
                    "config is for experiment {} but {} was requested",
                    d.name(),
                    k.name()
                )))
            }
            (Some(d), _) => d,
            (None, Some(k)) => k,
            (None, None) => return Err(LabError::config("config does not name an experiment")),
        };
        let mut merged = serde_json::to_value(ExperimentConfig::defaults(kind)).expect("defaults serialize");
        merge(&mut merged, user);
        let cfg: ExperimentConfig =
            serde_json::from_value(merged).map_err(|e| LabError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentConfig::from_json_str(&text, kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Checks every rule; each violation has its own message.
    pub fn validate(&self) -> Result<()> {
        if !(self.ball_radius > 0.0 && self.ball_radius.is_finite()) {
            return Err(LabError::config(format!(
                "ball_radius must be positive and finite (got {})",
                self.ball_radius
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.ball_radius) {
            return Err(LabError::config(format!(
                "epsilon must satisfy 0 < epsilon < ball_radius (got epsilon = {}, ball_radius = {})",
                self.epsilon, self.ball_radius
            )));
        }
        if self.n_max > MAX_INDEX {
            return Err(LabError::config(format!(
                "n_max must be at most {MAX_INDEX} (got {})",
                self.n_max
            )));
        }
        if self.replications < 1 {
            return Err(LabError::config("replications must be at least 1"));
        }
        if self.lambdas.is_empty() {
            return Err(LabError::config("lambdas must not be empty"));
        }
        for &l in &self.lambdas {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(LabError::config(format!("lambda must be nonnegative and finite (got {l})")));
            }
            if l == 0.0 && self.experiment != ExperimentKind::EstimatorComparison {
                return Err(LabError::config(format!(
                    "lambda must be positive for the Tikhonov estimator in {} (got 0)",
                    self.experiment.name()
                )));
            }
        }
        let g = &self.grids;
        for (name, size) in [("quadrature", g.quadrature), ("z", g.z_size())] {
            if !(2..=MAX_QUADRATURE).contains(&size) {
                return Err(LabError::config(format!(
                    "grids.{name} must be between 2 and {MAX_QUADRATURE} nodes (got {size})"
                )));
            }
        }
        if g.inspection_size() < 4 {
            return Err(LabError::config(format!(
                "grids.inspection needs at least 4 nodes (got {})",
                g.inspection_size()
            )));
        }
        if self.experiment == ExperimentKind::EstimatorComparison {
            if let Some(&n) = self.comparison_n.iter().find(|&&n| n > self.n_max) {
                return Err(LabError::config(format!(
                    "comparison_n entries must not exceed n_max = {} (got {n})",
                    self.n_max
                )));
            }
        }
        if let Some(&d) = self.probe_deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(LabError::config(format!("probe_deltas must be nonnegative and finite (got {d})")));
        }
        if self.experiment == ExperimentKind::SvdReport && self.svd_sizes.is_empty() {
            return Err(LabError::config("svd_sizes must not be empty"));
        }
        if let Some(&s) = self.svd_sizes.iter().find(|&&s| !(2..=MAX_QUADRATURE).contains(&s)) {
            return Err(LabError::config(format!(
                "svd_sizes entries must be between 2 and {MAX_QUADRATURE} (got {s})"
            )));
        }
        if self.experiment == ExperimentKind::Montecarlo {
            if self.sample_sizes.is_empty() {
                return Err(LabError::config("sample_sizes must not be empty"));
            }
            if let Some(&m) = self.sample_sizes.iter().find(|&&m| m < MIN_SAMPLE_SIZE) {
                return Err(LabError::config(format!(
                    "sample_sizes entries must be at least {MIN_SAMPLE_SIZE} (got {m})"
                )));
            }
        }
        if let Some(b) = self.bandwidths {
            if !(b.h_x > 0.0 && b.h_x.is_finite() && b.h_z > 0.0 && b.h_z.is_finite()) {
                return Err(LabError::config(format!(
                    "bandwidths must be positive and finite (got h_x = {}, h_z = {})",
                    b.h_x, b.h_z
                )));
            }
        }
        self.dgp_spec()
            .validate()
            .map_err(|e| LabError::config(format!("dgp: {e}")))?;
        Ok(())
    }

    pub fn dgp_spec(&self) -> DgpSpec {
        let d = &self.dgp;
        DgpSpec {
            phi0: match &d.phi0 {
                Phi0Config::Square => Phi0::Square,
                Phi0Config::Linear => Phi0::Linear,
                Phi0Config::AffinePlusExp => Phi0::AffinePlusExp,
                Phi0Config::Table(knots) => Phi0::Table(knots.iter().map(|k| (k[0], k[1])).collect()),
            },
            dependence: d.rho,
            noise_sd: d.noise_sd,
            independent_case: d.independent_case,
            copula: match d.copula {
                CopulaConfig::PoissonKernel => Copula::PoissonKernel,
                CopulaConfig::Gaussian => Copula::Gaussian,
            },
        }
    }

    pub fn family(&self) -> Family {
        match self.family {
            FamilyConfig::Monotone => Family::Monotone,
            FamilyConfig::Nonneg => Family::Nonneg,
        }
    }

    pub fn penalty(&self) -> Penalty {
        match self.penalty {
            PenaltyConfig::SobolevFirstOrder => Penalty::SobolevFirstOrder,
            PenaltyConfig::L2Only => Penalty::L2Only,
        }
    }

    pub fn shape_constraints(&self) -> Vec<ShapeConstraint> {
        self.constraints
            .iter()
            .map(|c| match c {
                ConstraintConfig::Monotone => ShapeConstraint::monotone(),
                ConstraintConfig::Nonnegative => ShapeConstraint::nonnegative(),
                ConstraintConfig::Convex => ShapeConstraint::convex(),
            })
            .collect()
    }
}

/// Sets `key` (dotted path, e.g. `dgp.rho`) in a config document. The value
/// is read as JSON, falling back to a plain string.
pub fn set_field(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut slot = doc;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(LabError::config(format!("bad field path {key:?}")));
    }
    for part in &parts[..parts.len() - 1] {
        let Value::Object(map) = slot else {
            return Err(LabError::config(format!("{key}: {part} is not an object")));
        };
        slot = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let Value::Object(map) = slot else {
        return Err(LabError::config(format!("{key}: parent is not an object")));
    };
    map.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}
