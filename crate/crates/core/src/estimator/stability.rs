use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::constraints::ConstraintSet;
use super::naive::NAIVE_TRUNCATION;
use super::{constrained_estimate, naive_estimate, tir_estimate, Solver, TirConfig};
use crate::counterexamples::{psi, CounterexampleSpec};
use crate::function_space::{l2_norm, GridFunction};
use crate::operator::DiscreteOperator;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeDirection {
    /// Left singular function of the smallest singular value the
    /// pseudo-inverse keeps.
    WorstSingular,
    /// `A ψ_n`.
    CounterexampleImage(CounterexampleSpec),
    /// Independent standard normals at the z-nodes.
    WhiteNoise { seed: u64 },
}

impl ProbeDirection {
    pub fn name(&self) -> String {
        match self {
            ProbeDirection::WorstSingular => "worst_singular".into(),
            ProbeDirection::CounterexampleImage(spec) => {
                alloc::format!("psi_image_{}_{}", spec.family().name(), spec.n())
            }
            ProbeDirection::WhiteNoise { .. } => "white_noise".into(),
        }
    }

    /// The direction scaled to unit `L²(Z)` norm.
    fn vector(&self, a: &DiscreteOperator) -> Result<GridFunction> {
        let raw = match self {
            ProbeDirection::WorstSingular => {
                let sys = a.singular_system()?;
                let top = sys.values.first().copied().unwrap_or(0.0);
                let k = sys
                    .values
                    .iter()
                    .rposition(|&s| s > NAIVE_TRUNCATION * top)
                    .ok_or_else(|| Error::Numerical("operator has no retained singular value".into()))?;
                sys.left[k].clone()
            }
            ProbeDirection::CounterexampleImage(spec) => a.apply(&psi(spec, a.x_grid())?)?,
            ProbeDirection::WhiteNoise { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let values = (0..a.z_grid().size()).map(|_| StandardNormal.sample(&mut rng)).collect();
                GridFunction::new(a.z_grid(), values)?
            }
        };
        let norm = a.z_norm(&raw)?;
        if !(norm > 0.0) {
            return Err(Error::Numerical(alloc::format!("probe direction {} has zero norm", self.name())));
        }
        Ok(raw.scale(1.0 / norm))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub delta: f64,
    pub direction: String,
    pub solver: Solver,
    /// `‖φ̂(r + δv) − φ̂(r)‖ / δ` for unit `v`; 0 when `δ = 0`.
    pub amplification: f64,
    /// `1/(2√λ)` for the penalized solvers with `λ > 0`.
    pub bound: Option<f64>,
}

/// Sensitivity of each solver to data perturbations. The naive and TiR maps
/// are linear, so their shift is computed as the estimate from `δv` alone,
/// which avoids differencing two solves whose rounding is amplified by
/// `1/σ_min`; the constrained solve is differenced directly.
pub fn stability_probe(
    a: &DiscreteOperator,
    r: &GridFunction,
    deltas: &[f64],
    cfg: &TirConfig,
    constraints: &ConstraintSet,
    directions: &[ProbeDirection],
) -> Result<Vec<ProbeRow>> {
    if let Some(d) = deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::invalid(alloc::format!("perturbation scales must be finite and nonnegative, got {d}")));
    }
    r.ensure_on(a.z_grid())?;
    let bound = (cfg.lambda > 0.0).then(|| 0.5 / libm::sqrt(cfg.lambda));
    let needs_solve = deltas.iter().any(|&d| d > 0.0);
    let base = if needs_solve {
        Some(constrained_estimate(a, r, cfg, constraints)?.phi_hat)
    } else {
        None
    };

    let mut rows = Vec::new();
    for dir in directions {
        let v = if needs_solve { Some(dir.vector(a)?) } else { None };
        for &delta in deltas {
            for solver in [Solver::Naive, Solver::Tir, Solver::Constrained] {
                let amplification = match (&v, &base) {
                    (Some(v), Some(base)) if delta > 0.0 => {
                        let shift = match solver {
                            Solver::Naive => naive_estimate(a, &v.scale(delta))?.phi_hat,
                            Solver::Tir => tir_estimate(a, &v.scale(delta), cfg)?.phi_hat,
                            Solver::Constrained => {
                                let moved = constrained_estimate(a, &r.add_scaled(v, delta)?, cfg, constraints)?;
                                moved.phi_hat.sub(base)?
                            }
                        };
                        l2_norm(&shift) / delta
                    }
                    _ => 0.0,
                };
                rows.push(ProbeRow {
                    delta,
                    direction: dir.name(),
                    solver,
                    amplification,
                    bound: if solver == Solver::Naive { None } else { bound },
                });
            }
        }
    }
    Ok(rows)
}
