use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{EstimationMode, TirConfig};
use crate::dgp::Sample;
use crate::function_space::{Grid, GridFunction};
use crate::normal;
use crate::operator::DiscreteOperator;
use crate::{Error, Result};

pub const MIN_SAMPLE_SIZE: usize = 50;
/// z-nodes where the estimated `f_Z` falls below this are dropped from the
/// criterion.
pub const DENSITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PluginEstimate {
    /// Rows are renormalized conditional densities; flagged rows fall back to
    /// the uniform conditional and carry zero `L²(Z)` weight.
    pub operator: DiscreteOperator,
    /// Nadaraya–Watson regression of `Y` on `Z`.
    pub r_hat: GridFunction,
    /// Estimated `f_Z` at the z-nodes.
    pub f_z: Vec<f64>,
    pub flagged: Vec<usize>,
}

/// `1.06 σ̂ m^{-1/5}`.
pub fn silverman_bandwidth(data: &[f64]) -> Result<f64> {
    let m = data.len();
    if m < 2 {
        return Err(Error::invalid("bandwidth rule needs at least 2 observations"));
    }
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        return Err(Error::invalid("bandwidth rule needs data with positive spread"));
    }
    let mean = data.iter().sum::<f64>() / m as f64;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    let sd = libm::sqrt(var);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::invalid("bandwidth rule needs data with positive spread"));
    }
    Ok(1.06 * sd * libm::pow(m as f64, -0.2))
}

/// Rule-of-thumb `(h_x, h_z)` for a sample.
pub fn rule_of_thumb_bandwidths(sample: &Sample) -> Result<(f64, f64)> {
    Ok((silverman_bandwidth(&sample.x)?, silverman_bandwidth(&sample.z)?))
}

fn kernel_matrix(nodes: &[f64], data: &[f64], h: f64) -> DMatrix<f64> {
    DMatrix::from_fn(nodes.len(), data.len(), |i, s| normal::pdf((nodes[i] - data[s]) / h) / h)
}

/// Kernel plug-in operator and reduced form from a sample. No boundary
/// correction: accuracy claims are for interior nodes.
pub fn sampled_plugin(
    sample: &Sample,
    cfg: &TirConfig,
    x_grid: &Arc<Grid>,
    z_grid: &Arc<Grid>,
) -> Result<PluginEstimate> {
    let EstimationMode::Sampled { h_x, h_z } = cfg.mode else {
        return Err(Error::invalid("plug-in estimation needs sampled mode with bandwidths"));
    };
    cfg.validate_mode()?;
    let m = sample.len();
    if m < MIN_SAMPLE_SIZE {
        return Err(Error::invalid(alloc::format!(
            "plug-in estimation needs at least {MIN_SAMPLE_SIZE} observations, got {m}"
        )));
    }
    if sample.y.len() != m || sample.z.len() != m {
        return Err(Error::invalid("sample columns have different lengths"));
    }
    if sample.rows().any(|(x, y, z)| !(x.is_finite() && y.is_finite() && z.is_finite())) {
        return Err(Error::invalid("sample has non-finite values"));
    }

    let kx = kernel_matrix(x_grid.nodes(), &sample.x, h_x);
    let kz = kernel_matrix(z_grid.nodes(), &sample.z, h_z);
    let joint = (&kz * kx.transpose()) / m as f64;
    let wx = x_grid.weights();
    let f_z: Vec<f64> = joint
        .row_iter()
        .map(|row| row.iter().zip(wx).map(|(f, w)| f * w).sum())
        .collect();

    let flagged: Vec<usize> = (0..f_z.len()).filter(|&j| !(f_z[j] >= DENSITY_FLOOR)).collect();
    if 2 * flagged.len() > f_z.len() {
        return Err(Error::DegenerateSample {
            flagged: flagged.len(),
            total: f_z.len(),
        });
    }

    let mut kernel = DMatrix::zeros(z_grid.size(), x_grid.size());
    let mut fz_weights = Vec::with_capacity(z_grid.size());
    for j in 0..z_grid.size() {
        if f_z[j] >= DENSITY_FLOOR {
            for i in 0..x_grid.size() {
                kernel[(j, i)] = joint[(j, i)] * wx[i] / f_z[j];
            }
            fz_weights.push(z_grid.weights()[j] * f_z[j]);
        } else {
            for i in 0..x_grid.size() {
                kernel[(j, i)] = wx[i];
            }
            fz_weights.push(0.0);
        }
    }

    let y_mean = sample.y.iter().sum::<f64>() / m as f64;
    let r_values = kz
        .row_iter()
        .map(|row| {
            let den: f64 = row.iter().sum();
            if den > 0.0 {
                row.iter().zip(&sample.y).map(|(k, y)| k * y).sum::<f64>() / den
            } else {
                y_mean
            }
        })
        .collect();

    Ok(PluginEstimate {
        operator: DiscreteOperator::from_parts(x_grid, z_grid, kernel, fz_weights)?,
        r_hat: GridFunction::new(z_grid, r_values)?,
        f_z,
        flagged,
    })
}
