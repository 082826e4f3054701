use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::function_space::{difference_coefficients, Grid, GridRule, ShapeConstraint, ShapeKind};
use crate::{Error, Result};

/// Shape constraints imposed on the interpolated estimate at the nodes of a
/// uniform inspection grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    constraints: Vec<ShapeConstraint>,
    inspection: Arc<Grid>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<ShapeConstraint>, inspection: &Arc<Grid>) -> Result<Self> {
        if inspection.rule() != GridRule::UniformTrapezoid {
            return Err(Error::invalid("constraints need a uniform inspection grid"));
        }
        for c in &constraints {
            let need = c.kind().order() + 2;
            if inspection.size() < need {
                return Err(Error::invalid(alloc::format!(
                    "{} needs at least {need} inspection nodes, got {}",
                    c.kind().name(),
                    inspection.size()
                )));
            }
        }
        Ok(ConstraintSet {
            constraints,
            inspection: Arc::clone(inspection),
        })
    }

    /// Inspection grid of `2 n + 1` uniform nodes for an `n`-node x-grid.
    pub fn for_x_grid(constraints: Vec<ShapeConstraint>, x_grid: &Grid) -> Result<Self> {
        ConstraintSet::new(constraints, &Grid::uniform(2 * x_grid.size() + 1)?)
    }

    pub fn constraints(&self) -> &[ShapeConstraint] {
        &self.constraints
    }

    pub fn inspection(&self) -> &Arc<Grid> {
        &self.inspection
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Row count of each encoded block for an `x_size`-node x-grid:
    /// `size − order` differences, plus the x-nodes themselves for
    /// nonnegativity.
    pub fn row_counts(&self, x_size: usize) -> Vec<usize> {
        self.constraints
            .iter()
            .map(|c| match c.kind() {
                ShapeKind::Nonnegative => self.inspection.size() + x_size,
                kind => self.inspection.size() - kind.order(),
            })
            .collect()
    }

    /// `G` with `G φ ≥ 0` expressing every constraint for values `φ` on
    /// `x_grid`: difference rows composed with interpolation.
    ///
    /// Nonnegativity is also imposed at the x-nodes. Without those rows an
    /// unpenalized fit can push the quadrature values negative between
    /// inspection nodes, which the operator sees and the checks do not.
    pub fn encode(&self, x_grid: &Grid) -> DMatrix<f64> {
        let interp = x_grid.interpolation_matrix(&self.inspection);
        let total: usize = self.row_counts(x_grid.size()).iter().sum();
        let mut g = DMatrix::zeros(total, x_grid.size());
        let mut row = 0;
        for c in &self.constraints {
            let order = c.kind().order();
            let coeffs = difference_coefficients(order);
            for i in 0..self.inspection.size() - order {
                for (k, ck) in coeffs.iter().enumerate() {
                    let src = interp.row(i + k) * *ck;
                    let mut dst = g.row_mut(row);
                    dst += src;
                }
                row += 1;
            }
            if c.kind() == ShapeKind::Nonnegative {
                for j in 0..x_grid.size() {
                    g[(row, j)] = 1.0;
                    row += 1;
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::{check_shape_on, GridFunction, ShapeVerdict};
    use nalgebra::DVector;

    #[test]
    fn encoded_rows_match_the_checks() {
        let x = Grid::gauss_legendre(12).unwrap();
        let set = ConstraintSet::for_x_grid(
            alloc::vec![ShapeConstraint::nonnegative(), ShapeConstraint::monotone(), ShapeConstraint::convex()],
            &x,
        )
        .unwrap();
        assert_eq!(set.inspection().size(), 25);
        assert_eq!(set.row_counts(12), alloc::vec![25 + 12, 24, 23]);
        let g = set.encode(&x);
        assert_eq!(g.shape(), (84, 12));

        let f = GridFunction::from_fn(&x, |t| libm::sin(5.0 * t) - 0.2).unwrap();
        let values = &g * DVector::from_column_slice(f.values());
        let mut offset = 0;
        for (c, rows) in set.constraints().iter().zip(set.row_counts(12)) {
            let checked = rows - if c.kind() == ShapeKind::Nonnegative { 12 } else { 0 };
            let min = values.rows(offset, checked).min();
            let verdict = check_shape_on(&f, c, set.inspection()).unwrap();
            match verdict {
                ShapeVerdict::Satisfied => assert!(min >= -c.tolerance()),
                ShapeVerdict::Violated { slack, .. } => assert!((slack - min).abs() < 1e-13),
            }
            offset += rows;
        }
    }

    #[test]
    fn rejects_bad_inspection_grids() {
        let gauss = Grid::gauss_legendre(9).unwrap();
        assert!(ConstraintSet::new(alloc::vec![ShapeConstraint::monotone()], &gauss).is_err());
        let tiny = Grid::uniform(3).unwrap();
        assert!(ConstraintSet::new(alloc::vec![ShapeConstraint::convex()], &tiny).is_err());
        assert!(ConstraintSet::new(alloc::vec![ShapeConstraint::monotone()], &tiny).is_ok());
    }
}
