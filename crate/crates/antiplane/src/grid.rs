//! The symmetry-reduced quarter-strip grid and the discrete displacement
//! field living on it.
//!
//! The physical strip is `R x (-pi/2, pi/2)`; evenness in both variables
//! reduces the computation to `[0, L] x [0, pi/2]` with reflection faces at
//! `x = 0` and `y = 0` and clamped rows at `x = L` (truncation) and
//! `y = pi/2` (the physical wall).

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    /// Truncation half-length; the grid covers `x` in `[0, length]`.
    pub length: f64,
    /// Cell counts; node counts are `nx + 1` and `ny + 1`.
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

/// Builds a uniform tensor grid on `[0, L] x [0, pi/2]`.
pub fn build_grid(length: f64, nx: usize, ny: usize) -> Result<StripGrid> {
    if !length.is_finite() || length <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "length must be positive (got {length})"
        )));
    }
    if nx < 16 || ny < 16 {
        return Err(Error::InvalidGrid(format!(
            "need nx, ny >= 16 (got {nx}, {ny})"
        )));
    }
    Ok(StripGrid {
        length,
        nx,
        ny,
        hx: length / nx as f64,
        hy: FRAC_PI_2 / ny as f64,
    })
}

impl StripGrid {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// Total node count `(nx + 1) * (ny + 1)`.
    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Row-major node index; `j` varies fastest so an x-column is contiguous.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    /// Quadrature weight of the discrete inner product.
    pub fn cell_weight(&self) -> f64 {
        self.hx * self.hy
    }
}

/// Discrete displacement on the quarter grid plus the loading parameter.
///
/// Invariant: the clamped wall row `u[(i, ny)]` holds exact zeros. The
/// truncation column `x = L` is enforced by the assembler's identity rows
/// instead, so seed fields may carry their analytic tail there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionField {
    pub grid: StripGrid,
    /// Row-major nodal values, indexed by `grid.index(i, j)`.
    pub u: Vec<f64>,
    pub lambda: f64,
}

impl SolutionField {
    pub fn zeros(grid: StripGrid, lambda: f64) -> Self {
        let n = grid.num_nodes();
        SolutionField {
            grid,
            u: vec![0.0; n],
            lambda,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.grid.index(i, j);
        self.u[k] = value;
    }

    /// Centerline maximum `u(0, 0)`; equals the field maximum for fields in
    /// the monotone nodal class.
    pub fn amplitude(&self) -> f64 {
        self.at(0, 0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Zeroes the clamped wall row `y = pi/2`.
    pub fn clamp_wall_row(&mut self) {
        for i in 0..=self.grid.nx {
            self.set(i, self.grid.ny, 0.0);
        }
    }

    /// Zeroes both Dirichlet lines (wall row and truncation column).
    pub fn clamp_dirichlet(&mut self) {
        self.clamp_wall_row();
        for j in 0..=self.grid.ny {
            self.set(self.grid.nx, j, 0.0);
        }
    }

    /// Checks the type invariants: finite values and a zeroed wall row.
    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.grid.num_nodes() {
            return Err(Error::GridMismatch(format!(
                "field has {} values for {} nodes",
                self.u.len(),
                self.grid.num_nodes()
            )));
        }
        if self.u.iter().any(|v| !v.is_finite()) || !self.lambda.is_finite() {
            return Err(Error::Domain("non-finite field value".into()));
        }
        for i in 0..=self.grid.nx {
            if self.at(i, self.grid.ny) != 0.0 {
                return Err(Error::Domain(format!(
                    "clamped wall row must be exactly zero (u[{i}, ny] = {})",
                    self.at(i, self.grid.ny)
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_examples() {
        let g = build_grid(40.0, 160, 32).unwrap();
        assert_eq!(g.hx, 0.25);
        assert_eq!(g.hy, FRAC_PI_2 / 32.0);
        assert_eq!(g.x(160), 40.0);
        assert!((g.y(32) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_undersized() {
        assert!(build_grid(40.0, 8, 32).is_err());
        assert!(build_grid(40.0, 160, 8).is_err());
        assert!(build_grid(0.0, 160, 32).is_err());
        assert!(build_grid(-1.0, 160, 32).is_err());
    }

    #[test]
    fn field_validation_catches_dirty_wall_row() {
        let g = build_grid(20.0, 16, 16).unwrap();
        let mut f = SolutionField::zeros(g, 0.1);
        f.validate().unwrap();
        f.set(3, 16, 1e-17);
        assert!(f.validate().is_err());
        f.clamp_wall_row();
        f.validate().unwrap();
    }
}
