//! Conservative finite-difference assembly of the governing operator and its
//! exact sparse Jacobian on the quarter-strip grid.
//!
//! Fluxes live on cell faces: the normal derivative is the face difference
//! quotient and the transverse derivative is the arithmetic mean of the two
//! adjacent centered quotients, which keeps the stencil at nine points and
//! the scheme second order in divergence form. Evenness across `x = 0` and
//! `y = 0` enters through reflected ghost values, so the symmetry class is
//! built in rather than constrained. Rows at `x = L` and `y = pi/2` are
//! identity rows.
//!
//! With the `parallel` feature (default) assembly runs column-parallel under
//! rayon; the serial path is always compiled and is what the feature falls
//! back to.

use crate::constitutive::{BodyForce, ConstitutiveModel, ModelKind};
use crate::error::{Error, Result};
use crate::grid::{SolutionField, StripGrid};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Decay-rate floor used by the tail extrapolation when `lambda` is tiny.
pub const LAMBDA_FLOOR: f64 = 1e-3;

/// Relative centerline threshold of the truncation-pressure policy.
pub const TRUNCATION_THRESHOLD: f64 = 1e-6;

/// Compressed-row operator with at most nine nonzeros per row; Dirichlet
/// rows are identity rows.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Builds an operator from `(row, col, value)` triplets; duplicate
    /// positions accumulate.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        'outer: for &(r, c, v) in triplets {
            for entry in rows[r].iter_mut() {
                if entry.0 == c {
                    entry.1 += v;
                    continue 'outer;
                }
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![0.0; self.n];
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            out[r] = acc;
        }
        out
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for r in 0..self.n {
            for &c in self.row(r).0 {
                bw = bw.max(r.abs_diff(c));
            }
        }
        bw
    }
}

// ---------------------------------------------------------------------------
// face quantities

#[inline]
fn uy_centered(u: &[f64], g: &StripGrid, i: usize, j: usize) -> f64 {
    // reflection across y = 0 cancels the stencil exactly at j = 0
    if j == 0 {
        0.0
    } else {
        (u[g.index(i, j + 1)] - u[g.index(i, j - 1)]) / (2.0 * g.hy)
    }
}

#[inline]
fn ux_centered(u: &[f64], g: &StripGrid, i: usize, j: usize) -> f64 {
    if i == 0 {
        0.0
    } else {
        (u[g.index(i + 1, j)] - u[g.index(i - 1, j)]) / (2.0 * g.hx)
    }
}

/// Normal difference, transverse average, and squared gradient on the x-face
/// between nodes `(m, j)` and `(m + 1, j)`.
#[inline]
pub(crate) fn x_face(u: &[f64], g: &StripGrid, m: usize, j: usize) -> (f64, f64, f64) {
    let d = (u[g.index(m + 1, j)] - u[g.index(m, j)]) / g.hx;
    let t = 0.5 * (uy_centered(u, g, m, j) + uy_centered(u, g, m + 1, j));
    (d, t, d * d + t * t)
}

/// Same on the y-face between `(i, jm)` and `(i, jm + 1)`.
#[inline]
pub(crate) fn y_face(u: &[f64], g: &StripGrid, i: usize, jm: usize) -> (f64, f64, f64) {
    let d = (u[g.index(i, jm + 1)] - u[g.index(i, jm)]) / g.hy;
    let t = 0.5 * (ux_centered(u, g, i, jm) + ux_centered(u, g, i, jm + 1));
    (d, t, d * d + t * t)
}

#[inline]
fn guard_ellipticity(
    model: &ConstitutiveModel,
    q: f64,
    x: f64,
    y: f64,
) -> Result<()> {
    if model.kind() == ModelKind::ModelII {
        if let Some(q1) = model.q1() {
            if q >= q1 {
                return Err(Error::EllipticityExceeded { x, y, q, q1 });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// residual

fn residual_column(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
    i: usize,
    out: &mut [f64],
) -> Result<()> {
    let g = &field.grid;
    let u = &field.u;
    debug_assert_eq!(out.len(), g.ny + 1);

    if i == g.nx {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = u[g.index(i, j)];
        }
        return Ok(());
    }

    for j in 0..g.ny {
        let (de, _te, qe) = x_face(u, g, i, j);
        guard_ellipticity(model, qe, g.x(i) + 0.5 * g.hx, g.y(j))?;
        let fe = model.wp_at(qe) * de;
        let fw = if i == 0 {
            // mirrored face: same gradient magnitude, opposite normal difference
            -fe
        } else {
            let (dw, _tw, qw) = x_face(u, g, i - 1, j);
            guard_ellipticity(model, qw, g.x(i) - 0.5 * g.hx, g.y(j))?;
            model.wp_at(qw) * dw
        };
        let (dn, _tn, qn) = y_face(u, g, i, j);
        guard_ellipticity(model, qn, g.x(i), g.y(j) + 0.5 * g.hy)?;
        let fnn = model.wp_at(qn) * dn;
        let fs = if j == 0 {
            -fnn
        } else {
            let (ds, _ts, qs) = y_face(u, g, i, j - 1);
            guard_ellipticity(model, qs, g.x(i), g.y(j) - 0.5 * g.hy)?;
            model.wp_at(qs) * ds
        };
        out[j] = (fe - fw) / g.hx + (fnn - fs) / g.hy - force.b(u[g.index(i, j)], field.lambda);
    }
    out[g.ny] = u[g.index(i, g.ny)];
    Ok(())
}

/// Assembles the nonlinear residual. Dispatches to the parallel path when
/// the `parallel` feature is enabled.
pub fn assemble_residual(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> Result<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        assemble_residual_par(field, model, force)
    }
    #[cfg(not(feature = "parallel"))]
    {
        assemble_residual_serial(field, model, force)
    }
}

/// Column-sequential residual assembly.
pub fn assemble_residual_serial(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> Result<Vec<f64>> {
    let g = &field.grid;
    let mut out = vec![0.0; g.num_nodes()];
    for (i, chunk) in out.chunks_mut(g.ny + 1).enumerate() {
        residual_column(field, model, force, i, chunk)?;
    }
    Ok(out)
}

/// Column-parallel residual assembly under rayon.
#[cfg(feature = "parallel")]
pub fn assemble_residual_par(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> Result<Vec<f64>> {
    let g = &field.grid;
    let mut out = vec![0.0; g.num_nodes()];
    out.par_chunks_mut(g.ny + 1)
        .enumerate()
        .try_for_each(|(i, chunk)| residual_column(field, model, force, i, chunk))?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Jacobian

/// Row accumulator sized for the nine-point stencil.
#[derive(Debug, Clone, Copy)]
struct RowAcc {
    cols: [usize; 9],
    vals: [f64; 9],
    len: usize,
}

impl RowAcc {
    fn new() -> Self {
        RowAcc {
            cols: [0; 9],
            vals: [0.0; 9],
            len: 0,
        }
    }

    #[inline]
    fn add(&mut self, col: usize, val: f64) {
        for k in 0..self.len {
            if self.cols[k] == col {
                self.vals[k] += val;
                return;
            }
        }
        self.cols[self.len] = col;
        self.vals[self.len] = val;
        self.len += 1;
    }
}

/// Adds `scale * dF/du` for the x-face `(m + 1/2, j)` into the row.
#[inline]
fn add_x_face_derivs(
    acc: &mut RowAcc,
    scale: f64,
    u: &[f64],
    g: &StripGrid,
    model: &ConstitutiveModel,
    m: usize,
    j: usize,
) {
    let (d, t, q) = x_face(u, g, m, j);
    let wp = model.wp_at(q);
    let wpp = model.wpp_at(q);
    let coef_d = (wp + 2.0 * wpp * d * d) * scale;
    acc.add(g.index(m + 1, j), coef_d / g.hx);
    acc.add(g.index(m, j), -coef_d / g.hx);
    if j > 0 {
        let coef_t = 2.0 * wpp * d * t * scale / (4.0 * g.hy);
        acc.add(g.index(m, j + 1), coef_t);
        acc.add(g.index(m, j - 1), -coef_t);
        acc.add(g.index(m + 1, j + 1), coef_t);
        acc.add(g.index(m + 1, j - 1), -coef_t);
    }
}

#[inline]
fn add_y_face_derivs(
    acc: &mut RowAcc,
    scale: f64,
    u: &[f64],
    g: &StripGrid,
    model: &ConstitutiveModel,
    i: usize,
    jm: usize,
) {
    let (d, t, q) = y_face(u, g, i, jm);
    let wp = model.wp_at(q);
    let wpp = model.wpp_at(q);
    let coef_d = (wp + 2.0 * wpp * d * d) * scale;
    acc.add(g.index(i, jm + 1), coef_d / g.hy);
    acc.add(g.index(i, jm), -coef_d / g.hy);
    if i > 0 {
        let coef_t = 2.0 * wpp * d * t * scale / (4.0 * g.hx);
        acc.add(g.index(i + 1, jm), coef_t);
        acc.add(g.index(i - 1, jm), -coef_t);
        acc.add(g.index(i + 1, jm + 1), coef_t);
        acc.add(g.index(i - 1, jm + 1), -coef_t);
    }
}

fn jacobian_column(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
    i: usize,
) -> Result<Vec<RowAcc>> {
    let g = &field.grid;
    let u = &field.u;
    let mut rows = Vec::with_capacity(g.ny + 1);

    if i == g.nx {
        for j in 0..=g.ny {
            let mut acc = RowAcc::new();
            acc.add(g.index(i, j), 1.0);
            rows.push(acc);
        }
        return Ok(rows);
    }

    for j in 0..g.ny {
        let mut acc = RowAcc::new();
        // the i = 0 (j = 0) mirror doubles the east (north) face contribution
        let east_scale = if i == 0 { 2.0 } else { 1.0 } / g.hx;
        let (_, _, qe) = x_face(u, g, i, j);
        guard_ellipticity(model, qe, g.x(i) + 0.5 * g.hx, g.y(j))?;
        add_x_face_derivs(&mut acc, east_scale, u, g, model, i, j);
        if i > 0 {
            let (_, _, qw) = x_face(u, g, i - 1, j);
            guard_ellipticity(model, qw, g.x(i) - 0.5 * g.hx, g.y(j))?;
            add_x_face_derivs(&mut acc, -1.0 / g.hx, u, g, model, i - 1, j);
        }
        let north_scale = if j == 0 { 2.0 } else { 1.0 } / g.hy;
        let (_, _, qn) = y_face(u, g, i, j);
        guard_ellipticity(model, qn, g.x(i), g.y(j) + 0.5 * g.hy)?;
        add_y_face_derivs(&mut acc, north_scale, u, g, model, i, j);
        if j > 0 {
            let (_, _, qs) = y_face(u, g, i, j - 1);
            guard_ellipticity(model, qs, g.x(i), g.y(j) - 0.5 * g.hy)?;
            add_y_face_derivs(&mut acc, -1.0 / g.hy, u, g, model, i, j - 1);
        }
        acc.add(g.index(i, j), -force.bz(u[g.index(i, j)], field.lambda));
        rows.push(acc);
    }
    let mut wall = RowAcc::new();
    wall.add(g.index(i, g.ny), 1.0);
    rows.push(wall);
    Ok(rows)
}

fn rows_to_csr(n: usize, columns: Vec<Vec<RowAcc>>) -> SparseOperator {
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(9 * n);
    let mut vals = Vec::with_capacity(9 * n);
    row_ptr.push(0);
    let mut order: Vec<usize> = Vec::with_capacity(9);
    for col_rows in columns {
        for acc in col_rows {
            order.clear();
            order.extend(0..acc.len);
            order.sort_unstable_by_key(|&k| acc.cols[k]);
            for &k in order.iter() {
                cols.push(acc.cols[k]);
                vals.push(acc.vals[k]);
            }
            row_ptr.push(cols.len());
        }
    }
    SparseOperator {
        n,
        row_ptr,
        cols,
        vals,
    }
}

/// Assembles the exact Jacobian of [`assemble_residual`] with respect to the
/// nodal values.
pub fn assemble_jacobian(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> Result<SparseOperator> {
    #[cfg(feature = "parallel")]
    {
        assemble_jacobian_par(field, model, force)
    }
    #[cfg(not(feature = "parallel"))]
    {
        assemble_jacobian_serial(field, model, force)
    }
}

/// Column-sequential Jacobian assembly.
pub fn assemble_jacobian_serial(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> Result<SparseOperator> {
    let g = &field.grid;
    let mut columns = Vec::with_capacity(g.nx + 1);
    for i in 0..=g.nx {
        columns.push(jacobian_column(field, model, force, i)?);
    }
    Ok(rows_to_csr(g.num_nodes(), columns))
}

/// Column-parallel Jacobian assembly under rayon.
#[cfg(feature = "parallel")]
pub fn assemble_jacobian_par(
    field: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> Result<SparseOperator> {
    let g = &field.grid;
    let columns = (0..=g.nx)
        .into_par_iter()
        .map(|i| jacobian_column(field, model, force, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(rows_to_csr(g.num_nodes(), columns))
}

/// Derivative of the residual with respect to the loading parameter:
/// `-d b/d lambda = -u` at interior nodes, zero on Dirichlet rows.
pub fn assemble_lambda_derivative(field: &SolutionField) -> Vec<f64> {
    let g = &field.grid;
    let mut out = vec![0.0; g.num_nodes()];
    for i in 0..g.nx {
        for j in 0..g.ny {
            out[g.index(i, j)] = -field.u[g.index(i, j)];
        }
    }
    out
}

/// Truncation-pressure flag of the domain policy: the centerline value at
/// `0.9 L` exceeds `1e-6` of the amplitude.
pub fn truncation_pressure(field: &SolutionField) -> bool {
    let g = &field.grid;
    let i90 = ((0.9 * g.nx as f64).round() as usize).min(g.nx);
    field.at(i90, 0).abs() > TRUNCATION_THRESHOLD * field.amplitude().abs()
}

/// Extends the truncated domain to `l_new > L`, preserving `hx` up to
/// rounding. Old nodes are copied verbatim; new nodes get the exponential
/// tail `u(L, y) * exp(-sqrt(max(lambda, 1e-3)) (x - L))`.
pub fn extend_domain(field: &SolutionField, l_new: f64) -> Result<SolutionField> {
    let g = &field.grid;
    if !(l_new > g.length) {
        return Err(Error::Precondition(format!(
            "extension needs l_new > {} (got {l_new})",
            g.length
        )));
    }
    let nx_new = (l_new / g.hx).round() as usize;
    if nx_new <= g.nx {
        return Err(Error::Precondition(format!(
            "l_new = {l_new} rounds to the current grid"
        )));
    }
    let new_grid = StripGrid {
        length: nx_new as f64 * g.hx,
        nx: nx_new,
        ny: g.ny,
        hx: g.hx,
        hy: g.hy,
    };
    let mut out = SolutionField::zeros(new_grid, field.lambda);
    for i in 0..=g.nx {
        for j in 0..=g.ny {
            out.set(i, j, field.at(i, j));
        }
    }
    let rate = field.lambda.max(LAMBDA_FLOOR).sqrt();
    for i in g.nx + 1..=nx_new {
        let decay = (-rate * (out.grid.x(i) - g.length)).exp();
        for j in 0..=g.ny {
            out.set(i, j, field.at(g.nx, j) * decay);
        }
    }
    out.clamp_wall_row();
    Ok(out)
}
