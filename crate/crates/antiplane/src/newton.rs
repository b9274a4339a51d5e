//! Damped Newton correctors: fixed-lambda solves and the bordered
//! pseudo-arclength system, both on top of the banded direct solver.
//!
//! The bordered system is eliminated blockwise (two band solves with the
//! Jacobian per corrector step), so folds in lambda do not require
//! factoring the augmented matrix.

use crate::assembly::{
    assemble_jacobian, assemble_lambda_derivative, assemble_residual,
};
use crate::constitutive::{BodyForce, ConstitutiveModel};
use crate::error::{Error, Result};
use crate::grid::{SolutionField, StripGrid};
use crate::linalg::factor_band;

/// Backtracking halves the step down to `2^-10` before giving up.
const MIN_DAMPING: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone)]
pub struct NewtonSettings {
    /// Convergence threshold on the residual sup-norm, scaled by
    /// `1 + |u|_inf`.
    pub tol_residual: f64,
    pub max_iterations: usize,
    pub verbose: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_residual: 1e-10,
            max_iterations: 25,
            verbose: false,
        }
    }
}

/// Iteration count and residual-norm history of a converged solve.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    /// Pivot-ratio conditioning proxy of the last factored Jacobian.
    pub pivot_ratio: f64,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `hx hy`-weighted discrete inner product.
pub fn weighted_inner(grid: &StripGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.cell_weight() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Solves the discrete problem at fixed loading from `guess`.
///
/// Converges when the residual sup-norm drops below
/// `tol * (1 + |u|_inf)`; Dirichlet lines are re-clamped to exact zeros
/// after every update so converged fields carry them bitwise.
pub fn newton_fixed_lambda(
    guess: &SolutionField,
    model: &ConstitutiveModel,
    force: &BodyForce,
    settings: &NewtonSettings,
) -> Result<(SolutionField, NewtonReport)> {
    if !(guess.lambda > 0.0) {
        return Err(Error::Precondition(format!(
            "fixed-lambda solve needs lambda > 0 (got {})",
            guess.lambda
        )));
    }
    let mut u = guess.clone();
    let mut history = Vec::new();
    let mut pivot_ratio = f64::NAN;
    for iteration in 0..=settings.max_iterations {
        let residual = assemble_residual(&u, model, force)?;
        let rn = sup_norm(&residual);
        history.push(rn);
        if settings.verbose {
            eprintln!("newton[{iteration}]: |R| = {rn:.3e}");
        }
        if rn <= settings.tol_residual * (1.0 + u.sup_norm()) {
            return Ok((
                u,
                NewtonReport {
                    iterations: iteration,
                    residual: rn,
                    history,
                    pivot_ratio,
                },
            ));
        }
        if iteration == settings.max_iterations {
            break;
        }
        let jac = assemble_jacobian(&u, model, force)?;
        let lu = factor_band(&jac)?;
        pivot_ratio = lu.pivot_ratio();
        let mut delta: Vec<f64> = residual.iter().map(|r| -r).collect();
        lu.solve_in_place(&mut delta);

        // monotone residual backtracking
        let mut damping = 1.0;
        loop {
            let mut trial = u.clone();
            for (t, d) in trial.u.iter_mut().zip(&delta) {
                *t += damping * d;
            }
            trial.clamp_dirichlet();
            match assemble_residual(&trial, model, force) {
                Ok(r_try) if sup_norm(&r_try) < rn => {
                    u = trial;
                    break;
                }
                Ok(_) | Err(Error::EllipticityExceeded { .. }) => {
                    damping *= 0.5;
                    if damping < MIN_DAMPING {
                        return Err(Error::StepTooLarge { residual: rn });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iterations,
        residual: *history.last().unwrap(),
        history,
    })
}

/// Pseudo-arclength constraint around a reference point, with a tangent
/// normalized in the weighted metric
/// `theta <du, du>_w + (1 - theta) dlambda^2`.
#[derive(Debug, Clone)]
pub struct ArclengthConstraint {
    pub u_ref: Vec<f64>,
    pub lambda_ref: f64,
    pub tangent_u: Vec<f64>,
    pub tangent_lambda: f64,
    pub ds: f64,
    pub theta: f64,
}

impl ArclengthConstraint {
    /// Builds the constraint, normalizing the supplied tangent direction.
    /// A degenerate direction falls back to the pure lambda increment.
    pub fn new(
        grid: &StripGrid,
        u_ref: Vec<f64>,
        lambda_ref: f64,
        mut tangent_u: Vec<f64>,
        mut tangent_lambda: f64,
        ds: f64,
        theta: f64,
    ) -> Self {
        let norm = metric_norm(grid, &tangent_u, tangent_lambda, theta);
        if norm < 1e-14 {
            tangent_u.iter_mut().for_each(|t| *t = 0.0);
            tangent_lambda = 1.0 / (1.0 - theta).sqrt();
        } else {
            tangent_u.iter_mut().for_each(|t| *t /= norm);
            tangent_lambda /= norm;
        }
        ArclengthConstraint {
            u_ref,
            lambda_ref,
            tangent_u,
            tangent_lambda,
            ds,
            theta,
        }
    }

    /// `theta <u - u*, t_u>_w + (1 - theta)(lambda - lambda*) t_lambda - ds`.
    pub fn value(&self, grid: &StripGrid, u: &[f64], lambda: f64) -> f64 {
        let mut proj = 0.0;
        for ((ui, ri), ti) in u.iter().zip(&self.u_ref).zip(&self.tangent_u) {
            proj += (ui - ri) * ti;
        }
        self.theta * grid.cell_weight() * proj
            + (1.0 - self.theta) * (lambda - self.lambda_ref) * self.tangent_lambda
            - self.ds
    }
}

/// Weighted branch metric `sqrt(theta <du,du>_w + (1-theta) dlambda^2)`.
pub fn metric_norm(grid: &StripGrid, du: &[f64], dlambda: f64, theta: f64) -> f64 {
    (theta * weighted_inner(grid, du, du) + (1.0 - theta) * dlambda * dlambda).sqrt()
}

/// Corrects a predicted point onto the branch: solves the bordered system
/// `[residual; arclength] = 0` for `(u, lambda)` by block elimination.
pub fn newton_arclength(
    guess: &SolutionField,
    constraint: &ArclengthConstraint,
    model: &ConstitutiveModel,
    force: &BodyForce,
    settings: &NewtonSettings,
) -> Result<(SolutionField, NewtonReport)> {
    let mut u = guess.clone();
    let mut history = Vec::new();
    let mut pivot_ratio = f64::NAN;
    let grid = guess.grid.clone();

    let merged_norm = |field: &SolutionField, residual: &[f64]| -> f64 {
        sup_norm(residual).max(constraint.value(&grid, &field.u, field.lambda).abs())
    };

    for iteration in 0..=settings.max_iterations {
        let residual = assemble_residual(&u, model, force)?;
        let rn = merged_norm(&u, &residual);
        history.push(rn);
        if settings.verbose {
            eprintln!("palc[{iteration}]: |R| = {rn:.3e}, lambda = {}", u.lambda);
        }
        if rn <= settings.tol_residual * (1.0 + u.sup_norm()) {
            return Ok((
                u,
                NewtonReport {
                    iterations: iteration,
                    residual: rn,
                    history,
                    pivot_ratio,
                },
            ));
        }
        if iteration == settings.max_iterations {
            break;
        }
        let jac = assemble_jacobian(&u, model, force)?;
        let lu = factor_band(&jac)?;
        pivot_ratio = lu.pivot_ratio();

        // block elimination: J y1 = -R, J y2 = dR/dlambda
        let mut y1: Vec<f64> = residual.iter().map(|r| -r).collect();
        lu.solve_in_place(&mut y1);
        let mut y2 = assemble_lambda_derivative(&u);
        lu.solve_in_place(&mut y2);

        let w_dot = |v: &[f64]| -> f64 {
            constraint.theta
                * grid.cell_weight()
                * constraint
                    .tangent_u
                    .iter()
                    .zip(v)
                    .map(|(t, x)| t * x)
                    .sum::<f64>()
        };
        let n_val = constraint.value(&grid, &u.u, u.lambda);
        let d = (1.0 - constraint.theta) * constraint.tangent_lambda;
        let denom = d - w_dot(&y2);
        if denom.abs() < 1e-300 {
            return Err(Error::SingularSystem { column: u.u.len() });
        }
        let dlambda = -(n_val + w_dot(&y1)) / denom;
        let du: Vec<f64> = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| a - dlambda * b)
            .collect();

        let mut damping = 1.0;
        loop {
            let mut trial = u.clone();
            for (t, d) in trial.u.iter_mut().zip(&du) {
                *t += damping * d;
            }
            trial.lambda += damping * dlambda;
            trial.clamp_dirichlet();
            match assemble_residual(&trial, model, force) {
                Ok(r_try) if merged_norm(&trial, &r_try) < rn => {
                    u = trial;
                    break;
                }
                Ok(_) | Err(Error::EllipticityExceeded { .. }) => {
                    damping *= 0.5;
                    if damping < MIN_DAMPING {
                        return Err(Error::StepTooLarge { residual: rn });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iterations,
        residual: *history.last().unwrap(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::ModelKind;
    use crate::grid::build_grid;
    use crate::reduced_ode::{homoclinic_seed, SeedParameters};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> (ConstitutiveModel, BodyForce) {
        (
            ConstitutiveModel::new(vec![1.0, -0.3, 0.2], ModelKind::ModelI, 10.0).unwrap(),
            BodyForce::cubic(-0.1).unwrap(),
        )
    }

    #[test]
    fn zero_guess_converges_immediately() {
        let (model, force) = reference();
        let g = build_grid(20.0, 32, 16).unwrap();
        let zero = SolutionField::zeros(g, 0.5);
        let (u, report) = newton_fixed_lambda(&zero, &model, &force, &Default::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(u.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_lambda_rejected() {
        let (model, force) = reference();
        let g = build_grid(20.0, 32, 16).unwrap();
        let bad = SolutionField::zeros(g, -0.5);
        assert!(matches!(
            newton_fixed_lambda(&bad, &model, &force, &Default::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn linear_problem_converges_in_one_step() {
        // W = q, b = (lambda - 1) z: the residual is affine in u, so a single
        // Newton step lands on the solution from any starting point
        let model = ConstitutiveModel::new(vec![1.0], ModelKind::ModelI, 10.0).unwrap();
        let force = BodyForce::linear();
        let g = build_grid(15.0, 24, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut guess = SolutionField::zeros(g.clone(), 0.5);
        for i in 0..=g.nx {
            for j in 0..g.ny {
                guess.set(
                    i,
                    j,
                    rng.random_range(-0.5..0.5) / (0.3 * g.x(i)).cosh() * g.y(j).cos(),
                );
            }
        }
        let (u, report) = newton_fixed_lambda(&guess, &model, &force, &Default::default()).unwrap();
        assert!(report.iterations <= 1, "took {} iterations", report.iterations);
        assert!(u.sup_norm() < 1e-10);
    }

    #[test]
    fn seed_solve_converges_and_preserves_dirichlet() {
        let (model, force) = reference();
        let g = build_grid(40.0, 80, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.15).unwrap();
        let guess = homoclinic_seed(&seed, &g);
        let (u, report) = newton_fixed_lambda(&guess, &model, &force, &Default::default()).unwrap();
        assert!(report.iterations <= 8);
        assert!(report.residual <= 1e-10 * (1.0 + u.sup_norm()));
        for j in 0..=g.ny {
            assert_eq!(u.at(g.nx, j).to_bits(), 0.0_f64.to_bits());
        }
        for i in 0..=g.nx {
            assert_eq!(u.at(i, g.ny).to_bits(), 0.0_f64.to_bits());
        }
        // and a second solve from the solution does not move it
        let (u2, report2) =
            newton_fixed_lambda(&u, &model, &force, &Default::default()).unwrap();
        assert_eq!(report2.iterations, 0);
        assert_eq!(u.u, u2.u);
    }

    #[test]
    fn arclength_zero_step_returns_reference_point() {
        let (model, force) = reference();
        let g = build_grid(40.0, 80, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.15).unwrap();
        let (point, _) =
            newton_fixed_lambda(&homoclinic_seed(&seed, &g), &model, &force, &Default::default())
                .unwrap();
        let tangent: Vec<f64> = point.u.iter().map(|_| 0.0).collect();
        let constraint = ArclengthConstraint::new(
            &g,
            point.u.clone(),
            point.lambda,
            tangent,
            1.0,
            0.0,
            0.9,
        );
        let (same, report) =
            newton_arclength(&point, &constraint, &model, &force, &Default::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(same.u, point.u);
        assert_eq!(same.lambda, point.lambda);
    }

    #[test]
    fn arclength_constraint_is_satisfied_at_convergence() {
        let (model, force) = reference();
        let g = build_grid(40.0, 80, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.15).unwrap();
        let (point, _) =
            newton_fixed_lambda(&homoclinic_seed(&seed, &g), &model, &force, &Default::default())
                .unwrap();
        // tangent from the seed family derivative
        let s2 = homoclinic_seed(
            &SeedParameters::for_model(&model, &force, 0.165).unwrap(),
            &g,
        );
        let tangent_u: Vec<f64> = s2.u.iter().zip(&point.u).map(|(a, b)| a - b).collect();
        let tangent_lambda = s2.lambda - point.lambda;
        let ds = 0.02;
        let constraint = ArclengthConstraint::new(
            &g,
            point.u.clone(),
            point.lambda,
            tangent_u,
            tangent_lambda,
            ds,
            0.9,
        );
        let mut guess = point.clone();
        for (g_, t) in guess.u.iter_mut().zip(&constraint.tangent_u) {
            *g_ += ds * t;
        }
        guess.lambda += ds * constraint.tangent_lambda;
        let (corrected, report) =
            newton_arclength(&guess, &constraint, &model, &force, &Default::default()).unwrap();
        assert!(report.residual <= 1e-10 * (1.0 + corrected.sup_norm()));
        let n = constraint.value(&g, &corrected.u, corrected.lambda);
        assert!(n.abs() <= 1e-10 * (1.0 + corrected.sup_norm()));
        assert!(corrected.lambda > point.lambda, "lambda should drift up");
    }
}
