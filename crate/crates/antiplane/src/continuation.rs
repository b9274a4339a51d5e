//! Pseudo-arclength branch tracing from the asymptotic seed: secant
//! predictor, bordered Newton corrector, adaptive steps, the truncation-
//! pressure domain policy, and model-appropriate termination.
//!
//! Only the nodal sign check gates step acceptance; the analytic bound
//! checks are recorded per point but never gate, since their constants
//! depend on quantities the estimates leave implicit.

use serde::{Deserialize, Serialize};

use crate::assembly::{extend_domain, truncation_pressure};
use crate::constitutive::{verify_hypotheses, BodyForce, ConstitutiveModel};
use crate::diagnostics::{compute_diagnostics, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{SolutionField, StripGrid};
use crate::newton::{
    newton_arclength, newton_fixed_lambda, ArclengthConstraint, NewtonSettings,
};
use crate::reduced_ode::{homoclinic_seed, SeedParameters};

/// When the secant prediction of `e_min` would cross the Model II stopping
/// threshold, the step is retargeted to land near this fraction of it.
const MARGIN_TARGET_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    /// Model II: the sampled ellipticity margin dropped to the threshold.
    MarginStop,
    /// Model I: the centerline half width reached the stopping multiple.
    WidthStop,
    LambdaOutOfBounds,
    MaxSteps,
    DsUnderflow,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::MarginStop => "margin_stop",
            TerminationReason::WidthStop => "width_stop",
            TerminationReason::LambdaOutOfBounds => "lambda_out_of_bounds",
            TerminationReason::MaxSteps => "max_steps",
            TerminationReason::DsUnderflow => "ds_underflow",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationConfig {
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub lambda_max: f64,
    /// Model II stopping threshold on the minimum margin.
    pub margin_stop: Option<f64>,
    /// Model I stopping threshold on the centerline half width (absolute).
    pub width_stop: Option<f64>,
    /// Weight of the field block in the arclength metric.
    pub theta: f64,
    pub newton: NewtonSettings,
    /// Level fraction of the width metric.
    pub sigma: f64,
    /// Domain growth factor of the truncation policy.
    pub extension_factor: f64,
    /// Hard cap on the truncated half-length.
    pub max_length: f64,
    pub verbose: bool,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            ds_init: 0.05,
            ds_min: 1e-6,
            ds_max: 0.25,
            max_steps: 400,
            lambda_max: 2.0,
            margin_stop: None,
            width_stop: None,
            theta: 0.9,
            newton: NewtonSettings::default(),
            sigma: 0.5,
            extension_factor: 1.5,
            max_length: 400.0,
            verbose: false,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.ds_min && self.ds_min <= self.ds_init && self.ds_init <= self.ds_max) {
            return Err(Error::Precondition(format!(
                "need 0 < ds_min <= ds_init <= ds_max (got {}, {}, {})",
                self.ds_min, self.ds_init, self.ds_max
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Precondition(format!(
                "theta must be in (0, 1] (got {})",
                self.theta
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Precondition(format!(
                "sigma must be in (0, 1) (got {})",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// One accepted point: the converged field, arclength coordinate, its
/// diagnostics, and the corrector effort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPoint {
    pub field: SolutionField,
    pub s: f64,
    pub diagnostics: DiagnosticsRecord,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub termination: TerminationReason,
    /// Candidate step indices (1-based) rejected by the nodal gate.
    pub nodal_rejections: Vec<usize>,
    /// Number of domain extensions performed.
    pub extensions: usize,
}

impl Branch {
    pub fn last(&self) -> &BranchPoint {
        self.points.last().expect("branch has at least the seed")
    }
}

/// Secant predictor. With two compatible points the tangent is their
/// normalized difference; a single point (or a degenerate secant) falls
/// back to the pure lambda-increment direction.
pub fn predictor(
    tail: &[&BranchPoint],
    ds: f64,
    theta: f64,
) -> Result<(SolutionField, ArclengthConstraint)> {
    let last = *tail.last().ok_or_else(|| {
        Error::Precondition("predictor needs at least one branch point".into())
    })?;
    let grid = &last.field.grid;
    let (tangent_u, tangent_lambda) = if tail.len() >= 2 {
        let prev = tail[tail.len() - 2];
        if prev.field.u.len() == last.field.u.len() {
            let tu: Vec<f64> = last
                .field
                .u
                .iter()
                .zip(&prev.field.u)
                .map(|(a, b)| a - b)
                .collect();
            (tu, last.field.lambda - prev.field.lambda)
        } else {
            (vec![0.0; last.field.u.len()], 1.0)
        }
    } else {
        (vec![0.0; last.field.u.len()], 1.0)
    };
    let constraint = ArclengthConstraint::new(
        grid,
        last.field.u.clone(),
        last.field.lambda,
        tangent_u,
        tangent_lambda,
        ds,
        theta,
    );
    let guess = predict_from(&last.field, &constraint, ds);
    Ok((guess, constraint))
}

fn predict_from(
    field: &SolutionField,
    constraint: &ArclengthConstraint,
    ds: f64,
) -> SolutionField {
    let mut guess = field.clone();
    for (g, t) in guess.u.iter_mut().zip(&constraint.tangent_u) {
        *g += ds * t;
    }
    guess.lambda += ds * constraint.tangent_lambda;
    guess
}

struct Tracer<'a> {
    config: &'a ContinuationConfig,
    model: &'a ConstitutiveModel,
    force: &'a BodyForce,
    points: Vec<BranchPoint>,
    nodal_rejections: Vec<usize>,
    extensions: usize,
    // working state (previous field lives on the current grid)
    prev_u: Vec<f64>,
    prev_lambda: f64,
    tangent_u: Vec<f64>,
    tangent_lambda: f64,
    ds: f64,
}

impl<'a> Tracer<'a> {
    fn cur(&self) -> &BranchPoint {
        self.points.last().unwrap()
    }

    fn termination_check(&self) -> Option<TerminationReason> {
        let d = &self.cur().diagnostics;
        let lambda = self.cur().field.lambda;
        if let Some(stop) = self.config.margin_stop {
            if d.e_min <= stop {
                return Some(TerminationReason::MarginStop);
            }
        }
        if let Some(stop) = self.config.width_stop {
            if d.width_half >= stop {
                return Some(TerminationReason::WidthStop);
            }
        }
        if !(lambda > 0.0 && lambda < self.config.lambda_max) {
            return Some(TerminationReason::LambdaOutOfBounds);
        }
        None
    }

    /// Applies the truncation policy to the current point. Both the working
    /// field and the remembered previous field move to the extended grid, so
    /// the secant tangent stays consistent.
    fn relieve_truncation(&mut self) -> Result<()> {
        loop {
            let cur = self.points.last_mut().unwrap();
            let length = cur.field.grid.length;
            if !truncation_pressure(&cur.field) || length >= self.config.max_length {
                return Ok(());
            }
            let l_new = (length * self.config.extension_factor).min(self.config.max_length);
            if self.config.verbose {
                eprintln!("truncation pressure: extending domain {length} -> {l_new}");
            }
            let extended = extend_domain(&cur.field, l_new)?;
            let (corrected, report) =
                newton_fixed_lambda(&extended, self.model, self.force, &self.config.newton)?;
            let diagnostics = compute_diagnostics(
                &corrected,
                self.model,
                self.force,
                self.config.sigma,
                Some(report.residual),
            )?;
            cur.field = corrected;
            cur.diagnostics = diagnostics;
            self.extensions += 1;

            let prev_field = SolutionField {
                grid: StripGrid {
                    length,
                    nx: (length / cur.field.grid.hx).round() as usize,
                    ny: cur.field.grid.ny,
                    hx: cur.field.grid.hx,
                    hy: cur.field.grid.hy,
                },
                u: std::mem::take(&mut self.prev_u),
                lambda: self.prev_lambda,
            };
            self.prev_u = extend_domain(&prev_field, l_new)?.u;
            self.refresh_tangent();
        }
    }

    /// Secant tangent from the working pair, normalized in the branch
    /// metric; degenerate secants fall back to the lambda increment.
    fn refresh_tangent(&mut self) {
        let cur = self.points.last().unwrap();
        let tu: Vec<f64> = cur
            .field
            .u
            .iter()
            .zip(&self.prev_u)
            .map(|(a, b)| a - b)
            .collect();
        let tl = cur.field.lambda - self.prev_lambda;
        let normalized = ArclengthConstraint::new(
            &cur.field.grid,
            Vec::new(),
            0.0,
            tu,
            tl,
            0.0,
            self.config.theta,
        );
        self.tangent_u = normalized.tangent_u;
        self.tangent_lambda = normalized.tangent_lambda;
    }

    /// Margin-aware step cap near the Model II stopping threshold: aim the
    /// crossing step at `MARGIN_TARGET_FRACTION * margin_stop` using the
    /// secant slope of `e_min(s)`.
    fn capped_step(&self) -> f64 {
        let ds = self.ds;
        let (Some(stop), true) = (self.config.margin_stop, self.points.len() >= 2) else {
            return ds;
        };
        let n = self.points.len();
        let (a, b) = (&self.points[n - 2], &self.points[n - 1]);
        let ds_last = b.s - a.s;
        let drop = a.diagnostics.e_min - b.diagnostics.e_min;
        if ds_last <= 0.0 || drop <= 0.0 {
            return ds;
        }
        let slope = drop / ds_last;
        let e_prev = b.diagnostics.e_min;
        if e_prev - slope * ds < stop {
            let target = (e_prev - MARGIN_TARGET_FRACTION * stop) / slope;
            target.max(self.config.ds_min).min(ds)
        } else {
            ds
        }
    }

    /// A margin crossing that lands in the upper quarter of the stopping
    /// band is under-resolved; up to two targeted refinement steps carry the
    /// point into the collapse before the stop is declared.
    fn margin_crossing_is_shallow(&self) -> bool {
        match self.config.margin_stop {
            Some(stop) => self.cur().diagnostics.e_min > 0.75 * stop,
            None => false,
        }
    }

    fn trace(&mut self) -> Result<TerminationReason> {
        if let Some(reason) = self.termination_check() {
            if reason != TerminationReason::MarginStop || !self.margin_crossing_is_shallow() {
                return Ok(reason);
            }
        }
        let mut margin_refinements = 0usize;
        let mut accepted = self.points.len() - 1;
        while accepted < self.config.max_steps {
            let mut ds_try = self.capped_step();
            let outcome = loop {
                let cur = self.cur();
                let constraint = ArclengthConstraint {
                    u_ref: cur.field.u.clone(),
                    lambda_ref: cur.field.lambda,
                    tangent_u: self.tangent_u.clone(),
                    tangent_lambda: self.tangent_lambda,
                    ds: ds_try,
                    theta: self.config.theta,
                };
                let guess = predict_from(&cur.field, &constraint, ds_try);
                let attempt = newton_arclength(
                    &guess,
                    &constraint,
                    self.model,
                    self.force,
                    &self.config.newton,
                )
                .and_then(|(field, report)| {
                    let diagnostics = compute_diagnostics(
                        &field,
                        self.model,
                        self.force,
                        self.config.sigma,
                        Some(report.residual),
                    )?;
                    Ok((field, report, diagnostics))
                });
                match attempt {
                    Ok((field, report, diagnostics)) => {
                        if diagnostics.nodal.all() {
                            break Some((field, report, diagnostics));
                        }
                        // reject and retry shorter, like a failed solve
                        self.nodal_rejections.push(accepted + 1);
                        if self.config.verbose {
                            eprintln!(
                                "step {}: nodal rejection at ds = {ds_try:.3e}",
                                accepted + 1
                            );
                        }
                    }
                    Err(Error::NonConvergence { .. })
                    | Err(Error::StepTooLarge { .. })
                    | Err(Error::SingularSystem { .. })
                    | Err(Error::EllipticityExceeded { .. }) => {}
                    Err(fatal) => return Err(fatal),
                }
                ds_try *= 0.5;
                self.ds = ds_try;
                if ds_try < self.config.ds_min {
                    break None;
                }
            };
            let Some((field, report, diagnostics)) = outcome else {
                return Ok(TerminationReason::DsUnderflow);
            };

            let s = self.cur().s + ds_try;
            self.prev_u = self.cur().field.u.clone();
            self.prev_lambda = self.cur().field.lambda;
            self.points.push(BranchPoint {
                field,
                s,
                diagnostics,
                newton_iterations: report.iterations,
            });
            accepted += 1;
            if self.config.verbose {
                let p = self.cur();
                eprintln!(
                    "step {accepted}: s = {:.3}, lambda = {:.5}, amp = {:.4}, width = {:.1}, e_min = {:.4}, iters = {}",
                    p.s,
                    p.field.lambda,
                    p.diagnostics.amplitude,
                    p.diagnostics.width_half,
                    p.diagnostics.e_min,
                    p.newton_iterations
                );
            }

            if report.iterations <= 3 {
                self.ds = (2.0 * ds_try).min(self.config.ds_max);
            } else {
                self.ds = ds_try;
            }

            self.relieve_truncation()?;
            self.refresh_tangent();

            if let Some(reason) = self.termination_check() {
                if reason == TerminationReason::MarginStop
                    && self.margin_crossing_is_shallow()
                    && margin_refinements < 2
                {
                    margin_refinements += 1;
                    continue;
                }
                return Ok(reason);
            }
        }
        Ok(TerminationReason::MaxSteps)
    }
}

/// Traces the global branch from the asymptotic seed.
///
/// The hypothesis sweep must pass for the chosen model class; the seed is
/// corrected at fixed `lambda = eps^2`, relieved of truncation pressure,
/// and stepping proceeds with the sign of `ds` chosen so that `lambda`
/// initially increases.
pub fn run_branch(
    config: &ContinuationConfig,
    model: &ConstitutiveModel,
    force: &BodyForce,
    grid: &StripGrid,
    seed: &SeedParameters,
) -> Result<Branch> {
    config.validate()?;
    let report = verify_hypotheses(model, force, 1024)?;
    if !report.passed {
        let sample = report
            .violations
            .first()
            .map(|v| format!("{:?} at {:.4} (value {:.4e})", v.condition, v.location, v.value))
            .unwrap_or_default();
        return Err(Error::Precondition(format!(
            "hypothesis sweep failed with {} violations, first: {sample}",
            report.violations.len()
        )));
    }

    let seed_field = homoclinic_seed(seed, grid);
    let (corrected, newton_report) =
        newton_fixed_lambda(&seed_field, model, force, &config.newton)?;
    let diagnostics = compute_diagnostics(
        &corrected,
        model,
        force,
        config.sigma,
        Some(newton_report.residual),
    )?;
    if !diagnostics.nodal.all() {
        return Err(Error::Precondition(format!(
            "seed point fails the nodal check: {:?}",
            diagnostics.nodal
        )));
    }

    let mut tracer = Tracer {
        config,
        model,
        force,
        points: vec![BranchPoint {
            field: corrected,
            s: 0.0,
            diagnostics,
            newton_iterations: newton_report.iterations,
        }],
        nodal_rejections: Vec::new(),
        extensions: 0,
        prev_u: Vec::new(),
        prev_lambda: 0.0,
        tangent_u: Vec::new(),
        tangent_lambda: 0.0,
        ds: config.ds_init,
    };

    // initial working pair: pretend the previous point was the seed itself
    // so truncation relief has a consistent companion field
    tracer.prev_u = tracer.cur().field.u.clone();
    tracer.prev_lambda = tracer.cur().field.lambda;
    tracer.relieve_truncation()?;

    // first tangent: seed-family derivative in eps, sampled on the working
    // grid (lambda = eps^2 increases along it by construction)
    let working_grid = tracer.cur().field.grid.clone();
    let s_lo = homoclinic_seed(seed, &working_grid);
    let s_hi = homoclinic_seed(
        &SeedParameters {
            epsilon: 1.1 * seed.epsilon,
            alpha: seed.alpha,
        },
        &working_grid,
    );
    let tangent_u: Vec<f64> = s_hi.u.iter().zip(&s_lo.u).map(|(a, b)| a - b).collect();
    let tangent_lambda = s_hi.lambda - s_lo.lambda;
    let normalized = ArclengthConstraint::new(
        &working_grid,
        Vec::new(),
        0.0,
        tangent_u,
        tangent_lambda,
        0.0,
        config.theta,
    );
    tracer.tangent_u = normalized.tangent_u;
    tracer.tangent_lambda = normalized.tangent_lambda;

    let termination = tracer.trace()?;
    Ok(Branch {
        points: tracer.points,
        termination,
        nodal_rejections: tracer.nodal_rejections,
        extensions: tracer.extensions,
    })
}

/// Resumes tracing from recorded branch points (at least one; two give the
/// secant direction). Reproduces the continuation of the original run
/// within corrector tolerance.
pub fn resume_branch(
    mut points: Vec<BranchPoint>,
    config: &ContinuationConfig,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> Result<Branch> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::Precondition("resume needs at least one point".into()));
    }
    // bring the penultimate point onto the final grid if an extension
    // happened in between
    let (prev_u, prev_lambda) = if points.len() >= 2 {
        let cur_grid = points.last().unwrap().field.grid.clone();
        let prev = &points[points.len() - 2];
        let prev_field = if prev.field.grid.nx != cur_grid.nx {
            extend_domain(&prev.field, cur_grid.length)?
        } else {
            prev.field.clone()
        };
        (prev_field.u, prev_field.lambda)
    } else {
        let last = points.last().unwrap();
        (last.field.u.clone(), last.field.lambda)
    };
    let mut tracer = Tracer {
        config,
        model,
        force,
        points: std::mem::take(&mut points),
        nodal_rejections: Vec::new(),
        extensions: 0,
        prev_u,
        prev_lambda,
        tangent_u: Vec::new(),
        tangent_lambda: 0.0,
        ds: config.ds_init,
    };
    tracer.refresh_tangent();
    let termination = tracer.trace()?;
    Ok(Branch {
        points: tracer.points,
        termination,
        nodal_rejections: tracer.nodal_rejections,
        extensions: tracer.extensions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::ModelKind;
    use crate::grid::build_grid;

    fn reference() -> (ConstitutiveModel, BodyForce) {
        (
            ConstitutiveModel::new(vec![1.0, -0.3, 0.2], ModelKind::ModelI, 10.0).unwrap(),
            BodyForce::cubic(-0.1).unwrap(),
        )
    }

    fn small_config(max_steps: usize) -> ContinuationConfig {
        ContinuationConfig {
            ds_init: 0.05,
            ds_max: 0.2,
            max_steps,
            // keep the toy domain fixed so tests stay quick
            max_length: 30.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_steps_returns_seed_only() {
        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let branch = run_branch(&small_config(0), &model, &force, &grid, &seed).unwrap();
        assert_eq!(branch.points.len(), 1);
        assert_eq!(branch.termination, TerminationReason::MaxSteps);
        assert_eq!(branch.points[0].s, 0.0);
    }

    #[test]
    fn short_branch_is_monotone_in_s_and_lambda_increases_first() {
        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let branch = run_branch(&small_config(6), &model, &force, &grid, &seed).unwrap();
        assert!(branch.points.len() >= 4, "{} points", branch.points.len());
        for w in branch.points.windows(2) {
            assert!(w[1].s > w[0].s);
        }
        assert!(
            branch.points[1].field.lambda > branch.points[0].field.lambda,
            "lambda must initially increase"
        );
        for p in &branch.points {
            assert!(p.diagnostics.nodal.all());
            assert!(p.field.lambda > 0.0);
        }
    }

    #[test]
    fn hypothesis_failure_blocks_the_run() {
        let model =
            ConstitutiveModel::new(vec![1.0, -1.0, 0.2], ModelKind::ModelI, 10.0).unwrap();
        let force = BodyForce::cubic(-0.1).unwrap();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        assert!(matches!(
            run_branch(&small_config(5), &model, &force, &grid, &seed),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn model_ii_short_run_stops_on_margin() {
        let model = ConstitutiveModel::new(vec![1.0, -0.5], ModelKind::ModelII, 10.0).unwrap();
        let force = BodyForce::linear();
        let grid = build_grid(30.0, 90, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.15).unwrap();
        let config = ContinuationConfig {
            ds_init: 0.02,
            ds_max: 0.08,
            max_steps: 120,
            margin_stop: Some(0.5),
            max_length: 30.0,
            ..Default::default()
        };
        let branch = run_branch(&config, &model, &force, &grid, &seed).unwrap();
        assert_eq!(branch.termination, TerminationReason::MarginStop);
        let last = branch.last();
        assert!(last.diagnostics.e_min <= 0.5);
        assert!(last.diagnostics.e_min > 0.0, "guard keeps the margin positive");
    }

    #[test]
    fn predictor_collinear_extrapolation() {
        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let branch = run_branch(&small_config(2), &model, &force, &grid, &seed).unwrap();
        let tail: Vec<&BranchPoint> = branch.points.iter().collect();
        let a = &branch.points[branch.points.len() - 2];
        let b = branch.last();
        // step by exactly the metric distance between the last two points:
        // the linear prediction doubles the difference
        let du: Vec<f64> = b.field.u.iter().zip(&a.field.u).map(|(x, y)| x - y).collect();
        let ds = crate::newton::metric_norm(
            &b.field.grid,
            &du,
            b.field.lambda - a.field.lambda,
            0.9,
        );
        let (guess, _) = predictor(&tail, ds, 0.9).unwrap();
        for k in 0..guess.u.len() {
            let expect = 2.0 * b.field.u[k] - a.field.u[k];
            assert!(
                (guess.u[k] - expect).abs() <= 1e-10 * (1.0 + expect.abs()),
                "node {k}"
            );
        }
        let expect_lambda = 2.0 * b.field.lambda - a.field.lambda;
        assert!((guess.lambda - expect_lambda).abs() <= 1e-12);
    }

    #[test]
    fn predictor_degenerate_secant_falls_back_to_lambda() {
        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let branch = run_branch(&small_config(0), &model, &force, &grid, &seed).unwrap();
        let p = branch.last();
        let tail = [p, p]; // identical points: zero secant
        let (guess, constraint) = predictor(&tail, 0.01, 0.9).unwrap();
        assert!(constraint.tangent_u.iter().all(|&t| t == 0.0));
        assert!(constraint.tangent_lambda > 0.0);
        assert!(guess.lambda > p.field.lambda);
    }

    #[test]
    fn sign_of_ds_flips_lambda_drift() {
        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let branch = run_branch(&small_config(2), &model, &force, &grid, &seed).unwrap();
        let tail: Vec<&BranchPoint> = branch.points.iter().collect();
        for (ds, up) in [(0.02, true), (-0.02, false)] {
            let (guess, constraint) = predictor(&tail, ds, 0.9).unwrap();
            let (corrected, _) =
                newton_arclength(&guess, &constraint, &model, &force, &Default::default())
                    .unwrap();
            let drift = corrected.lambda - branch.last().field.lambda;
            assert_eq!(drift > 0.0, up, "ds = {ds}: drift {drift}");
        }
    }

    #[test]
    fn consecutive_points_sit_one_step_apart_in_the_branch_metric() {
        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let branch = run_branch(&small_config(6), &model, &force, &grid, &seed).unwrap();
        for w in branch.points.windows(2) {
            let ds = w[1].s - w[0].s;
            let du: Vec<f64> = w[1]
                .field
                .u
                .iter()
                .zip(&w[0].field.u)
                .map(|(a, b)| a - b)
                .collect();
            let dist = crate::newton::metric_norm(
                &w[1].field.grid,
                &du,
                w[1].field.lambda - w[0].field.lambda,
                0.9,
            );
            // the corrector enforces the tangent projection exactly; the
            // full metric distance matches it up to branch curvature
            assert!(
                (dist - ds).abs() <= 0.1 * ds,
                "step distance {dist} vs accepted ds {ds}"
            );
        }
    }

    #[test]
    fn resume_handles_points_straddling_an_extension() {
        use crate::assembly::extend_domain;
        use crate::diagnostics::compute_diagnostics;

        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let settings = crate::newton::NewtonSettings::default();
        let (a, rep_a) =
            crate::newton::newton_fixed_lambda(&homoclinic_seed(&seed, &grid), &model, &force, &settings)
                .unwrap();
        let wide = extend_domain(&a, 45.0).unwrap();
        let (b, rep_b) = crate::newton::newton_fixed_lambda(&wide, &model, &force, &settings).unwrap();
        let mk = |field: SolutionField, s: f64, iters: usize, res: f64| BranchPoint {
            diagnostics: compute_diagnostics(&field, &model, &force, 0.5, Some(res)).unwrap(),
            field,
            s,
            newton_iterations: iters,
        };
        // the saved pair lives on different grids, as recorded runs do when
        // the truncation policy fires between acceptances
        let points = vec![
            mk(a, 0.0, rep_a.iterations, rep_a.residual),
            mk(b, 0.01, rep_b.iterations, rep_b.residual),
        ];
        let mut cfg = small_config(2);
        cfg.max_length = 45.0;
        let resumed = resume_branch(points, &cfg, &model, &force).unwrap();
        assert!(resumed.points.len() >= 3);
        let last = resumed.last();
        assert_eq!(last.field.grid.length, 45.0);
        assert!(last.diagnostics.nodal.all());
    }

    #[test]
    fn resume_reproduces_the_branch() {
        let (model, force) = reference();
        let grid = build_grid(30.0, 64, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.2).unwrap();
        let full = run_branch(&small_config(8), &model, &force, &grid, &seed).unwrap();
        assert!(full.points.len() >= 8);

        let prefix: Vec<BranchPoint> = full.points[..5].to_vec();
        let mut cfg = small_config(8);
        // resumed run consumes the remaining budget relative to the prefix
        cfg.max_steps = full.points.len() - 1 - 4;
        cfg.ds_init = full.points[5].s - full.points[4].s;
        let resumed = resume_branch(prefix, &cfg, &model, &force).unwrap();
        for (a, b) in resumed.points.iter().skip(5).zip(full.points.iter().skip(5)) {
            assert!(
                (a.field.lambda - b.field.lambda).abs() <= 1e-7,
                "lambda {} vs {}",
                a.field.lambda,
                b.field.lambda
            );
            assert!(
                (a.diagnostics.amplitude - b.diagnostics.amplitude).abs() <= 1e-7,
                "amplitude mismatch"
            );
        }
    }
}
