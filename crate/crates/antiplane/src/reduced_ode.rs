//! Leading-order center-manifold dynamics: the planar ODE, its explicit
//! homoclinic orbit, and the two-dimensional seed field that starts
//! continuation.
//!
//! At loading `lambda = eps^2` the centerline displacement obeys, to leading
//! order, `v'' = eps^2 v + (3 (b1 + 2 c1) / 4) v^3`. Substituting the sech
//! ansatz fixes the amplitude `alpha = sqrt(8 / (3 |b1 + 2 c1|))`, and in the
//! stretched variables `X = eps x`, `v = eps V`, `v_x = eps^2 W` the dynamics
//! reduce to the planar system `V_X = W`, `W_X = V - k V^3`.

use crate::constitutive::{BodyForce, ConstitutiveModel};
use crate::error::{Error, Result};
use crate::grid::{SolutionField, StripGrid};

/// State of the rescaled planar system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarState {
    pub v: f64,
    pub w: f64,
    /// Stretched axial coordinate `X = eps * x`.
    pub x: f64,
}

/// Seed data for one point on the local curve: `lambda = epsilon^2` and the
/// sech amplitude fixed by the reduced equation.
#[derive(Debug, Clone, Copy)]
pub struct SeedParameters {
    pub epsilon: f64,
    pub alpha: f64,
}

impl SeedParameters {
    /// Derives the amplitude from the model's cubic coefficients.
    ///
    /// Requires the homoclinic regime `b1 + 2 c1 < 0`; the complementary
    /// sign produces fronts and has no localized seed.
    pub fn for_model(
        model: &ConstitutiveModel,
        force: &BodyForce,
        epsilon: f64,
    ) -> Result<SeedParameters> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Precondition(format!(
                "seed epsilon must be positive (got {epsilon})"
            )));
        }
        let c1 = model.coeffs().get(1).copied().unwrap_or(0.0);
        let sum = force.b1() + 2.0 * c1;
        if sum >= 0.0 {
            return Err(Error::FrontRegime { sum });
        }
        Ok(SeedParameters {
            epsilon,
            alpha: (8.0 / (3.0 * sum.abs())).sqrt(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// `k` for which the planar cubic matches this amplitude: the orbit
    /// `sqrt(2/k) sech` has amplitude `alpha` when `k = 2 / alpha^2`.
    pub fn planar_k(&self) -> f64 {
        2.0 / (self.alpha * self.alpha)
    }

    /// Centerline half-maximum width of the sech profile, `2 arccosh(2) / eps`.
    pub fn width_half(&self) -> f64 {
        2.0 * 2.0_f64.acosh() / self.epsilon
    }
}

/// Samples `u = alpha eps sech(eps x) cos(y)` on the grid, with the clamped
/// wall row zeroed exactly.
pub fn homoclinic_seed(params: &SeedParameters, grid: &StripGrid) -> SolutionField {
    let mut field = SolutionField::zeros(grid.clone(), params.lambda());
    let a = params.alpha * params.epsilon;
    for i in 0..=grid.nx {
        let sech = 1.0 / (params.epsilon * grid.x(i)).cosh();
        for j in 0..grid.ny {
            field.set(i, j, a * sech * grid.y(j).cos());
        }
        // wall row stays exactly zero
    }
    field
}

/// Right-hand side of the planar system at leading order:
/// `V_X = W`, `W_X = V - k V^3`.
pub fn rhs_planar(state: &PlanarState, k: f64) -> (f64, f64) {
    (state.w, state.v - k * state.v * state.v * state.v)
}

/// The explicit homoclinic orbit `V = sqrt(2/k) sech X`,
/// `W = -sqrt(2/k) sech X tanh X`.
pub fn closed_form_orbit(x: f64, k: f64) -> PlanarState {
    let a = (2.0 / k).sqrt();
    let sech = 1.0 / x.cosh();
    PlanarState {
        v: a * sech,
        w: -a * sech * x.tanh(),
        x,
    }
}

/// First integral of the leading-order system,
/// `E = W^2/2 - V^2/2 + k V^4/4`; zero on the homoclinic orbit.
pub fn planar_energy(state: &PlanarState, k: f64) -> f64 {
    let v2 = state.v * state.v;
    0.5 * state.w * state.w - 0.5 * v2 + 0.25 * k * v2 * v2
}

/// Classical RK4 on the planar system from `s0.x` to `x_end` with step `h`
/// (sign handled internally). State accumulation is Neumaier-compensated so
/// order measurements stay above the rounding floor.
///
/// Errors when the state norm exceeds 1e6 (escaped the homoclinic
/// neighborhood) or the requested step count exceeds 1e7.
pub fn integrate_planar(
    s0: &PlanarState,
    k: f64,
    x_end: f64,
    h: f64,
) -> Result<Vec<PlanarState>> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("step must be positive, got {h}")));
    }
    let span = x_end - s0.x;
    let steps = (span.abs() / h).round() as u64;
    if steps > 10_000_000 {
        return Err(Error::Precondition(format!(
            "{steps} steps exceed the 1e7 budget"
        )));
    }
    let dir = if span < 0.0 { -h } else { h };
    let f = |v: f64, w: f64| (w, v - k * v * v * v);

    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(*s0);
    let (mut v, mut w) = (s0.v, s0.w);
    let (mut cv, mut cw) = (0.0_f64, 0.0_f64);
    for n in 0..steps {
        let (k1v, k1w) = f(v, w);
        let (k2v, k2w) = f(v + 0.5 * dir * k1v, w + 0.5 * dir * k1w);
        let (k3v, k3w) = f(v + 0.5 * dir * k2v, w + 0.5 * dir * k2w);
        let (k4v, k4w) = f(v + dir * k3v, w + dir * k3w);
        let dv = dir / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let dw = dir / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        (v, cv) = neumaier_add(v, cv, dv);
        (w, cw) = neumaier_add(w, cw, dw);
        let x = s0.x + (n + 1) as f64 * dir;
        if v.abs().max(w.abs()) > 1e6 || !v.is_finite() || !w.is_finite() {
            return Err(Error::Divergence { x });
        }
        out.push(PlanarState {
            v: v + cv,
            w: w + cw,
            x,
        });
    }
    Ok(out)
}

#[inline]
fn neumaier_add(sum: f64, comp: f64, term: f64) -> (f64, f64) {
    let t = sum + term;
    let comp = if sum.abs() >= term.abs() {
        comp + ((sum - t) + term)
    } else {
        comp + ((term - t) + sum)
    };
    (t, comp)
}
