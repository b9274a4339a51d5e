//! The x-independent limit state: shooting solver for the transversal ODE
//! `(W'(U_y^2) U_y)_y = b(U, lambda)` on `(-pi/2, pi/2)` with clamped ends,
//! and the front-energy identity used as the broadening oracle.
//!
//! Evenness reduces the problem to `[0, pi/2]` with `U(0) = mu`,
//! `U_y(0) = 0`. Since `d/dp [W'(p^2) p]` is exactly the ellipticity margin,
//! the ODE in first-order form reads `U' = p`, `p' = b(U, lambda) / e(p^2)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::constitutive::{BodyForce, ConstitutiveModel};
use crate::diagnostics::trapz_doubled;
use crate::error::{Error, Result};
use crate::grid::SolutionField;

/// RK4 substeps per y-grid cell; keeps the shooting error far below the PDE
/// discretization error.
const SUBSTEPS_PER_CELL: usize = 64;

/// An even solution of the transversal ODE sampled on the y-grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransversalProfile {
    pub lambda: f64,
    /// Centerline value `U(0)`.
    pub mu: f64,
    /// `U(y_j)` for `j = 0..=ny`.
    pub values: Vec<f64>,
    /// True for the identically-zero branch.
    pub trivial: bool,
}

/// Integrates the shooting problem from `U(0) = mu`, `U_y(0) = 0` and
/// returns the wall value `U(pi/2)` with the nodal samples.
pub(crate) fn shoot(
    model: &ConstitutiveModel,
    force: &BodyForce,
    lambda: f64,
    mu: f64,
    ny: usize,
) -> Result<(f64, Vec<f64>)> {
    let hy = FRAC_PI_2 / ny as f64;
    let h = hy / SUBSTEPS_PER_CELL as f64;
    let mut u = mu;
    let mut p = 0.0_f64;
    let mut values = Vec::with_capacity(ny + 1);
    values.push(u);
    let rhs = |u: f64, p: f64| -> Result<(f64, f64)> {
        let margin = model.margin_at(p * p);
        if margin <= 1e-12 {
            return Err(Error::Domain(format!(
                "transversal shooting lost ellipticity (margin {margin:.3e} at slope {p:.4})"
            )));
        }
        Ok((p, force.b(u, lambda) / margin))
    };
    for _cell in 0..ny {
        for _sub in 0..SUBSTEPS_PER_CELL {
            let (k1u, k1p) = rhs(u, p)?;
            let (k2u, k2p) = rhs(u + 0.5 * h * k1u, p + 0.5 * h * k1p)?;
            let (k3u, k3p) = rhs(u + 0.5 * h * k2u, p + 0.5 * h * k2p)?;
            let (k4u, k4p) = rhs(u + h * k3u, p + h * k3p)?;
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            if !u.is_finite() || u.abs() > 1e6 {
                return Err(Error::Divergence { x: u });
            }
        }
        values.push(u);
    }
    Ok((u, values))
}

/// Finds the nontrivial even transversal state near `mu_init` by Newton
/// iteration on the shooting function, with a local bracket sweep as
/// fallback. `mu_init = 0` returns the trivial branch.
pub fn limiting_profile(
    model: &ConstitutiveModel,
    force: &BodyForce,
    lambda: f64,
    mu_init: f64,
    ny: usize,
) -> Result<TransversalProfile> {
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!(
            "limiting profile needs lambda > 0 (got {lambda})"
        )));
    }
    if mu_init < 0.0 || !mu_init.is_finite() {
        return Err(Error::Precondition(format!(
            "mu_init must be nonnegative (got {mu_init})"
        )));
    }
    if mu_init == 0.0 {
        return Ok(TransversalProfile {
            lambda,
            mu: 0.0,
            values: vec![0.0; ny + 1],
            trivial: true,
        });
    }

    let eval = |mu: f64| shoot(model, force, lambda, mu, ny).map(|(s, _)| s);

    // Newton with a finite-difference slope, kept inside a generous window
    // around the initial guess so it cannot drift to the trivial root
    let mut mu = mu_init;
    let mut newton_root = None;
    for _ in 0..60 {
        let s = match eval(mu) {
            Ok(s) => s,
            Err(_) => break,
        };
        if s.abs() <= 1e-12 * (1.0 + mu.abs()) {
            newton_root = Some(mu);
            break;
        }
        let d = 1e-7 * (1.0 + mu.abs());
        let (sp, sm) = match (eval(mu + d), eval(mu - d)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => break,
        };
        let slope = (sp - sm) / (2.0 * d);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = mu - s / slope;
        if !next.is_finite() || next <= mu_init / 64.0 || next >= mu_init * 64.0 {
            break;
        }
        mu = next;
    }

    let root = match newton_root {
        Some(r) if r > 1e-8 * mu_init => r,
        _ => bracket_root(&eval, mu_init)?.ok_or(Error::NoTransversalState { lambda })?,
    };

    let (wall, values) = shoot(model, force, lambda, root, ny)?;
    debug_assert!(wall.abs() <= 1e-9 * (1.0 + root));
    Ok(TransversalProfile {
        lambda,
        mu: root,
        values,
        trivial: false,
    })
}

/// Geometric sweep over `mu_init * [1/4, 4]`; bisects the sign change
/// closest to `mu_init`.
fn bracket_root(
    eval: &dyn Fn(f64) -> Result<f64>,
    mu_init: f64,
) -> Result<Option<f64>> {
    const POINTS: usize = 129;
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(POINTS);
    for k in 0..POINTS {
        let t = -2.0 + 4.0 * k as f64 / (POINTS - 1) as f64;
        let mu = mu_init * 2.0_f64.powf(t);
        if let Ok(s) = eval(mu) {
            samples.push((mu, s));
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for w in samples.windows(2) {
        let (a, sa) = w[0];
        let (b, sb) = w[1];
        if sa == 0.0 {
            return Ok(Some(a));
        }
        if sa * sb < 0.0 {
            let dist = ((a * b).sqrt() / mu_init).ln().abs();
            if best.map_or(true, |(_, d)| dist < d) {
                best = Some((a, dist));
            }
        }
    }
    let Some((mut lo, _)) = best else {
        return Ok(None);
    };
    let mut hi = samples
        .iter()
        .find(|(m, _)| *m > lo)
        .map(|(m, _)| *m)
        .unwrap();
    let s_lo = eval(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let s_mid = eval(mid)?;
        if s_mid == 0.0 {
            return Ok(Some(mid));
        }
        if s_lo * s_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Front-energy integral
/// `int (W'(U_y^2) U_y^2 - W(U_y^2) + b(U) U - 2 B(U)) dy`;
/// identically zero on the trivial branch, strictly negative for any
/// nontrivial Model II profile, and vanishing at the broadening load.
pub fn front_identity(
    profile: &TransversalProfile,
    model: &ConstitutiveModel,
    force: &BodyForce,
) -> f64 {
    let ny = profile.values.len() - 1;
    let hy = FRAC_PI_2 / ny as f64;
    let uy = |j: usize| -> f64 {
        if j == 0 {
            0.0
        } else if j == ny {
            (3.0 * profile.values[j] - 4.0 * profile.values[j - 1] + profile.values[j - 2])
                / (2.0 * hy)
        } else {
            (profile.values[j + 1] - profile.values[j - 1]) / (2.0 * hy)
        }
    };
    let samples: Vec<f64> = (0..=ny)
        .map(|j| {
            let p = uy(j);
            let q = p * p;
            let u = profile.values[j];
            model.wp_at(q) * q - model.w_at(q) + force.b(u, profile.lambda) * u
                - 2.0 * force.bint(u, profile.lambda)
        })
        .collect();
    trapz_doubled(&samples, hy)
}

/// Normalized sup gap between the field's center column and the profile.
pub fn compare_center_profile(
    field: &SolutionField,
    profile: &TransversalProfile,
) -> Result<f64> {
    let ny = field.grid.ny;
    if profile.values.len() != ny + 1 {
        return Err(Error::GridMismatch(format!(
            "profile has {} samples for ny = {ny}",
            profile.values.len()
        )));
    }
    let mut gap = 0.0_f64;
    for j in 0..=ny {
        gap = gap.max((field.at(0, j) - profile.values[j]).abs());
    }
    let amp = field.amplitude();
    Ok(if amp > 0.0 { gap / amp } else { gap })
}
