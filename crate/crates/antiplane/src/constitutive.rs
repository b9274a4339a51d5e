//! Strain-energy laws of reduced polynomial type, odd polynomial live loads,
//! and the numerical verification of the Model I / Model II structural
//! hypotheses.
//!
//! The energy density is `W(q) = sum_i C_i q^i` with the normalization
//! `C_1 = 1`, where `q = |grad u|^2`. The governing operator is elliptic
//! exactly where the margin `e(q) = W'(q) + 2 q W''(q)` is positive: Model I
//! laws keep a uniform floor `xi1 > 0`, Model II laws lose ellipticity at a
//! finite shear `q1` where the margin crosses zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the ellipticity-loss root `q1`. It enters the
/// Model II termination logic, so it is kept at the sharp end of f64.
pub const Q1_ROOT_TOL: f64 = 1e-12;

/// Sample count used when a model is constructed (hypothesis sweeps accept
/// their own count).
const DEFAULT_SAMPLES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    ModelI,
    ModelII,
}

/// A reduced-polynomial strain-energy law together with its computed
/// ellipticity metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstitutiveModel {
    coeffs: Vec<f64>,
    kind: ModelKind,
    q_probe_max: f64,
    /// Sampled ellipticity floor over `[0, q_probe_max]` (Model I).
    xi1: Option<f64>,
    /// Ellipticity-loss shear (Model II), when the margin has a root.
    q1: Option<f64>,
}

/// The energy density and its derivatives at one shear value.
#[derive(Debug, Clone, Copy)]
pub struct EnergyEval {
    pub w: f64,
    pub wp: f64,
    pub wpp: f64,
    /// Ellipticity margin `W'(q) + 2 q W''(q)`.
    pub margin: f64,
}

impl ConstitutiveModel {
    /// Builds a model from polynomial coefficients `[C_1, C_2, ...]`.
    ///
    /// `C_1` must be exactly 1 (the normalization that makes `W'(0) = 1`).
    /// For Model II laws the ellipticity-loss shear is located at
    /// construction when the margin has a sign change on `[0, q_probe_max]`;
    /// absence is not an error here (verify_hypotheses reports it).
    pub fn new(coeffs: Vec<f64>, kind: ModelKind, q_probe_max: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidModel("no coefficients".into()));
        }
        if coeffs[0] != 1.0 {
            return Err(Error::InvalidModel(format!(
                "C_1 must be exactly 1 (got {})",
                coeffs[0]
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        if !q_probe_max.is_finite() || q_probe_max <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "q_probe_max must be positive (got {q_probe_max})"
            )));
        }
        let mut model = ConstitutiveModel {
            coeffs,
            kind,
            q_probe_max,
            xi1: None,
            q1: None,
        };
        match kind {
            ModelKind::ModelI => {
                let floor = probe_points(DEFAULT_SAMPLES, q_probe_max)
                    .into_iter()
                    .map(|q| model.margin_at(q))
                    .fold(f64::INFINITY, f64::min);
                model.xi1 = Some(floor);
            }
            ModelKind::ModelII => {
                model.q1 = model.locate_margin_root();
            }
        }
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn q_probe_max(&self) -> f64 {
        self.q_probe_max
    }

    /// Sampled ellipticity floor (Model I only).
    pub fn xi1(&self) -> Option<f64> {
        self.xi1
    }

    /// Ellipticity-loss shear (Model II only, when the margin has a root).
    pub fn q1(&self) -> Option<f64> {
        self.q1
    }

    /// Evaluates `W`, `W'`, `W''` and the ellipticity margin at `q >= 0`.
    pub fn evaluate(&self, q: f64) -> Result<EnergyEval> {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::Domain(format!(
                "energy evaluation needs finite q >= 0 (got {q})"
            )));
        }
        Ok(EnergyEval {
            w: self.w_at(q),
            wp: self.wp_at(q),
            wpp: self.wpp_at(q),
            margin: self.margin_at(q),
        })
    }

    // Unchecked fast paths for assembly and quadrature.

    #[inline]
    pub(crate) fn w_at(&self, q: f64) -> f64 {
        // Horner on W(q)/q, then multiply back.
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * q + c;
        }
        acc * q
    }

    #[inline]
    pub(crate) fn wp_at(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * q + (i + 1) as f64 * c;
        }
        acc
    }

    #[inline]
    pub(crate) fn wpp_at(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .take_while(|(i, _)| *i >= 1)
        {
            let n = (i + 1) as f64;
            acc = acc * q + n * (n - 1.0) * c;
        }
        acc
    }

    /// `e(q) = W'(q) + 2 q W''(q) = sum_i i (2i - 1) C_i q^(i-1)`.
    #[inline]
    pub(crate) fn margin_at(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            let n = (i + 1) as f64;
            acc = acc * q + n * (2.0 * n - 1.0) * c;
        }
        acc
    }

    #[inline]
    fn margin_derivative_at(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().rev().take_while(|(i, _)| *i >= 1) {
            let n = (i + 1) as f64;
            acc = acc * q + n * (2.0 * n - 1.0) * (n - 1.0) * c;
        }
        acc
    }

    /// Bracket the first sign change of the margin on `(0, q_probe_max]`,
    /// then bisect and polish with Newton to `Q1_ROOT_TOL`.
    fn locate_margin_root(&self) -> Option<f64> {
        let pts = probe_points(4096, self.q_probe_max);
        let mut prev_q = 0.0;
        let mut prev_m = self.margin_at(0.0);
        if prev_m <= 0.0 {
            return None; // margin(0) = C_1 = 1 by normalization; degenerate input
        }
        let mut bracket = None;
        for q in pts {
            let m = self.margin_at(q);
            if m <= 0.0 {
                bracket = Some((prev_q, prev_m, q));
                break;
            }
            prev_q = q;
            prev_m = m;
        }
        let (mut lo, _, mut hi) = bracket?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.margin_at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut root = 0.5 * (lo + hi);
        for _ in 0..8 {
            let m = self.margin_at(root);
            let d = self.margin_derivative_at(root);
            if d == 0.0 {
                break;
            }
            let next = root - m / d;
            if !next.is_finite() || (next - root).abs() < f64::EPSILON * root.abs() {
                root = next.is_finite().then_some(next).unwrap_or(root);
                break;
            }
            root = next;
        }
        (root > 0.0 && self.margin_at(root).abs() <= Q1_ROOT_TOL).then_some(root)
    }
}

/// Locates the ellipticity-loss shear `q1 > 0` with `|margin(q1)| <= 1e-12`.
///
/// Errors when the model is not Model II or when the margin never vanishes
/// on `[0, q_probe_max]` (a hardening law).
pub fn find_ellipticity_root(model: &ConstitutiveModel) -> Result<f64> {
    if model.kind != ModelKind::ModelII {
        return Err(Error::Precondition(
            "find_ellipticity_root needs a Model II law".into(),
        ));
    }
    model.q1.ok_or(Error::NoEllipticityLoss {
        q_probe_max: model.q_probe_max,
    })
}

/// Odd polynomial live load `b(z, lambda) = (lambda - 1) z + b1 z^3 + ...`,
/// restricted to degree <= 7. `odd_coeffs` holds the coefficients of
/// `z^3, z^5, z^7`; the linear coefficient is `lambda - 1` by definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodyForce {
    odd_coeffs: Vec<f64>,
}

/// The load, its z-derivative, and its antiderivative `B(z, lambda)` at one point.
#[derive(Debug, Clone, Copy)]
pub struct ForceEval {
    pub b: f64,
    pub bz: f64,
    pub bint: f64,
}

impl BodyForce {
    pub fn new(odd_coeffs: Vec<f64>) -> Result<Self> {
        if odd_coeffs.len() > 3 {
            return Err(Error::InvalidForce(format!(
                "at most 3 odd coefficients (degree 7), got {}",
                odd_coeffs.len()
            )));
        }
        if odd_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidForce("non-finite coefficient".into()));
        }
        if odd_coeffs.first().is_some_and(|&b1| b1 > 0.0) {
            return Err(Error::InvalidForce(format!(
                "b1 must be <= 0 (got {})",
                odd_coeffs[0]
            )));
        }
        Ok(BodyForce { odd_coeffs })
    }

    /// The simple harmonic load `b = (lambda - 1) z`.
    pub fn linear() -> Self {
        BodyForce { odd_coeffs: vec![] }
    }

    pub fn cubic(b1: f64) -> Result<Self> {
        BodyForce::new(vec![b1])
    }

    pub fn odd_coeffs(&self) -> &[f64] {
        &self.odd_coeffs
    }

    /// Coefficient of `z^3` (zero when absent).
    pub fn b1(&self) -> f64 {
        self.odd_coeffs.first().copied().unwrap_or(0.0)
    }

    /// Evaluates `b`, `b_z`, and `B(z, lambda) = int_0^z b(t, lambda) dt`.
    pub fn evaluate(&self, z: f64, lambda: f64) -> Result<ForceEval> {
        if !z.is_finite() || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "force evaluation needs finite inputs (z = {z}, lambda = {lambda})"
            )));
        }
        Ok(ForceEval {
            b: self.b(z, lambda),
            bz: self.bz(z, lambda),
            bint: self.bint(z, lambda),
        })
    }

    #[inline]
    pub(crate) fn b(&self, z: f64, lambda: f64) -> f64 {
        let z2 = z * z;
        let mut acc = 0.0;
        for &c in self.odd_coeffs.iter().rev() {
            acc = (acc + c) * z2;
        }
        (lambda - 1.0) * z + acc * z
    }

    #[inline]
    pub(crate) fn bz(&self, z: f64, lambda: f64) -> f64 {
        let z2 = z * z;
        let mut acc = 0.0;
        for (k, &c) in self.odd_coeffs.iter().enumerate().rev() {
            let deg = (2 * k + 3) as f64;
            acc = acc * z2 + deg * c;
        }
        (lambda - 1.0) + acc * z2
    }

    /// Second z-derivative; used by the Model II concavity check.
    #[inline]
    pub(crate) fn bzz(&self, z: f64) -> f64 {
        let z2 = z * z;
        let mut acc = 0.0;
        for (k, &c) in self.odd_coeffs.iter().enumerate().rev() {
            let deg = (2 * k + 3) as f64;
            acc = acc * z2 + deg * (deg - 1.0) * c;
        }
        acc * z
    }

    #[inline]
    pub(crate) fn bint(&self, z: f64, lambda: f64) -> f64 {
        let z2 = z * z;
        let mut acc = 0.0;
        for (k, &c) in self.odd_coeffs.iter().enumerate().rev() {
            let deg = (2 * k + 3) as f64;
            acc = (acc + c / (deg + 1.0)) * z2;
        }
        0.5 * (lambda - 1.0) * z2 + acc * z2
    }
}

/// Identifies which structural hypothesis a sampled violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Margin must stay positive: on all of `[0, q_probe_max]` for Model I,
    /// on `[0, q1)` for Model II.
    MarginPositive,
    /// Model II: the margin must actually vanish at a finite shear.
    MarginVanishes,
    /// Model I growth condition `q + c1 q^2 + c2 q^3 <= W(q)`.
    EnergyGrowth,
    /// Model II damping condition `q W'(q) - W(q) < 0` for `q > 0`.
    EnergyDeficit,
    /// Load lower bound `(lambda - 1) z + b1 z^3 <= b(z, lambda)` for `z >= 0`.
    ForceLowerBound,
    /// Model II: `b` concave for `z >= 0`.
    ForceConcavity,
    /// Standing assumption `b1 <= 0`.
    CubicCoefficientSign,
}

/// One sampled violation: which condition, where, and the offending value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    /// The sampled `q` (energy conditions) or `z` (load conditions).
    pub location: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub xi1: Option<f64>,
    pub q1: Option<f64>,
}

/// Sweeps the model-appropriate hypothesis set on a sampled grid.
///
/// Violations are data, not errors: the report lists every sampled failure.
/// `xi1` is the sampled minimum margin (Model I); `q1` comes from the
/// ellipticity root (Model II). Deterministic for a fixed sample count.
pub fn verify_hypotheses(
    model: &ConstitutiveModel,
    force: &BodyForce,
    samples: usize,
) -> Result<HypothesisReport> {
    if samples < 100 {
        return Err(Error::Precondition(format!(
            "hypothesis sweep needs at least 100 samples (got {samples})"
        )));
    }
    let mut violations = Vec::new();
    let qmax = model.q_probe_max();
    let q_samples = probe_points(samples, qmax);
    let mut xi1 = None;
    let mut q1 = None;

    match model.kind() {
        ModelKind::ModelI => {
            let mut floor = f64::INFINITY;
            for &q in &q_samples {
                let m = model.margin_at(q);
                floor = floor.min(m);
                if m <= 0.0 {
                    violations.push(Violation {
                        condition: Condition::MarginPositive,
                        location: q,
                        value: m,
                    });
                }
                // growth: q + c1 q^2 + c2 q^3 <= W(q); only degree > 3 tails
                // can break it, but sample it as stated.
                let c1 = model.coeffs().get(1).copied().unwrap_or(0.0);
                let c2 = model.coeffs().get(2).copied().unwrap_or(0.0);
                let cubic = q + c1 * q * q + c2 * q * q * q;
                let w = model.w_at(q);
                if cubic > w + 1e-12 * (1.0 + w.abs()) {
                    violations.push(Violation {
                        condition: Condition::EnergyGrowth,
                        location: q,
                        value: cubic - w,
                    });
                }
            }
            xi1 = Some(floor);
        }
        ModelKind::ModelII => {
            match model.q1() {
                Some(root) => {
                    q1 = Some(root);
                    // positivity strictly below the root
                    for &q in &probe_points(samples, root * (1.0 - 1e-6)) {
                        let m = model.margin_at(q);
                        if m <= 0.0 {
                            violations.push(Violation {
                                condition: Condition::MarginPositive,
                                location: q,
                                value: m,
                            });
                        }
                    }
                    let at_root = model.margin_at(root);
                    if at_root.abs() > Q1_ROOT_TOL {
                        violations.push(Violation {
                            condition: Condition::MarginVanishes,
                            location: root,
                            value: at_root,
                        });
                    }
                }
                None => violations.push(Violation {
                    condition: Condition::MarginVanishes,
                    location: qmax,
                    value: model.margin_at(qmax),
                }),
            }
            for &q in &q_samples {
                if q == 0.0 {
                    continue;
                }
                let deficit = q * model.wp_at(q) - model.w_at(q);
                if deficit >= 0.0 {
                    violations.push(Violation {
                        condition: Condition::EnergyDeficit,
                        location: q,
                        value: deficit,
                    });
                }
            }
        }
    }

    // Load conditions. The lower bound (1.6a) reduces to the degree >= 5 tail
    // being nonnegative for z >= 0, so it is lambda-free; concavity likewise.
    if force.b1() > 0.0 {
        violations.push(Violation {
            condition: Condition::CubicCoefficientSign,
            location: 0.0,
            value: force.b1(),
        });
    }
    let z_samples = probe_points(samples, qmax.sqrt().max(1.0));
    for &z in &z_samples {
        let tail = force.b(z, 1.0) - force.b1() * z * z * z;
        if tail < -1e-12 * (1.0 + z) {
            violations.push(Violation {
                condition: Condition::ForceLowerBound,
                location: z,
                value: tail,
            });
        }
        if model.kind() == ModelKind::ModelII {
            let curv = force.bzz(z);
            if curv > 0.0 {
                violations.push(Violation {
                    condition: Condition::ForceConcavity,
                    location: z,
                    value: curv,
                });
            }
        }
    }

    Ok(HypothesisReport {
        passed: violations.is_empty(),
        violations,
        xi1,
        q1,
    })
}

/// Uniform samples on `[0, max]` merged with Chebyshev-extrema samples,
/// which cluster near both ends of the range.
fn probe_points(samples: usize, max: f64) -> Vec<f64> {
    let n = samples.max(2);
    let mut pts = Vec::with_capacity(2 * n);
    for k in 0..=n {
        pts.push(max * k as f64 / n as f64);
    }
    for k in 0..=n {
        let t = (std::f64::consts::PI * k as f64 / n as f64).cos();
        pts.push(0.5 * max * (1.0 - t));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}
