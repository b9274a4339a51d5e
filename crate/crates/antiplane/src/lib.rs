//! Numerical continuation of anti-plane shear equilibria for generalized
//! neo-Hookean materials on a truncated infinite strip.
//!
//! The governing equation is the quasilinear scalar PDE
//!
//! ```text
//! div( W'(|grad u|^2) grad u ) - b(u, lambda) = 0   on R x (-pi/2, pi/2),
//! u = 0 on the clamped walls y = +-pi/2,
//! ```
//!
//! discretized in conservative form on the symmetry-reduced quarter strip
//! `[0, L] x [0, pi/2]`. Two constitutive classes are supported: uniformly
//! elliptic laws whose solution branch broadens (Model I), and softening laws
//! that lose ellipticity at a finite shear `q1` (Model II). Branches are
//! traced from an asymptotic homoclinic seed by pseudo-arclength
//! continuation, and every accepted point is checked against the analytic
//! structure of the problem: the conserved transversal Hamiltonian, the nodal
//! sign pattern, L^p/gradient/loading bounds, and (for broadening runs) the
//! one-dimensional limiting front profile.

pub mod assembly;
pub mod config;
pub mod constitutive;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod newton;
pub mod reduced_ode;
pub mod transversal;

pub use assembly::{assemble_jacobian, assemble_residual, extend_domain, SparseOperator};
pub use config::{parse_config, RunConfig};
pub use constitutive::{
    find_ellipticity_root, verify_hypotheses, BodyForce, ConstitutiveModel, HypothesisReport,
    ModelKind,
};
pub use continuation::{run_branch, Branch, BranchPoint, ContinuationConfig, TerminationReason};
pub use diagnostics::{compute_diagnostics, DiagnosticsRecord, NodalFlags};
pub use error::{Error, Result};
pub use grid::{build_grid, SolutionField, StripGrid};
pub use newton::{newton_arclength, newton_fixed_lambda, ArclengthConstraint, NewtonSettings};
pub use reduced_ode::{homoclinic_seed, SeedParameters};
pub use transversal::{limiting_profile, TransversalProfile};
