//! Centralized numerical tolerances.
//!
//! Every threshold used by the library is defined here so that invariant
//! checks, solvers and tests agree on what "satisfied" means.

/// Orthonormality defect allowed for a rotation matrix (‖MᵀM − I‖ and |det − 1|).
pub const ROT_ORTHO: f64 = 1e-9;

/// Unit-norm defect allowed for points of the embedded sphere.
pub const UNIT: f64 = 1e-9;

/// Tangency defect allowed for sphere tangents/covectors (|v·e|).
pub const TANGENCY: f64 = 1e-9;

/// Symmetric part allowed when reading a skew matrix back to a vector.
pub const SKEW: f64 = 1e-9;

/// Below this angle the rotation exponential switches to its Taylor form.
pub const EXP_TAYLOR_SWITCH: f64 = 1e-6;

/// Acceptance threshold for assembled equation residuals at a solved step.
pub const RESIDUAL_ACCEPT: f64 = 1e-10;

/// Least-squares residual above which a multiplier/derivative solve is
/// declared inconsistent.
pub const SOLVE_RESIDUAL: f64 = 1e-8;

/// Constraint drift alarm during integration (accepted states).
pub const DRIFT_ALARM: f64 = 1e-6;

/// Coarse guard inside the derivative solvers. Explicit integrator stages
/// sit O(dt²) off the constraint manifold, so the per-evaluation gate must
/// stay well above the accepted-state alarm.
pub const SOLVE_PRECONDITION: f64 = 1e-3;

/// Central finite-difference step for fiber/base derivatives.
pub const FD_STEP_DERIVATIVE: f64 = 1e-6;

/// Central finite-difference step for curvature evaluation.
pub const FD_STEP_CURVATURE: f64 = 1e-5;

/// Relative error allowed between analytic derivatives and finite differences.
pub const FD_REL: f64 = 1e-5;

/// Drop tolerance for pivoted Gram–Schmidt (dependent generators).
pub const GS_DROP: f64 = 1e-10;

/// Relative singular-value cutoff for rank decisions.
pub const SVD_RCOND: f64 = 1e-10;

/// Tangency loss allowed in an Atiyah cotangent image before repair.
pub const PROJECTION_FAIL: f64 = 1e-6;
