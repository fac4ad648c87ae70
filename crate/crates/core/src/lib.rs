//! Variational reduction of constrained Hamiltonian systems on trivial
//! principal bundles.
//!
//! The crate implements the reduced Hamilton–d'Alembert–Poincaré equations
//! for systems with kinematic and variational constraints (including
//! second-order Lyapunov constraints), the generalized nonholonomic
//! connection construction, full-space constrained dynamics as an
//! independent oracle, explicit integration with manifold projection, and
//! group reconstruction. The worked systems are a ball rolling without
//! sliding on a freely rotating ball, with and without a stabilizing torque.

pub mod algebra;
pub mod bundle;
pub mod connection;
pub mod fullspace;
pub mod integrate;
mod num;
pub mod reduction;
pub mod scenarios;
pub mod tol;
pub mod verify;

pub use algebra::{
    ad_star, adjoint, exp_so3, hat, orthonormalize, vee, AlgebraError, AlgebraVector,
    CoAlgebraVector, Mat3, Rot3, Vec3,
};
pub use bundle::{
    atiyah_cotangent, atiyah_forward, momentum_map, project_sphere_tangent, reduce_trivial,
    BasePoint, BaseTangent, BundleError, CotangentQ, FullState, ReducedState, TangentQ,
    YMomentum, Zeta,
};
pub use connection::{
    build_gnc, decompose_reduced_variations, gnc_connection, phi_map, reduced_curvature,
    ConnectionError, ConnectionForm, GncDecomposition, Metric, VariationalDistribution,
};
pub use fullspace::{
    annihilator_basis, full_vector_field, lyapunov_residual, rolling_residual, ForceSpace,
    FullConstraint, FullDerivative, FullDynamics, FullSolveDiagnostics,
};
pub use integrate::{
    integrate, reconstruct_group, Hooks, IntegrateError, IntegrationOutcome, IntegratorConfig,
    Method, PhaseState, Trajectory,
};
pub use reduction::{
    base_derivative_correction, base_equation_residual, covariant_dmu, covariant_dy,
    horizontal_residuals, residuals, solve_reduced_step, vertical_residuals, ActionSide,
    CaseSelector, HdpProblem, HdpResiduals, KinematicConstraint, ReducedDerivative,
    ReducedHamiltonian, SolveDiagnostics, SolveError,
};
pub use scenarios::{
    ball_gnhs_dalembert, ball_hamiltonian, ball_hocs, default_initial, free_motion,
    invariance_check, project_to_rolling, scenario_by_id, BallParams, LyapunovSpec, Scenario,
    ScenarioError,
};
pub use verify::{run_all, CriterionReport};
