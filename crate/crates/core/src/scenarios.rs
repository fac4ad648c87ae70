//! Concrete systems: a small ball rolling without sliding on a freely
//! rotating big ball, with either a Lyapunov constraint implemented by a
//! torque on the big ball (second-order constrained system) or plain
//! d'Alembert rolling, plus an unconstrained sanity system.
//!
//! Each scenario packages the reduced problem and the matching full-space
//! dynamics so the two integration routes can be cross-validated.

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::algebra::{exp_so3, Rot3, Vec3};
use crate::bundle::{
    project_sphere_tangent, reduce_trivial, rot_rate, BasePoint, BaseTangent, CotangentQ,
    FullState, ReducedState, TangentQ, YMomentum, Zeta,
};
use crate::connection::{gnc_connection, ConnectionForm, Mat9, Metric, VariationalDistribution};
use crate::fullspace::{
    annihilator_basis, full_vector_field, lyapunov_residual, rolling_residual, ForceSpace,
    FullConstraint, FullDerivative, FullDynamics,
};
use crate::integrate::{Hooks, PhaseState};
use crate::reduction::{
    solve_reduced_step, ActionSide, CaseSelector, HdpProblem, KinematicConstraint,
    ReducedDerivative, ReducedHamiltonian, SolveError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("unknown scenario id '{0}'")]
    UnknownId(String),
}

const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Geometry and inertia of the two balls.
#[derive(Clone, Copy, Debug)]
pub struct BallParams {
    /// Radius of the fixed-center big ball.
    pub r1: f64,
    /// Radius of the rolling small ball.
    pub r2: f64,
    /// Moment of inertia of the big ball.
    pub i1: f64,
    /// Moment of inertia of the small ball.
    pub i2: f64,
    /// Mass of the small ball.
    pub m2: f64,
    /// Gravitational acceleration.
    pub g: f64,
}

impl Default for BallParams {
    fn default() -> Self {
        BallParams {
            r1: 1.0,
            r2: 0.5,
            i1: 1.0,
            i2: 0.1,
            m2: 1.0,
            g: 9.81,
        }
    }
}

impl BallParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.r1 > self.r2 && self.r2 > 0.0) {
            return Err(ScenarioError::BadParams(format!(
                "need r1 > r2 > 0, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        if !(self.i1 > 0.0 && self.i2 > 0.0 && self.m2 > 0.0) {
            return Err(ScenarioError::BadParams(
                "inertias and mass must be positive".into(),
            ));
        }
        if self.g < 0.0 {
            return Err(ScenarioError::BadParams("gravity must be nonnegative".into()));
        }
        Ok(())
    }

    /// r₂ / (r₁ + r₂), the contact gear ratio.
    pub fn r12(&self) -> f64 {
        self.r2 / (self.r1 + self.r2)
    }
}

/// Lyapunov function V = ½ pᵀ Φ(R,e) p + v(R,e) and decay rate μ.
#[derive(Clone)]
pub struct LyapunovSpec {
    phi: Arc<dyn Fn(&BasePoint) -> Mat9 + Send + Sync>,
    v: Arc<dyn Fn(&BasePoint) -> f64 + Send + Sync>,
    base_grad: Arc<dyn Fn(&FullState) -> (Vec3, Vec3) + Send + Sync>,
    mu_rate: Arc<dyn Fn(&FullState) -> f64 + Send + Sync>,
}

impl LyapunovSpec {
    pub fn new(
        phi: impl Fn(&BasePoint) -> Mat9 + Send + Sync + 'static,
        v: impl Fn(&BasePoint) -> f64 + Send + Sync + 'static,
        base_grad: impl Fn(&FullState) -> (Vec3, Vec3) + Send + Sync + 'static,
        mu_rate: impl Fn(&FullState) -> f64 + Send + Sync + 'static,
    ) -> Self {
        LyapunovSpec {
            phi: Arc::new(phi),
            v: Arc::new(v),
            base_grad: Arc::new(base_grad),
            mu_rate: Arc::new(mu_rate),
        }
    }

    /// Defaults: Φ scaled identity blocks, v the gravitational gap
    /// v_scale·m₂g(1 − e·z), decay rate μ = c·‖(π, σ, γ)‖².
    pub fn with_coeffs(p: &BallParams, phi_diag: [f64; 9], v_scale: f64, mu_coeff: f64) -> Self {
        let pm = *p;
        let phi_mat = Mat9::from_fn(|i, j| if i == j { phi_diag[i] } else { 0.0 });
        LyapunovSpec::new(
            move |_| phi_mat,
            move |x| v_scale * pm.m2 * pm.g * (1.0 - x.e.dot(&Z)),
            move |s| {
                let grad_sph =
                    -v_scale * pm.m2 * pm.g * project_sphere_tangent(&s.e, &Z);
                (Vec3::zeros(), grad_sph)
            },
            move |s| {
                mu_coeff
                    * (s.pi.norm_squared() + s.sigma.norm_squared() + s.gamma.norm_squared())
            },
        )
    }

    pub fn defaults(p: &BallParams) -> Self {
        Self::with_coeffs(p, [1.0; 9], 1.0, 0.1)
    }

    pub fn phi(&self, x: &BasePoint) -> Mat9 {
        (self.phi)(x)
    }

    pub fn v(&self, x: &BasePoint) -> f64 {
        (self.v)(x)
    }

    /// Gradient of V along base directions with momenta parallel-fixed:
    /// (attitude slot, sphere slot).
    pub fn base_grad(&self, s: &FullState) -> (Vec3, Vec3) {
        (self.base_grad)(s)
    }

    pub fn mu_rate(&self, s: &FullState) -> f64 {
        (self.mu_rate)(s)
    }

    /// Value of V at a full state.
    pub fn value(&self, s: &FullState) -> f64 {
        let p = crate::fullspace::stack_momenta(s);
        let x = s.base();
        0.5 * (p.transpose() * self.phi(&x) * p)[(0, 0)] + self.v(&x)
    }
}

/// A packaged system: matching reduced problem and full-space dynamics.
#[derive(Clone)]
pub struct Scenario {
    pub id: &'static str,
    pub params: BallParams,
    pub problem: HdpProblem,
    pub dynamics: FullDynamics,
    pub lyapunov: Option<LyapunovSpec>,
}

/// Hamiltonian of the two-ball system,
/// H = π²/2I₁ + σ²/2m₂ + γ²/2I₂ + m₂g e·z.
pub fn ball_hamiltonian(p: &BallParams, s: &FullState) -> f64 {
    0.5 * s.pi.norm_squared() / p.i1
        + 0.5 * s.sigma.norm_squared() / p.m2
        + 0.5 * s.gamma.norm_squared() / p.i2
        + p.m2 * p.g * s.e.dot(&Z)
}

fn ball_fiber(p: &BallParams, s: &FullState) -> TangentQ {
    TangentQ::new(
        s.pi / p.i1,
        project_sphere_tangent(&s.e, &s.sigma) / p.m2,
        s.gamma / p.i2,
    )
}

fn ball_base(p: &BallParams, s: &FullState) -> CotangentQ {
    CotangentQ::new(
        Vec3::zeros(),
        p.m2 * p.g * project_sphere_tangent(&s.e, &Z),
        Vec3::zeros(),
    )
}

fn ball_reduced_hamiltonian(p: &BallParams) -> ReducedHamiltonian {
    let pm = *p;
    ReducedHamiltonian::new(
        move |s: &ReducedState| {
            0.5 * s.y.pi.norm_squared() / pm.i1
                + 0.5 * s.y.sigma.norm_squared() / pm.m2
                + 0.5 * s.mu.norm_squared() / pm.i2
                + pm.m2 * pm.g * s.x.e.dot(&Z)
        },
        move |s: &ReducedState| {
            BaseTangent::new(
                s.y.pi / pm.i1,
                project_sphere_tangent(&s.x.e, &s.y.sigma) / pm.m2,
            )
        },
        move |s: &ReducedState| s.mu / pm.i2,
        move |s: &ReducedState| {
            YMomentum::new(
                Vec3::zeros(),
                pm.m2 * pm.g * project_sphere_tangent(&s.x.e, &Z),
            )
        },
    )
}

fn ball_metric(p: &BallParams) -> Metric {
    Metric::from_block_weights(p.i1, p.m2, p.i2)
}

/// Variational distribution of the torque-controlled system:
/// C_V = {(0, r₁₂ ξ×e, ξ)}.
pub fn hocs_distribution(p: &BallParams) -> VariationalDistribution {
    let r12 = p.r12();
    VariationalDistribution::new(move |zeta: &Zeta| {
        let e = zeta.x.e;
        (0..3)
            .map(|i| {
                let mut xi = Vec3::zeros();
                xi[i] = 1.0;
                TangentQ::new(Vec3::zeros(), r12 * xi.cross(&e), xi)
            })
            .collect()
    })
}

/// Full rolling distribution C_K: η and ξ free, ė slaved to the contact,
/// ė = (r₁η + r₂ξ)×e / (r₁+r₂).
pub fn rolling_distribution(p: &BallParams) -> VariationalDistribution {
    let (r1, r2) = (p.r1, p.r2);
    VariationalDistribution::new(move |zeta: &Zeta| {
        let e = zeta.x.e;
        let k = 1.0 / (r1 + r2);
        let mut gens = Vec::with_capacity(6);
        for i in 0..3 {
            let mut b = Vec3::zeros();
            b[i] = 1.0;
            gens.push(TangentQ::new(b, k * r1 * b.cross(&e), Vec3::zeros()));
            gens.push(TangentQ::new(Vec3::zeros(), k * r2 * b.cross(&e), b));
        }
        gens
    })
}

fn full_tangent_distribution() -> VariationalDistribution {
    VariationalDistribution::new(|zeta: &Zeta| {
        let (t1, t2) = crate::connection::sphere_tangent_basis(&zeta.x.e);
        let mut gens = Vec::with_capacity(8);
        for i in 0..3 {
            let mut b = Vec3::zeros();
            b[i] = 1.0;
            gens.push(TangentQ::new(b, Vec3::zeros(), Vec3::zeros()));
            gens.push(TangentQ::new(Vec3::zeros(), Vec3::zeros(), b));
        }
        gens.push(TangentQ::new(Vec3::zeros(), t1, Vec3::zeros()));
        gens.push(TangentQ::new(Vec3::zeros(), t2, Vec3::zeros()));
        gens
    })
}

fn reduced_rolling_constraint(p: &BallParams) -> KinematicConstraint {
    let pm = *p;
    let res = move |s: &ReducedState| -> Vec3 {
        let k = 1.0 / (pm.r1 + pm.r2);
        s.y.sigma / pm.m2
            - k * ((pm.r1 / pm.i1) * s.y.pi + (pm.r2 / pm.i2) * s.mu).cross(&s.x.e)
    };
    KinematicConstraint::order1(
        "rolling",
        move |s| DVector::from_column_slice(res(s).as_slice()),
        move |s, d: &ReducedDerivative| {
            let k = 1.0 / (pm.r1 + pm.r2);
            let rate = d.y_dot.sigma / pm.m2
                - k * ((pm.r1 / pm.i1) * d.y_dot.pi + (pm.r2 / pm.i2) * d.mu_dot)
                    .cross(&s.x.e)
                - k * ((pm.r1 / pm.i1) * s.y.pi + (pm.r2 / pm.i2) * s.mu).cross(&d.x_dot.de);
            // only the tangential content is independent: the e-component is
            // the σ-tangency rate minus the off-manifold defect
            let rate = project_sphere_tangent(&s.x.e, &rate);
            DVector::from_column_slice(rate.as_slice())
        },
    )
}

fn full_rolling_constraint(p: &BallParams) -> FullConstraint {
    let pm = *p;
    FullConstraint::order1(
        "rolling",
        move |s| DVector::from_column_slice(rolling_residual(s, &pm).as_slice()),
        move |s, d: &FullDerivative| {
            let k = 1.0 / (pm.r1 + pm.r2);
            let rate = d.sigma_dot / pm.m2
                - k * ((pm.r1 / pm.i1) * d.pi_dot + (pm.r2 / pm.i2) * d.gamma_dot).cross(&s.e)
                - k * ((pm.r1 / pm.i1) * s.pi + (pm.r2 / pm.i2) * s.gamma).cross(&d.de);
            // only the tangential content is independent: the e-component is
            // the σ-tangency rate minus the off-manifold defect
            let rate = project_sphere_tangent(&s.e, &rate);
            DVector::from_column_slice(rate.as_slice())
        },
    )
}

/// A full state with the same invariant data as a reduced one; the group
/// variable is immaterial for the right-invariant quantities evaluated on it.
pub fn full_of_reduced(s: &ReducedState) -> FullState {
    FullState {
        r: s.x.r,
        pi: s.y.pi,
        e: s.x.e,
        sigma: s.y.sigma,
        c: Rot3::IDENTITY,
        gamma: s.mu,
    }
}

fn reduced_lyapunov_constraint(spec: &LyapunovSpec) -> KinematicConstraint {
    let spec = spec.clone();
    KinematicConstraint::order2("lyapunov", move |s: &ReducedState, d: &ReducedDerivative| {
        let full = full_of_reduced(s);
        let ds = FullDerivative {
            eta: d.x_dot.eta,
            de: d.x_dot.de,
            xi: Vec3::zeros(),
            pi_dot: d.y_dot.pi,
            sigma_dot: d.y_dot.sigma,
            gamma_dot: d.mu_dot,
        };
        DVector::from_row_slice(&[lyapunov_residual(&spec, &full, &ds)])
    })
}

fn full_lyapunov_constraint(spec: &LyapunovSpec) -> FullConstraint {
    let spec = spec.clone();
    FullConstraint::order2("lyapunov", move |s: &FullState, d: &FullDerivative| {
        DVector::from_row_slice(&[lyapunov_residual(&spec, s, d)])
    })
}

/// The torque-controlled second-order system: rolling plus a Lyapunov
/// constraint enforced through forces in ℝ³ × {0} × {0} (a torque on the
/// big ball) together with the rolling reaction.
pub fn ball_hocs(p: &BallParams, lyap: &LyapunovSpec) -> Result<Scenario, ScenarioError> {
    p.validate()?;
    let metric = ball_metric(p);
    let dist = hocs_distribution(p);
    let problem = HdpProblem::new(
        ball_reduced_hamiltonian(p),
        ConnectionForm::trivial(),
        gnc_connection(dist.clone(), metric.clone()),
        dist.clone(),
        metric,
        vec![
            reduced_rolling_constraint(p),
            reduced_lyapunov_constraint(lyap),
        ],
        ActionSide::Right,
        CaseSelector::TrivialConnection,
    )
    .expect("consistent case selection");

    let pm = *p;
    let rolling_dist = rolling_distribution(p);
    let force = ForceSpace::empty()
        .with_family("rolling", move |zeta: &Zeta| {
            annihilator_basis(&rolling_dist.generators(zeta), &zeta.x.e)
        })
        .with_family("lyapunov_torque", |_zeta: &Zeta| {
            (0..3)
                .map(|i| {
                    let mut b = Vec3::zeros();
                    b[i] = 1.0;
                    CotangentQ::new(b, Vec3::zeros(), Vec3::zeros())
                })
                .collect()
        });
    let dynamics = FullDynamics::new(
        move |s| ball_hamiltonian(&pm, s),
        move |s| ball_fiber(&pm, s),
        move |s| ball_base(&pm, s),
        force,
        vec![full_rolling_constraint(p), full_lyapunov_constraint(lyap)],
        hocs_distribution(p),
    );
    Ok(Scenario {
        id: "ball_hocs",
        params: *p,
        problem,
        dynamics,
        lyapunov: Some(lyap.clone()),
    })
}

/// The pure d'Alembert rolling system: variational constraints equal the
/// rolling distribution, forces are workless, energy is conserved.
pub fn ball_gnhs_dalembert(p: &BallParams) -> Result<Scenario, ScenarioError> {
    p.validate()?;
    let metric = ball_metric(p);
    let dist = rolling_distribution(p);
    let problem = HdpProblem::new(
        ball_reduced_hamiltonian(p),
        ConnectionForm::trivial(),
        gnc_connection(dist.clone(), metric.clone()),
        dist.clone(),
        metric,
        vec![reduced_rolling_constraint(p)],
        ActionSide::Right,
        CaseSelector::TrivialConnection,
    )
    .expect("consistent case selection");

    let pm = *p;
    let rolling_dist = rolling_distribution(p);
    let force = ForceSpace::empty().with_family("rolling", move |zeta: &Zeta| {
        annihilator_basis(&rolling_dist.generators(zeta), &zeta.x.e)
    });
    let dynamics = FullDynamics::new(
        move |s| ball_hamiltonian(&pm, s),
        move |s| ball_fiber(&pm, s),
        move |s| ball_base(&pm, s),
        force,
        vec![full_rolling_constraint(p)],
        rolling_distribution(p),
    );
    Ok(Scenario {
        id: "ball_dalembert",
        params: *p,
        problem,
        dynamics,
        lyapunov: None,
    })
}

/// Unconstrained sanity system: free dynamics of the same Hamiltonian.
pub fn free_motion(p: &BallParams) -> Result<Scenario, ScenarioError> {
    p.validate()?;
    let metric = ball_metric(p);
    let dist = full_tangent_distribution();
    let problem = HdpProblem::new(
        ball_reduced_hamiltonian(p),
        ConnectionForm::trivial(),
        gnc_connection(dist.clone(), metric.clone()),
        dist.clone(),
        metric,
        Vec::new(),
        ActionSide::Right,
        CaseSelector::TrivialConnection,
    )
    .expect("consistent case selection");
    let pm = *p;
    let dynamics = FullDynamics::new(
        move |s| ball_hamiltonian(&pm, s),
        move |s| ball_fiber(&pm, s),
        move |s| ball_base(&pm, s),
        ForceSpace::empty(),
        Vec::new(),
        full_tangent_distribution(),
    );
    Ok(Scenario {
        id: "free",
        params: *p,
        problem,
        dynamics,
        lyapunov: None,
    })
}

pub fn scenario_by_id(
    id: &str,
    p: &BallParams,
    lyap: &LyapunovSpec,
) -> Result<Scenario, ScenarioError> {
    match id {
        "ball_hocs" => ball_hocs(p, lyap),
        "ball_dalembert" => ball_gnhs_dalembert(p),
        "free" => free_motion(p),
        other => Err(ScenarioError::UnknownId(other.to_string())),
    }
}

/// Overwrites σ with the unique value satisfying the rolling contact at the
/// state's (π, γ, e).
pub fn project_to_rolling(p: &BallParams, s: &mut FullState) {
    let k = 1.0 / (p.r1 + p.r2);
    s.sigma = p.m2 * k * ((p.r1 / p.i1) * s.pi + (p.r2 / p.i2) * s.gamma).cross(&s.e);
}

/// A generic initial condition on the rolling manifold: contact near the
/// top, both balls spinning mostly about the vertical with a small
/// transverse perturbation. In this regime the stabilizing torque works
/// gently (the admissible force directions stay well-conditioned for the
/// decay demanded of the Lyapunov function).
pub fn default_initial(p: &BallParams) -> FullState {
    let mut s = FullState {
        r: exp_so3(&Vec3::new(0.3, -0.2, 0.4)),
        pi: Vec3::new(0.002, -0.001, 1.5),
        e: Vec3::new(0.008, -0.006, 1.0).normalize(),
        sigma: Vec3::zeros(),
        c: exp_so3(&Vec3::new(0.1, 0.7, -0.3)),
        gamma: Vec3::new(0.0005, 0.0004, 0.12),
    };
    project_to_rolling(p, &mut s);
    s
}

/// The upright equilibrium: contact at the top, all momenta zero.
pub fn initial_at_top(p: &BallParams) -> FullState {
    let mut s = FullState {
        r: Rot3::IDENTITY,
        pi: Vec3::zeros(),
        e: Z,
        sigma: Vec3::zeros(),
        c: Rot3::IDENTITY,
        gamma: Vec3::zeros(),
    };
    project_to_rolling(p, &mut s);
    s
}

/// Flat-derivative wrapper of the full dynamics for the integrator.
pub fn full_field(
    sc: &Scenario,
) -> impl Fn(&FullState) -> Result<(DVector<f64>, f64), SolveError> + '_ {
    move |s: &FullState| {
        let (d, diag) = full_vector_field(&sc.dynamics, s)?;
        let mut flat = DVector::zeros(30);
        let dr = rot_rate(&s.r, &d.eta);
        let dc = rot_rate(&s.c, &d.xi);
        for i in 0..3 {
            for j in 0..3 {
                flat[3 * i + j] = dr[(i, j)];
                flat[18 + 3 * i + j] = dc[(i, j)];
            }
        }
        for i in 0..3 {
            flat[9 + i] = d.pi_dot[i];
            flat[12 + i] = d.de[i];
            flat[15 + i] = d.sigma_dot[i];
            flat[27 + i] = d.gamma_dot[i];
        }
        Ok((flat, diag.residual))
    }
}

/// Flat-derivative wrapper of the reduced dynamics for the integrator.
pub fn reduced_field(
    sc: &Scenario,
) -> impl Fn(&ReducedState) -> Result<(DVector<f64>, f64), SolveError> + '_ {
    move |s: &ReducedState| {
        let (d, diag) = solve_reduced_step(&sc.problem, s, s)?;
        let mut flat = DVector::zeros(21);
        let dr = rot_rate(&s.x.r, &d.x_dot.eta);
        for i in 0..3 {
            for j in 0..3 {
                flat[3 * i + j] = dr[(i, j)];
            }
        }
        for i in 0..3 {
            flat[9 + i] = d.y_dot.pi[i];
            flat[12 + i] = d.x_dot.de[i];
            flat[15 + i] = d.y_dot.sigma[i];
            flat[18 + i] = d.mu_dot[i];
        }
        Ok((flat, diag.residual))
    }
}

/// Integration hooks for the full dynamics: rolling-manifold projection (when
/// the scenario has a rolling constraint) and a contact drift alarm.
pub fn full_hooks(sc: &Scenario) -> Hooks<FullState> {
    let mut hooks = Hooks::default();
    let has_rolling = sc.dynamics.kinematic.iter().any(|k| k.name == "rolling");
    if has_rolling {
        let p = sc.params;
        hooks.post_projection = Some(Arc::new(move |s: &mut FullState| {
            project_to_rolling(&p, s);
        }));
        let p2 = sc.params;
        hooks.alarms.push(crate::integrate::Alarm {
            name: "rolling drift".into(),
            threshold: crate::tol::DRIFT_ALARM,
            eval: Arc::new(move |s: &FullState| rolling_residual(s, &p2).amax()),
        });
    }
    hooks
}

/// Counterpart of [`full_hooks`] on the reduced side.
pub fn reduced_hooks(sc: &Scenario) -> Hooks<ReducedState> {
    let mut hooks = Hooks::default();
    let has_rolling = sc.problem.kinematic.iter().any(|k| k.name == "rolling");
    if has_rolling {
        let p = sc.params;
        hooks.post_projection = Some(Arc::new(move |s: &mut ReducedState| {
            let mut full = full_of_reduced(s);
            project_to_rolling(&p, &mut full);
            s.y.sigma = full.sigma;
        }));
        let p2 = sc.params;
        hooks.alarms.push(crate::integrate::Alarm {
            name: "rolling drift".into(),
            threshold: crate::tol::DRIFT_ALARM,
            eval: Arc::new(move |s: &ReducedState| {
                rolling_residual(&full_of_reduced(s), &p2).amax()
            }),
        });
    }
    hooks
}

/// Deviation of the scenario's defining data under the lifted group action
/// s ↦ ρ̂_B(s): Hamiltonian value, kinematic residuals, Lyapunov data, and
/// the span of the variational distribution.
pub fn invariance_check(sc: &Scenario, b: &Rot3, s: &FullState) -> f64 {
    let moved = crate::bundle::lifted_action(s, b);
    let mut dev = (sc.dynamics.hamiltonian(&moved) - sc.dynamics.hamiltonian(s)).abs();
    for k in &sc.dynamics.kinematic {
        if let (Some(r1), Some(r2)) = (k.state_residual(s), k.state_residual(&moved)) {
            dev = dev.max((r2 - r1).amax());
        }
    }
    if let Some(lyap) = &sc.lyapunov {
        dev = dev.max((lyap.value(&moved) - lyap.value(s)).abs());
        dev = dev.max((lyap.mu_rate(&moved) - lyap.mu_rate(s)).abs());
    }
    dev.max(distribution_span_deviation(sc, s, &moved))
}

fn distribution_span_deviation(sc: &Scenario, s: &FullState, moved: &FullState) -> f64 {
    let gens1: Vec<DVector<f64>> = sc
        .dynamics
        .dist
        .generators(&reduce_trivial(s))
        .iter()
        .map(|g| DVector::from_column_slice(g.to_vec9().as_slice()))
        .collect();
    let gens2: Vec<DVector<f64>> = sc
        .dynamics
        .dist
        .generators(&reduce_trivial(moved))
        .iter()
        .map(|g| DVector::from_column_slice(g.to_vec9().as_slice()))
        .collect();
    let (basis, _) = crate::num::gram_schmidt(&gens1, None, crate::tol::GS_DROP);
    let mut worst: f64 = 0.0;
    for g in &gens2 {
        let mut res = g.clone();
        for q in &basis {
            let c = q.dot(&res);
            res -= q * c;
        }
        worst = worst.max(res.norm() / g.norm().max(1e-300));
    }
    worst
}

/// Negative control: a Hamiltonian with an explicit group dependence whose
/// invariance defect must be detected.
pub fn broken_hamiltonian(p: &BallParams) -> impl Fn(&FullState) -> f64 + Clone {
    let pm = *p;
    move |s: &FullState| {
        ball_hamiltonian(&pm, s) + 0.05 * (*s.c.matrix() * Vec3::new(1.0, 0.0, 0.0)).dot(&Z)
    }
}

/// Closed form of the variational connection of the torque-controlled
/// system, 𝒜•(R,e)(η, ė) = −(1/r₁₂) e × ė.
pub fn closed_gnc_form(p: &BallParams) -> ConnectionForm {
    let r12 = p.r12();
    ConnectionForm::from_form(move |x, dx| -(1.0 / r12) * x.e.cross(&dx.de))
}

/// Closed form of the φ-map against the trivial connection,
/// φ(R, e, ė) = (1/r₁₂) e × ė.
pub fn closed_phi(p: &BallParams, x: &BasePoint, dx: &BaseTangent) -> Vec3 {
    (1.0 / p.r12()) * x.e.cross(&dx.de)
}

/// Closed form of the cotangent map of the variational connection:
/// (R, π, e, σ, C, γ) ↦ (R, π, e, σ + (1/r₁₂) γ×e, γ).
pub fn closed_atiyah_gnc(p: &BallParams, s: &FullState) -> ReducedState {
    ReducedState {
        x: s.base(),
        y: YMomentum::new(s.pi, s.sigma + (1.0 / p.r12()) * s.gamma.cross(&s.e)),
        mu: s.gamma,
    }
}

/// Maximum flat-coordinate deviation between the reduced projection of a
/// full state and a reduced state.
pub fn projection_deviation(full: &FullState, reduced: &ReducedState) -> f64 {
    let projected = reduce_trivial(full);
    (projected.to_flat() - reduced.to_flat()).amax()
}
