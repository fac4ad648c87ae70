//! Explicit time stepping with post-step manifold projection, and group
//! reconstruction along a reduced trajectory.

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::algebra::{exp_so3, orthonormalize, Rot3, Vec3};
use crate::bundle::{
    full_from_flat, full_to_flat, project_sphere_tangent, reduced_from_flat, reduced_to_flat,
    FullState, ReducedState,
};
use crate::connection::ConnectionForm;
use crate::reduction::{ReducedHamiltonian, SolveError};
use crate::tol;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("drift alarm '{name}' tripped at t = {t}: {value:.3e}")]
    DriftAlarm { name: String, value: f64, t: f64 },
    #[error("vector field failed at t = {t}: {message}")]
    Field { t: f64, message: String },
    #[error("bad integrator configuration: {0}")]
    Config(String),
}

/// States that can be flattened for Runge–Kutta arithmetic and repaired onto
/// their manifold afterwards.
pub trait PhaseState: Clone {
    fn to_flat(&self) -> DVector<f64>;
    fn from_flat(v: &DVector<f64>) -> Self;
    /// Restores the type invariants, returning the size of the repair.
    fn project(&mut self) -> f64;
    /// Worst invariant violation of the current representation.
    fn invariant_defect(&self) -> f64;
}

impl PhaseState for FullState {
    fn to_flat(&self) -> DVector<f64> {
        full_to_flat(self)
    }

    fn from_flat(v: &DVector<f64>) -> Self {
        full_from_flat(v)
    }

    fn project(&mut self) -> f64 {
        let before = self.to_flat();
        if let Ok(r) = orthonormalize(self.r.matrix()) {
            self.r = r;
        }
        if let Ok(c) = orthonormalize(self.c.matrix()) {
            self.c = c;
        }
        self.e = self.e.normalize();
        self.sigma = project_sphere_tangent(&self.e, &self.sigma);
        (self.to_flat() - before).amax()
    }

    fn invariant_defect(&self) -> f64 {
        self.r
            .ortho_defect()
            .max(self.c.ortho_defect())
            .max((self.e.norm() - 1.0).abs())
            .max(self.sigma.dot(&self.e).abs())
    }
}

impl PhaseState for ReducedState {
    fn to_flat(&self) -> DVector<f64> {
        reduced_to_flat(self)
    }

    fn from_flat(v: &DVector<f64>) -> Self {
        reduced_from_flat(v)
    }

    fn project(&mut self) -> f64 {
        let before = self.to_flat();
        if let Ok(r) = orthonormalize(self.x.r.matrix()) {
            self.x.r = r;
        }
        self.x.e = self.x.e.normalize();
        self.y.sigma = project_sphere_tangent(&self.x.e, &self.y.sigma);
        (self.to_flat() - before).amax()
    }

    fn invariant_defect(&self) -> f64 {
        self.x
            .r
            .ortho_defect()
            .max((self.x.e.norm() - 1.0).abs())
            .max(self.y.sigma.dot(&self.x.e).abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Euler,
}

#[derive(Clone, Debug)]
pub struct IntegratorConfig {
    /// Step size in seconds.
    pub dt: f64,
    /// Horizon in seconds.
    pub t_final: f64,
    pub method: Method,
    /// Apply post-step manifold projection.
    pub project: bool,
    /// Alarm on invariant defects measured before projection.
    pub defect_alarm: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64) -> Result<Self, IntegrateError> {
        if !(dt > 0.0) {
            return Err(IntegrateError::Config(format!("dt must be positive, got {dt}")));
        }
        if t_final < dt {
            return Err(IntegrateError::Config(format!(
                "horizon {t_final} shorter than one step {dt}"
            )));
        }
        Ok(IntegratorConfig {
            dt,
            t_final,
            method: Method::Rk4,
            project: true,
            // raw steps carry O(dt²) invariant drift that projection
            // repairs; this guard only catches divergence
            defect_alarm: 100.0 * tol::DRIFT_ALARM,
        })
    }
}

/// A scalar watched along the trajectory; exceeding the threshold aborts.
pub struct Alarm<S> {
    pub name: String,
    pub threshold: f64,
    pub eval: Arc<dyn Fn(&S) -> f64 + Send + Sync>,
}

/// Scenario hooks: extra projection (e.g. constraint manifolds), alarms and
/// recorded observables.
pub struct Hooks<S> {
    pub post_projection: Option<Arc<dyn Fn(&mut S) + Send + Sync>>,
    pub alarms: Vec<Alarm<S>>,
    pub observers: Vec<(String, Arc<dyn Fn(&S) -> f64 + Send + Sync>)>,
}

impl<S> Default for Hooks<S> {
    fn default() -> Self {
        Hooks {
            post_projection: None,
            alarms: Vec::new(),
            observers: Vec::new(),
        }
    }
}

/// Per-step bookkeeping recorded at the accepted state.
#[derive(Clone, Debug, Default)]
pub struct StepDiag {
    /// Field solve residual at this state.
    pub field_residual: f64,
    /// Flat-coordinate change applied by projection after the step.
    pub projection_change: f64,
    /// Named observer values.
    pub observations: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diags: Vec<StepDiag>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("non-empty trajectory")
    }

    /// Largest recorded value of a named observer.
    pub fn max_observation(&self, name: &str) -> Option<f64> {
        self.diags
            .iter()
            .flat_map(|d| d.observations.iter())
            .filter(|(n, _)| n == name)
            .map(|(_, v)| v.abs())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// Integration result carrying the produced trajectory even on failure so
/// partial output can be flushed.
pub struct IntegrationOutcome<S> {
    pub trajectory: Trajectory<S>,
    pub failure: Option<IntegrateError>,
}

impl<S> IntegrationOutcome<S> {
    pub fn into_result(self) -> Result<Trajectory<S>, IntegrateError> {
        match self.failure {
            None => Ok(self.trajectory),
            Some(e) => Err(e),
        }
    }
}

/// Explicit integration of `field` from `s0`. The field returns the flat
/// derivative plus its solve residual; each accepted state is projected back
/// onto its manifold and checked against the alarms.
pub fn integrate<S, F>(
    field: F,
    s0: &S,
    cfg: &IntegratorConfig,
    hooks: &Hooks<S>,
) -> IntegrationOutcome<S>
where
    S: PhaseState,
    F: Fn(&S) -> Result<(DVector<f64>, f64), SolveError>,
{
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        diags: Vec::new(),
    };
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let mut state = s0.clone();
    let mut t = 0.0;

    let record =
        |traj: &mut Trajectory<S>, t: f64, s: &S, residual: f64, projection_change: f64, hooks: &Hooks<S>| {
            let observations = hooks
                .observers
                .iter()
                .map(|(name, f)| (name.clone(), f(s)))
                .collect();
            traj.times.push(t);
            traj.states.push(s.clone());
            traj.diags.push(StepDiag {
                field_residual: residual,
                projection_change,
                observations,
            });
        };

    let check_alarms = |s: &S, t: f64, hooks: &Hooks<S>| -> Option<IntegrateError> {
        for alarm in &hooks.alarms {
            let value = (alarm.eval)(s);
            if value.abs() > alarm.threshold {
                return Some(IntegrateError::DriftAlarm {
                    name: alarm.name.clone(),
                    value,
                    t,
                });
            }
        }
        None
    };

    // record the initial state with its own field residual
    let r0 = match field(&state) {
        Ok((_, r)) => r,
        Err(e) => {
            return IntegrationOutcome {
                trajectory: traj,
                failure: Some(IntegrateError::Field {
                    t,
                    message: e.to_string(),
                }),
            }
        }
    };
    record(&mut traj, t, &state, r0, 0.0, hooks);
    if let Some(e) = check_alarms(&state, t, hooks) {
        return IntegrationOutcome {
            trajectory: traj,
            failure: Some(e),
        };
    }

    for _ in 0..steps {
        let flat = state.to_flat();
        let eval = |v: &DVector<f64>| -> Result<(DVector<f64>, f64), SolveError> {
            field(&S::from_flat(v))
        };
        let step = cfg.dt;
        let next_flat = match cfg.method {
            Method::Euler => eval(&flat).map(|(k1, r)| (flat.clone() + k1 * step, r)),
            Method::Rk4 => (|| {
                let (k1, r) = eval(&flat)?;
                let (k2, _) = eval(&(&flat + &k1 * (0.5 * step)))?;
                let (k3, _) = eval(&(&flat + &k2 * (0.5 * step)))?;
                let (k4, _) = eval(&(&flat + &k3 * step))?;
                Ok((
                    &flat + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0),
                    r,
                ))
            })(),
        };
        let (next_flat, residual) = match next_flat {
            Ok(v) => v,
            Err(e) => {
                return IntegrationOutcome {
                    trajectory: traj,
                    failure: Some(IntegrateError::Field {
                        t,
                        message: e.to_string(),
                    }),
                }
            }
        };
        t += step;
        let mut next = S::from_flat(&next_flat);
        let defect = next.invariant_defect();
        if defect > cfg.defect_alarm {
            return IntegrationOutcome {
                trajectory: traj,
                failure: Some(IntegrateError::DriftAlarm {
                    name: "invariant defect before projection".into(),
                    value: defect,
                    t,
                }),
            };
        }
        let mut change = 0.0;
        if cfg.project {
            change = next.project();
            if let Some(f) = &hooks.post_projection {
                f(&mut next);
            }
        }
        record(&mut traj, t, &next, residual, change, hooks);
        if let Some(e) = check_alarms(&next, t, hooks) {
            return IntegrationOutcome {
                trajectory: traj,
                failure: Some(e),
            };
        }
        state = next;
    }
    IntegrationOutcome {
        trajectory: traj,
        failure: None,
    }
}

/// Recovers the group variable along a reduced trajectory: the group rate is
/// ξ(t) = ∂h/∂μ − 𝒜(x)x′ and the path is stepped by the exponential of the
/// trapezoid increment, which keeps it on SO(3) by construction.
pub fn reconstruct_group(
    traj: &Trajectory<ReducedState>,
    h0: Rot3,
    conn: &ConnectionForm,
    h: &ReducedHamiltonian,
) -> Result<Vec<Rot3>, IntegrateError> {
    let rate = |s: &ReducedState| -> Result<Vec3, IntegrateError> {
        let nu = h.fiber_mu(s);
        let x_dot = h.fiber_y(s);
        let a = conn
            .value(&s.x, &x_dot, Some(s))
            .map_err(|e| IntegrateError::Field {
                t: 0.0,
                message: e.to_string(),
            })?;
        Ok(nu - a)
    };
    let mut out = Vec::with_capacity(traj.len());
    let mut current = h0;
    out.push(current);
    for i in 1..traj.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        let xi0 = rate(&traj.states[i - 1])?;
        let xi1 = rate(&traj.states[i])?;
        let increment = (xi0 + xi1) * (0.5 * dt);
        let stepped = exp_so3(&increment) * current;
        let defect = stepped.ortho_defect();
        if defect > tol::DRIFT_ALARM {
            return Err(IntegrateError::DriftAlarm {
                name: "reconstruction orthonormality".into(),
                value: defect,
                t: traj.times[i],
            });
        }
        current = orthonormalize(stepped.matrix()).map_err(|e| IntegrateError::Field {
            t: traj.times[i],
            message: e.to_string(),
        })?;
        out.push(current);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{BasePoint, YMomentum};

    /// Minimal phase state for integrator-only tests: a point on S².
    #[derive(Clone)]
    struct SpherePoint(Vec3);

    impl PhaseState for SpherePoint {
        fn to_flat(&self) -> DVector<f64> {
            DVector::from_column_slice(self.0.as_slice())
        }
        fn from_flat(v: &DVector<f64>) -> Self {
            SpherePoint(Vec3::new(v[0], v[1], v[2]))
        }
        fn project(&mut self) -> f64 {
            let before = self.0;
            self.0 = self.0.normalize();
            (self.0 - before).amax()
        }
        fn invariant_defect(&self) -> f64 {
            (self.0.norm() - 1.0).abs()
        }
    }

    #[test]
    fn zero_field_keeps_state_constant() {
        let cfg = IntegratorConfig::new(0.1, 1.0).unwrap();
        let out = integrate(
            |_: &SpherePoint| Ok((DVector::zeros(3), 0.0)),
            &SpherePoint(Vec3::new(0.0, 0.0, 1.0)),
            &cfg,
            &Hooks::default(),
        );
        let traj = out.into_result().unwrap();
        assert_eq!(traj.len(), 11);
        assert!((traj.last().0 - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn rk4_order_on_sphere_rotation() {
        // ė = ω × e with ω fixed; exact solution is a rotation
        let omega = Vec3::new(0.3, -0.4, 0.8);
        let field = |s: &SpherePoint| -> Result<(DVector<f64>, f64), SolveError> {
            Ok((
                DVector::from_column_slice(omega.cross(&s.0).as_slice()),
                0.0,
            ))
        };
        let e0 = Vec3::new(1.0, 0.0, 0.0);
        let exact = exp_so3(&omega) * e0; // t = 1
        let run = |dt: f64| -> f64 {
            let mut cfg = IntegratorConfig::new(dt, 1.0).unwrap();
            cfg.project = false;
            let traj = integrate(field, &SpherePoint(e0), &cfg, &Hooks::default())
                .into_result()
                .unwrap();
            (traj.last().0 - exact).norm()
        };
        let e_coarse = run(0.02);
        let e_fine = run(0.01);
        let ratio = e_coarse / e_fine;
        assert!(
            (10.0..24.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio}"
        );
    }

    #[test]
    fn euler_is_first_order() {
        let omega = Vec3::new(0.0, 0.0, 1.0);
        let field = |s: &SpherePoint| -> Result<(DVector<f64>, f64), SolveError> {
            Ok((
                DVector::from_column_slice(omega.cross(&s.0).as_slice()),
                0.0,
            ))
        };
        let e0 = Vec3::new(1.0, 0.0, 0.0);
        let exact = exp_so3(&omega) * e0;
        let run = |dt: f64| -> f64 {
            let mut cfg = IntegratorConfig::new(dt, 1.0).unwrap();
            cfg.method = Method::Euler;
            cfg.project = false;
            cfg.defect_alarm = 1.0;
            let traj = integrate(field, &SpherePoint(e0), &cfg, &Hooks::default())
                .into_result()
                .unwrap();
            (traj.last().0 - exact).norm()
        };
        let ratio = run(0.02) / run(0.01);
        assert!((1.6..2.6).contains(&ratio), "got {ratio}");
    }

    #[test]
    fn projection_is_idempotent_on_valid_states() {
        let mut s = SpherePoint(Vec3::new(0.0, 1.0, 0.0));
        assert!(s.project() <= 1e-14);
    }

    #[test]
    fn alarms_abort_with_partial_trajectory() {
        let cfg = IntegratorConfig::new(0.1, 1.0).unwrap();
        let hooks = Hooks {
            post_projection: None,
            alarms: vec![Alarm {
                name: "z drops".into(),
                threshold: 0.3,
                eval: Arc::new(|s: &SpherePoint| 1.0 - s.0.z),
            }],
            observers: Vec::new(),
        };
        let field = |s: &SpherePoint| -> Result<(DVector<f64>, f64), SolveError> {
            Ok((
                DVector::from_column_slice(Vec3::new(1.0, 0.0, 0.0).cross(&s.0).as_slice()),
                0.0,
            ))
        };
        let out = integrate(field, &SpherePoint(Vec3::new(0.0, 0.0, 1.0)), &cfg, &hooks);
        assert!(matches!(
            out.failure,
            Some(IntegrateError::DriftAlarm { .. })
        ));
        assert!(!out.trajectory.is_empty());
    }

    #[test]
    fn reconstruction_of_constant_rate_closes_the_circle() {
        // ∂h/∂μ ≡ ω: the reconstructed path is the one-parameter subgroup,
        // closing after a full period.
        let omega = Vec3::new(0.0, 0.0, 1.3);
        let h = ReducedHamiltonian::new(
            move |s| omega.dot(&s.mu),
            |_| crate::bundle::BaseTangent::zero(),
            move |_| omega,
            |_| YMomentum::default(),
        );
        let x = BasePoint::new(Rot3::IDENTITY, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let period = 2.0 * std::f64::consts::PI / omega.z;
        let n = 2000usize;
        let dt = period / n as f64;
        let state = ReducedState {
            x,
            y: YMomentum::default(),
            mu: Vec3::zeros(),
        };
        let traj = Trajectory {
            times: (0..=n).map(|i| i as f64 * dt).collect(),
            states: vec![state; n + 1],
            diags: vec![StepDiag::default(); n + 1],
        };
        let h0 = exp_so3(&Vec3::new(0.3, 0.2, -0.1));
        let path = reconstruct_group(&traj, h0, &ConnectionForm::trivial(), &h).unwrap();
        let last = path.last().unwrap();
        assert!((last.matrix() - h0.matrix()).amax() < 1e-8);
        for r in &path {
            assert!(r.ortho_defect() < 1e-9);
        }

        // zero rate keeps the group variable fixed
        let h_zero = ReducedHamiltonian::new(
            |_| 0.0,
            |_| crate::bundle::BaseTangent::zero(),
            |_| Vec3::zeros(),
            |_| YMomentum::default(),
        );
        let path = reconstruct_group(&traj, h0, &ConnectionForm::trivial(), &h_zero).unwrap();
        // per-step polar repair contributes ~1e-16 of rounding each
        assert!((path.last().unwrap().matrix() - h0.matrix()).amax() < 1e-12);
    }

    #[test]
    fn reconstruction_commutes_with_right_translation() {
        let omega = Vec3::new(0.4, -0.2, 0.9);
        let h = ReducedHamiltonian::new(
            move |s| omega.dot(&s.mu),
            |_| crate::bundle::BaseTangent::zero(),
            move |_| omega,
            |_| YMomentum::default(),
        );
        let x = BasePoint::new(Rot3::IDENTITY, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let n = 50usize;
        let state = ReducedState {
            x,
            y: YMomentum::default(),
            mu: Vec3::zeros(),
        };
        let traj = Trajectory {
            times: (0..=n).map(|i| i as f64 * 0.01).collect(),
            states: vec![state; n + 1],
            diags: vec![StepDiag::default(); n + 1],
        };
        let h0 = exp_so3(&Vec3::new(0.3, 0.2, -0.1));
        let b = exp_so3(&Vec3::new(-0.6, 0.1, 0.4));
        let p1 = reconstruct_group(&traj, h0, &ConnectionForm::trivial(), &h).unwrap();
        let p2 = reconstruct_group(&traj, h0 * b, &ConnectionForm::trivial(), &h).unwrap();
        for (a, ab) in p1.iter().zip(p2.iter()) {
            assert!(((*a * b).matrix() - ab.matrix()).amax() < 1e-12);
        }
    }
}
