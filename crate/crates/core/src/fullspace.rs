//! Direct integration of the constrained dynamics on T*Q: base velocities
//! from the fiber derivative of H, momentum rates from the base derivative
//! plus Lagrange multipliers spanning the constraint-force space F_V = C_V°.
//!
//! This module is deliberately assembled from the unreduced equations so it
//! can serve as an independent oracle for the reduced solver.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::algebra::Vec3;
use crate::bundle::{
    project_sphere_tangent, reduce_trivial, CotangentQ, FullState, TangentQ, Zeta,
};
use crate::connection::VariationalDistribution;
use crate::reduction::SolveError;
use crate::scenarios::{BallParams, LyapunovSpec};
use crate::{num, tol};

/// Constraint-force space F_V(ζ), organized by constraint family so that
/// recovered multipliers stay attributable (e.g. rolling reaction vs control
/// torque).
#[derive(Clone)]
pub struct ForceSpace {
    families: Vec<(String, Arc<dyn Fn(&Zeta) -> Vec<CotangentQ> + Send + Sync>)>,
}

impl ForceSpace {
    pub fn empty() -> Self {
        ForceSpace {
            families: Vec::new(),
        }
    }

    pub fn with_family<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(&Zeta) -> Vec<CotangentQ> + Send + Sync + 'static,
    {
        self.families.push((name.to_string(), Arc::new(f)));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    /// Stacked basis with (family name, count) bookkeeping.
    pub fn basis(&self, zeta: &Zeta) -> (Vec<CotangentQ>, Vec<(String, usize)>) {
        let mut basis = Vec::new();
        let mut layout = Vec::new();
        for (name, f) in &self.families {
            let fam = f(zeta);
            layout.push((name.clone(), fam.len()));
            basis.extend(fam);
        }
        (basis, layout)
    }

    /// Worst pairing of a force covector with a variational generator; the
    /// force space must annihilate the distribution.
    pub fn annihilation_defect(&self, dist: &VariationalDistribution, zeta: &Zeta) -> f64 {
        let (basis, _) = self.basis(zeta);
        let gens = dist.generators(zeta);
        let mut worst: f64 = 0.0;
        for f in &basis {
            for g in &gens {
                worst = worst.max(f.pair(g).abs());
            }
        }
        worst
    }
}

/// A kinematic constraint on the full phase space, order k ≤ 2.
#[derive(Clone)]
pub struct FullConstraint {
    pub name: String,
    pub order: u8,
    residual: Option<Arc<dyn Fn(&FullState) -> DVector<f64> + Send + Sync>>,
    rate: Arc<dyn Fn(&FullState, &FullDerivative) -> DVector<f64> + Send + Sync>,
}

impl FullConstraint {
    pub fn order1(
        name: &str,
        residual: impl Fn(&FullState) -> DVector<f64> + Send + Sync + 'static,
        rate: impl Fn(&FullState, &FullDerivative) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        FullConstraint {
            name: name.to_string(),
            order: 1,
            residual: Some(Arc::new(residual)),
            rate: Arc::new(rate),
        }
    }

    pub fn order2(
        name: &str,
        rate: impl Fn(&FullState, &FullDerivative) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        FullConstraint {
            name: name.to_string(),
            order: 2,
            residual: None,
            rate: Arc::new(rate),
        }
    }

    pub fn state_residual(&self, s: &FullState) -> Option<DVector<f64>> {
        self.residual.as_ref().map(|f| f(s))
    }

    pub fn rate_residual(&self, s: &FullState, d: &FullDerivative) -> DVector<f64> {
        (self.rate)(s, d)
    }
}

/// Full-space Hamiltonian dynamics with constraint forces.
#[derive(Clone)]
pub struct FullDynamics {
    hamiltonian: Arc<dyn Fn(&FullState) -> f64 + Send + Sync>,
    fiber: Arc<dyn Fn(&FullState) -> TangentQ + Send + Sync>,
    base: Arc<dyn Fn(&FullState) -> CotangentQ + Send + Sync>,
    pub force: ForceSpace,
    pub kinematic: Vec<FullConstraint>,
    pub dist: VariationalDistribution,
}

impl FullDynamics {
    pub fn new(
        hamiltonian: impl Fn(&FullState) -> f64 + Send + Sync + 'static,
        fiber: impl Fn(&FullState) -> TangentQ + Send + Sync + 'static,
        base: impl Fn(&FullState) -> CotangentQ + Send + Sync + 'static,
        force: ForceSpace,
        kinematic: Vec<FullConstraint>,
        dist: VariationalDistribution,
    ) -> Self {
        FullDynamics {
            hamiltonian: Arc::new(hamiltonian),
            fiber: Arc::new(fiber),
            base: Arc::new(base),
            force,
            kinematic,
            dist,
        }
    }

    pub fn hamiltonian(&self, s: &FullState) -> f64 {
        (self.hamiltonian)(s)
    }

    /// Fiber derivative 𝔽H: base velocities (η, ė, ξ).
    pub fn fiber(&self, s: &FullState) -> TangentQ {
        (self.fiber)(s)
    }

    /// Base derivative 𝔹H with momenta parallel-fixed.
    pub fn base(&self, s: &FullState) -> CotangentQ {
        (self.base)(s)
    }

    /// Worst relative disagreement between the analytic derivatives and
    /// central finite differences at `s`.
    pub fn fd_defect(&self, s: &FullState) -> f64 {
        let t = tol::FD_STEP_DERIVATIVE;
        let scale = 1.0_f64.max(self.hamiltonian(s).abs());
        let mut worst: f64 = 0.0;

        let fiber = self.fiber(s);
        let (t1, t2) = crate::connection::sphere_tangent_basis(&s.e);
        // momentum directions: π (3), tangential σ (2), γ (3)
        for i in 0..3 {
            let mut d = Vec3::zeros();
            d[i] = 1.0;
            let mut plus = s.clone();
            plus.pi += d * t;
            let mut minus = s.clone();
            minus.pi -= d * t;
            let fd = (self.hamiltonian(&plus) - self.hamiltonian(&minus)) / (2.0 * t);
            worst = worst.max((fd - fiber.eta[i]).abs() / scale);
        }
        for dir in [t1, t2] {
            let mut plus = s.clone();
            plus.sigma += dir * t;
            let mut minus = s.clone();
            minus.sigma -= dir * t;
            let fd = (self.hamiltonian(&plus) - self.hamiltonian(&minus)) / (2.0 * t);
            worst = worst.max((fd - fiber.de.dot(&dir)).abs() / scale);
        }
        for i in 0..3 {
            let mut d = Vec3::zeros();
            d[i] = 1.0;
            let mut plus = s.clone();
            plus.gamma += d * t;
            let mut minus = s.clone();
            minus.gamma -= d * t;
            let fd = (self.hamiltonian(&plus) - self.hamiltonian(&minus)) / (2.0 * t);
            worst = worst.max((fd - fiber.xi[i]).abs() / scale);
        }

        // base directions with transported momenta
        let base = self.base(s);
        let move_state = |dir: &TangentQ, sgn: f64| -> FullState {
            let mut out = s.clone();
            out.r = crate::algebra::exp_so3(&(dir.eta * (sgn * t))) * s.r;
            out.c = crate::algebra::exp_so3(&(dir.xi * (sgn * t))) * s.c;
            if dir.de.norm() > 0.0 {
                let e2 = (s.e + dir.de * (sgn * t)).normalize();
                out.sigma = crate::bundle::transport_sphere(&s.e, &e2, &s.sigma);
                out.e = e2;
            }
            out
        };
        let mut dirs = Vec::new();
        for i in 0..3 {
            let mut b = Vec3::zeros();
            b[i] = 1.0;
            dirs.push((TangentQ::new(b, Vec3::zeros(), Vec3::zeros()), base.pi[i]));
            dirs.push((TangentQ::new(Vec3::zeros(), Vec3::zeros(), b), base.gamma[i]));
        }
        dirs.push((
            TangentQ::new(Vec3::zeros(), t1, Vec3::zeros()),
            base.sigma.dot(&t1),
        ));
        dirs.push((
            TangentQ::new(Vec3::zeros(), t2, Vec3::zeros()),
            base.sigma.dot(&t2),
        ));
        for (dir, analytic) in dirs {
            let fd = (self.hamiltonian(&move_state(&dir, 1.0))
                - self.hamiltonian(&move_state(&dir, -1.0)))
                / (2.0 * t);
            worst = worst.max((fd - analytic).abs() / scale);
        }
        worst
    }
}

/// Time derivative of a full state in trivialized coordinates.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullDerivative {
    pub eta: Vec3,
    pub pi_dot: Vec3,
    pub de: Vec3,
    pub sigma_dot: Vec3,
    pub xi: Vec3,
    pub gamma_dot: Vec3,
}

/// Covectors spanning the annihilator of `generators` inside the embedded
/// cotangent space at contact direction `e` (σ-slot tangential).
pub fn annihilator_basis(generators: &[TangentQ], e: &Vec3) -> Vec<CotangentQ> {
    let nrows = generators.len() + 1;
    let mut a = DMatrix::zeros(nrows, 9);
    for (i, g) in generators.iter().enumerate() {
        let v = g.to_vec9();
        for j in 0..9 {
            a[(i, j)] = v[j];
        }
    }
    // exclude the sphere normal direction from the covector space
    for j in 0..3 {
        a[(generators.len(), 3 + j)] = e[j];
    }
    num::nullspace(&a)
        .iter()
        .map(|v| {
            CotangentQ::new(
                Vec3::new(v[0], v[1], v[2]),
                Vec3::new(v[3], v[4], v[5]),
                Vec3::new(v[6], v[7], v[8]),
            )
        })
        .collect()
}

/// Diagnostics of one full-space derivative solve.
#[derive(Clone, Debug)]
pub struct FullSolveDiagnostics {
    pub residual: f64,
    pub rank: usize,
    pub rows: usize,
    /// State-derivative components determined per step
    /// (η, ė, ξ and the momentum rates π′, σ′, γ′).
    pub solve_unknowns: usize,
    /// First-order ODE count: base equations plus one per variational
    /// direction.
    pub ode_count: usize,
    pub cv_dim: usize,
    /// Recovered multipliers per constraint-force family.
    pub multipliers: Vec<(String, Vec<f64>)>,
    /// Distance of the realized constraint force from span F_V.
    pub force_residual: f64,
    pub recheck: f64,
}

/// Explicit constrained vector field on T*Q.
///
/// Base velocities are 𝔽H; the momentum rates solve, by minimum-norm least
/// squares, the dynamics paired against the variational generators together
/// with the differentiated kinematic constraints. Multipliers are recovered
/// afterwards by expanding the realized force in the F_V basis.
pub fn full_vector_field(
    dyn_: &FullDynamics,
    s: &FullState,
) -> Result<(FullDerivative, FullSolveDiagnostics), SolveError> {
    // integrator stages carry O(dt²) unit/tangency drift; evaluate all
    // geometry on the normalized representative so projectors stay exact
    let s = &{
        let mut s = s.clone();
        s.e = s.e.normalize();
        s.sigma = project_sphere_tangent(&s.e, &s.sigma);
        s
    };
    let mut pre: f64 = 0.0;
    for k in &dyn_.kinematic {
        if let Some(r) = k.state_residual(s) {
            pre = pre.max(r.amax());
        }
    }
    if pre > tol::SOLVE_PRECONDITION {
        return Err(SolveError::Precondition { residual: pre });
    }

    let v = dyn_.fiber(s);
    let zeta = reduce_trivial(s);
    let gens = dyn_.dist.generators(&zeta);
    let bh = dyn_.base(s);

    let assemble = |m: &DVector<f64>| -> DVector<f64> {
        let d = derivative_from(&v, m, &s.e);
        let cov = CotangentQ::new(
            d.pi_dot,
            project_sphere_tangent(&s.e, &d.sigma_dot),
            d.gamma_dot,
        );
        let mut rows: Vec<f64> = gens
            .iter()
            .map(|g| {
                CotangentQ::new(cov.pi + bh.pi, cov.sigma + bh.sigma, cov.gamma + bh.gamma).pair(g)
            })
            .collect();
        for k in &dyn_.kinematic {
            rows.extend(k.rate_residual(s, &d).iter().cloned());
        }
        rows.push(d.sigma_dot.dot(&s.e) + s.sigma.dot(&d.de));
        DVector::from_vec(rows)
    };

    let r0 = assemble(&DVector::zeros(9));
    let nrows = r0.len();
    let mut a = DMatrix::zeros(nrows, 9);
    for j in 0..9 {
        let mut unit = DVector::zeros(9);
        unit[j] = 1.0;
        a.set_column(j, &(assemble(&unit) - &r0));
    }
    let b = -r0;
    let (m, residual, rank) = num::min_norm_lstsq(&a, &b);
    if residual > tol::SOLVE_RESIDUAL {
        return Err(SolveError::Inconsistent { residual, rank });
    }
    let recheck = assemble(&m).amax();
    let d = derivative_from(&v, &m, &s.e);

    // realized force F = D/Dt(momenta) + 𝔹H, expanded in the F_V basis
    let force = CotangentQ::new(
        d.pi_dot + bh.pi,
        project_sphere_tangent(&s.e, &d.sigma_dot) + bh.sigma,
        d.gamma_dot + bh.gamma,
    );
    let (fam_basis, layout) = dyn_.force.basis(&zeta);
    let (multipliers, force_residual) = if fam_basis.is_empty() {
        (Vec::new(), force.to_vec9().norm())
    } else {
        let mut fb = DMatrix::zeros(9, fam_basis.len());
        for (j, f) in fam_basis.iter().enumerate() {
            fb.set_column(j, &DVector::from_column_slice(f.to_vec9().as_slice()));
        }
        let fvec = DVector::from_column_slice(force.to_vec9().as_slice());
        let (lambda, fres, _) = num::min_norm_lstsq(&fb, &fvec);
        let mut split = Vec::new();
        let mut at = 0;
        for (name, count) in layout {
            split.push((name, lambda.as_slice()[at..at + count].to_vec()));
            at += count;
        }
        (split, fres)
    };

    let diag = FullSolveDiagnostics {
        residual,
        rank,
        rows: nrows,
        solve_unknowns: 9 + 9,
        ode_count: 8 + gens.len(),
        cv_dim: gens.len(),
        multipliers,
        force_residual,
        recheck,
    };
    Ok((d, diag))
}

fn derivative_from(v: &TangentQ, m: &DVector<f64>, _e: &Vec3) -> FullDerivative {
    FullDerivative {
        eta: v.eta,
        de: v.de,
        xi: v.xi,
        pi_dot: Vec3::new(m[0], m[1], m[2]),
        sigma_dot: Vec3::new(m[3], m[4], m[5]),
        gamma_dot: Vec3::new(m[6], m[7], m[8]),
    }
}

/// Residual of a Lyapunov constraint ⟨dV(s), ṡ⟩ + μ_rate(s).
pub fn lyapunov_residual(spec: &LyapunovSpec, s: &FullState, ds: &FullDerivative) -> f64 {
    let x = s.base();
    let p = stack_momenta(s);
    let phi_p = spec.phi(&x) * p;
    let rate_momentum = phi_p.fixed_rows::<3>(0).dot(&ds.pi_dot)
        + phi_p.fixed_rows::<3>(3).dot(&ds.sigma_dot)
        + phi_p.fixed_rows::<3>(6).dot(&ds.gamma_dot);
    let (grad_rot, grad_sph) = spec.base_grad(s);
    rate_momentum + grad_rot.dot(&ds.eta) + grad_sph.dot(&ds.de) + spec.mu_rate(s)
}

pub(crate) fn stack_momenta(s: &FullState) -> crate::bundle::Vec9 {
    let mut p = crate::bundle::Vec9::zeros();
    p.fixed_rows_mut::<3>(0).copy_from(&s.pi);
    p.fixed_rows_mut::<3>(3).copy_from(&s.sigma);
    p.fixed_rows_mut::<3>(6).copy_from(&s.gamma);
    p
}

/// Rolling-contact residual σ/m₂ − (1/(r₁+r₂))((r₁/I₁)π + (r₂/I₂)γ) × e.
pub fn rolling_residual(s: &FullState, p: &BallParams) -> Vec3 {
    let k = 1.0 / (p.r1 + p.r2);
    s.sigma / p.m2 - k * ((p.r1 / p.i1) * s.pi + (p.r2 / p.i2) * s.gamma).cross(&s.e)
}
