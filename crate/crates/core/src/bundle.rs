//! Trivialized state spaces for Q = SO(3) × S² × SO(3) with structure group
//! SO(3) acting by right translation on the last factor.
//!
//! Group rates are carried in right-trivialized form (ξ with ξ̂ = ĊC⁻¹, and
//! likewise η̂ = ṘR⁻¹ for the base attitude). Sphere points, tangents and
//! covectors live embedded in ℝ³ with explicit unit/tangency invariants; no
//! charts are used.

use nalgebra::{DVector, SVector};
use thiserror::Error;

use crate::algebra::{exp_so3, hat, AlgebraVector, CoAlgebraVector, Rot3, Vec3};
use crate::connection::ConnectionForm;
use crate::tol;

pub type Vec9 = SVector<f64, 9>;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("sphere point is not unit (|e| = {norm})")]
    NotUnit { norm: f64 },
    #[error("covector/tangent not tangent to the sphere (v·e = {defect:.3e})")]
    NotTangent { defect: f64 },
    #[error("atiyah image lost tangency beyond tolerance ({defect:.3e})")]
    ProjectionFailure { defect: f64 },
    #[error("finite-difference step left the manifold tolerance band")]
    StepFailure,
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
    #[error(transparent)]
    Connection(#[from] crate::connection::ConnectionError),
}

/// Point of the shape space 𝒳 = SO(3) × S².
#[derive(Clone, Copy, Debug)]
pub struct BasePoint {
    pub r: Rot3,
    /// Unit contact direction.
    pub e: Vec3,
}

impl BasePoint {
    pub fn new(r: Rot3, e: Vec3) -> Result<Self, BundleError> {
        let x = BasePoint { r, e };
        x.check()?;
        Ok(x)
    }

    pub fn check(&self) -> Result<(), BundleError> {
        self.r.check()?;
        let norm = self.e.norm();
        if (norm - 1.0).abs() > tol::UNIT {
            return Err(BundleError::NotUnit { norm });
        }
        Ok(())
    }
}

/// Tangent vector to the shape space: right-trivialized attitude rate plus a
/// sphere tangent (de·e = 0).
#[derive(Clone, Copy, Debug, Default)]
pub struct BaseTangent {
    pub eta: Vec3,
    pub de: Vec3,
}

impl BaseTangent {
    pub fn new(eta: Vec3, de: Vec3) -> Self {
        BaseTangent { eta, de }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scale(&self, s: f64) -> Self {
        BaseTangent {
            eta: self.eta * s,
            de: self.de * s,
        }
    }
}

/// Covector on the shape space; for the ball systems the slots are the
/// attitude momentum π and the contact covector σ.
#[derive(Clone, Copy, Debug, Default)]
pub struct YMomentum {
    pub pi: Vec3,
    pub sigma: Vec3,
}

impl YMomentum {
    pub fn new(pi: Vec3, sigma: Vec3) -> Self {
        YMomentum { pi, sigma }
    }
}

/// Natural pairing between a shape-space covector and tangent.
pub fn pair_base(cov: &YMomentum, t: &BaseTangent) -> f64 {
    cov.pi.dot(&t.eta) + cov.sigma.dot(&t.de)
}

/// Point of T*𝒳 × 𝔤*, the reduced phase space.
#[derive(Clone, Debug)]
pub struct ReducedState {
    pub x: BasePoint,
    pub y: YMomentum,
    pub mu: CoAlgebraVector,
}

impl ReducedState {
    pub fn new(x: BasePoint, y: YMomentum, mu: Vec3) -> Result<Self, BundleError> {
        let s = ReducedState { x, y, mu };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), BundleError> {
        self.x.check()?;
        let defect = self.y.sigma.dot(&self.x.e).abs();
        if defect > tol::TANGENCY {
            return Err(BundleError::NotTangent { defect });
        }
        Ok(())
    }
}

/// Point of T*Q in the trivialized form (R, π, e, σ, C, γ).
#[derive(Clone, Debug)]
pub struct FullState {
    pub r: Rot3,
    pub pi: Vec3,
    pub e: Vec3,
    pub sigma: Vec3,
    pub c: Rot3,
    pub gamma: Vec3,
}

impl FullState {
    pub fn new(
        r: Rot3,
        pi: Vec3,
        e: Vec3,
        sigma: Vec3,
        c: Rot3,
        gamma: Vec3,
    ) -> Result<Self, BundleError> {
        let s = FullState {
            r,
            pi,
            e,
            sigma,
            c,
            gamma,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), BundleError> {
        self.r.check()?;
        self.c.check()?;
        let norm = self.e.norm();
        if (norm - 1.0).abs() > tol::UNIT {
            return Err(BundleError::NotUnit { norm });
        }
        let defect = self.sigma.dot(&self.e).abs();
        if defect > tol::TANGENCY {
            return Err(BundleError::NotTangent { defect });
        }
        Ok(())
    }

    pub fn base(&self) -> BasePoint {
        BasePoint {
            r: self.r,
            e: self.e,
        }
    }
}

/// Tangent vector to Q in trivialized coordinates (η, ė, ξ).
#[derive(Clone, Copy, Debug, Default)]
pub struct TangentQ {
    pub eta: Vec3,
    pub de: Vec3,
    pub xi: Vec3,
}

impl TangentQ {
    pub fn new(eta: Vec3, de: Vec3, xi: Vec3) -> Self {
        TangentQ { eta, de, xi }
    }

    pub fn to_vec9(&self) -> Vec9 {
        let mut v = Vec9::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.eta);
        v.fixed_rows_mut::<3>(3).copy_from(&self.de);
        v.fixed_rows_mut::<3>(6).copy_from(&self.xi);
        v
    }

    pub fn from_vec9(v: &Vec9) -> Self {
        TangentQ {
            eta: v.fixed_rows::<3>(0).into(),
            de: v.fixed_rows::<3>(3).into(),
            xi: v.fixed_rows::<3>(6).into(),
        }
    }

    pub fn base(&self) -> BaseTangent {
        BaseTangent {
            eta: self.eta,
            de: self.de,
        }
    }
}

/// Covector on Q in trivialized coordinates (slots dual to (η, ė, ξ)).
#[derive(Clone, Copy, Debug, Default)]
pub struct CotangentQ {
    pub pi: Vec3,
    pub sigma: Vec3,
    pub gamma: Vec3,
}

impl CotangentQ {
    pub fn new(pi: Vec3, sigma: Vec3, gamma: Vec3) -> Self {
        CotangentQ { pi, sigma, gamma }
    }

    pub fn to_vec9(&self) -> Vec9 {
        let mut v = Vec9::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.pi);
        v.fixed_rows_mut::<3>(3).copy_from(&self.sigma);
        v.fixed_rows_mut::<3>(6).copy_from(&self.gamma);
        v
    }

    pub fn from_vec9(v: &Vec9) -> Self {
        CotangentQ {
            pi: v.fixed_rows::<3>(0).into(),
            sigma: v.fixed_rows::<3>(3).into(),
            gamma: v.fixed_rows::<3>(6).into(),
        }
    }

    pub fn pair(&self, t: &TangentQ) -> f64 {
        self.pi.dot(&t.eta) + self.sigma.dot(&t.de) + self.gamma.dot(&t.xi)
    }
}

/// Constraint argument of an l-connection. With first-order variational
/// constraints on a trivial bundle the G-invariant data of a constraint
/// point is exactly a reduced state.
pub type Zeta = ReducedState;

/// Tangential projection on the sphere: v ↦ v − (e·v)e.
pub fn project_sphere_tangent(e: &Vec3, v: &Vec3) -> Vec3 {
    v - e * e.dot(v)
}

/// Momentum map J(R, π, e, σ, C, γ) = C⁻¹γ.
pub fn momentum_map(s: &FullState) -> CoAlgebraVector {
    s.c.transpose() * s.gamma
}

/// Lifted right action ρ̂_B: (R, π, e, σ, C, γ) ↦ (R, π, e, σ, CB, γ).
pub fn lifted_action(s: &FullState, b: &Rot3) -> FullState {
    FullState {
        r: s.r,
        pi: s.pi,
        e: s.e,
        sigma: s.sigma,
        c: s.c * *b,
        gamma: s.gamma,
    }
}

/// Cotangent Atiyah map for the connection `conn`: drops the group variable
/// and shifts the shape covector by the dual of the connection form,
/// (x, y, γ) ↦ (x, y − 𝒜(x)*γ, γ).
pub fn atiyah_cotangent(s: &FullState, conn: &ConnectionForm) -> Result<ReducedState, BundleError> {
    let x = s.base();
    let mu = s.gamma;
    let (pi, sigma_raw) = if conn.is_trivial() {
        (s.pi, s.sigma)
    } else {
        let zeta = reduce_trivial(s);
        let dual = conn.dual_on_base(&x, &mu, Some(&zeta))?;
        (s.pi - dual.pi, s.sigma - dual.sigma)
    };
    let defect = sigma_raw.dot(&s.e).abs();
    if defect > tol::PROJECTION_FAIL {
        return Err(BundleError::ProjectionFailure { defect });
    }
    let sigma = project_sphere_tangent(&s.e, &sigma_raw);
    Ok(ReducedState {
        x,
        y: YMomentum { pi, sigma },
        mu,
    })
}

/// Trivial-connection projection of a full state; also serves as the
/// G-invariant constraint argument ζ of a full-space point.
pub fn reduce_trivial(s: &FullState) -> ReducedState {
    ReducedState {
        x: s.base(),
        y: YMomentum {
            pi: s.pi,
            sigma: project_sphere_tangent(&s.e, &s.sigma),
        },
        mu: s.gamma,
    }
}

/// Forward Atiyah map: (ẋ, ξ) ↦ (ẋ, 𝒜(x)ẋ + ξ) with ξ the right-trivialized
/// group rate.
pub fn atiyah_forward(
    x: &BasePoint,
    _h: &Rot3,
    xdot: &BaseTangent,
    hdot_body: AlgebraVector,
    conn: &ConnectionForm,
    zeta: Option<&Zeta>,
) -> Result<(BaseTangent, AlgebraVector), BundleError> {
    let a = if conn.is_trivial() {
        Vec3::zeros()
    } else {
        conn.value(x, xdot, zeta)?
    };
    Ok((*xdot, a + hdot_body))
}

/// Moves a base point a parameter distance `t` along the tangent `dx`
/// (exponential on the attitude slot, normalized chord on the sphere slot).
pub fn displace(x: &BasePoint, dx: &BaseTangent, t: f64) -> Result<BasePoint, BundleError> {
    let r = exp_so3(&(dx.eta * t)) * x.r;
    let chord = x.e + dx.de * t;
    let norm = chord.norm();
    if norm < 0.5 {
        return Err(BundleError::StepFailure);
    }
    Ok(BasePoint { r, e: chord / norm })
}

/// Parallel transport of a sphere tangent/covector from `e` to `e2` along the
/// connecting great circle (Levi-Civita of the round metric).
pub fn transport_sphere(e: &Vec3, e2: &Vec3, v: &Vec3) -> Vec3 {
    let axis = e.cross(e2);
    let n = axis.norm();
    if n < 1e-14 {
        return *v;
    }
    let angle = e.dot(e2).clamp(-1.0, 1.0).acos();
    let rot = exp_so3(&(axis / n * angle));
    rot * *v
}

/// Transports a shape-space covector from `x` to `x2`: the attitude slot is
/// carried unchanged (trivial affine connection in the right trivialization),
/// the sphere slot by Levi-Civita parallel transport.
pub fn transport_y(x: &BasePoint, x2: &BasePoint, y: &YMomentum) -> YMomentum {
    YMomentum {
        pi: y.pi,
        sigma: transport_sphere(&x.e, &x2.e, &y.sigma),
    }
}

/// Flat 21-coordinate layout of a reduced state (R row-major, π, e, σ, μ).
pub fn reduced_to_flat(s: &ReducedState) -> DVector<f64> {
    let mut v = DVector::zeros(21);
    write_rot(&mut v, 0, &s.x.r);
    write_vec3(&mut v, 9, &s.y.pi);
    write_vec3(&mut v, 12, &s.x.e);
    write_vec3(&mut v, 15, &s.y.sigma);
    write_vec3(&mut v, 18, &s.mu);
    v
}

pub fn reduced_from_flat(v: &DVector<f64>) -> ReducedState {
    ReducedState {
        x: BasePoint {
            r: read_rot(v, 0),
            e: read_vec3(v, 12),
        },
        y: YMomentum {
            pi: read_vec3(v, 9),
            sigma: read_vec3(v, 15),
        },
        mu: read_vec3(v, 18),
    }
}

/// Flat 30-coordinate layout of a full state (R, π, e, σ, C, γ).
pub fn full_to_flat(s: &FullState) -> DVector<f64> {
    let mut v = DVector::zeros(30);
    write_rot(&mut v, 0, &s.r);
    write_vec3(&mut v, 9, &s.pi);
    write_vec3(&mut v, 12, &s.e);
    write_vec3(&mut v, 15, &s.sigma);
    write_rot(&mut v, 18, &s.c);
    write_vec3(&mut v, 27, &s.gamma);
    v
}

pub fn full_from_flat(v: &DVector<f64>) -> FullState {
    FullState {
        r: read_rot(v, 0),
        pi: read_vec3(v, 9),
        e: read_vec3(v, 12),
        sigma: read_vec3(v, 15),
        c: read_rot(v, 18),
        gamma: read_vec3(v, 27),
    }
}

fn write_rot(v: &mut DVector<f64>, at: usize, r: &Rot3) {
    let m = r.matrix();
    for i in 0..3 {
        for j in 0..3 {
            v[at + 3 * i + j] = m[(i, j)];
        }
    }
}

fn read_rot(v: &DVector<f64>, at: usize) -> Rot3 {
    let mut m = crate::algebra::Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = v[at + 3 * i + j];
        }
    }
    Rot3::from_matrix_unchecked(m)
}

fn write_vec3(v: &mut DVector<f64>, at: usize, x: &Vec3) {
    v[at] = x.x;
    v[at + 1] = x.y;
    v[at + 2] = x.z;
}

fn read_vec3(v: &DVector<f64>, at: usize) -> Vec3 {
    Vec3::new(v[at], v[at + 1], v[at + 2])
}

/// Derivative of a rotation slot under a right-trivialized rate: Ṙ = η̂ R.
pub fn rot_rate(r: &Rot3, omega: &Vec3) -> crate::algebra::Mat3 {
    hat(omega) * r.matrix()
}
