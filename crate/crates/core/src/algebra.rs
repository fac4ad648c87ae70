//! Lie group/algebra kernel for G = SO(3).
//!
//! Rotations are stored as plain 3×3 matrices so that they map directly onto
//! the attitude matrices of the mechanical examples; 𝔰𝔬(3) is identified with
//! ℝ³ through the hat map, under which the Lie bracket is the cross product.
//! The dual 𝔤* is identified with ℝ³ via the Euclidean pairing.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::tol;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Element of the Lie algebra 𝔰𝔬(3) ≅ ℝ³ (axis–angle rate vector).
pub type AlgebraVector = Vec3;

/// Element of the dual 𝔤* ≅ ℝ³, paired with 𝔤 by the dot product.
pub type CoAlgebraVector = Vec3;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("matrix is not skew-symmetric (defect {defect:.3e})")]
    NotSkew { defect: f64 },
    #[error("matrix is singular or not orientation-preserving (det {det:.3e})")]
    Degenerate { det: f64 },
    #[error("matrix is not a rotation (orthogonality defect {defect:.3e})")]
    NotRotation { defect: f64 },
}

/// A rotation matrix with verified orthonormality and unit determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot3(Mat3);

impl Rot3 {
    pub const IDENTITY: Rot3 = Rot3(Mat3::new(
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        0.0, 0.0, 1.0,
    ));

    /// Wraps a matrix after checking MᵀM = I and det = +1 within tolerance.
    pub fn new(m: Mat3) -> Result<Self, AlgebraError> {
        let defect = ortho_defect(&m);
        if defect > tol::ROT_ORTHO {
            return Err(AlgebraError::NotRotation { defect });
        }
        Ok(Rot3(m))
    }

    /// Wraps a matrix without validation. Integration stages pass through
    /// slightly non-orthonormal matrices that are repaired afterwards.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rot3(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Inverse rotation (transpose).
    pub fn transpose(&self) -> Rot3 {
        Rot3(self.0.transpose())
    }

    /// ‖MᵀM − I‖∞ combined with the determinant defect.
    pub fn ortho_defect(&self) -> f64 {
        ortho_defect(&self.0)
    }

    pub fn check(&self) -> Result<(), AlgebraError> {
        let defect = self.ortho_defect();
        if defect > tol::ROT_ORTHO {
            Err(AlgebraError::NotRotation { defect })
        } else {
            Ok(())
        }
    }
}

impl std::ops::Mul<Rot3> for Rot3 {
    type Output = Rot3;
    fn mul(self, rhs: Rot3) -> Rot3 {
        Rot3(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for Rot3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

fn ortho_defect(m: &Mat3) -> f64 {
    let gram = m.transpose() * m - Mat3::identity();
    let g = gram.amax();
    let d = (m.determinant() - 1.0).abs();
    g.max(d)
}

/// Hat map ℝ³ → 𝔰𝔬(3): hat(v)·w = v × w.
pub fn hat(v: &AlgebraVector) -> Mat3 {
    Mat3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Inverse of the hat map. Fails if the symmetric part of `m` exceeds tolerance.
pub fn vee(m: &Mat3) -> Result<AlgebraVector, AlgebraError> {
    let sym = 0.5 * (m + m.transpose());
    let defect = sym.amax();
    if defect > tol::SKEW {
        return Err(AlgebraError::NotSkew { defect });
    }
    Ok(Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    ))
}

/// Rotation exponential by the Rodrigues formula.
///
/// For |v| below [`tol::EXP_TAYLOR_SWITCH`] the trigonometric coefficients are
/// replaced by their two-term Taylor expansions to avoid 0/0.
pub fn exp_so3(v: &AlgebraVector) -> Rot3 {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < tol::EXP_TAYLOR_SWITCH {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(v);
    Rot3(Mat3::identity() + a * k + b * (k * k))
}

/// Adjoint action Ad_g ξ = g·ξ under the vector identification of 𝔰𝔬(3).
pub fn adjoint(g: &Rot3, v: &AlgebraVector) -> AlgebraVector {
    *g.matrix() * v
}

/// Coadjoint-type map ad*_ξ μ = μ × ξ, the transpose of ad_ξ = ξ × ·.
pub fn ad_star(xi: &AlgebraVector, mu: &CoAlgebraVector) -> CoAlgebraVector {
    mu.cross(xi)
}

/// Nearest rotation in Frobenius norm (polar factor), used to repair
/// orthonormality drift after integration steps.
///
/// Computed by the Newton iteration X ← (X + X⁻ᵀ)/2, which converges
/// quadratically to the orthogonal polar factor for nonsingular input.
pub fn orthonormalize(m: &Mat3) -> Result<Rot3, AlgebraError> {
    let det = m.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(AlgebraError::Degenerate { det });
    }
    let mut x = *m;
    for _ in 0..40 {
        let inv_t = match x.try_inverse() {
            Some(inv) => inv.transpose(),
            None => return Err(AlgebraError::Degenerate { det }),
        };
        let next = 0.5 * (x + inv_t);
        let step = (next - x).amax();
        x = next;
        if step < 1e-15 {
            break;
        }
    }
    let defect = ortho_defect(&x);
    if defect > tol::ROT_ORTHO {
        return Err(AlgebraError::Degenerate { det });
    }
    Ok(Rot3(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rot_z(angle: f64) -> Rot3 {
        exp_so3(&Vec3::new(0.0, 0.0, angle))
    }

    #[test]
    fn hat_of_z_axis_matches_skew_layout() {
        let m = hat(&Vec3::new(0.0, 0.0, 1.0));
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(m, expected);
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn hat_applies_cross_product() {
        let v = Vec3::new(1.0, 0.0, 0.0);
        let w = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(hat(&v) * w, Vec3::new(0.0, 0.0, 1.0));
        // oracle: direct cross product on a generic pair
        let a = Vec3::new(0.3, -1.2, 2.0);
        let b = Vec3::new(-0.7, 0.4, 0.9);
        assert_relative_eq!(hat(&a) * b, a.cross(&b), epsilon = 1e-15);
    }

    #[test]
    fn vee_round_trips_and_rejects_non_skew() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let m = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(vee(&m).unwrap(), Vec3::new(0.0, 0.0, 1.0));
        assert!(vee(&Mat3::identity()).is_err());
    }

    #[test]
    fn exp_matches_rodrigues_oracle() {
        assert_eq!(exp_so3(&Vec3::zeros()).matrix(), Rot3::IDENTITY.matrix());

        // oracle: Rodrigues evaluated by hand for a quarter turn about z
        let r = rot_z(std::f64::consts::FRAC_PI_2);
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(*r.matrix(), expected, epsilon = 1e-15);

        // full turn returns to the identity
        let full = rot_z(2.0 * std::f64::consts::PI);
        assert!((full.matrix() - Mat3::identity()).amax() < 1e-12);
    }

    #[test]
    fn exp_taylor_branch_is_continuous() {
        let v = Vec3::new(3e-7, -4e-7, 5e-7);
        let r = exp_so3(&v);
        r.check().unwrap();
        let linear = Mat3::identity() + hat(&v);
        assert!((r.matrix() - linear).amax() < 1e-12);
    }

    #[test]
    fn adjoint_is_matrix_action_and_conjugation() {
        let v = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(adjoint(&Rot3::IDENTITY, &v), v);
        let g = rot_z(std::f64::consts::FRAC_PI_2);
        assert_eq!(adjoint(&g, &Vec3::zeros()), Vec3::zeros());
        assert_relative_eq!(adjoint(&g, &v), Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        // hat(Ad_g v) = g hat(v) gᵀ
        let w = Vec3::new(0.2, -0.8, 0.5);
        let lhs = hat(&adjoint(&g, &w));
        let rhs = g.matrix() * hat(&w) * g.matrix().transpose();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
    }

    #[test]
    fn ad_star_is_transpose_of_ad() {
        let xi = Vec3::new(1.0, 0.0, 0.0);
        let mu = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(ad_star(&xi, &mu), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(ad_star(&xi, &xi), Vec3::zeros());
        assert_eq!(
            ad_star(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, 5.0)),
            Vec3::zeros()
        );
        // ⟨ad*_ξ μ, w⟩ = ⟨μ, ξ × w⟩
        let (xi, mu, w) = (
            Vec3::new(0.4, 1.1, -0.3),
            Vec3::new(-0.2, 0.9, 0.7),
            Vec3::new(1.3, -0.5, 0.2),
        );
        assert_relative_eq!(
            ad_star(&xi, &mu).dot(&w),
            mu.dot(&xi.cross(&w)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn orthonormalize_returns_polar_factor() {
        let r = exp_so3(&Vec3::new(0.3, -0.4, 0.9));
        let again = orthonormalize(r.matrix()).unwrap();
        assert!((again.matrix() - r.matrix()).amax() < 1e-12);

        let mut perturbed = *r.matrix();
        perturbed[(0, 1)] += 1e-6;
        let repaired = orthonormalize(&perturbed).unwrap();
        assert!(repaired.ortho_defect() < 1e-12);

        // oracle: the polar factor of a positive multiple of I is I
        let scaled = orthonormalize(&(2.0 * Mat3::identity())).unwrap();
        assert!((scaled.matrix() - Mat3::identity()).amax() < 1e-14);

        assert!(orthonormalize(&Mat3::zeros()).is_err());
        let mut flipped = Mat3::identity();
        flipped[(2, 2)] = -1.0;
        assert!(orthonormalize(&flipped).is_err());
    }
}
