//! Small dense linear-algebra helpers shared by the solvers.
//!
//! Least-squares and null-space routines go through the symmetric
//! eigendecomposition of the Gram matrix with iterative refinement rather
//! than a bidiagonal SVD; the systems here are tiny and well conditioned
//! after orthonormalization, and the symmetric path is reliable.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::tol;

struct GramPinv {
    vecs: DMatrix<f64>,
    vals: DVector<f64>,
    rank: usize,
}

impl GramPinv {
    fn new(g: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(g);
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        // eigenvalues of AᵀA are squared singular values; the floor keeps
        // rounding noise (~eps·λmax) out of the range space
        let cutoff = lmax * (tol::SVD_RCOND * tol::SVD_RCOND).max(1e-14);
        let rank = eig.eigenvalues.iter().filter(|l| **l > cutoff).count();
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            *v = if *v > cutoff { 1.0 / *v } else { 0.0 };
        }
        GramPinv {
            vecs: eig.eigenvectors,
            vals,
            rank,
        }
    }

    fn apply(&self, c: &DVector<f64>) -> DVector<f64> {
        let proj = self.vecs.transpose() * c;
        let scaled = DVector::from_iterator(
            proj.len(),
            proj.iter().zip(self.vals.iter()).map(|(p, v)| p * v),
        );
        &self.vecs * scaled
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
///
/// Returns `(x, residual_2norm, rank)`. For underdetermined consistent
/// systems this is the solution of smallest Euclidean norm.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64, usize) {
    if a.nrows() == 0 {
        return (DVector::zeros(a.ncols()), 0.0, 0);
    }
    let gram = a.transpose() * a;
    let pinv = GramPinv::new(gram);
    let mut x = pinv.apply(&(a.transpose() * b));
    // two rounds of refinement recover the accuracy lost to squaring
    for _ in 0..2 {
        let r = b - a * &x;
        let d = pinv.apply(&(a.transpose() * r));
        x += d;
    }
    let residual = (a * &x - b).norm();
    (x, residual, pinv.rank)
}

/// Orthonormal basis of the null space of `a`.
pub fn nullspace(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (0..n)
            .map(|i| {
                let mut v = DVector::zeros(n);
                v[i] = 1.0;
                v
            })
            .collect();
    }
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = lmax * (tol::SVD_RCOND * tol::SVD_RCOND).max(1e-14);
    let mut out = Vec::new();
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        if *l <= cutoff {
            out.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    out
}

/// Pivoted Gram–Schmidt with respect to the inner product `metric`.
///
/// Returns the orthonormal basis and the number of dropped (dependent)
/// inputs. `metric = None` means the Euclidean inner product.
pub fn gram_schmidt(
    vectors: &[DVector<f64>],
    metric: Option<&DMatrix<f64>>,
    drop_tol: f64,
) -> (Vec<DVector<f64>>, usize) {
    let inner = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        match metric {
            Some(m) => (a.transpose() * m * b)[(0, 0)],
            None => a.dot(b),
        }
    };
    let mut remaining: Vec<DVector<f64>> = vectors.to_vec();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dropped = 0;
    let scale: f64 = vectors
        .iter()
        .map(|v| inner(v, v).abs().sqrt())
        .fold(0.0, f64::max)
        .max(1.0);
    while !remaining.is_empty() {
        // pivot: take the candidate with the largest residual norm
        let (best, best_norm) = remaining
            .iter()
            .enumerate()
            .map(|(i, v)| (i, inner(v, v).max(0.0).sqrt()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        let v = remaining.swap_remove(best);
        if best_norm <= drop_tol * scale {
            dropped += remaining.len() + 1;
            break;
        }
        let q = &v / best_norm;
        for w in &mut remaining {
            let c = inner(&q, w);
            *w -= &q * c;
        }
        basis.push(q);
    }
    (basis, dropped)
}

/// Orthonormal basis (w.r.t. `metric`) of the intersection of two spans.
pub fn span_intersection(
    a: &[DVector<f64>],
    b: &[DVector<f64>],
    metric: Option<&DMatrix<f64>>,
) -> Vec<DVector<f64>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a[0].len();
    let mut m = DMatrix::zeros(n, a.len() + b.len());
    for (j, v) in a.iter().enumerate() {
        m.set_column(j, v);
    }
    for (j, v) in b.iter().enumerate() {
        m.set_column(a.len() + j, &(-v));
    }
    let null = nullspace(&m);
    let mut vectors = Vec::new();
    for coef in null {
        let mut v = DVector::zeros(n);
        for (j, basis_vec) in a.iter().enumerate() {
            v += basis_vec * coef[j];
        }
        if v.norm() > 1e-12 {
            vectors.push(v);
        }
    }
    gram_schmidt(&vectors, metric, tol::GS_DROP).0
}

/// Orthonormal basis of the metric-orthogonal complement of `sub` inside
/// the span of `within`.
pub fn complement_within(
    sub: &[DVector<f64>],
    within: &[DVector<f64>],
    metric: Option<&DMatrix<f64>>,
) -> Vec<DVector<f64>> {
    let inner = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        match metric {
            Some(m) => (a.transpose() * m * b)[(0, 0)],
            None => a.dot(b),
        }
    };
    let (sub_on, _) = gram_schmidt(sub, metric, tol::GS_DROP);
    let projected: Vec<DVector<f64>> = within
        .iter()
        .map(|w| {
            let mut v = w.clone();
            for s in &sub_on {
                let c = inner(s, &v);
                v -= s * c;
            }
            v
        })
        .collect();
    gram_schmidt(&projected, metric, tol::GS_DROP).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_picks_smallest_solution() {
        // x + y = 2 has min-norm solution (1, 1)
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0]);
        let (x, res, rank) = min_norm_lstsq(&a, &b);
        assert!(res < 1e-14);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_consistent_system_has_tiny_residual() {
        // duplicated consistent rows
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0, 3.0, 5.0]);
        let (x, res, rank) = min_norm_lstsq(&a, &b);
        assert!(res < 1e-13);
        assert_eq!(rank, 2);
        assert!((x[0] - 2.0).abs() < 1e-13 && (x[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn nullspace_dimensions() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let ns = nullspace(&a);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!((a.clone() * v).norm() < 1e-12);
        }
    }

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let v1 = DVector::from_row_slice(&[1.0, 0.0]);
        let v2 = DVector::from_row_slice(&[2.0, 0.0]);
        let v3 = DVector::from_row_slice(&[0.0, 3.0]);
        let (basis, dropped) = gram_schmidt(&[v1, v2, v3], None, 1e-10);
        assert_eq!(basis.len(), 2);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn intersection_and_complement() {
        let ex = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        let ey = DVector::from_row_slice(&[0.0, 1.0, 0.0]);
        let ez = DVector::from_row_slice(&[0.0, 0.0, 1.0]);
        let inter = span_intersection(&[ex.clone(), ey.clone()], &[ey.clone(), ez.clone()], None);
        assert_eq!(inter.len(), 1);
        assert!((inter[0].abs() - ey.abs()).norm() < 1e-12);

        let comp = complement_within(&[ex.clone()], &[ex.clone(), ey.clone()], None);
        assert_eq!(comp.len(), 1);
        assert!((comp[0].abs() - ey.abs()).norm() < 1e-12);
    }
}
