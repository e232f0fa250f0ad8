//! Small dense helpers shared by the walk, spectral and trapping code.
//!
//! Operators are `ndarray::Array2<C64>`; anything that needs a
//! factorization is handed to `faer`.

use faer::{Mat, MatRef};
use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `⟨a|b⟩`, conjugate-linear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// Max-entry distance between two vectors.
pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub fn matvec(m: &Array2<C64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    m.rows()
        .into_iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Max-entry norm of `m - I`.
pub fn identity_deviation(m: &Array2<C64>) -> f64 {
    m.indexed_iter()
        .map(|((i, j), z)| if i == j { (z - ONE).norm() } else { z.norm() })
        .fold(0.0, f64::max)
}

/// Max-entry norm of `U†U - I`.
pub fn unitarity_deviation(m: &Array2<C64>) -> f64 {
    identity_deviation(&adjoint(m).dot(m))
}

pub fn max_entry_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Max-entry norm of `m - m†`.
pub fn hermiticity_deviation(m: &Array2<C64>) -> f64 {
    m.indexed_iter()
        .map(|((i, j), z)| (z - m[[j, i]].conj()).norm())
        .fold(0.0, f64::max)
}

pub(crate) fn to_faer(m: ArrayView2<'_, C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// All eigenvalues of a general complex matrix (unsorted).
pub fn eigenvalues(m: ArrayView2<'_, C64>) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let fm = to_faer(m);
    fm.eigenvalues()
        .map_err(|e| Error::NonConvergence(format!("{e:?}")))
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the lower triangle is read.
pub fn hermitian_eigenvalues(m: ArrayView2<'_, C64>) -> Result<Vec<f64>> {
    let fm = to_faer(m);
    let mut ev = fm
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::NonConvergence(format!("{e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &Array2<C64>) -> Result<f64> {
    let fm = to_faer(m.view());
    let r: MatRef<'_, C64> = fm.as_ref();
    let sv = r
        .singular_values()
        .map_err(|e| Error::NonConvergence(format!("{e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

/// Outcome of [`modified_gram_schmidt`].
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub vectors: Vec<Vec<C64>>,
    /// Input indices kept, in order.
    pub kept: Vec<usize>,
    /// Input indices whose residual norm fell below the tolerance.
    pub rejected: Vec<usize>,
    /// Residual norm of each kept vector before scaling (the diagonal of `R`).
    pub norms: Vec<f64>,
}

/// Modified Gram–Schmidt with one full re-orthogonalization pass, in input order.
/// A vector whose residual norm drops below `tol` is rejected as dependent.
pub fn modified_gram_schmidt(input: &[Vec<C64>], tol: f64) -> Orthonormalized {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(input.len());
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    let mut norms = Vec::new();
    for (idx, v) in input.iter().enumerate() {
        let mut w = v.clone();
        for _pass in 0..2 {
            for q in &out {
                let c = inner(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let nrm = norm(&w);
        if nrm < tol {
            rejected.push(idx);
            continue;
        }
        for wi in &mut w {
            *wi /= nrm;
        }
        out.push(w);
        kept.push(idx);
        norms.push(nrm);
    }
    Orthonormalized {
        vectors: out,
        kept,
        rejected,
        norms,
    }
}

/// Max-entry deviation of the Gram matrix of `vs` from the identity.
pub fn gram_deviation(vs: &[Vec<C64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((inner(a, b) - target).norm());
        }
    }
    worst
}

/// `Σ |v⟩⟨v|` over an orthonormal set.
pub fn projector(vs: &[Vec<C64>], dim: usize) -> Array2<C64> {
    let mut p = Array2::<C64>::zeros((dim, dim));
    for v in vs {
        for i in 0..dim {
            if v[i] == ZERO {
                continue;
            }
            for j in 0..dim {
                p[[i, j]] += v[i] * v[j].conj();
            }
        }
    }
    p
}
