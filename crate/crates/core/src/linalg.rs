//! Dense linear-algebra helpers shared by the propagators and decompositions.
//!
//! Storage and the heavy kernels (products, eigensolvers, Cholesky) come from
//! `faer`; this module adds the conventions the rest of the crate relies on:
//! descending eigen-ordering, deterministic tie-breaking inside degenerate
//! eigenspaces, and residual measures used by the invariant checks.

use std::ops::Range;

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use faer::c64;

pub type CMat = Mat<c64>;
pub type RMat = Mat<f64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cis(phase: f64) -> c64 {
    let (s, c) = phase.sin_cos();
    c64::new(c, s)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn real_identity(n: usize) -> RMat {
    Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

pub fn diag_c(d: &[f64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(d[i], 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn conj(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn transpose(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)])
}

pub fn adjoint(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].norm());
        }
    }
    acc
}

pub fn max_abs_real(m: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].abs());
        }
    }
    acc
}

/// `max |A - B|` over all entries.
pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc = acc.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    acc
}

pub fn max_abs_diff_real(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc = acc.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    acc
}

/// `max |A - Aᴴ|`.
pub fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            acc = acc.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    acc
}

/// `max |A - Aᵀ|`.
pub fn symmetric_defect(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            acc = acc.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    acc
}

pub fn symmetric_defect_real(m: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            acc = acc.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    acc
}

/// `A ← (A + Aᴴ)/2`.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in 0..j {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// `A ← (A + Aᵀ)/2`.
pub fn symmetrize(m: &mut CMat) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = (m[(i, j)] + m[(j, i)]) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrize_real(m: &mut RMat) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `max |U Uᴴ - I|`.
pub fn unitarity_defect(u: MatRef<'_, c64>) -> f64 {
    let g = u * u.adjoint();
    let n = g.nrows();
    let mut acc = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            acc = acc.max((g[(i, j)] - c64::new(target, 0.0)).norm());
        }
    }
    acc
}

pub fn orthogonality_defect(o: MatRef<'_, f64>) -> f64 {
    let g = o * o.transpose();
    max_abs_diff_real(g.as_ref(), real_identity(g.nrows()).as_ref())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order; eigenvectors are the columns of the returned matrix.
pub fn hermitian_eigen_desc(a: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::tolerance(format!("hermitian eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).rev().map(|k| s[k].re).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Eigendecomposition of a real symmetric matrix, ascending eigenvalues.
pub fn symmetric_eigen_asc(a: MatRef<'_, f64>) -> Result<(Vec<f64>, RMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::tolerance(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..a.nrows()).map(|k| s[k]).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn symmetric_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::tolerance(format!("symmetric eigensolver failed: {e:?}")))
}

pub fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::tolerance(format!("hermitian eigensolver failed: {e:?}")))
}

/// Groups a sorted sequence into maximal runs whose neighbours differ by at
/// most `tol`.
pub fn clusters(values: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || (values[k] - values[k - 1]).abs() > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// Relative gap below which eigenvalues count as degenerate for the
/// tie-break. Merging genuinely distinct eigenvalues costs accuracy of order
/// their gap, so this sits just above eigensolver round-off.
pub const TIE_TOL: f64 = 1e-12;

/// Rotates a vector so its largest-magnitude component is real and positive.
pub fn fix_phase(v: &mut [c64]) {
    let mut best = 0;
    let mut mag = -1.0;
    for (k, x) in v.iter().enumerate() {
        // strict comparison keeps the lowest index among equal magnitudes
        if x.norm() > mag * (1.0 + 1e-12) {
            mag = x.norm();
            best = k;
        }
    }
    if mag <= 0.0 {
        return;
    }
    let phase = v[best].conj() / mag;
    for x in v.iter_mut() {
        *x *= phase;
    }
}

fn orthogonalize_against(w: &mut [c64], basis: &[Vec<c64>]) {
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let proj: c64 = b.iter().zip(w.iter()).map(|(x, y)| x.conj() * y).sum();
            for (y, x) in w.iter_mut().zip(b) {
                *y -= proj * x;
            }
        }
    }
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic orthonormal basis of the column span of `v` (orthonormal
/// columns assumed).
///
/// Successive basis vectors are the normalized projections of the unit
/// vectors e₀, e₁, … onto what remains of the span, so the first vector has
/// the largest possible component at the lowest index. Each vector's
/// largest-magnitude component is made real positive.
pub fn canonical_span_basis(v: MatRef<'_, c64>) -> CMat {
    let (n, k) = (v.nrows(), v.ncols());
    // Gram-Schmidt runs on coordinates within the span, so the output can
    // never drift out of it however small the accepted projections are.
    let mut chosen: Vec<Vec<c64>> = Vec::with_capacity(k);
    for threshold in [1e-4, 1e-10] {
        for i in 0..n {
            if chosen.len() == k {
                break;
            }
            // coordinates of V Vᴴ eᵢ
            let mut w: Vec<c64> = (0..k).map(|c| v[(i, c)].conj()).collect();
            orthogonalize_against(&mut w, &chosen);
            let nw = norm(&w);
            if nw > threshold {
                for x in w.iter_mut() {
                    *x /= nw;
                }
                chosen.push(w);
            }
        }
        if chosen.len() == k {
            break;
        }
    }
    for c in 0..k {
        if chosen.len() == k {
            break;
        }
        let mut w = vec![c64::new(0.0, 0.0); k];
        w[c] = c64::new(1.0, 0.0);
        orthogonalize_against(&mut w, &chosen);
        let nw = norm(&w);
        if nw > 1e-8 {
            for x in w.iter_mut() {
                *x /= nw;
            }
            chosen.push(w);
        }
    }
    let mut out = Mat::from_fn(n, k, |r, c| (0..k).map(|j| v[(r, j)] * chosen[c][j]).sum());
    for c in 0..k {
        fix_phase(out.col_as_slice_mut(c));
    }
    out
}

/// Applies the deterministic tie-break to eigenvectors stored as columns:
/// within each cluster of (sorted) eigenvalues closer than `tol` the basis is
/// replaced by [`canonical_span_basis`]; isolated vectors get their phase
/// fixed.
pub fn canonicalize_eigenvectors(values: &[f64], vectors: &mut CMat, tol: f64) {
    let n = vectors.nrows();
    for range in clusters(values, tol) {
        if range.len() == 1 {
            let j = range.start;
            let mut col: Vec<c64> = (0..n).map(|r| vectors[(r, j)]).collect();
            fix_phase(&mut col);
            for r in 0..n {
                vectors[(r, j)] = col[r];
            }
        } else {
            let block = vectors.as_ref().subcols(range.start, range.len()).to_owned();
            let canon = canonical_span_basis(block.as_ref());
            for (c, j) in range.clone().enumerate() {
                for r in 0..n {
                    vectors[(r, j)] = canon[(r, c)];
                }
            }
        }
    }
}

/// `log det A` for a symmetric positive-definite matrix, via Cholesky.
pub fn spd_logdet(a: MatRef<'_, f64>) -> Result<f64> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|_| Error::validation("matrix is not positive definite"))?;
    let l = llt.L();
    Ok(2.0 * (0..a.nrows()).map(|k| l[(k, k)].ln()).sum::<f64>())
}

/// Principal square root of a symmetric positive-definite matrix.
pub fn spd_sqrt(a: MatRef<'_, f64>) -> Result<RMat> {
    let (vals, vecs) = symmetric_eigen_asc(a)?;
    if vals[0] <= 0.0 {
        return Err(Error::validation("matrix is not positive definite"));
    }
    let n = a.nrows();
    let scaled = Mat::from_fn(n, n, |i, j| vecs[(i, j)] * vals[j].sqrt());
    let mut out = &scaled * vecs.transpose();
    symmetrize_real(&mut out);
    Ok(out)
}
