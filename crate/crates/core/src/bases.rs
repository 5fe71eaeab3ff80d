//! Broadband mode bases for lossy (mixed) states: Mercer-Wolf,
//! Williamson-Euler and the minimal-squeezing (MSq) basis, plus per-basis
//! reports.

use std::f64::consts::PI;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{
    correlations_from_covariance, covariance_unchecked, mode_count, orthosymplectic, purity, quadrature_report,
    reduced_covariance, symplectic_form, transform_correlations, BasisKind, BasisTag, CorrelationPair,
    CovarianceMatrix, ModeBasis, QuadratureVariance,
};
use crate::linalg::{self, c64, CMat, RMat, I};
use crate::lossless::{bloch_messiah, BogoliubovPair};

/// Rotates each mode (row of `u`) by `e^{−iφ/2}` with `φ = arg⟨B_iB_i⟩`, so
/// the anomalous moment of every mode becomes real and non-negative.
pub fn align_phases(mut u: CMat, corr: &CorrelationPair) -> Result<CMat> {
    let n = u.nrows();
    let b = transform_correlations(corr, &ModeBasis { u: u.clone(), kind: BasisKind::Custom })?;
    let floor = 1e-300;
    for i in 0..n {
        let m = b.c2[(i, i)];
        let phi = if m.norm() > floor { m.arg() } else { 0.0 };
        let rot = linalg::cis(-0.5 * phi);
        for j in 0..n {
            u[(i, j)] *= rot;
        }
    }
    Ok(u)
}

fn require_monochromatic(corr: &CorrelationPair) -> Result<()> {
    if corr.basis != BasisTag::Monochromatic {
        return Err(Error::validation("state must be given in the monochromatic basis"));
    }
    Ok(())
}

/// Eigenbasis of `⟨a†a⟩`, occupations descending, phases aligned.
pub fn mercer_wolf(corr: &CorrelationPair) -> Result<ModeBasis> {
    require_monochromatic(corr)?;
    let (vals, mut v) = linalg::hermitian_eigen_desc(corr.c1.as_ref())?;
    linalg::canonicalize_eigenvectors(&vals, &mut v, linalg::TIE_TOL * vals[0].abs().max(1.0));
    let u = align_phases(linalg::transpose(v.as_ref()), corr)?;
    ModeBasis::new(u, BasisKind::MercerWolf)
}

/// `σ = S diag(ν; ν) Sᵀ` with S symplectic, ν descending.
#[derive(Clone, Debug)]
pub struct WilliamsonDecomposition {
    pub s: RMat,
    pub nu: Vec<f64>,
}

impl WilliamsonDecomposition {
    pub fn symplectic_residual(&self) -> f64 {
        let n = self.nu.len();
        let om = symplectic_form(n);
        let r = self.s.as_ref() * om.as_ref() * self.s.as_ref().transpose();
        linalg::max_abs_diff_real(r.as_ref(), om.as_ref())
    }

    pub fn reconstruction_residual(&self, sigma: &CovarianceMatrix) -> f64 {
        let n = self.nu.len();
        let sd = Mat::from_fn(2 * n, 2 * n, |i, j| self.s[(i, j)] * self.nu[j % n]);
        let r = sd * self.s.as_ref().transpose();
        linalg::max_abs_diff_real(r.as_ref(), sigma.sigma.as_ref())
    }
}

/// Symplectic spectrum and diagonalizing symplectic matrix.
///
/// `A = σ^{1/2} Ω σ^{1/2}` is real antisymmetric with eigenvalues `±iν`. An
/// eigenvector `x + iy` of the Hermitian `iA` at `+ν` gives the pair of
/// orthonormal columns `(√2 y, √2 x)` of an orthogonal `K` bringing A to
/// `[[0, D], [−D, 0]]`, and `S = σ^{1/2} K diag(ν; ν)^{−1/2}`.
pub fn williamson(sigma: &CovarianceMatrix) -> Result<WilliamsonDecomposition> {
    let n = sigma.n();
    let sq = linalg::spd_sqrt(sigma.sigma.as_ref())?;
    let om = symplectic_form(n);
    let a = sq.as_ref() * om.as_ref() * sq.as_ref();
    let h = Mat::from_fn(2 * n, 2 * n, |i, j| I * (0.5 * (a[(i, j)] - a[(j, i)])));
    let (vals, vecs) = linalg::hermitian_eigen_desc(h.as_ref())?;
    let nu: Vec<f64> = vals[..n].to_vec();
    if nu[n - 1] <= 0.0 {
        return Err(Error::tolerance("covariance matrix is singular"));
    }
    let r2 = std::f64::consts::SQRT_2;
    let k = Mat::from_fn(2 * n, 2 * n, |i, j| {
        let v = vecs[(i, j % n)];
        if j < n {
            r2 * v.im
        } else {
            r2 * v.re
        }
    });
    let scaled = Mat::from_fn(2 * n, 2 * n, |i, j| k[(i, j)] / nu[j % n].sqrt());
    let s = sq.as_ref() * scaled.as_ref();
    let w = WilliamsonDecomposition { s, nu };
    let scale = linalg::max_abs_real(w.s.as_ref()).powi(2).max(1.0);
    let sym = w.symplectic_residual();
    let rec = w.reconstruction_residual(sigma);
    let snorm = linalg::max_abs_real(sigma.sigma.as_ref()).max(1.0);
    if sym > 1e-8 * scale || rec > 1e-8 * snorm {
        return Err(Error::tolerance(format!(
            "Williamson decomposition inaccurate (symplectic {sym:.3e}, reconstruction {rec:.3e})"
        )));
    }
    if w.nu[n - 1] < 1.0 - 1e-8 {
        return Err(Error::tolerance(format!(
            "symplectic eigenvalue {:.12} below 1: state violates the uncertainty relation",
            w.nu[n - 1]
        )));
    }
    Ok(w)
}

/// `S = O_l diag(e^r; e^{−r}) O_r`, r descending. `u` is the unitary with
/// `O_lᵀ = O(u)`.
#[derive(Clone, Debug)]
pub struct EulerFactors {
    pub o_l: RMat,
    pub o_r: RMat,
    pub r: Vec<f64>,
    pub u: CMat,
}

impl EulerFactors {
    pub fn reconstruction_residual(&self, s: &RMat) -> f64 {
        let n = self.r.len();
        let lo = Mat::from_fn(2 * n, 2 * n, |i, j| {
            let e = if j < n { self.r[j].exp() } else { (-self.r[j - n]).exp() };
            self.o_l[(i, j)] * e
        });
        let rec = lo * self.o_r.as_ref();
        linalg::max_abs_diff_real(rec.as_ref(), s.as_ref())
    }
}

/// Complex form `a ↦ E a + F a†` of a real symplectic map on `(q, p)`.
fn bogoliubov_from_symplectic(s: &RMat) -> BogoliubovPair {
    let n = s.nrows() / 2;
    let e = Mat::from_fn(n, n, |i, j| {
        let (qq, qp, pq, pp) = (s[(i, j)], s[(i, n + j)], s[(n + i, j)], s[(n + i, n + j)]);
        c64::new(0.5 * (qq + pp), 0.5 * (pq - qp))
    });
    let f = Mat::from_fn(n, n, |i, j| {
        let (qq, qp, pq, pp) = (s[(i, j)], s[(i, n + j)], s[(n + i, j)], s[(n + i, n + j)]);
        c64::new(0.5 * (qq - pp), 0.5 * (pq + qp))
    });
    BogoliubovPair { e, f, z0: 0.0, z1: 0.0 }
}

/// Euler (Bloch-Messiah) factors of a symplectic matrix.
pub fn euler(s: &RMat) -> Result<EulerFactors> {
    let n = s.nrows() / 2;
    if s.nrows() != 2 * n || s.ncols() != s.nrows() {
        return Err(Error::validation("symplectic matrix must be 2N×2N"));
    }
    let om = symplectic_form(n);
    let scale = linalg::max_abs_real(s.as_ref()).powi(2).max(1.0);
    let d = linalg::max_abs_diff_real((s.as_ref() * om.as_ref() * s.as_ref().transpose()).as_ref(), om.as_ref());
    if d > 1e-8 * scale {
        return Err(Error::validation(format!("matrix is not symplectic (residual {d:.3e})")));
    }
    let pair = bogoliubov_from_symplectic(s);
    let bm = bloch_messiah(&pair)?;
    let o_l = orthosymplectic(linalg::adjoint(bm.u.as_ref()).as_ref());
    let o_r = orthosymplectic(bm.w_e.as_ref());
    let f = EulerFactors {
        o_l,
        o_r,
        r: bm.squeezing(),
        u: bm.u,
    };
    let rec = f.reconstruction_residual(s);
    let orth = linalg::orthogonality_defect(f.o_l.as_ref()).max(linalg::orthogonality_defect(f.o_r.as_ref()));
    if rec > 1e-8 * scale.sqrt() || orth > 1e-8 {
        return Err(Error::tolerance(format!(
            "Euler decomposition inaccurate (reconstruction {rec:.3e}, orthogonality {orth:.3e})"
        )));
    }
    Ok(f)
}

/// Modes read off the left orthogonal factor of the Euler decomposition of
/// the Williamson symplectic matrix.
pub fn williamson_euler_basis(sigma: &CovarianceMatrix) -> Result<ModeBasis> {
    let w = williamson(sigma)?;
    let e = euler(&w.s)?;
    // O_lᵀ must commute with the complex structure
    let o = e.o_l.transpose();
    let n = sigma.n();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            defect = defect
                .max((o[(i, j)] - o[(n + i, n + j)]).abs())
                .max((o[(i, n + j)] + o[(n + i, j)]).abs());
        }
    }
    if defect > 1e-8 {
        return Err(Error::tolerance(format!("Euler factor is not orthosymplectic (defect {defect:.3e})")));
    }
    ModeBasis::new(e.u, BasisKind::WilliamsonEuler)
}

/// MSq basis and the per-stage minimal variances.
#[derive(Clone, Debug)]
pub struct MsqDecomposition {
    pub basis: ModeBasis,
    pub stage_minima: Vec<f64>,
}

pub fn msq_basis(sigma: &CovarianceMatrix) -> Result<ModeBasis> {
    Ok(msq_decomposition(sigma)?.basis)
}

/// Recursively picks the mode with the smallest quadrature variance in the
/// orthogonal complement of the modes already fixed.
///
/// Mercer modes with negligible occupation are vacuum to working precision
/// and decouple from the rest, so the recursion runs on the occupied
/// subspace only and the vacuum modes (variance 1) are inserted at the point
/// where the stage minima cross 1.
pub fn msq_decomposition(sigma: &CovarianceMatrix) -> Result<MsqDecomposition> {
    let n = sigma.n();
    let corr = correlations_from_covariance(sigma);
    let (vals, mut v) = linalg::hermitian_eigen_desc(corr.c1.as_ref())?;
    linalg::canonicalize_eigenvectors(&vals, &mut v, linalg::TIE_TOL * vals[0].abs().max(1.0));
    let cut = 1e-13 * vals[0].max(1.0);
    let kept = vals.iter().take_while(|&&x| x > cut).count();
    let vk = v.as_ref().subcols(0, kept);
    let vacuum = if kept < n {
        linalg::canonical_span_basis(v.as_ref().subcols(kept, n - kept))
    } else {
        CMat::zeros(n, 0)
    };

    let mut b = linalg::transpose(vk);
    let mut c1 = vk.adjoint() * corr.c1.as_ref() * vk;
    let mut c2 = vk.transpose() * corr.c2.as_ref() * vk;
    let mut rows: Vec<Vec<c64>> = Vec::with_capacity(n);
    let mut minima = Vec::with_capacity(n);
    let mut vacuum_done = kept == n;
    let push_vacuum = |rows: &mut Vec<Vec<c64>>, minima: &mut Vec<f64>| {
        for c in 0..vacuum.ncols() {
            rows.push((0..n).map(|i| vacuum[(i, c)]).collect());
            minima.push(1.0);
        }
    };
    while b.nrows() > 0 {
        let m = b.nrows();
        linalg::hermitize(&mut c1);
        linalg::symmetrize(&mut c2);
        let red = covariance_unchecked(&CorrelationPair {
            c1: c1.clone(),
            c2: c2.clone(),
            basis: BasisTag::Basis(BasisKind::Custom),
        });
        let (ev, evec) = linalg::symmetric_eigen_asc(red.sigma.as_ref())?;
        let lam = ev[0];
        if !vacuum_done && lam > 1.0 {
            push_vacuum(&mut rows, &mut minima);
            vacuum_done = true;
        }
        let first = linalg::clusters(&ev, linalg::TIE_TOL * ev[2 * m - 1].abs().max(1.0))[0].clone();
        let mut x: Vec<f64> = (0..2 * m).map(|i| evec[(i, 0)]).collect();
        if first.len() > 1 {
            let block = Mat::from_fn(2 * m, first.len(), |i, j| c64::new(evec[(i, j)], 0.0));
            let canon = linalg::canonical_span_basis(block.as_ref());
            x = (0..2 * m).map(|i| canon[(i, 0)].re).collect();
        }
        // eigenvector (c, d) of the P-quadrature variance ↦ mode d + ic
        let mut uc: Vec<c64> = (0..m).map(|i| c64::new(x[m + i], x[i])).collect();
        let nrm = uc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        uc.iter_mut().for_each(|z| *z /= nrm);
        let mut row: Vec<c64> = (0..n).map(|j| (0..m).map(|k| uc[k] * b[(k, j)]).sum()).collect();
        // only the sign is free: make the dominant component point right
        let big = row.iter().cloned().fold(c64::new(0.0, 0.0), |a, z| if z.norm() > a.norm() * (1.0 + 1e-12) { z } else { a });
        if big.re < -1e-12 * big.norm() || (big.re.abs() <= 1e-12 * big.norm() && big.im < 0.0) {
            row.iter_mut().for_each(|z| *z = -*z);
            uc.iter_mut().for_each(|z| *z = -*z);
        }
        rows.push(row);
        minima.push(lam);
        if m == 1 {
            break;
        }
        let h1 = householder_complement(&uc);
        b = h1.transpose() * &b;
        c1 = h1.adjoint() * &c1 * &h1;
        c2 = h1.transpose() * &c2 * &h1;
    }
    if !vacuum_done {
        push_vacuum(&mut rows, &mut minima);
    }
    let u = Mat::from_fn(n, n, |i, j| rows[i][j]);
    Ok(MsqDecomposition {
        basis: ModeBasis::new(u, BasisKind::Msq)?,
        stage_minima: minima,
    })
}

/// Columns 2…m of the Householder reflector sending `u` to a multiple of
/// e₁: an orthonormal basis of the complement of `u`.
fn householder_complement(u: &[c64]) -> CMat {
    let m = u.len();
    let phase = if u[0].norm() > 0.0 { u[0] / u[0].norm() } else { c64::new(1.0, 0.0) };
    let mut w = u.to_vec();
    w[0] += phase;
    let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    Mat::from_fn(m, m - 1, |i, j| {
        let d = if i == j + 1 { 1.0 } else { 0.0 };
        c64::new(d, 0.0) - w[i] * w[j + 1].conj() * (2.0 / ww)
    })
}

/// Everything reported for one basis.
#[derive(Clone, Debug, Serialize)]
pub struct BasisReport {
    pub kind: BasisKind,
    #[serde(skip)]
    pub covariance: CovarianceMatrix,
    pub photons: Vec<f64>,
    pub quadratures: Vec<QuadratureVariance>,
    /// Effective mode number; undefined without photons.
    pub k: Option<f64>,
    /// Purity of the first 1, 2, … modes.
    pub purities: Vec<f64>,
    pub mode_abs: Vec<Vec<f64>>,
    pub mode_phase: Vec<Vec<f64>>,
}

pub fn basis_report(corr: &CorrelationPair, basis: &ModeBasis, purity_depth: usize) -> Result<BasisReport> {
    require_monochromatic(corr)?;
    let t = transform_correlations(corr, basis)?;
    let covariance = covariance_unchecked(&t);
    let n = corr.n();
    let photons: Vec<f64> = (0..n).map(|i| t.c1[(i, i)].re.max(0.0)).collect();
    let k = if photons.iter().sum::<f64>() > 0.0 { Some(mode_count(&photons)?) } else { None };
    let mut purities = Vec::new();
    for d in 1..=purity_depth.min(n) {
        let modes: Vec<usize> = (0..d).collect();
        purities.push(purity(&reduced_covariance(&covariance, &modes)?)?);
    }
    let mode_abs = (0..n).map(|m| (0..n).map(|j| basis.u[(m, j)].norm()).collect()).collect();
    let mode_phase = (0..n)
        .map(|m| unwrap_phase(&(0..n).map(|j| basis.u[(m, j)].arg()).collect::<Vec<_>>(), n / 2))
        .collect();
    Ok(BasisReport {
        kind: basis.kind,
        quadratures: quadrature_report(&covariance),
        covariance,
        photons,
        k,
        purities,
        mode_abs,
        mode_phase,
    })
}

/// Removes 2π jumps walking outward from `anchor`, whose value is kept.
pub fn unwrap_phase(phase: &[f64], anchor: usize) -> Vec<f64> {
    let mut out = phase.to_vec();
    if out.is_empty() {
        return out;
    }
    let wrap = |d: f64| d - 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
    for j in anchor + 1..out.len() {
        out[j] = out[j - 1] + wrap(phase[j] - phase[j - 1]);
    }
    for j in (0..anchor.min(out.len())).rev() {
        out[j] = out[j + 1] + wrap(phase[j] - phase[j + 1]);
    }
    out
}
