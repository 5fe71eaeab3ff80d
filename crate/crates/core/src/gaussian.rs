//! Gaussian-state data model: correlation matrices, quadrature covariance,
//! basis changes and scalar diagnostics.
//!
//! Conventions: `q = a + a†`, `p = −i(a − a†)`, so `[q, p] = 2i` and the
//! vacuum covariance is the identity. Quadratures are ordered
//! `(q_1 … q_N, p_1 … p_N)`; the symplectic form is `Ω = [[0, I], [−I, 0]]`.
//! A broadband mode is a row `u` of a unitary, `A = Σ_n u_n a_n`.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c64, hermitian_defect, max_abs, symmetric_defect, symmetric_defect_real, unitarity_defect, CMat, RMat,
};

/// What a set of correlation matrices is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisTag {
    Monochromatic,
    Basis(BasisKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Schmidt,
    MercerWolf,
    WilliamsonEuler,
    Msq,
    Custom,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Schmidt => "schmidt",
            BasisKind::MercerWolf => "mercer_wolf",
            BasisKind::WilliamsonEuler => "williamson_euler",
            BasisKind::Msq => "msq",
            BasisKind::Custom => "custom",
        }
    }
}

/// `C1 = ⟨a†_i a_j⟩` (Hermitian) and `C2 = ⟨a_i a_j⟩` (symmetric).
#[derive(Clone, Debug)]
pub struct CorrelationPair {
    pub c1: CMat,
    pub c2: CMat,
    pub basis: BasisTag,
}

fn relative_tol(m: MatRef<'_, c64>) -> f64 {
    1e-10 * max_abs(m).max(1.0)
}

impl CorrelationPair {
    pub fn new(c1: CMat, c2: CMat, basis: BasisTag) -> Result<Self> {
        let pair = CorrelationPair { c1, c2, basis };
        pair.check_structure()?;
        Ok(pair)
    }

    pub fn vacuum(n: usize) -> Self {
        CorrelationPair {
            c1: CMat::zeros(n, n),
            c2: CMat::zeros(n, n),
            basis: BasisTag::Monochromatic,
        }
    }

    /// Spectrally uncorrelated thermal state, `C1 = diag(N̄)`.
    pub fn thermal(nbar: &[f64]) -> Result<Self> {
        if nbar.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::validation("thermal occupations must be non-negative"));
        }
        let n = nbar.len();
        Ok(CorrelationPair {
            c1: linalg::diag_c(nbar),
            c2: CMat::zeros(n, n),
            basis: BasisTag::Monochromatic,
        })
    }

    pub fn n(&self) -> usize {
        self.c1.nrows()
    }

    /// Hermiticity of C1 and symmetry of C2.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.c1.nrows();
        if self.c1.ncols() != n || self.c2.nrows() != n || self.c2.ncols() != n {
            return Err(Error::validation("correlation matrices must be square and equal-sized"));
        }
        let h = hermitian_defect(self.c1.as_ref());
        if h > relative_tol(self.c1.as_ref()) {
            return Err(Error::validation(format!("C1 is not Hermitian (defect {h:.3e})")));
        }
        let s = symmetric_defect(self.c2.as_ref());
        if s > relative_tol(self.c2.as_ref()) {
            return Err(Error::validation(format!("C2 is not symmetric (defect {s:.3e})")));
        }
        Ok(())
    }

    /// Full invariant check including positive semidefiniteness of C1.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        let ev = linalg::hermitian_eigenvalues(self.c1.as_ref())?;
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-9 * max_abs(self.c1.as_ref()).max(1.0) {
            return Err(Error::validation(format!(
                "C1 is not positive semidefinite (eigenvalue {min:.3e})"
            )));
        }
        Ok(())
    }

    pub fn total_photons(&self) -> f64 {
        (0..self.n()).map(|i| self.c1[(i, i)].re).sum()
    }

    pub fn photon_numbers(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.c1[(i, i)].re).collect()
    }

    pub fn max_abs_diff(&self, other: &CorrelationPair) -> f64 {
        linalg::max_abs_diff(self.c1.as_ref(), other.c1.as_ref())
            .max(linalg::max_abs_diff(self.c2.as_ref(), other.c2.as_ref()))
    }
}

/// Quadrature covariance matrix, `(q…q, p…p)` ordering.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    pub sigma: RMat,
}

impl CovarianceMatrix {
    pub fn new(sigma: RMat) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || !d.is_multiple_of(2) || sigma.ncols() != d {
            return Err(Error::validation(format!(
                "covariance must be square with even size, got {}x{}",
                d,
                sigma.ncols()
            )));
        }
        let s = symmetric_defect_real(sigma.as_ref());
        if s > 1e-10 * linalg::max_abs_real(sigma.as_ref()).max(1.0) {
            return Err(Error::validation(format!("covariance is not symmetric (defect {s:.3e})")));
        }
        Ok(CovarianceMatrix { sigma })
    }

    pub fn vacuum(n: usize) -> Self {
        CovarianceMatrix {
            sigma: linalg::real_identity(2 * n),
        }
    }

    /// Number of modes.
    pub fn n(&self) -> usize {
        self.sigma.nrows() / 2
    }

    /// Smallest eigenvalue of `σ + iΩ`; non-negative for a physical state.
    pub fn physicality_margin(&self) -> Result<f64> {
        let n = self.n();
        let m = Mat::from_fn(2 * n, 2 * n, |i, j| {
            let w = omega_entry(n, i, j);
            c64::new(self.sigma[(i, j)], w)
        });
        let ev = linalg::hermitian_eigenvalues(m.as_ref())?;
        Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Fails when `σ + iΩ` has an eigenvalue below `−tol`.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let m = self.physicality_margin()?;
        if m < -tol {
            return Err(Error::tolerance(format!(
                "state violates the uncertainty bound: min eig(σ + iΩ) = {m:.3e}"
            )));
        }
        Ok(())
    }
}

fn omega_entry(n: usize, i: usize, j: usize) -> f64 {
    if i < n && j == i + n {
        1.0
    } else if i >= n && j + n == i {
        -1.0
    } else {
        0.0
    }
}

/// Ω = [[0, I], [−I, 0]].
pub fn symplectic_form(n: usize) -> RMat {
    Mat::from_fn(2 * n, 2 * n, |i, j| omega_entry(n, i, j))
}

/// Builds σ from the correlation matrices (zero first moments).
pub fn covariance_from_correlations(corr: &CorrelationPair) -> Result<CovarianceMatrix> {
    corr.validate()?;
    Ok(covariance_unchecked(corr))
}

pub(crate) fn covariance_unchecked(corr: &CorrelationPair) -> CovarianceMatrix {
    let n = corr.n();
    let mut s = RMat::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let a = corr.c1[(i, j)];
            let b = corr.c2[(i, j)];
            let d = if i == j { 1.0 } else { 0.0 };
            s[(i, j)] = d + 2.0 * (a.re + b.re);
            s[(n + i, n + j)] = d + 2.0 * (a.re - b.re);
            // ⟨p_i q_j⟩ symmetrized
            let x = 2.0 * (b.im - a.im);
            s[(n + i, j)] = x;
            s[(j, n + i)] = x;
        }
    }
    linalg::symmetrize_real(&mut s);
    CovarianceMatrix { sigma: s }
}

/// Inverse of [`covariance_from_correlations`]; the result is tagged
/// monochromatic.
pub fn correlations_from_covariance(sigma: &CovarianceMatrix) -> CorrelationPair {
    let n = sigma.n();
    let s = &sigma.sigma;
    let c1 = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        let re = 0.25 * (s[(i, j)] + s[(n + i, n + j)] - 2.0 * d);
        c64::new(re, 0.25 * (s[(n + j, i)] - s[(n + i, j)]))
    });
    let c2 = Mat::from_fn(n, n, |i, j| {
        let re = 0.25 * (s[(i, j)] - s[(n + i, n + j)]);
        c64::new(re, 0.25 * (s[(n + i, j)] + s[(n + j, i)]))
    });
    CorrelationPair {
        c1,
        c2,
        basis: BasisTag::Monochromatic,
    }
}

/// N×N unitary whose rows are broadband modes.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    pub u: CMat,
    pub kind: BasisKind,
}

impl ModeBasis {
    pub fn new(u: CMat, kind: BasisKind) -> Result<Self> {
        if u.nrows() != u.ncols() {
            return Err(Error::validation("mode basis must be square"));
        }
        let d = unitarity_defect(u.as_ref());
        if d > 1e-10 {
            return Err(Error::validation(format!("mode basis is not unitary (defect {d:.3e})")));
        }
        Ok(ModeBasis { u, kind })
    }

    pub fn identity(n: usize, kind: BasisKind) -> Self {
        ModeBasis {
            u: linalg::identity(n),
            kind,
        }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn mode(&self, m: usize) -> Vec<c64> {
        (0..self.n()).map(|j| self.u[(m, j)]).collect()
    }
}

/// `C1' = U* C1 Uᵀ`, `C2' = U C2 Uᵀ`.
pub fn transform_correlations(corr: &CorrelationPair, basis: &ModeBasis) -> Result<CorrelationPair> {
    if basis.n() != corr.n() {
        return Err(Error::validation("basis and state sizes differ"));
    }
    let d = unitarity_defect(basis.u.as_ref());
    if d > 1e-10 {
        return Err(Error::validation(format!("mode basis is not unitary (defect {d:.3e})")));
    }
    let u = basis.u.as_ref();
    let ut = u.transpose();
    let mut c1 = u.conjugate() * corr.c1.as_ref() * ut;
    let mut c2 = u * corr.c2.as_ref() * ut;
    linalg::hermitize(&mut c1);
    linalg::symmetrize(&mut c2);
    Ok(CorrelationPair {
        c1,
        c2,
        basis: BasisTag::Basis(basis.kind),
    })
}

/// `O = [[Re U, −Im U], [Im U, Re U]]`.
pub fn symplectic_from_unitary(basis: &ModeBasis) -> RMat {
    orthosymplectic(basis.u.as_ref())
}

pub fn orthosymplectic(u: MatRef<'_, c64>) -> RMat {
    let n = u.nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        let v = u[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// `O σ Oᵀ`.
pub fn transform_covariance(sigma: &CovarianceMatrix, o: MatRef<'_, f64>) -> CovarianceMatrix {
    let mut s = o * sigma.sigma.as_ref() * o.transpose();
    linalg::symmetrize_real(&mut s);
    CovarianceMatrix { sigma: s }
}

pub fn to_db(variance: f64) -> f64 {
    10.0 * variance.log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureVariance {
    pub dq2: f64,
    pub dp2: f64,
    pub dq2_db: f64,
    pub dp2_db: f64,
    pub squeezed: bool,
}

/// Per-mode ΔQ², ΔP² and their dB values.
pub fn quadrature_report(sigma: &CovarianceMatrix) -> Vec<QuadratureVariance> {
    let n = sigma.n();
    (0..n)
        .map(|m| {
            let dq2 = sigma.sigma[(m, m)];
            let dp2 = sigma.sigma[(n + m, n + m)];
            QuadratureVariance {
                dq2,
                dp2,
                dq2_db: to_db(dq2),
                dp2_db: to_db(dp2),
                squeezed: dp2 < 1.0,
            }
        })
        .collect()
}

/// `1/√det σ`.
pub fn purity(sigma: &CovarianceMatrix) -> Result<f64> {
    Ok((-0.5 * linalg::spd_logdet(sigma.sigma.as_ref())?).exp())
}

/// Covariance of the listed modes, rows/columns `{i} ∪ {N+i}`.
pub fn reduced_covariance(sigma: &CovarianceMatrix, modes: &[usize]) -> Result<CovarianceMatrix> {
    let n = sigma.n();
    let mut seen = vec![false; n];
    for &m in modes {
        if m >= n || seen[m] {
            return Err(Error::validation(format!("invalid or repeated mode index {m}")));
        }
        seen[m] = true;
    }
    let k = modes.len();
    let idx: Vec<usize> = modes.iter().cloned().chain(modes.iter().map(|m| m + n)).collect();
    Ok(CovarianceMatrix {
        sigma: Mat::from_fn(2 * k, 2 * k, |i, j| sigma.sigma[(idx[i], idx[j])]),
    })
}

/// Participation ratio `1/Σ n_i²` of the normalized occupations.
pub fn mode_count(photons: &[f64]) -> Result<f64> {
    if photons.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::validation("photon numbers must be non-negative"));
    }
    let total: f64 = photons.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation("mode count undefined for zero photons"));
    }
    Ok(1.0 / photons.iter().map(|x| (x / total).powi(2)).sum::<f64>())
}

/// χ = U Vᴴ.
pub fn overlap(u: &ModeBasis, v: &ModeBasis) -> Result<CMat> {
    if u.n() != v.n() {
        return Err(Error::validation("overlap of bases with different sizes"));
    }
    Ok(u.u.as_ref() * v.u.as_ref().adjoint())
}

/// For each mode `i` of a basis with mode parameters `values`, the weight
/// `Σ_j |χ_ij|²` over the modes `j` whose value lies within
/// `rel_tol · max|values|` of `values[i]`. Equals 1 when both bases agree up
/// to rotations inside near-degenerate groups, where individual modes are
/// ill-defined; gaps below the spectrum's scale times round-off cannot be
/// resolved by any eigensolver.
pub fn cluster_overlaps(chi: &CMat, values: &[f64], rel_tol: f64) -> Vec<f64> {
    let n = values.len();
    let tol = rel_tol * values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| (values[j] - values[i]).abs() <= tol)
                .map(|j| chi[(i, j)].norm_sqr())
                .sum()
        })
        .collect()
}
