//! Lossless propagation: transfer matrices (E, F), Bloch-Messiah reduction
//! and gain calibration.

use faer::Mat;

use crate::coupling::{Coupling, Workspace};
use crate::error::{Error, Result};
use crate::gaussian::{BasisKind, BasisTag, CorrelationPair, ModeBasis};
use crate::linalg::{self, c64, cis, max_abs, symmetric_defect, CMat, I};
use crate::ode::rk4;

/// `a(z₁) = E a(z₀) + F a†(z₀)`.
#[derive(Clone, Debug)]
pub struct BogoliubovPair {
    pub e: CMat,
    pub f: CMat,
    pub z0: f64,
    pub z1: f64,
}

impl BogoliubovPair {
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// `max |EEᴴ − FFᴴ − I|`.
    pub fn commutator_residual(&self) -> f64 {
        let g = self.e.as_ref() * self.e.as_ref().adjoint() - self.f.as_ref() * self.f.as_ref().adjoint();
        linalg::max_abs_diff(g.as_ref(), linalg::identity(self.n()).as_ref())
    }

    /// `max |EFᵀ − (EFᵀ)ᵀ|`.
    pub fn symmetry_residual(&self) -> f64 {
        symmetric_defect((self.e.as_ref() * self.f.as_ref().transpose()).as_ref())
    }

    /// Scale used for relative residual tolerances, `max(1, max|E|²)`.
    pub fn scale(&self) -> f64 {
        max_abs(self.e.as_ref()).powi(2).max(1.0)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let c = self.commutator_residual();
        let s = self.symmetry_residual();
        let bound = tol * self.scale();
        if c > bound || s > bound {
            return Err(Error::tolerance(format!(
                "Bogoliubov relations violated (commutator {c:.3e}, symmetry {s:.3e}); increase the step count"
            )));
        }
        Ok(())
    }
}

/// Transfer matrices over `[z0, z1]` without residual checks.
///
/// The slowly-varying amplitudes start from `ℰ = diag(e^{−ik z₀})`, `ℱ = 0`
/// so that the fast phases restored at `z₁` give the lab-frame matrices.
pub fn integrate_segment(gamma: f64, coupling: &Coupling, z0: f64, z1: f64, steps: usize) -> BogoliubovPair {
    let n = coupling.n();
    let k = coupling.wavevectors();
    let mut y = CMat::zeros(n, 2 * n);
    for i in 0..n {
        y[(i, i)] = cis(-k[i] * z0);
    }
    let mut ws = Workspace::default();
    let ig = I * gamma;
    rk4(
        &mut y,
        z0,
        z1,
        steps,
        |z, y, mut out| {
            // [dℰ | dℱ] = iΓ K [ℱ̄ | ℰ̄]
            coupling.apply(z, y.subcols(n, n), true, out.as_mut().subcols_mut(0, n), &mut ws);
            coupling.apply(z, y.subcols(0, n), true, out.as_mut().subcols_mut(n, n), &mut ws);
            for j in 0..2 * n {
                for i in 0..n {
                    out[(i, j)] *= ig;
                }
            }
        },
        |_| {},
    );
    let e = Mat::from_fn(n, n, |i, j| y[(i, j)] * cis(k[i] * z1));
    let f = Mat::from_fn(n, n, |i, j| y[(i, n + j)] * cis(k[i] * z1));
    BogoliubovPair { e, f, z0, z1 }
}

/// Lossless transfer matrices over `[0, length]`, checked against the
/// Bogoliubov relations.
pub fn integrate_bogoliubov(gamma: f64, coupling: &Coupling, length: f64, steps: usize) -> Result<BogoliubovPair> {
    if steps == 0 {
        return Err(Error::validation("step count must be positive"));
    }
    if !(gamma >= 0.0) {
        return Err(Error::validation(format!("gain must be non-negative, got {gamma}")));
    }
    let pair = integrate_segment(gamma, coupling, 0.0, length, steps);
    pair.check(1e-6)?;
    Ok(pair)
}

/// `C1 = F̄Fᵀ`, `C2 = EFᵀ` for vacuum input.
pub fn vacuum_correlations(pair: &BogoliubovPair) -> CorrelationPair {
    let ft = pair.f.as_ref().transpose();
    let mut c1 = pair.f.as_ref().conjugate() * ft;
    let mut c2 = pair.e.as_ref() * ft;
    linalg::hermitize(&mut c1);
    linalg::symmetrize(&mut c2);
    CorrelationPair {
        c1,
        c2,
        basis: BasisTag::Monochromatic,
    }
}

/// `E = Uᴴ Λ_E W_E`, `F = Uᴴ Λ_F W̄_E`.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Output modes as rows.
    pub u: CMat,
    pub w_e: CMat,
    pub lambda_e: Vec<f64>,
    pub lambda_f: Vec<f64>,
}

impl SchmidtDecomposition {
    pub fn basis(&self) -> ModeBasis {
        ModeBasis {
            u: self.u.clone(),
            kind: BasisKind::Schmidt,
        }
    }

    /// Squeezing parameters `r = asinh(λ_F)`.
    pub fn squeezing(&self) -> Vec<f64> {
        self.lambda_f.iter().map(|l| l.asinh()).collect()
    }

    /// Max-abs reconstruction error of E and F.
    pub fn reconstruction_residual(&self, pair: &BogoliubovPair) -> f64 {
        let n = self.u.nrows();
        let uh = self.u.as_ref().adjoint();
        let le = Mat::from_fn(n, n, |i, j| self.w_e[(i, j)] * self.lambda_e[i]);
        let lf = Mat::from_fn(n, n, |i, j| self.w_e[(i, j)].conj() * self.lambda_f[i]);
        let e = uh * &le;
        let f = uh * &lf;
        linalg::max_abs_diff(e.as_ref(), pair.e.as_ref()).max(linalg::max_abs_diff(f.as_ref(), pair.f.as_ref()))
    }
}

/// Takagi factorization `A = Z diag(s) Zᵀ` of a complex symmetric matrix.
///
/// Returns the singular values (descending) and the unitary `Z`. Vectors
/// with `s` below `zero_tol` are completed as a canonical orthonormal basis of
/// the remaining space.
pub fn takagi(a: &CMat, zero_tol: f64) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    // [[Re A, Im A], [Im A, −Re A]] has eigenpairs (x; y) ↦ s with A z̄ = s z
    // for z = x + iy, and (−y; x) ↦ −s.
    let h = Mat::from_fn(2 * n, 2 * n, |i, j| {
        let v = a[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) => v.re,
            (false, false) => -v.re,
            _ => v.im,
        }
    });
    let (vals, vecs) = linalg::symmetric_eigen_asc(h.as_ref())?;
    let smax = vals[2 * n - 1].max(0.0);
    let cut = zero_tol * smax.max(1.0);
    let count = (0..n).take_while(|&m| vals[2 * n - 1 - m] > cut).count();
    let mut s: Vec<f64> = (0..count).map(|m| vals[2 * n - 1 - m]).collect();
    let mut real_vecs = Mat::from_fn(2 * n, count, |i, m| c64::new(vecs[(i, 2 * n - 1 - m)], 0.0));
    // real-orthogonal freedom inside degenerate clusters is fixed canonically
    linalg::canonicalize_eigenvectors(&s, &mut real_vecs, linalg::TIE_TOL * smax.max(1.0));
    let mut z = CMat::zeros(n, n);
    for m in 0..count {
        for i in 0..n {
            z[(i, m)] = c64::new(real_vecs[(i, m)].re, real_vecs[(n + i, m)].re);
        }
    }
    // vectors of small s carry eigensolver noise from the nearby −s branch;
    // Gram-Schmidt in descending order moves each by O(noise) only
    for m in 0..count {
        for _ in 0..2 {
            for p in 0..m {
                let proj: c64 = (0..n).map(|i| z[(i, p)].conj() * z[(i, m)]).sum();
                for i in 0..n {
                    let v = z[(i, p)];
                    z[(i, m)] -= proj * v;
                }
            }
        }
        let nrm = (0..n).map(|i| z[(i, m)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            z[(i, m)] /= nrm;
        }
    }
    if count < n {
        // complement of the captured span
        let zc = z.as_ref().subcols(0, count);
        let p = linalg::identity(n) - zc * zc.adjoint();
        let (pv, pvec) = linalg::hermitian_eigen_desc(p.as_ref())?;
        debug_assert!(pv[n - count - 1] > 0.5);
        let comp = linalg::canonical_span_basis(pvec.as_ref().subcols(0, n - count));
        for m in 0..n - count {
            for i in 0..n {
                z[(i, count + m)] = comp[(i, m)];
            }
        }
        s.resize(n, 0.0);
    }
    Ok((s, z))
}

/// Bloch-Messiah reduction of a closed (lossless) transformation.
///
/// The Schmidt modes are the Takagi vectors of the symmetric matrix
/// `EFᵀ = Uᴴ diag(λ_E λ_F) Ū`; this fixes the relative phases of the input
/// and output unitaries so that the same `W_E` serves E and F.
pub fn bloch_messiah(pair: &BogoliubovPair) -> Result<SchmidtDecomposition> {
    let n = pair.n();
    let c = pair.commutator_residual();
    if c > 1e-6 * pair.scale() {
        return Err(Error::tolerance(format!(
            "transformation is not a closed Bogoliubov map (commutator residual {c:.3e})"
        )));
    }
    let mut m = pair.e.as_ref() * pair.f.as_ref().transpose();
    linalg::symmetrize(&mut m);
    let (s, z) = takagi(&m, 1e-10)?;
    // λ_F²(1 + λ_F²) = s²
    let lambda_f: Vec<f64> = s
        .iter()
        .map(|&s| (2.0 * s * s / ((1.0 + 4.0 * s * s).sqrt() + 1.0)).sqrt())
        .collect();
    let lambda_e: Vec<f64> = lambda_f.iter().map(|l| (1.0 + l * l).sqrt()).collect();
    let u = linalg::adjoint(z.as_ref());
    let ue = u.as_ref() * pair.e.as_ref();
    let w_e = Mat::from_fn(n, n, |i, j| ue[(i, j)] / lambda_e[i]);
    Ok(SchmidtDecomposition {
        u,
        w_e,
        lambda_e,
        lambda_f,
    })
}

/// Largest eigenvalue of `FFᴴ`: photons in the first Schmidt mode.
pub fn first_mode_photons(pair: &BogoliubovPair) -> Result<f64> {
    let g = pair.f.as_ref() * pair.f.as_ref().adjoint();
    let ev = linalg::hermitian_eigenvalues(g.as_ref())?;
    Ok(ev.iter().cloned().fold(0.0, f64::max))
}

/// Options for [`calibrate_gamma`].
#[derive(Clone, Copy, Debug)]
pub struct CalibrationOptions {
    /// Relative tolerance on N₁.
    pub rel_tol: f64,
    /// Upper limit of the search interval.
    pub gamma_max: f64,
    pub max_iter: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            rel_tol: 1e-3,
            gamma_max: 1.0,
            max_iter: 40,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub gamma: f64,
    pub n1: f64,
    pub iterations: usize,
    pub pair: BogoliubovPair,
}

/// Largest singular value of `∫₀ᴸ K(z) dz`, the first-order (low-gain)
/// transfer matrix per unit Γ.
fn low_gain_strength(coupling: &Coupling, length: f64) -> Result<f64> {
    let acc = coupling.integrated(length);
    let g = acc.as_ref() * acc.as_ref().adjoint();
    let ev = linalg::hermitian_eigenvalues(g.as_ref())?;
    Ok(ev.iter().cloned().fold(0.0, f64::max).sqrt())
}

/// Finds Γ such that the first Schmidt mode holds `target` photons.
///
/// Root finding acts on `φ(Γ) = asinh(√N₁)`, which is exactly linear in Γ
/// for a single mode and close to linear here; secant steps are safeguarded
/// by a bracket (Illinois variant of regula falsi).
pub fn calibrate_gamma(
    target: f64,
    coupling: &Coupling,
    length: f64,
    steps: usize,
    opts: CalibrationOptions,
) -> Result<Calibration> {
    if !(target > 0.0) {
        return Err(Error::Calibration(format!("target photon number must be positive, got {target}")));
    }
    let phi_t = target.sqrt().asinh();
    let eval = |g: f64| -> Result<(f64, BogoliubovPair)> {
        let pair = integrate_segment(g, coupling, 0.0, length, steps);
        let n1 = first_mode_photons(&pair)?;
        if !n1.is_finite() {
            return Err(Error::Calibration(format!("photon number diverged at Γ = {g:e}")));
        }
        Ok((n1, pair))
    };
    let strength = low_gain_strength(coupling, length)?;
    if !(strength > 0.0) {
        return Err(Error::Calibration("coupling vanishes on this grid".into()));
    }
    let mut g = (phi_t / strength).min(opts.gamma_max);
    // bracket points (Γ, φ − φ_t); Γ = 0 gives φ = 0 exactly
    let mut lo = (0.0, -phi_t);
    let mut hi: Option<(f64, f64)> = None;
    let mut side = 0i32;
    for it in 1..=opts.max_iter {
        let (n1, pair) = eval(g)?;
        if (n1 / target - 1.0).abs() < opts.rel_tol {
            return Ok(Calibration {
                gamma: g,
                n1,
                iterations: it,
                pair,
            });
        }
        let r = n1.sqrt().asinh() - phi_t;
        if r < 0.0 {
            lo = (g, r);
            if side == -1 {
                if let Some(h) = hi.as_mut() {
                    h.1 *= 0.5;
                }
            }
            side = -1;
        } else {
            hi = Some((g, r));
            if side == 1 {
                lo.1 *= 0.5;
            }
            side = 1;
        }
        g = match hi {
            Some((gh, rh)) => lo.0 - lo.1 * (gh - lo.0) / (rh - lo.1),
            None => {
                if g >= opts.gamma_max {
                    return Err(Error::Calibration(format!(
                        "N1 = {n1:.4} at Γ_max = {:e} is below the target {target}",
                        opts.gamma_max
                    )));
                }
                // φ is close to linear in Γ, so extrapolate through the origin
                // with a little overshoot to secure the bracket
                (1.05 * g * phi_t / (r + phi_t)).min(opts.gamma_max)
            }
        };
    }
    Err(Error::Calibration(format!(
        "no convergence to N1 = {target} within {} iterations",
        opts.max_iter
    )))
}
