//! Beamsplitter loss chain: the medium is cut into M lossless segments, each
//! followed by a frequency-dependent beamsplitter that mixes in a fresh
//! environment mode.
//!
//! The output operator is written through partial Bogoliubov matrices,
//!
//! ```text
//! a(L) = Σ_m Ẽᵐ x_m + F̃ᵐ x_m†,   x_0 = a(0), x_m = f_m (m ≥ 1)
//! ```
//!
//! so only O(M N²) memory is needed.

use faer::Mat;

use crate::bases::align_phases;
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::gaussian::{BasisKind, BasisTag, CorrelationPair, ModeBasis};
use crate::linalg::{self, CMat};
use crate::lossless::{integrate_segment, BogoliubovPair};

#[derive(Clone, Debug)]
pub struct SegmentChain {
    pub dz: f64,
    pub segments: Vec<BogoliubovPair>,
    /// Amplitude transmission per frequency, identical for every segment.
    pub t: Vec<f64>,
    pub r: Vec<f64>,
}

impl SegmentChain {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn n(&self) -> usize {
        self.t.len()
    }
}

/// Integrates the M lossless segments of `[0, length]` and the beamsplitter
/// coefficients `t = e^{−αΔz/2}`, `r = √(1−t²)`.
pub fn build_chain(
    gamma: f64,
    coupling: &Coupling,
    alpha: &[f64],
    length: f64,
    segments: usize,
    steps_per_segment: usize,
) -> Result<SegmentChain> {
    let n = coupling.n();
    if segments == 0 || steps_per_segment == 0 {
        return Err(Error::validation("segment and step counts must be positive"));
    }
    if alpha.len() != n {
        return Err(Error::validation(format!("loss profile has {} entries for {n} frequencies", alpha.len())));
    }
    if alpha.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::validation("extinction coefficients must be non-negative"));
    }
    if !(gamma >= 0.0) {
        return Err(Error::validation(format!("gain must be non-negative, got {gamma}")));
    }
    let dz = length / segments as f64;
    let t: Vec<f64> = alpha.iter().map(|a| (-0.5 * a * dz).exp()).collect();
    let r: Vec<f64> = t.iter().map(|t| (1.0 - t * t).max(0.0).sqrt()).collect();
    let mut out = Vec::with_capacity(segments);
    for m in 0..segments {
        let z0 = m as f64 * dz;
        let z1 = if m + 1 == segments { length } else { (m + 1) as f64 * dz };
        let pair = integrate_segment(gamma, coupling, z0, z1, steps_per_segment);
        pair.check(1e-6)?;
        out.push(pair);
    }
    Ok(SegmentChain { dz, segments: out, t, r })
}

/// Blocks `Ẽᵐ`, `F̃ᵐ` for m = 0 (input modes) through M (last environment).
#[derive(Clone, Debug)]
pub struct PartialBogoliubov {
    pub e: Vec<CMat>,
    pub f: Vec<CMat>,
}

impl PartialBogoliubov {
    pub fn n(&self) -> usize {
        self.e[0].nrows()
    }

    /// `Σ ẼẼᴴ`, `Σ F̃F̃ᴴ`.
    pub fn gram(&self) -> (CMat, CMat) {
        let n = self.n();
        let mut ge = CMat::zeros(n, n);
        let mut gf = CMat::zeros(n, n);
        for (e, f) in self.e.iter().zip(&self.f) {
            ge += e.as_ref() * e.as_ref().adjoint();
            gf += f.as_ref() * f.as_ref().adjoint();
        }
        (ge, gf)
    }

    /// `max |Σ ẼẼᴴ − F̃F̃ᴴ − I|` and the asymmetry of `Σ ẼF̃ᵀ`.
    pub fn residuals(&self) -> (f64, f64) {
        let n = self.n();
        let (ge, gf) = self.gram();
        let comm = linalg::max_abs_diff((ge - gf).as_ref(), linalg::identity(n).as_ref());
        let mut s = CMat::zeros(n, n);
        for (e, f) in self.e.iter().zip(&self.f) {
            s += e.as_ref() * f.as_ref().transpose();
        }
        (comm, linalg::symmetric_defect(s.as_ref()))
    }
}

/// Runs the backward recursion over the chain. Each segment maps
/// `a ↦ T(E a + F a†) + R f`.
pub fn assemble_partial(chain: &SegmentChain) -> Result<PartialBogoliubov> {
    let n = chain.n();
    let m = chain.len();
    let mut ye = linalg::identity(n);
    let mut yf = CMat::zeros(n, n);
    let mut e_blocks = vec![CMat::zeros(0, 0); m + 1];
    let mut f_blocks = vec![CMat::zeros(0, 0); m + 1];
    let scale_rows = |a: &CMat, d: &[f64]| Mat::from_fn(n, n, |i, j| a[(i, j)] * d[i]);
    let scale_cols = |a: &CMat, d: &[f64]| Mat::from_fn(n, n, |i, j| a[(i, j)] * d[j]);
    for s in (0..m).rev() {
        let seg = &chain.segments[s];
        e_blocks[s + 1] = scale_cols(&ye, &chain.r);
        f_blocks[s + 1] = scale_cols(&yf, &chain.r);
        let te = scale_rows(&seg.e, &chain.t);
        let tf = scale_rows(&seg.f, &chain.t);
        let new_e = &ye * &te + &yf * linalg::conj(tf.as_ref());
        let new_f = &ye * &tf + &yf * linalg::conj(te.as_ref());
        ye = new_e;
        yf = new_f;
    }
    e_blocks[0] = ye;
    f_blocks[0] = yf;
    let partial = PartialBogoliubov {
        e: e_blocks,
        f: f_blocks,
    };
    let (comm, sym) = partial.residuals();
    let bound = 1e-6 * linalg::max_abs(partial.e[0].as_ref()).powi(2).max(1.0);
    if comm > bound || sym > bound {
        return Err(Error::tolerance(format!(
            "partial Bogoliubov relations violated (commutator {comm:.3e}, symmetry {sym:.3e})"
        )));
    }
    Ok(partial)
}

/// Output correlations for vacuum input and an environment with thermal
/// occupations `env_nbar` (zero for vacuum); `input_nbar` is the thermal
/// occupation of the input modes.
pub fn correlations_from_partial(partial: &PartialBogoliubov, input_nbar: &[f64], env_nbar: &[f64]) -> Result<CorrelationPair> {
    let n = partial.n();
    if input_nbar.len() != n || env_nbar.len() != n {
        return Err(Error::validation("occupation vectors must match the grid size"));
    }
    if input_nbar.iter().chain(env_nbar).any(|x| !(*x >= 0.0)) {
        return Err(Error::validation("thermal occupations must be non-negative"));
    }
    let mut c1 = CMat::zeros(n, n);
    let mut c2 = CMat::zeros(n, n);
    for (m, (e, f)) in partial.e.iter().zip(&partial.f).enumerate() {
        let nbar = if m == 0 { input_nbar } else { env_nbar };
        // ⟨x†x⟩ = N̄, ⟨xx†⟩ = I + N̄
        let en = Mat::from_fn(n, n, |i, j| e[(i, j)] * nbar[j]);
        let fn1 = Mat::from_fn(n, n, |i, j| f[(i, j)] * (1.0 + nbar[j]));
        let en1 = Mat::from_fn(n, n, |i, j| e[(i, j)] * (1.0 + nbar[j]));
        let fnn = Mat::from_fn(n, n, |i, j| f[(i, j)] * nbar[j]);
        c1 += en.as_ref().conjugate() * e.as_ref().transpose() + fn1.as_ref().conjugate() * f.as_ref().transpose();
        c2 += &en1 * f.as_ref().transpose() + &fnn * e.as_ref().transpose();
    }
    linalg::hermitize(&mut c1);
    linalg::symmetrize(&mut c2);
    Ok(CorrelationPair {
        c1,
        c2,
        basis: BasisTag::Monochromatic,
    })
}

/// Common left singular basis of the stacked partial matrices.
#[derive(Clone, Debug)]
pub struct PartialMercer {
    pub basis: ModeBasis,
    pub lambda_e: Vec<f64>,
    pub lambda_f: Vec<f64>,
}

/// Simultaneous SVD of `[Ẽ⁰ … Ẽᴹ]` and `[F̃⁰ … F̃ᴹ]` through their Gram
/// matrices, which commute because they differ by the identity.
///
/// The per-mode phases are fixed with the Mercer-Wolf rule on the vacuum
/// output state.
pub fn mercer_from_partial(partial: &PartialBogoliubov) -> Result<PartialMercer> {
    let n = partial.n();
    let (ge, gf) = partial.gram();
    let comm = &ge * &gf - &gf * &ge;
    let scale = linalg::max_abs(ge.as_ref()).powi(2).max(1.0);
    let c = linalg::max_abs(comm.as_ref());
    if c > 1e-6 * scale {
        return Err(Error::tolerance(format!("Gram matrices do not commute (residual {c:.3e})")));
    }
    let (vals, mut w) = linalg::hermitian_eigen_desc(gf.as_ref())?;
    let vmax = vals[0].abs().max(1.0);
    linalg::canonicalize_eigenvectors(&vals, &mut w, linalg::TIE_TOL * vmax);
    // modes are rows of Wᴴ
    let u = linalg::adjoint(w.as_ref());
    let proj = u.as_ref() * ge.as_ref() * w.as_ref();
    let lambda_f: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let lambda_e: Vec<f64> = (0..n).map(|i| proj[(i, i)].re.max(0.0).sqrt()).collect();
    let corr = correlations_from_partial(partial, &vec![0.0; n], &vec![0.0; n])?;
    let u = align_phases(u, &corr)?;
    Ok(PartialMercer {
        basis: ModeBasis::new(u, BasisKind::MercerWolf)?,
        lambda_e,
        lambda_f,
    })
}
