//! Master equations for the second-order moments under continuous
//! Markovian loss.
//!
//! Integration runs in the rotating frame
//! `C̃1_ij = C1_ij e^{i(k_i−k_j)z}`, `C̃2_ij = C2_ij e^{−i(k_i+k_j)z}`, where the
//! free-propagation terms drop out and only damping `−(α_i+α_j)/2` and the
//! slowly-varying coupling K(z) remain:
//!
//! ```text
//! dC̃1/dz = −A∘C̃1 + iΓ(X − Xᴴ) + √(α_iα_j)⟨f†_i f_j⟩ e^{i(k_i−k_j)z},   X = C̃2* K
//! dC̃2/dz = −A∘C̃2 + iΓ(K + Y + Yᵀ) + √(α_iα_j)⟨f_i f_j⟩ e^{−i(k_i+k_j)z}, Y = K C̃1
//! ```
//!
//! Custom environments with ⟨ff⟩ ≠ 0 keep their fast phase in the source
//! term, so they need step sizes resolving the optical wavevector.

use faer::Mat;

use crate::coupling::{Coupling, Workspace};
use crate::error::{Error, Result};
use crate::gaussian::{covariance_unchecked, BasisTag, CorrelationPair};
use crate::linalg::{self, c64, cis, hermitian_defect, symmetric_defect, CMat, I};
use crate::ode::rk4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvironmentKind {
    Vacuum,
    Thermal,
    Custom,
}

/// Moments of the loss reservoir.
#[derive(Clone, Debug)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    /// Thermal occupation per grid frequency.
    pub nbar: Vec<f64>,
    /// `(⟨f†f⟩, ⟨ff⟩)` for custom reservoirs.
    pub custom: Option<(CMat, CMat)>,
}

impl EnvironmentSpec {
    pub fn vacuum(n: usize) -> Self {
        EnvironmentSpec {
            kind: EnvironmentKind::Vacuum,
            nbar: vec![0.0; n],
            custom: None,
        }
    }

    pub fn thermal(nbar: Vec<f64>) -> Result<Self> {
        if nbar.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::validation("thermal occupations must be non-negative"));
        }
        Ok(EnvironmentSpec {
            kind: EnvironmentKind::Thermal,
            nbar,
            custom: None,
        })
    }

    pub fn custom(ff_dag: CMat, ff: CMat) -> Result<Self> {
        let pair = CorrelationPair::new(ff_dag, ff, BasisTag::Monochromatic)?;
        pair.validate()?;
        Ok(EnvironmentSpec {
            kind: EnvironmentKind::Custom,
            nbar: pair.photon_numbers(),
            custom: Some((pair.c1, pair.c2)),
        })
    }

    pub fn n(&self) -> usize {
        self.nbar.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Vacuum,
    Thermal,
}

/// Spectrally uncorrelated input state, `C1 = diag(N̄)`, `C2 = 0`.
#[derive(Clone, Debug)]
pub struct InputState {
    pub kind: InputKind,
    pub nbar: Vec<f64>,
}

impl InputState {
    pub fn vacuum(n: usize) -> Self {
        InputState {
            kind: InputKind::Vacuum,
            nbar: vec![0.0; n],
        }
    }

    pub fn thermal(nbar: Vec<f64>) -> Result<Self> {
        if nbar.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::validation("thermal occupations must be non-negative"));
        }
        Ok(InputState {
            kind: InputKind::Thermal,
            nbar,
        })
    }

    pub fn correlations(&self) -> CorrelationPair {
        let n = self.nbar.len();
        CorrelationPair {
            c1: linalg::diag_c(&self.nbar),
            c2: CMat::zeros(n, n),
            basis: BasisTag::Monochromatic,
        }
    }
}

fn env_moment(env: &EnvironmentSpec, i: usize, j: usize) -> (c64, c64) {
    match &env.custom {
        Some((a, b)) => (a[(i, j)], b[(i, j)]),
        None => (
            c64::new(if i == j { env.nbar[i] } else { 0.0 }, 0.0),
            c64::new(0.0, 0.0),
        ),
    }
}

fn check_sizes(coupling: &Coupling, alpha: &[f64], env: &EnvironmentSpec) -> Result<()> {
    let n = coupling.n();
    if alpha.len() != n || env.n() != n {
        return Err(Error::validation(format!(
            "size mismatch: grid {n}, loss {}, environment {}",
            alpha.len(),
            env.n()
        )));
    }
    if alpha.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::validation("extinction coefficients must be non-negative"));
    }
    Ok(())
}

/// Lab-frame right-hand side of the master equations, written out term by
/// term. Used as a reference for the rotating-frame integrator.
#[allow(clippy::too_many_arguments)]
pub fn master_rhs(
    z: f64,
    corr: &CorrelationPair,
    gamma: f64,
    coupling: &Coupling,
    alpha: &[f64],
    env: &EnvironmentSpec,
) -> Result<(CMat, CMat)> {
    check_sizes(coupling, alpha, env)?;
    let n = coupling.n();
    let k = coupling.wavevectors();
    let j = coupling.lab(z);
    let (c1, c2) = (&corr.c1, &corr.c2);
    let kappa: Vec<c64> = (0..n).map(|i| c64::new(k[i], 0.5 * alpha[i])).collect();
    let ig = I * gamma;
    // Σ_s J_js ⟨a†_i a†_s⟩ = (C̄2 J)_ij, Σ_s J*_is ⟨a_s a_j⟩ = (J̄ C2)_ij
    let p = c2.as_ref().conjugate() * j.as_ref();
    let q = j.as_ref().conjugate() * c2.as_ref();
    // Σ_s J_js ⟨a_i a†_s⟩ = J_ji + (C1ᵀ J)_ij, Σ_s J_is ⟨a†_s a_j⟩ = (J C1)_ij
    let r = c1.as_ref().transpose() * j.as_ref();
    let t = j.as_ref() * c1.as_ref();
    let d1 = Mat::from_fn(n, n, |a, b| {
        let (fd, _) = env_moment(env, a, b);
        (-I * kappa[a].conj() + I * kappa[b]) * c1[(a, b)]
            + ig * (p[(a, b)] - q[(a, b)])
            + fd * (alpha[a] * alpha[b]).sqrt()
    });
    let d2 = Mat::from_fn(n, n, |a, b| {
        let (_, ff) = env_moment(env, a, b);
        (I * kappa[a] + I * kappa[b]) * c2[(a, b)]
            + ig * (j[(b, a)] + r[(a, b)] + t[(a, b)])
            + ff * (alpha[a] * alpha[b]).sqrt()
    });
    Ok((d1, d2))
}

/// Result of [`integrate_master_traced`].
#[derive(Clone, Debug)]
pub struct MasterRun {
    pub corr: CorrelationPair,
    /// Largest Hermiticity/symmetry defect seen before re-symmetrization.
    pub max_drift: f64,
}

/// Integrates the master equations over `[0, length]` and checks the
/// uncertainty bound of the result.
#[allow(clippy::too_many_arguments)]
pub fn integrate_master(
    gamma: f64,
    coupling: &Coupling,
    alpha: &[f64],
    input: &InputState,
    env: &EnvironmentSpec,
    length: f64,
    steps: usize,
) -> Result<CorrelationPair> {
    let run = integrate_master_traced(gamma, coupling, alpha, input, env, length, steps)?;
    let margin = covariance_unchecked(&run.corr).physicality_margin()?;
    if margin < -1e-8 {
        return Err(Error::tolerance(format!(
            "integrated state is unphysical (min eig(σ + iΩ) = {margin:.3e}); increase the step count"
        )));
    }
    Ok(run.corr)
}

/// As [`integrate_master`] without the final physicality check, reporting
/// the per-step symmetry drift.
#[allow(clippy::too_many_arguments)]
pub fn integrate_master_traced(
    gamma: f64,
    coupling: &Coupling,
    alpha: &[f64],
    input: &InputState,
    env: &EnvironmentSpec,
    length: f64,
    steps: usize,
) -> Result<MasterRun> {
    check_sizes(coupling, alpha, env)?;
    if steps == 0 {
        return Err(Error::validation("step count must be positive"));
    }
    if input.nbar.len() != coupling.n() {
        return Err(Error::validation("input state size differs from the grid"));
    }
    let n = coupling.n();
    let k = coupling.wavevectors().to_vec();
    let damping = Mat::from_fn(n, n, |a, b| 0.5 * (alpha[a] + alpha[b]));
    let rate = Mat::from_fn(n, n, |a, b| (alpha[a] * alpha[b]).sqrt());
    let has_env = env.kind != EnvironmentKind::Vacuum && alpha.iter().any(|&a| a > 0.0);

    let mut y = CMat::zeros(n, 2 * n);
    for i in 0..n {
        y[(i, i)] = c64::new(input.nbar[i], 0.0);
    }
    let mut ws = Workspace::default();
    let mut t = CMat::zeros(n, n);
    let mut yk = CMat::zeros(n, n);
    let ig = I * gamma;
    let mut max_drift = 0.0f64;
    rk4(
        &mut y,
        0.0,
        length,
        steps,
        |z, y, mut out| {
            let c1 = y.subcols(0, n);
            let c2 = y.subcols(n, n);
            if gamma != 0.0 {
                coupling.apply(z, c2, true, t.as_mut(), &mut ws);
                coupling.apply(z, c1, false, yk.as_mut(), &mut ws);
            }
            let kz = if gamma != 0.0 { Some(coupling.factors(z)) } else { None };
            let (ph_minus, ph_plus): (Vec<c64>, Vec<c64>) = if has_env {
                (k.iter().map(|&x| cis(x * z)).collect(), k.iter().map(|&x| cis(-x * z)).collect())
            } else {
                (Vec::new(), Vec::new())
            };
            for b in 0..n {
                for a in 0..n {
                    let d = damping[(a, b)];
                    let mut d1 = -c1[(a, b)] * d;
                    let mut d2 = -c2[(a, b)] * d;
                    if let Some((g, d)) = &kz {
                        // X = Tᵀ with T = K C̃2*, so X − Xᴴ = Tᵀ − T̄
                        d1 += ig * (t[(b, a)] - t[(a, b)].conj());
                        d2 += ig * (g[a + b] * d[a] * d[b] + yk[(a, b)] + yk[(b, a)]);
                    }
                    if has_env {
                        let (fd, ff) = env_moment(env, a, b);
                        let r = rate[(a, b)];
                        if fd != c64::new(0.0, 0.0) {
                            d1 += fd * ph_minus[a] * ph_plus[b] * r;
                        }
                        if ff != c64::new(0.0, 0.0) {
                            d2 += ff * ph_plus[a] * ph_plus[b] * r;
                        }
                    }
                    out[(a, b)] = d1;
                    out[(a, n + b)] = d2;
                }
            }
        },
        |y| {
            let c1 = y.as_ref().subcols(0, n);
            let c2 = y.as_ref().subcols(n, n);
            let scale = linalg::max_abs(y.as_ref()).max(1.0);
            max_drift = max_drift.max(hermitian_defect(c1).max(symmetric_defect(c2)) / scale);
            for b in 0..n {
                y[(b, b)].im = 0.0;
                for a in 0..b {
                    let h = (y[(a, b)] + y[(b, a)].conj()) * 0.5;
                    y[(a, b)] = h;
                    y[(b, a)] = h.conj();
                    let s = (y[(a, n + b)] + y[(b, n + a)]) * 0.5;
                    y[(a, n + b)] = s;
                    y[(b, n + a)] = s;
                }
            }
        },
    );
    let c1 = Mat::from_fn(n, n, |a, b| y[(a, b)] * cis(-(k[a] - k[b]) * length));
    let c2 = Mat::from_fn(n, n, |a, b| y[(a, n + b)] * cis((k[a] + k[b]) * length));
    let mut corr = CorrelationPair {
        c1,
        c2,
        basis: BasisTag::Monochromatic,
    };
    linalg::hermitize(&mut corr.c1);
    linalg::symmetrize(&mut corr.c2);
    Ok(MasterRun { corr, max_drift })
}

/// Squeezed-quadrature variance of a single degenerate lossy squeezer with
/// gain `gamma` and intensity loss `alpha` after `length`.
pub fn single_mode_oracle(gamma: f64, alpha: f64, length: f64) -> f64 {
    let rate = alpha + 2.0 * gamma;
    if rate == 0.0 {
        return 1.0;
    }
    let decay = (-rate * length).exp();
    decay + alpha * (1.0 - decay) / rate
}

/// Single-mode coupling with `S = 1`, `Δk = 0`, `k = 0`.
pub fn single_mode_coupling() -> Coupling {
    Coupling::from_parts(vec![0.0], vec![1.0], vec![0.0]).expect("valid single-mode arrays")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{FrequencyGrid, OpticalModel, PumpSpec};
    use crate::gaussian::{covariance_from_correlations, purity};
    use crate::lossless::{integrate_bogoliubov, vacuum_correlations};

    fn squeezed_variance(c: &CorrelationPair) -> f64 {
        1.0 + 2.0 * c.c1[(0, 0)].re - 2.0 * c.c2[(0, 0)].norm()
    }

    fn pdc(n: usize) -> Coupling {
        let m = OpticalModel::default();
        let p = PumpSpec::default();
        let g = FrequencyGrid::degenerate(&p, &m, 0.4, n).unwrap();
        Coupling::new(&g, &p, &m).unwrap()
    }

    #[test]
    fn oracle_limits() {
        assert!((single_mode_oracle(1e-4, 0.0, 1e4) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(single_mode_oracle(0.0, 1e-4, 1e4), 1.0);
        assert_eq!(single_mode_oracle(0.0, 0.0, 1e4), 1.0);
    }

    #[test]
    fn single_mode_matches_oracle() {
        let l = 1e4;
        let (g, a) = (1.0 / l, 0.6908 / l);
        let c = single_mode_coupling();
        let out = integrate_master(
            g,
            &c,
            &[a],
            &InputState::vacuum(1),
            &EnvironmentSpec::vacuum(1),
            l,
            1000,
        )
        .unwrap();
        let v = squeezed_variance(&out);
        let o = single_mode_oracle(g, a, l);
        assert!(((v - o) / o).abs() < 1e-6, "{v} vs {o}");
    }

    #[test]
    fn free_rotation_and_damping_in_lab_rhs() {
        let c = Coupling::from_parts(vec![1.0, 2.5], vec![0.0; 3], vec![0.0; 3]).unwrap();
        let corr = CorrelationPair::new(
            CMat::from_fn(2, 2, |a, b| if a == b { c64::new(1.0, 0.0) } else { c64::new(0.3, 0.2 * (b as f64 - a as f64)) }),
            CMat::zeros(2, 2),
            BasisTag::Monochromatic,
        )
        .unwrap();
        let alpha = [0.1, 0.3];
        let (d1, _) = master_rhs(0.0, &corr, 0.0, &c, &alpha, &EnvironmentSpec::vacuum(2)).unwrap();
        let k = c.wavevectors();
        for a in 0..2 {
            for b in 0..2 {
                let want = (I * (k[b] - k[a]) - 0.5 * (alpha[a] + alpha[b])) * corr.c1[(a, b)];
                assert!((d1[(a, b)] - want).norm() < 1e-14);
            }
        }
        let env = EnvironmentSpec::thermal(vec![2.0, 0.5]).unwrap();
        let (d1, _) = master_rhs(0.0, &CorrelationPair::thermal(&[1.0, 1.0]).unwrap(), 0.0, &c, &alpha, &env).unwrap();
        assert!((d1[(0, 0)].re - (-0.1 + 0.1 * 2.0)).abs() < 1e-14);
        assert!((d1[(1, 1)].re - (-0.3 + 0.3 * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn rotating_frame_matches_lab_frame_integration() {
        // brute-force lab-frame integration resolving the optical phase
        let n = 5;
        let c = pdc(n);
        let g = 5e-3;
        let l = 60.0;
        let alpha: Vec<f64> = (0..n).map(|i| 1e-3 * (1.0 + i as f64)).collect();
        let env = EnvironmentSpec::thermal(vec![0.3, 0.1, 0.0, 0.2, 0.5]).unwrap();
        let input = InputState::thermal(vec![0.5; n]).unwrap();
        let fast = integrate_master(g, &c, &alpha, &input, &env, l, 200).unwrap();

        let mut y = CMat::zeros(n, 2 * n);
        for i in 0..n {
            y[(i, i)] = c64::new(0.5, 0.0);
        }
        rk4(
            &mut y,
            0.0,
            l,
            80000,
            |z, yy, mut out| {
                let pair = CorrelationPair {
                    c1: yy.subcols(0, n).to_owned(),
                    c2: yy.subcols(n, n).to_owned(),
                    basis: BasisTag::Monochromatic,
                };
                let (d1, d2) = master_rhs(z, &pair, g, &c, &alpha, &env).unwrap();
                out.as_mut().subcols_mut(0, n).copy_from(&d1);
                out.as_mut().subcols_mut(n, n).copy_from(&d2);
            },
            |_| {},
        );
        let slow = CorrelationPair {
            c1: y.subcols(0, n).to_owned(),
            c2: y.subcols(n, n).to_owned(),
            basis: BasisTag::Monochromatic,
        };
        assert!(fast.max_abs_diff(&slow) < 5e-8, "{}", fast.max_abs_diff(&slow));
    }

    #[test]
    fn lossless_limit_matches_transfer_matrices() {
        let c = pdc(21);
        let n = 21;
        let g = 2.5e-4;
        let me = integrate_master(g, &c, &vec![0.0; n], &InputState::vacuum(n), &EnvironmentSpec::vacuum(n), 1e4, 800).unwrap();
        let pair = integrate_bogoliubov(g, &c, 1e4, 800).unwrap();
        let vc = vacuum_correlations(&pair);
        assert!(me.max_abs_diff(&vc) < 1e-6, "{}", me.max_abs_diff(&vc));
    }

    #[test]
    fn pure_loss_analytics() {
        let n = 5;
        let c = pdc(n);
        let alpha: Vec<f64> = (0..n).map(|i| 5e-5 * (1.0 + i as f64)).collect();
        let l = 1e4;
        let nbar = vec![2.0, 1.0, 0.5, 3.0, 0.0];
        let out = integrate_master(0.0, &c, &alpha, &InputState::thermal(nbar.clone()).unwrap(), &EnvironmentSpec::vacuum(n), l, 200).unwrap();
        for i in 0..n {
            let want = nbar[i] * (-alpha[i] * l).exp();
            assert!((out.c1[(i, i)].re - want).abs() <= 1e-8 * want.max(1e-300) + 1e-15);
        }
        let env = vec![1.0, 0.2, 0.0, 4.0, 2.0];
        let out = integrate_master(0.0, &c, &alpha, &InputState::vacuum(n), &EnvironmentSpec::thermal(env.clone()).unwrap(), l, 200).unwrap();
        for i in 0..n {
            let want = env[i] * (1.0 - (-alpha[i] * l).exp());
            assert!((out.c1[(i, i)].re - want).abs() <= 1e-8 * want + 1e-15);
        }
    }

    #[test]
    fn purity_grows_under_pure_loss() {
        let n = 3;
        let c = pdc(n);
        let alpha = vec![1e-4; n];
        let input = InputState::thermal(vec![1.0, 2.0, 0.5]).unwrap();
        let env = EnvironmentSpec::vacuum(n);
        let mut last = 0.0;
        for s in 0..6 {
            let l = 2000.0 * s as f64 + 1.0;
            let out = integrate_master(0.0, &c, &alpha, &input, &env, l, 20).unwrap();
            let p = purity(&covariance_from_correlations(&out).unwrap()).unwrap();
            assert!(p >= last);
            last = p;
        }
    }
}
