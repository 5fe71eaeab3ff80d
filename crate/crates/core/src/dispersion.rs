//! Frequency grid, refractive-index model, pump spectrum and loss profiles.
//!
//! Units throughout: μm, fs, rad/fs, rad/μm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, c64, CMat};

/// Speed of light in μm/fs.
pub const SPEED_OF_LIGHT: f64 = 0.299792458;

/// Wavelength band (μm) on which the Sellmeier model is trusted.
pub const SELLMEIER_BAND: (f64, f64) = (0.4, 3.0);

/// Sellmeier form `n² = A + B/(λ² − C) − Dλ²` with λ in μm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sellmeier {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Sellmeier {
    pub fn n_squared(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        self.a + self.b / (l2 - self.c) - self.d * l2
    }

    /// d(n²)/dλ.
    pub fn n_squared_derivative(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        -2.0 * lambda * self.b / ((l2 - self.c) * (l2 - self.c)) - 2.0 * self.d * lambda
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

/// Which field a wavevector belongs to: the down-converted o-wave or the
/// e-polarized pump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Pdc,
    Pump,
}

/// Uniaxial crystal: ordinary index and the auxiliary index η mixed at the
/// phase-matching angle θ into the extraordinary index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalModel {
    pub ordinary: Sellmeier,
    pub eta: Sellmeier,
    /// Crystal angle in radians.
    pub theta: f64,
    /// Speed of light in μm/fs.
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

impl Default for OpticalModel {
    fn default() -> Self {
        OpticalModel {
            ordinary: Sellmeier {
                a: 2.7359,
                b: 0.01878,
                c: 0.01822,
                d: 0.01354,
            },
            eta: Sellmeier {
                a: 2.3753,
                b: 0.01224,
                c: 0.01667,
                d: 0.01516,
            },
            theta: 0.1107 * std::f64::consts::PI,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl OpticalModel {
    fn check_band(lambda: f64) -> Result<()> {
        let (lo, hi) = SELLMEIER_BAND;
        if lambda.is_finite() && lambda > lo && lambda < hi {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "wavelength {lambda} μm outside the Sellmeier band ({lo}, {hi}) μm"
            )))
        }
    }

    pub fn refractive_index(&self, lambda: f64, pol: Polarization) -> Result<f64> {
        Self::check_band(lambda)?;
        let no2 = self.ordinary.n_squared(lambda);
        let n2 = match pol {
            Polarization::Ordinary => no2,
            Polarization::Extraordinary => {
                let eta2 = self.eta.n_squared(lambda);
                let (s, c) = self.theta.sin_cos();
                1.0 / (s * s / eta2 + c * c / no2)
            }
        };
        if !(n2 > 1.0) {
            return Err(Error::Domain(format!(
                "refractive index squared {n2} at {lambda} μm is not above 1"
            )));
        }
        Ok(n2.sqrt())
    }

    pub fn wavelength(&self, omega: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.c / omega
    }

    pub fn angular_frequency(&self, lambda: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.c / lambda
    }

    /// k(ω) = n(ω)ω/c; o-wave for the down-converted field, e-wave for the pump.
    pub fn wavevector(&self, omega: f64, role: Role) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!("angular frequency {omega} must be positive")));
        }
        let pol = match role {
            Role::Pdc => Polarization::Ordinary,
            Role::Pump => Polarization::Extraordinary,
        };
        Ok(self.refractive_index(self.wavelength(omega), pol)? * omega / self.c)
    }

    /// Δk = k_p(ω_i + ω_j) − k(ω_i) − k(ω_j).
    pub fn phase_mismatch(&self, wi: f64, wj: f64) -> Result<f64> {
        Ok(self.wavevector(wi + wj, Role::Pump)?
            - self.wavevector(wi, Role::Pdc)?
            - self.wavevector(wj, Role::Pdc)?)
    }

    /// Crystal angle at which degenerate down-conversion of a pump at
    /// `pump_wavelength` is exactly phase matched, found by bisection.
    pub fn degenerate_phase_matching_angle(&self, pump_wavelength: f64) -> Result<f64> {
        let wp = self.angular_frequency(pump_wavelength);
        let mismatch = |theta: f64| -> Result<f64> {
            let m = OpticalModel { theta, ..*self };
            m.phase_mismatch(0.5 * wp, 0.5 * wp)
        };
        // n_e falls monotonically from n_o at θ = 0 to η at θ = π/2
        let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
        let (f_lo, f_hi) = (mismatch(lo)?, mismatch(hi)?);
        if f_lo.signum() == f_hi.signum() {
            return Err(Error::Domain(format!(
                "degenerate process at {pump_wavelength} μm cannot be phase matched (Δk = {f_lo:.3e} .. {f_hi:.3e})"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mismatch(mid)?.signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Transform-limited Gaussian pump, peak-normalized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    /// Central wavelength in μm.
    pub wavelength: f64,
    /// Intensity FWHM duration in fs.
    pub fwhm: f64,
}

impl Default for PumpSpec {
    fn default() -> Self {
        PumpSpec {
            wavelength: 0.8,
            fwhm: 50.0,
        }
    }
}

impl PumpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::validation(format!(
                "pump needs positive wavelength and duration, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn central_frequency(&self, model: &OpticalModel) -> f64 {
        model.angular_frequency(self.wavelength)
    }

    /// Amplitude width τ of `exp(−t²/2τ²)`, from the intensity FWHM.
    pub fn tau(&self) -> f64 {
        self.fwhm / (2.0 * std::f64::consts::LN_2.sqrt())
    }

    /// S(ω) = exp(−τ²(ω − ω_p)²/2).
    pub fn spectrum(&self, model: &OpticalModel, omega: f64) -> f64 {
        let d = omega - self.central_frequency(model);
        let tau = self.tau();
        (-0.5 * tau * tau * d * d).exp()
    }
}

/// Uniform angular-frequency grid centred on the degenerate frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    pub center: f64,
    pub half_width: f64,
    pub omegas: Vec<f64>,
    pub spacing: f64,
}

impl FrequencyGrid {
    /// `n` points spanning `center ± half_width`. A single point requires
    /// `half_width == 0`.
    pub fn new(center: f64, half_width: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("grid needs at least one point"));
        }
        if !(half_width >= 0.0) || (n > 1 && half_width == 0.0) {
            return Err(Error::validation(format!("invalid grid half-width {half_width}")));
        }
        if n == 1 && half_width != 0.0 {
            return Err(Error::validation("single-point grid must have zero half-width"));
        }
        if !(center - half_width > 0.0) {
            return Err(Error::validation(format!(
                "grid reaches non-positive frequency: {center} - {half_width}"
            )));
        }
        let spacing = if n > 1 {
            2.0 * half_width / (n - 1) as f64
        } else {
            0.0
        };
        let mid = (n - 1) / 2;
        let omegas = (0..n)
            .map(|i| {
                // odd n: measure from the centre so the reflection is exact
                if n % 2 == 1 {
                    center + (i as f64 - mid as f64) * spacing
                } else {
                    center - half_width + i as f64 * spacing
                }
            })
            .collect();
        Ok(FrequencyGrid {
            center,
            half_width,
            omegas,
            spacing,
        })
    }

    /// Grid centred at half the pump frequency.
    pub fn degenerate(pump: &PumpSpec, model: &OpticalModel, half_width: f64, n: usize) -> Result<Self> {
        Self::new(0.5 * pump.central_frequency(model), half_width, n)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// Low-gain joint amplitude |S(ω+ω')·sinc(Δk L/2)|.
pub fn low_gain_amplitude(model: &OpticalModel, pump: &PumpSpec, length: f64, w: f64, wp: f64) -> Result<f64> {
    let dk = model.phase_mismatch(w, wp)?;
    let x = 0.5 * dk * length;
    let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
    Ok((pump.spectrum(model, w + wp) * sinc).abs())
}

/// Default half-width of the frequency grid.
///
/// For every detuning `d` from degeneracy we take the largest low-gain
/// amplitude over all partner frequencies; the half-width is the smallest
/// detuning beyond which this marginal stays below `1e-2` of its peak. The
/// result is capped at 95% of the detuning where the idler would leave the
/// Sellmeier band.
pub fn default_half_width(model: &OpticalModel, pump: &PumpSpec, length: f64) -> Result<f64> {
    const THRESHOLD: f64 = 1e-2;
    const STEP: f64 = 1e-3;
    let center = 0.5 * pump.central_frequency(model);
    let w_min = model.angular_frequency(SELLMEIER_BAND.1);
    let w_max = model.angular_frequency(SELLMEIER_BAND.0);
    let cap = 0.95 * (center - w_min).min(w_max - center);
    let wp = pump.central_frequency(model);
    // the pump envelope confines ω + ω' to ω_p ± 8/τ
    let spread = 8.0 / pump.tau();
    let partners = 801;
    let marginal = |w: f64| -> Result<f64> {
        let mut best = 0.0f64;
        for k in 0..partners {
            let q = wp - w - spread + 2.0 * spread * k as f64 / (partners - 1) as f64;
            if q <= w_min || q >= w_max {
                continue;
            }
            best = best.max(low_gain_amplitude(model, pump, length, w, q)?);
        }
        Ok(best)
    };
    let steps = (cap / STEP).floor() as usize;
    let mut values = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let d = s as f64 * STEP;
        values.push(marginal(center + d)?.max(marginal(center - d)?));
    }
    let peak = values.iter().cloned().fold(0.0, f64::max);
    let mut edge = steps;
    while edge > 0 && values[edge] < THRESHOLD * peak {
        edge -= 1;
    }
    if edge == steps {
        return Ok(cap);
    }
    Ok(((edge + 1) as f64 * STEP).min(cap))
}

/// Extinction coefficients along the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossProfile {
    /// Intensity extinction coefficient per grid point, 1/μm.
    pub alpha: Vec<f64>,
    pub kind: LossKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Constant,
    Tabulated,
    Parametric,
}

/// dB/cm to 1/μm.
pub fn db_per_cm_to_alpha(db_per_cm: f64) -> f64 {
    db_per_cm * std::f64::consts::LN_10 / 10.0 / 1e4
}

impl LossProfile {
    pub fn none(n: usize) -> Self {
        LossProfile {
            alpha: vec![0.0; n],
            kind: LossKind::Constant,
        }
    }

    pub fn constant(db_per_cm: f64, grid: &FrequencyGrid) -> Result<Self> {
        if !(db_per_cm >= 0.0) {
            return Err(Error::validation(format!("loss must be non-negative, got {db_per_cm} dB/cm")));
        }
        Ok(LossProfile {
            alpha: vec![db_per_cm_to_alpha(db_per_cm); grid.len()],
            kind: LossKind::Constant,
        })
    }

    /// Linear interpolation of `(ω [rad/fs], dB/cm)` points, clamped outside
    /// the tabulated range.
    pub fn tabulated(points: &[(f64, f64)], grid: &FrequencyGrid) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("tabulated loss needs at least one point"));
        }
        if points.iter().any(|&(w, db)| !w.is_finite() || !(db >= 0.0)) {
            return Err(Error::validation("tabulated loss needs finite ω and non-negative dB/cm"));
        }
        if points.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::validation("tabulated loss frequencies must be strictly increasing"));
        }
        let interp = |w: f64| -> f64 {
            let first = points[0];
            let last = points[points.len() - 1];
            if w <= first.0 {
                return first.1;
            }
            if w >= last.0 {
                return last.1;
            }
            let k = points.partition_point(|p| p.0 <= w);
            let (w0, a0) = points[k - 1];
            let (w1, a1) = points[k];
            a0 + (a1 - a0) * (w - w0) / (w1 - w0)
        };
        Ok(LossProfile {
            alpha: grid.omegas.iter().map(|&w| db_per_cm_to_alpha(interp(w))).collect(),
            kind: LossKind::Tabulated,
        })
    }

    pub fn from_alpha(alpha: Vec<f64>) -> Result<Self> {
        if alpha.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::validation("extinction coefficients must be non-negative"));
        }
        Ok(LossProfile {
            alpha,
            kind: LossKind::Parametric,
        })
    }

    pub fn is_lossless(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }

    /// Intensity transmission e^{−αL}.
    pub fn transmission(&self, length: f64) -> Vec<f64> {
        self.alpha.iter().map(|a| (-a * length).exp()).collect()
    }
}

/// J_ij(z) = S(ω_i+ω_j)·exp(i k_p(ω_i+ω_j) z).
pub fn coupling_matrix(z: f64, grid: &FrequencyGrid, pump: &PumpSpec, model: &OpticalModel) -> Result<CMat> {
    let n = grid.len();
    let mut j = CMat::zeros(n, n);
    for b in 0..n {
        for a in 0..=b {
            let w = grid.omegas[a] + grid.omegas[b];
            let v: c64 = cis(model.wavevector(w, Role::Pump)? * z) * pump.spectrum(model, w);
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_phase_matching_angle() {
        let m = OpticalModel::default();
        let theta = m.degenerate_phase_matching_angle(0.8).unwrap();
        assert!((theta / std::f64::consts::PI - 0.11037).abs() < 1e-5, "{}", theta / std::f64::consts::PI);
        let pm = OpticalModel { theta, ..m };
        let w = 0.5 * pm.angular_frequency(0.8);
        assert!(pm.phase_mismatch(w, w).unwrap().abs() < 1e-12);
        // the literal angle leaves a few radians of mismatch over 1 cm
        assert!((m.phase_mismatch(w, w).unwrap() * 1e4 + 6.5736).abs() < 1e-3);
    }

    #[test]
    fn sellmeier_values() {
        let m = OpticalModel::default();
        let no = m.refractive_index(1.6, Polarization::Ordinary).unwrap();
        assert!((no - 1.6458).abs() < 1e-4, "{no}");
        let ne = m.refractive_index(0.8, Polarization::Extraordinary).unwrap();
        assert!((ne - 1.6457).abs() < 1e-4, "{ne}");
        assert!(m.refractive_index(0.3, Polarization::Ordinary).is_err());
        assert!(m.refractive_index(3.5, Polarization::Ordinary).is_err());
    }

    #[test]
    fn collapsed_sellmeier_is_sqrt_a() {
        let mut m = OpticalModel::default();
        m.ordinary.b = 0.0;
        m.ordinary.d = 0.0;
        let n = m.refractive_index(1.3, Polarization::Ordinary).unwrap();
        assert_eq!(n, 2.7359f64.sqrt());
    }

    #[test]
    fn wavevector_at_1600nm() {
        let m = OpticalModel::default();
        let w = m.angular_frequency(1.6);
        let k = m.wavevector(w, Role::Pdc).unwrap();
        assert!((k - 6.463).abs() < 1e-3, "{k}");
        assert!(m.wavevector(-1.0, Role::Pdc).is_err());
    }

    #[test]
    fn near_phase_matching_at_degeneracy() {
        let m = OpticalModel::default();
        let wp = m.angular_frequency(0.8);
        let dk = m.phase_mismatch(wp / 2.0, wp / 2.0).unwrap();
        assert!(dk.abs() < 1e-3, "{dk}");
        assert_eq!(
            m.phase_mismatch(1.1, 1.3).unwrap(),
            m.phase_mismatch(1.3, 1.1).unwrap()
        );
    }

    #[test]
    fn dispersionless_model_has_no_mismatch() {
        let s = Sellmeier {
            a: 2.5,
            b: 0.0,
            c: 0.0,
            d: 0.0,
        };
        let m = OpticalModel {
            ordinary: s,
            eta: s,
            ..OpticalModel::default()
        };
        assert!(m.phase_mismatch(1.0, 1.4).unwrap().abs() < 1e-12);
        let k1 = m.wavevector(1.0, Role::Pdc).unwrap();
        let k2 = m.wavevector(2.0, Role::Pdc).unwrap();
        assert!((k2 - 2.0 * k1).abs() < 1e-12);
    }

    #[test]
    fn sellmeier_derivative_matches_finite_difference() {
        let m = OpticalModel::default();
        let lam = 1.6;
        let h = 1e-5;
        let n = |l: f64| m.refractive_index(l, Polarization::Ordinary).unwrap();
        let fd = (n(lam + h) - n(lam - h)) / (2.0 * h);
        let analytic = m.ordinary.n_squared_derivative(lam) / (2.0 * n(lam));
        assert!(((fd - analytic) / analytic).abs() < 1e-6);
    }

    #[test]
    fn pump_spectrum_shape() {
        let m = OpticalModel::default();
        let p = PumpSpec::default();
        assert!((p.tau() - 30.028).abs() < 1e-3);
        let wp = p.central_frequency(&m);
        assert_eq!(p.spectrum(&m, wp), 1.0);
        let ln2 = std::f64::consts::LN_2;
        let s = p.spectrum(&m, wp + ln2.sqrt() / p.tau());
        assert!((s * s - 0.5).abs() < 1e-12);
        let s = p.spectrum(&m, wp - (2.0 * ln2).sqrt() / p.tau());
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_is_symmetric() {
        let g = FrequencyGrid::new(1.2, 0.3, 11).unwrap();
        assert_eq!(g.omegas[5], 1.2);
        for i in 0..11 {
            let r = 2.0 * g.center - g.omegas[i];
            assert!((r - g.omegas[10 - i]).abs() < 1e-15);
        }
        assert!(g.omegas.windows(2).all(|w| w[1] > w[0]));
        assert!(FrequencyGrid::new(1.2, 0.0, 3).is_err());
        assert!(FrequencyGrid::new(0.2, 0.3, 3).is_err());
        assert_eq!(FrequencyGrid::new(1.0, 0.0, 1).unwrap().omegas, vec![1.0]);
    }

    #[test]
    fn loss_profiles() {
        let g = FrequencyGrid::new(1.2, 0.3, 5).unwrap();
        let c = LossProfile::constant(3.0, &g).unwrap();
        let t = c.transmission(1e4);
        assert!((t[0] - 10f64.powf(-0.3)).abs() < 1e-12);
        assert!((t[0] - 0.5012).abs() < 1e-4);
        assert!(LossProfile::constant(-1.0, &g).is_err());
        assert!(LossProfile::constant(0.0, &g).unwrap().is_lossless());
        let tab = LossProfile::tabulated(&[(1.0, 3.0), (1.4, 3.0)], &g).unwrap();
        for (a, b) in tab.alpha.iter().zip(&c.alpha) {
            assert!((a - b).abs() < 1e-18);
        }
        let ramp = LossProfile::tabulated(&[(1.05, 0.0), (1.35, 6.0)], &g).unwrap();
        let a = db_per_cm_to_alpha(1.0);
        let expect = [0.0, 0.0, 3.0, 6.0, 6.0];
        for (x, e) in ramp.alpha.iter().zip(expect) {
            assert!((x - e * a).abs() < 1e-15, "{x} vs {}", e * a);
        }
    }

    #[test]
    fn coupling_matrix_is_symmetric_phase_only() {
        let m = OpticalModel::default();
        let p = PumpSpec::default();
        let g = FrequencyGrid::degenerate(&p, &m, 0.3, 9).unwrap();
        let j0 = coupling_matrix(0.0, &g, &p, &m).unwrap();
        let jl = coupling_matrix(1e4, &g, &p, &m).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                assert_eq!(j0[(a, b)].im, 0.0);
                assert_eq!(jl[(a, b)], jl[(b, a)]);
                assert!(jl[(a, b)].norm() <= 1.0 + 1e-15);
                assert!((jl[(a, b)].norm() - j0[(a, b)].norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn default_half_width_covers_the_lobes() {
        let m = OpticalModel::default();
        let p = PumpSpec::default();
        let hw = default_half_width(&m, &p, 1e4).unwrap();
        // phase-matched lobes sit near ±0.15 rad/fs
        assert!(hw > 0.3, "{hw}");
        let g = FrequencyGrid::degenerate(&p, &m, hw, 5).unwrap();
        assert!(m.wavelength(g.omegas[0]) < SELLMEIER_BAND.1);
    }
}
