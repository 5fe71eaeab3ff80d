//! Slowly-varying coupling operator of the discretized PDC process.
//!
//! On a uniform grid the pump factor depends only on ω_i + ω_j, so
//! J_ij(z) = g_{i+j}(z) is a Hankel matrix and
//!
//! ```text
//! K_ij(z) = g_{i+j}(z) · e^{−ik_i z} e^{−ik_j z},   g_m(z) = S(Ω_m) e^{ik_p(Ω_m) z}
//! ```
//!
//! Products `K·X` are evaluated column by column as a linear convolution
//! through an FFT of length ≥ 2N−1, which costs O(N² log N) instead of O(N³).

use std::sync::Arc;

use faer::{Mat, MatMut, MatRef};
use rustfft::{Fft, FftPlanner};

use crate::dispersion::{FrequencyGrid, OpticalModel, PumpSpec, Role};
use crate::error::{Error, Result};
use crate::linalg::{c64, cis, CMat};

/// Below this size a dense product is cheaper than the FFT route.
const DENSE_LIMIT: usize = 48;

pub struct Coupling {
    k: Vec<f64>,
    source: Vec<f64>,
    kp: Vec<f64>,
    fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Coupling")
            .field("n", &self.k.len())
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

/// Reusable buffers for [`Coupling::apply`].
#[derive(Default)]
pub struct Workspace {
    buf: Vec<c64>,
    scratch: Vec<c64>,
    kernel: Vec<c64>,
    phase: Vec<c64>,
}

impl Coupling {
    pub fn new(grid: &FrequencyGrid, pump: &PumpSpec, model: &OpticalModel) -> Result<Self> {
        let n = grid.len();
        let k = grid
            .omegas
            .iter()
            .map(|&w| model.wavevector(w, Role::Pdc))
            .collect::<Result<Vec<_>>>()?;
        let first = 2.0 * grid.omegas[0];
        let sums: Vec<f64> = (0..2 * n - 1).map(|m| first + m as f64 * grid.spacing).collect();
        let source = sums.iter().map(|&w| pump.spectrum(model, w)).collect();
        let kp = sums
            .iter()
            .map(|&w| model.wavevector(w, Role::Pump))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(k, source, kp)
    }

    /// Builds the operator from raw arrays: PDC wavevectors `k` (length N),
    /// pump amplitude and pump wavevector at the 2N−1 frequency sums.
    pub fn from_parts(k: Vec<f64>, source: Vec<f64>, kp: Vec<f64>) -> Result<Self> {
        let n = k.len();
        if n == 0 || source.len() != 2 * n - 1 || kp.len() != 2 * n - 1 {
            return Err(Error::validation(format!(
                "coupling arrays need lengths N and 2N-1, got {}, {}, {}",
                n,
                source.len(),
                kp.len()
            )));
        }
        let fft_len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        Ok(Coupling {
            k,
            source,
            kp,
            fft_len,
            fwd,
            inv,
        })
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    /// PDC wavevectors k_i in rad/μm.
    pub fn wavevectors(&self) -> &[f64] {
        &self.k
    }

    fn hankel_symbol(&self, z: f64) -> Vec<c64> {
        self.source
            .iter()
            .zip(&self.kp)
            .map(|(&s, &kp)| cis(kp * z) * s)
            .collect()
    }

    fn phases(&self, z: f64) -> Vec<c64> {
        self.k.iter().map(|&k| cis(-k * z)).collect()
    }

    /// Factors `(g, d)` of `K_ij(z) = g_{i+j} d_i d_j`.
    pub fn factors(&self, z: f64) -> (Vec<c64>, Vec<c64>) {
        (self.hankel_symbol(z), self.phases(z))
    }

    /// K(z) as a dense matrix.
    pub fn dense(&self, z: f64) -> CMat {
        let g = self.hankel_symbol(z);
        let d = self.phases(z);
        Mat::from_fn(self.n(), self.n(), |i, j| g[i + j] * d[i] * d[j])
    }

    /// Lab-frame coupling J(z) = K(z)∘e^{i(k_i+k_j)z}.
    pub fn lab(&self, z: f64) -> CMat {
        let g = self.hankel_symbol(z);
        Mat::from_fn(self.n(), self.n(), |i, j| g[i + j])
    }

    /// `∫₀ᴸ K(z) dz`, evaluated in closed form.
    pub fn integrated(&self, length: f64) -> CMat {
        let n = self.n();
        Mat::from_fn(n, n, |i, j| {
            let dk = self.kp[i + j] - self.k[i] - self.k[j];
            let x = dk * length;
            // (e^{ix} − 1)/(i dk), with the small-x limit
            let v = if x.abs() < 1e-8 {
                c64::new(length, 0.5 * x * length)
            } else {
                (cis(x) - c64::new(1.0, 0.0)) / c64::new(0.0, dk)
            };
            v * self.source[i + j]
        })
    }

    /// `out ← K(z)·X`, or `K(z)·X̄` when `conjugate` is set.
    pub fn apply(&self, z: f64, x: MatRef<'_, c64>, conjugate: bool, mut out: MatMut<'_, c64>, ws: &mut Workspace) {
        let n = self.n();
        let cols = x.ncols();
        assert_eq!(x.nrows(), n);
        assert_eq!((out.nrows(), out.ncols()), (n, cols));
        if n <= DENSE_LIMIT {
            let k = self.dense(z);
            let xin = if conjugate {
                Mat::from_fn(n, cols, |i, j| x[(i, j)].conj())
            } else {
                x.to_owned()
            };
            out.copy_from(&k * &xin);
            return;
        }
        let lf = self.fft_len;
        ws.phase.clear();
        ws.phase.extend(self.phases(z));
        ws.kernel.clear();
        ws.kernel.extend(self.hankel_symbol(z));
        ws.kernel.resize(lf, c64::new(0.0, 0.0));
        ws.scratch.resize(
            self.fwd
                .get_inplace_scratch_len()
                .max(self.inv.get_inplace_scratch_len()),
            c64::new(0.0, 0.0),
        );
        self.fwd.process_with_scratch(&mut ws.kernel, &mut ws.scratch);
        let scale = 1.0 / lf as f64;
        for v in ws.kernel.iter_mut() {
            *v *= scale;
        }

        ws.buf.clear();
        ws.buf.resize(lf * cols, c64::new(0.0, 0.0));
        for c in 0..cols {
            let chunk = &mut ws.buf[c * lf..c * lf + n];
            for t in 0..n {
                let src = n - 1 - t;
                let v = x[(src, c)];
                let v = if conjugate { v.conj() } else { v };
                chunk[t] = v * ws.phase[src];
            }
        }
        self.fwd.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        for chunk in ws.buf.chunks_exact_mut(lf) {
            for (v, g) in chunk.iter_mut().zip(&ws.kernel) {
                *v *= g;
            }
        }
        self.inv.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        for c in 0..cols {
            let chunk = &ws.buf[c * lf + n - 1..c * lf + 2 * n - 1];
            for i in 0..n {
                out[(i, c)] = chunk[i] * ws.phase[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::coupling_matrix;
    use crate::linalg::max_abs_diff;

    fn setup(n: usize) -> (FrequencyGrid, Coupling) {
        let m = OpticalModel::default();
        let p = PumpSpec::default();
        let g = FrequencyGrid::degenerate(&p, &m, 0.4, n).unwrap();
        let c = Coupling::new(&g, &p, &m).unwrap();
        (g, c)
    }

    #[test]
    fn dense_matches_rotated_lab_frame_coupling() {
        let m = OpticalModel::default();
        let p = PumpSpec::default();
        let (g, c) = setup(9);
        let z = 3700.0;
        let j = coupling_matrix(z, &g, &p, &m).unwrap();
        let k = c.dense(z);
        let ks = c.wavevectors();
        for a in 0..9 {
            for b in 0..9 {
                let expect = j[(a, b)] * cis(-(ks[a] + ks[b]) * z);
                // phases of order 10⁴ rad lose a few digits
                assert!((k[(a, b)] - expect).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn fft_route_matches_dense_product() {
        let (_, c) = setup(101);
        let n = 101;
        let x = Mat::from_fn(n, 7, |i, j| c64::new((i as f64 * 0.37 + j as f64).sin(), (i * j) as f64 * 0.01));
        let z = 5123.0;
        let mut out = CMat::zeros(n, 7);
        let mut ws = Workspace::default();
        c.apply(z, x.as_ref(), false, out.as_mut(), &mut ws);
        let dense = c.dense(z) * &x;
        assert!(max_abs_diff(out.as_ref(), dense.as_ref()) < 1e-12);
        c.apply(z, x.as_ref(), true, out.as_mut(), &mut ws);
        let xc = Mat::from_fn(n, 7, |i, j| x[(i, j)].conj());
        let dense = c.dense(z) * &xc;
        assert!(max_abs_diff(out.as_ref(), dense.as_ref()) < 1e-12);
    }

    #[test]
    fn integral_matches_quadrature() {
        let (_, c) = setup(7);
        let l = 1e4;
        let samples = 20000;
        let dz = l / samples as f64;
        let mut acc = CMat::zeros(7, 7);
        for s in 0..samples {
            acc += c.dense((s as f64 + 0.5) * dz) * faer::Scale(c64::new(dz, 0.0));
        }
        let exact = c.integrated(l);
        assert!(max_abs_diff(acc.as_ref(), exact.as_ref()) < 1e-4 * l);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(Coupling::from_parts(vec![0.0; 3], vec![1.0; 4], vec![0.0; 5]).is_err());
    }
}
