//! Fixed-step classical Runge-Kutta for complex matrix-valued states.

use faer::{MatMut, MatRef};

use crate::linalg::{c64, CMat};

/// `out ← y + h·k`, column by column.
fn combine(out: &mut CMat, y: &CMat, h: f64, k: &CMat) {
    for j in 0..y.ncols() {
        let (o, a, b) = (out.col_as_slice_mut(j), y.col_as_slice(j), k.col_as_slice(j));
        for ((o, a), b) in o.iter_mut().zip(a).zip(b) {
            *o = *a + *b * h;
        }
    }
}

/// Integrates `dy/dz = f(z, y)` from `z0` to `z1` in `steps` equal RK4
/// steps. `post` runs after every step (used for re-symmetrization).
pub fn rk4<F, P>(y: &mut CMat, z0: f64, z1: f64, steps: usize, mut f: F, mut post: P)
where
    F: FnMut(f64, MatRef<'_, c64>, MatMut<'_, c64>),
    P: FnMut(&mut CMat),
{
    assert!(steps >= 1);
    let (r, c) = (y.nrows(), y.ncols());
    let h = (z1 - z0) / steps as f64;
    let mut k1 = CMat::zeros(r, c);
    let mut k2 = CMat::zeros(r, c);
    let mut k3 = CMat::zeros(r, c);
    let mut k4 = CMat::zeros(r, c);
    let mut tmp = CMat::zeros(r, c);
    for s in 0..steps {
        let z = z0 + s as f64 * h;
        f(z, y.as_ref(), k1.as_mut());
        combine(&mut tmp, y, 0.5 * h, &k1);
        f(z + 0.5 * h, tmp.as_ref(), k2.as_mut());
        combine(&mut tmp, y, 0.5 * h, &k2);
        f(z + 0.5 * h, tmp.as_ref(), k3.as_mut());
        combine(&mut tmp, y, h, &k3);
        f(z + h, tmp.as_ref(), k4.as_mut());
        let w = h / 6.0;
        for j in 0..c {
            let yj = y.col_as_slice_mut(j);
            let (a, b, cc, d) = (
                k1.col_as_slice(j),
                k2.col_as_slice(j),
                k3.col_as_slice(j),
                k4.col_as_slice(j),
            );
            for i in 0..r {
                yj[i] += (a[i] + (b[i] + cc[i]) * 2.0 + d[i]) * w;
            }
        }
        post(y);
    }
}
