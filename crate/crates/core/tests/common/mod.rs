#![allow(dead_code)]

use faer::Mat;
use lossy_pdc::discrete::{correlations_from_partial, PartialBogoliubov};
use lossy_pdc::gaussian::{BasisTag, CorrelationPair};
use lossy_pdc::linalg::{self, CMat};
use num_complex::Complex64 as c64;
use rand::Rng;

/// exp(iH) for a random Hermitian H with entries of order `spread`.
pub fn random_unitary<R: Rng>(n: usize, spread: f64, rng: &mut R) -> CMat {
    let a = Mat::from_fn(n, n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * spread);
    let h = &a + a.adjoint();
    let (vals, vecs) = linalg::hermitian_eigen_desc(h.as_ref()).unwrap();
    let d = Mat::from_fn(n, n, |i, j| if i == j { linalg::cis(vals[i]) } else { c64::from(0.0) });
    &vecs * d * vecs.adjoint()
}

/// A random mixed Gaussian state: a multimode squeezer acting on thermal
/// input, followed by per-mode loss and a passive mixer.
pub fn random_state<R: Rng>(n: usize, max_r: f64, rng: &mut R) -> CorrelationPair {
    let u = random_unitary(n, 1.0, rng);
    let w = random_unitary(n, 1.0, rng);
    let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..max_r)).collect();
    let ch = Mat::from_fn(n, n, |i, j| if i == j { c64::from(r[i].cosh()) } else { c64::from(0.0) });
    let sh = Mat::from_fn(n, n, |i, j| if i == j { c64::from(r[i].sinh()) } else { c64::from(0.0) });
    let e = &u * &ch * &w;
    let f = &u * &sh * linalg::conj(w.as_ref());
    let nbar: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.3)).collect();
    let partial = PartialBogoliubov { e: vec![e], f: vec![f] };
    let c = correlations_from_partial(&partial, &nbar, &vec![0.0; n]).unwrap();
    // loss then mixing: a ↦ V T a, so C1 ↦ V̄ T C1 T Vᵀ and C2 ↦ V T C2 T Vᵀ
    let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.0)).collect();
    let v = random_unitary(n, 1.0, rng);
    let c1 = Mat::from_fn(n, n, |i, j| c.c1[(i, j)] * t[i] * t[j]);
    let c2 = Mat::from_fn(n, n, |i, j| c.c2[(i, j)] * t[i] * t[j]);
    let mut c1 = linalg::conj(v.as_ref()) * c1 * v.as_ref().transpose();
    let mut c2 = &v * c2 * v.as_ref().transpose();
    linalg::hermitize(&mut c1);
    linalg::symmetrize(&mut c2);
    CorrelationPair::new(c1, c2, BasisTag::Monochromatic).unwrap()
}
