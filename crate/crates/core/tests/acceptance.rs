//! Acceptance suite. Runs as a plain binary (`harness = false`) so that the
//! per-criterion verdicts are always printed; exits non-zero if any fails.
//!
//! `cargo test -p lossy-pdc --test acceptance`; the N = 511 runs dominate
//! the runtime.

mod common;

use std::time::Instant;

use lossy_pdc::bases::{self, euler, williamson, BasisReport};
use lossy_pdc::continuous::{self, EnvironmentSpec, InputState};
use lossy_pdc::coupling::Coupling;
use lossy_pdc::dispersion::{default_half_width, FrequencyGrid, LossProfile, OpticalModel, PumpSpec};
use lossy_pdc::gaussian::{
    cluster_overlaps, covariance_from_correlations, mode_count, orthosymplectic, overlap, purity,
    transform_correlations, transform_covariance, BasisKind, CorrelationPair, CovarianceMatrix, ModeBasis,
};
use lossy_pdc::linalg;
use lossy_pdc::lossless::{self, calibrate_gamma, vacuum_correlations, CalibrationOptions};
use lossy_pdc::scenario::{self, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LENGTH: f64 = 1e4;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn verdict(id: usize, pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        id,
        pass,
        detail: detail.into(),
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Model at exact degenerate phase matching. The stock angle leaves a
/// residual mismatch of about −6.6 rad over the crystal, which splits the
/// joint spectrum into two lobes; the reference numbers assume a matched,
/// single-lobed spectrum.
fn matched_model(pump: &PumpSpec) -> OpticalModel {
    let mut m = OpticalModel::default();
    m.theta = m.degenerate_phase_matching_angle(pump.wavelength).unwrap();
    m
}

fn setup(model: &OpticalModel, pump: &PumpSpec, n: usize) -> (FrequencyGrid, Coupling) {
    let hw = default_half_width(model, pump, LENGTH).unwrap();
    let grid = FrequencyGrid::degenerate(pump, model, hw, n).unwrap();
    let coupling = Coupling::new(&grid, pump, model).unwrap();
    (grid, coupling)
}

fn best_dp2(r: &BasisReport) -> f64 {
    r.quadratures.iter().map(|q| q.dp2_db).fold(f64::INFINITY, f64::min)
}

/// Criteria 1 to 3 share one calibration at N = 511.
fn lossless_and_example_one() -> Vec<Verdict> {
    let pump = PumpSpec::default();
    let model = matched_model(&pump);
    let (n, steps) = (511, 1000);
    let (grid, coupling) = setup(&model, &pump, n);
    let start = Instant::now();
    let cal = calibrate_gamma(14.0, &coupling, LENGTH, steps, CalibrationOptions::default()).unwrap();
    let vac = vacuum_correlations(&cal.pair);
    let schmidt = lossless::bloch_messiah(&cal.pair).unwrap().basis();
    let rep = bases::basis_report(&vac, &schmidt, 3).unwrap();
    let t1 = start.elapsed().as_secs_f64();
    let analytic = 10.0 * ((15f64.sqrt() - 14f64.sqrt()).powi(2)).log10();
    let dp1 = rep.quadratures[0].dp2_db;
    let theta = format!("theta = {:.5}pi (matched)", model.theta / std::f64::consts::PI);
    let mut out = vec![verdict(
        1,
        within(dp1, -17.6, 0.1) && t1 <= 600.0,
        format!(
            "first Schmidt mode {dp1:.3} dB (analytic {analytic:.3}, target -17.6 +- 0.1), N1 = {:.4}, Gamma = {:.5e}, {t1:.0} s; {theta}",
            cal.n1, cal.gamma
        ),
    )];
    let k = rep.k.unwrap();
    out.push(verdict(
        2,
        within(k, 3.68, 0.2),
        format!("K_S = {k:.3} (target 3.68 +- 0.2), N = {n}, half-width {:.4} rad/fs; {theta}", grid.half_width),
    ));

    let loss = LossProfile::constant(3.0, &grid).unwrap();
    let corr = continuous::integrate_master(
        cal.gamma,
        &coupling,
        &loss.alpha,
        &InputState::vacuum(n),
        &EnvironmentSpec::vacuum(n),
        LENGTH,
        steps,
    )
    .unwrap();
    let sigma = covariance_from_correlations(&corr).unwrap();
    let kinds = [
        (bases::mercer_wolf(&corr).unwrap(), -7.7, 3.89, [0.41, 0.20, 0.11]),
        (bases::williamson_euler_basis(&sigma).unwrap(), -7.9, 3.94, [0.42, 0.21, 0.12]),
        (bases::msq_basis(&sigma).unwrap(), -8.2, 4.70, [0.49, 0.25, 0.14]),
    ];
    let mut ok = true;
    let mut rows = Vec::new();
    for (b, sq, kt, pt) in &kinds {
        let r = bases::basis_report(&corr, b, 3).unwrap();
        let dp = r.quadratures[0].dp2_db;
        let k = r.k.unwrap();
        ok &= within(dp, *sq, 0.3) && within(k, *kt, 0.2);
        ok &= r.purities.iter().zip(pt).all(|(p, t)| within(*p, *t, 0.04));
        rows.push(format!(
            "{} {dp:.2} dB K {k:.2} P {:.3}/{:.3}/{:.3}",
            b.kind.name(),
            r.purities[0],
            r.purities[1],
            r.purities[2]
        ));
    }
    out.push(verdict(3, ok, format!("{}; {theta}", rows.join("; "))));
    out
}

/// The stock crystal angle, reported for reference only.
fn stock_angle_note() -> String {
    let pump = PumpSpec::default();
    let model = OpticalModel::default();
    let (_, coupling) = setup(&model, &pump, 127);
    let cal = calibrate_gamma(14.0, &coupling, LENGTH, 500, CalibrationOptions::default()).unwrap();
    let rep = bases::basis_report(
        &vacuum_correlations(&cal.pair),
        &lossless::bloch_messiah(&cal.pair).unwrap().basis(),
        1,
    )
    .unwrap();
    format!(
        "note: at the stock angle 0.1107pi (N = 127) K_S = {:.2}, first Schmidt mode {:.2} dB",
        rep.k.unwrap(),
        rep.quadratures[0].dp2_db
    )
}

fn asymmetric_loss() -> Verdict {
    let pump = PumpSpec::default();
    let model = matched_model(&pump);
    let (n, steps) = (127, 500);
    let (grid, coupling) = setup(&model, &pump, n);
    let cal = calibrate_gamma(14.0, &coupling, LENGTH, steps, CalibrationOptions::default()).unwrap();
    // absorption rising steeply on the high-frequency side
    let c = grid.center;
    let pts = [(c - 0.5, 0.5), (c, 1.0), (c + 0.1, 6.0), (c + 0.5, 9.0)];
    let loss = LossProfile::tabulated(&pts, &grid).unwrap();
    let corr = continuous::integrate_master(
        cal.gamma,
        &coupling,
        &loss.alpha,
        &InputState::vacuum(n),
        &EnvironmentSpec::vacuum(n),
        LENGTH,
        steps,
    )
    .unwrap();
    let sigma = covariance_from_correlations(&corr).unwrap();
    let mw = bases::basis_report(&corr, &bases::mercer_wolf(&corr).unwrap(), 1).unwrap();
    let we = bases::basis_report(&corr, &bases::williamson_euler_basis(&sigma).unwrap(), 1).unwrap();
    let msq = bases::basis_report(&corr, &bases::msq_basis(&sigma).unwrap(), 1).unwrap();
    let min_eig = linalg::symmetric_eigenvalues(sigma.sigma.as_ref()).unwrap()[0];
    let a = (msq.quadratures[0].dp2 - min_eig).abs();
    let (s_msq, s_we, s_mw) = (msq.quadratures[0].dp2_db, we.quadratures[0].dp2_db, best_dp2(&mw));
    let b = s_msq <= s_we && s_we <= s_mw;
    let (k_mw, k_we, k_msq) = (mw.k.unwrap(), we.k.unwrap(), msq.k.unwrap());
    let c_ok = k_mw <= k_we && k_we <= k_msq;
    verdict(
        4,
        a <= 1e-9 && b && c_ok,
        format!(
            "(a) |dP2_MSq - min eig| = {a:.1e}; (b) {s_msq:.3} <= {s_we:.3} <= {s_mw:.3} dB; (c) K {k_mw:.3} <= {k_we:.3} <= {k_msq:.3}"
        ),
    )
}

fn single_mode_grid() -> Verdict {
    let coupling = continuous::single_mode_coupling();
    let mut worst: f64 = 0.0;
    for gl in [0.5, 1.0, 2.0] {
        for al in [0.0, 0.35, 0.69] {
            let (g, a) = (gl / LENGTH, al / LENGTH);
            let c = continuous::integrate_master(
                g,
                &coupling,
                &[a],
                &InputState::vacuum(1),
                &EnvironmentSpec::vacuum(1),
                LENGTH,
                2000,
            )
            .unwrap();
            let vp = 1.0 + 2.0 * c.c1[(0, 0)].re - 2.0 * c.c2[(0, 0)].norm();
            let o = continuous::single_mode_oracle(g, a, LENGTH);
            worst = worst.max(((vp - o) / o).abs());
        }
    }
    verdict(5, worst <= 1e-6, format!("max relative deviation from V_p(L) over 3x3 grid {worst:.2e}"))
}

fn pure_loss() -> Verdict {
    let n = 7;
    let coupling = Coupling::from_parts(
        (0..n).map(|i| 0.3 * i as f64).collect(),
        vec![1.0; 2 * n - 1],
        vec![0.0; 2 * n - 1],
    )
    .unwrap();
    let alpha: Vec<f64> = (0..n).map(|i| (0.1 + 0.12 * i as f64) / LENGTH).collect();
    let nbar: Vec<f64> = (0..n).map(|i| 0.5 + 0.3 * i as f64).collect();
    let decay = continuous::integrate_master(
        0.0,
        &coupling,
        &alpha,
        &InputState::thermal(nbar.clone()).unwrap(),
        &EnvironmentSpec::vacuum(n),
        LENGTH,
        400,
    )
    .unwrap();
    let heat = continuous::integrate_master(
        0.0,
        &coupling,
        &alpha,
        &InputState::vacuum(n),
        &EnvironmentSpec::thermal(nbar.clone()).unwrap(),
        LENGTH,
        400,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let t = (-alpha[i] * LENGTH).exp();
        worst = worst.max((decay.c1[(i, i)].re / (nbar[i] * t) - 1.0).abs());
        worst = worst.max((heat.c1[(i, i)].re / (nbar[i] * (1.0 - t)) - 1.0).abs());
    }
    let stray = linalg::max_abs(decay.c2.as_ref()).max(linalg::max_abs(heat.c2.as_ref()));
    verdict(
        6,
        worst <= 1e-8 && stray <= 1e-12,
        format!("decay and thermalization max relative error {worst:.2e}, |C2| {stray:.1e}"),
    )
}

fn discrete_vs_continuous() -> Verdict {
    let text = r#"
        [grid]
        n = 63
        [medium]
        theta = "degenerate"
        [gain]
        target_n1 = 4.0
        [loss]
        kind = "constant"
        db_per_cm = 3.0
        [solver]
        steps = 1024
    "#;
    let sc = Scenario::from_toml(text).unwrap();
    let start = Instant::now();
    let ms = [4, 8, 16, 32, 64];
    let rep = scenario::convergence_study(&sc, &ms, &[]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let errs: Vec<f64> = rep.rows.iter().map(|r| r.error).collect();
    let ratios: Vec<f64> = rep.rows.iter().filter_map(|r| r.ratio).collect();
    let ok = ratios.iter().all(|r| (1.5..=2.5).contains(r)) && secs <= 300.0;
    let e: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    let r: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    verdict(
        7,
        ok,
        format!("errors [{}] ratios [{}], {secs:.0} s", e.join(", "), r.join(", ")),
    )
}

fn k_of(corr: &CorrelationPair, b: &ModeBasis) -> f64 {
    let t = transform_correlations(corr, b).unwrap();
    let photons: Vec<f64> = (0..corr.n()).map(|i| t.c1[(i, i)].re).collect();
    mode_count(&photons).unwrap()
}

#[derive(Default)]
struct Worst {
    symplectic: f64,
    reconstruction: f64,
    purity: f64,
    coincide: f64,
    physical: f64,
    k_violations: usize,
}

fn check_mixed(corr: &CorrelationPair, rng: &mut ChaCha8Rng, w: &mut Worst) {
    let sigma: CovarianceMatrix = covariance_from_correlations(corr).unwrap();
    w.physical = w.physical.min(sigma.physicality_margin().unwrap());
    let wd = williamson(&sigma).unwrap();
    w.symplectic = w.symplectic.max(wd.symplectic_residual());
    w.reconstruction = w.reconstruction.max(wd.reconstruction_residual(&sigma));
    let ef = euler(&wd.s).unwrap();
    w.reconstruction = w.reconstruction.max(ef.reconstruction_residual(&wd.s));
    let p0 = purity(&sigma).unwrap();
    let mw = bases::mercer_wolf(corr).unwrap();
    let list = [
        mw.clone(),
        bases::williamson_euler_basis(&sigma).unwrap(),
        bases::msq_basis(&sigma).unwrap(),
    ];
    for b in &list {
        let p = purity(&transform_covariance(&sigma, orthosymplectic(b.u.as_ref()).as_ref())).unwrap();
        w.purity = w.purity.max((p / p0 - 1.0).abs());
    }
    let k_mw = k_of(corr, &mw);
    for _ in 0..20 {
        let u = common::random_unitary(corr.n(), 2.0, rng);
        let b = ModeBasis::new(u, BasisKind::Custom).unwrap();
        if k_of(corr, &b) < k_mw * (1.0 - 1e-9) {
            w.k_violations += 1;
        }
    }
}

fn invariant_suites() -> Verdict {
    let pump = PumpSpec::default();
    let model = matched_model(&pump);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut w = Worst::default();
    for n in [7, 31, 63] {
        let (grid, coupling) = setup(&model, &pump, n);
        let cal = calibrate_gamma(4.0, &coupling, LENGTH, 400, CalibrationOptions::default()).unwrap();
        let pair = &cal.pair;
        w.symplectic = w.symplectic.max(pair.commutator_residual()).max(pair.symmetry_residual());
        let bm = lossless::bloch_messiah(pair).unwrap();
        w.reconstruction = w.reconstruction.max(bm.reconstruction_residual(pair));

        // pure state: every basis matches the Schmidt modes
        let vac = vacuum_correlations(pair);
        let sigma = covariance_from_correlations(&vac).unwrap();
        let schmidt = bm.basis();
        let photons = bases::basis_report(&vac, &schmidt, 0).unwrap().photons;
        let others = [
            bases::mercer_wolf(&vac).unwrap(),
            bases::williamson_euler_basis(&sigma).unwrap(),
            bases::msq_basis(&sigma).unwrap(),
        ];
        for b in &others {
            let chi = overlap(&schmidt, b).unwrap();
            for x in cluster_overlaps(&chi, &photons, 1e-6) {
                w.coincide = w.coincide.max((x - 1.0).abs());
            }
        }
        check_mixed(&vac, &mut rng, &mut w);

        // lossy pipeline state with an uneven profile
        let c = grid.center;
        let loss = LossProfile::tabulated(&[(c - 0.4, 4.0), (c + 0.4, 0.5)], &grid).unwrap();
        let lossy = continuous::integrate_master(
            cal.gamma,
            &coupling,
            &loss.alpha,
            &InputState::vacuum(n),
            &EnvironmentSpec::vacuum(n),
            LENGTH,
            400,
        )
        .unwrap();
        check_mixed(&lossy, &mut rng, &mut w);

        for _ in 0..4 {
            let s = common::random_state(n, 1.2, &mut rng);
            check_mixed(&s, &mut rng, &mut w);
        }
    }
    let pass = w.symplectic < 1e-6
        && w.reconstruction < 1e-8
        && w.k_violations == 0
        && w.coincide < 1e-6
        && w.purity < 1e-9
        && w.physical >= -1e-8;
    verdict(
        8,
        pass,
        format!(
            "symplectic/commutator {:.1e}, reconstruction {:.1e}, K violations {}, pure-overlap defect {:.1e}, purity drift {:.1e}, min eig(sigma + i Omega) {:.1e}",
            w.symplectic, w.reconstruction, w.k_violations, w.coincide, w.purity, w.physical
        ),
    )
}

fn main() {
    let start = Instant::now();
    // one after another, so that the runtime targets are measured cleanly
    let mut verdicts = lossless_and_example_one();
    verdicts.push(asymmetric_loss());
    verdicts.push(single_mode_grid());
    verdicts.push(pure_loss());
    verdicts.push(discrete_vs_continuous());
    verdicts.push(invariant_suites());
    let note = stock_angle_note();
    verdicts.sort_by_key(|v| v.id);
    for v in &verdicts {
        println!("criterion {}: {} - {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{note}");
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {} of {} passed in {:.0} s", verdicts.len() - failed, verdicts.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
