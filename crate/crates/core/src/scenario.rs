//! Scenario configuration and the end-to-end pipeline.
//!
//! A scenario is a TOML document. Unknown keys are rejected everywhere.
//!
//! ```toml
//! [grid]
//! n = 127
//! half_width = "default"      # or rad/fs
//! # center = 1.1775           # rad/fs, defaults to half the pump frequency
//!
//! [medium]
//! length = 1e4                # μm
//! theta = "degenerate"        # radians, "default" or "degenerate"
//!
//! [pump]
//! wavelength = 0.8            # μm
//! fwhm = 50.0                 # fs, intensity
//!
//! [gain]
//! target_n1 = 14.0            # or: gamma = 6.6e-6
//!
//! [loss]
//! kind = "constant"           # none | constant | tabulated
//! db_per_cm = 3.0
//!
//! [solver]
//! model = "continuous"        # lossless | discrete | continuous
//! steps = 1000
//!
//! [analyses]
//! bases = ["mercer_wolf", "williamson_euler", "msq"]
//! purity_depth = 3
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bases::{self, BasisReport};
use crate::continuous::{self, EnvironmentSpec, InputState};
use crate::coupling::Coupling;
use crate::discrete::{self, PartialBogoliubov};
use crate::dispersion::{self, FrequencyGrid, LossProfile, OpticalModel, PumpSpec, Sellmeier};
use crate::gaussian::{self, BasisKind, CorrelationPair, ModeBasis};
use crate::linalg::CMat;
use crate::lossless::{self, BogoliubovPair, CalibrationOptions};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridConfig,
    #[serde(default)]
    pub medium: MediumConfig,
    #[serde(default)]
    pub pump: PumpSpec,
    pub gain: GainConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub input: StateConfig,
    #[serde(default)]
    pub environment: StateConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analyses: AnalysesConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

/// A number, or a keyword selecting a derived value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Auto {
    Value(f64),
    Keyword(String),
}

impl Default for Auto {
    fn default() -> Self {
        Auto::Keyword("default".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default)]
    pub half_width: Auto,
    #[serde(default)]
    pub center: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    /// μm.
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default)]
    pub theta: Auto,
    #[serde(default)]
    pub ordinary: Option<Sellmeier>,
    #[serde(default)]
    pub eta: Option<Sellmeier>,
}

fn default_length() -> f64 {
    1e4
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            length: default_length(),
            theta: Auto::default(),
            ordinary: None,
            eta: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    pub gamma: Option<f64>,
    pub target_n1: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossModel {
    #[default]
    None,
    Constant,
    Tabulated,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default)]
    pub kind: LossModel,
    pub db_per_cm: Option<f64>,
    /// `[ω in rad/fs, dB/cm]` pairs.
    pub points: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateModel {
    #[default]
    Vacuum,
    Thermal,
}

/// Input or environment state: vacuum, or thermal with a uniform occupation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default)]
    pub kind: StateModel,
    #[serde(default)]
    pub nbar: f64,
}

impl StateConfig {
    fn occupations(&self, n: usize) -> Vec<f64> {
        match self.kind {
            StateModel::Vacuum => vec![0.0; n],
            StateModel::Thermal => vec![self.nbar; n],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverModel {
    Lossless,
    Discrete,
    #[default]
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub model: SolverModel,
    /// RK4 steps over the whole crystal.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Number of beamsplitter segments for the discrete model.
    #[serde(default)]
    pub segments: Option<usize>,
}

fn default_steps() -> usize {
    1000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            model: SolverModel::default(),
            steps: default_steps(),
            segments: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysesConfig {
    #[serde(default = "default_bases")]
    pub bases: Vec<BasisKind>,
    #[serde(default = "default_purity_depth")]
    pub purity_depth: usize,
}

fn default_bases() -> Vec<BasisKind> {
    vec![BasisKind::MercerWolf, BasisKind::WilliamsonEuler, BasisKind::Msq]
}

fn default_purity_depth() -> usize {
    3
}

impl Default for AnalysesConfig {
    fn default() -> Self {
        AnalysesConfig {
            bases: default_bases(),
            purity_depth: default_purity_depth(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_segment_list")]
    pub segments: Vec<usize>,
    #[serde(default = "default_step_list")]
    pub steps: Vec<usize>,
}

fn default_segment_list() -> Vec<usize> {
    vec![4, 8, 16, 32, 64]
}

fn default_step_list() -> Vec<usize> {
    vec![128, 256, 512]
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            segments: default_segment_list(),
            steps: default_step_list(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text` after applying dotted `key=value` overrides; values are
    /// read as TOML and fall back to plain strings.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let sc: Scenario = table.try_into().map_err(|e| Error::Config(format!("{e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.grid.n == 0 {
            return cfg("grid.n must be positive".into());
        }
        match (&self.gain.gamma, &self.gain.target_n1) {
            (Some(g), None) if *g >= 0.0 && g.is_finite() => {}
            (None, Some(t)) if *t > 0.0 && t.is_finite() => {}
            (Some(_), Some(_)) | (None, None) => return cfg("gain needs exactly one of `gamma` and `target_n1`".into()),
            _ => return cfg("gain must be non-negative (target_n1 positive)".into()),
        }
        if !(self.medium.length > 0.0) {
            return cfg(format!("medium.length must be positive, got {}", self.medium.length));
        }
        for (name, a) in [("grid.half_width", &self.grid.half_width), ("medium.theta", &self.medium.theta)] {
            if let Auto::Keyword(k) = a {
                let ok = k == "default" || (name == "medium.theta" && k == "degenerate");
                if !ok {
                    return cfg(format!("unknown keyword `{k}` for {name}"));
                }
            }
        }
        match self.loss.kind {
            LossModel::None if self.loss.db_per_cm.is_some() || self.loss.points.is_some() => {
                return cfg("loss.kind = \"none\" takes no parameters".into());
            }
            LossModel::Constant if self.loss.db_per_cm.is_none() || self.loss.points.is_some() => {
                return cfg("constant loss needs `db_per_cm` only".into());
            }
            LossModel::Tabulated if self.loss.points.is_none() || self.loss.db_per_cm.is_some() => {
                return cfg("tabulated loss needs `points` only".into());
            }
            _ => {}
        }
        for (name, s) in [("input", &self.input), ("environment", &self.environment)] {
            if !(s.nbar >= 0.0) || (s.kind == StateModel::Vacuum && s.nbar != 0.0) {
                return cfg(format!("{name}.nbar must be non-negative and zero for vacuum"));
            }
        }
        if self.solver.steps == 0 {
            return cfg("solver.steps must be positive".into());
        }
        match (self.solver.model, self.solver.segments) {
            (SolverModel::Discrete, Some(m)) if m > 0 => {}
            (SolverModel::Discrete, _) => return cfg("discrete solver needs a positive `segments`".into()),
            (_, Some(_)) => return cfg("`segments` applies to the discrete solver only".into()),
            _ => {}
        }
        if self.solver.model == SolverModel::Lossless && self.loss.kind != LossModel::None {
            return cfg("lossless solver cannot take a loss profile".into());
        }
        if self.analyses.bases.contains(&BasisKind::Custom) {
            return cfg("`custom` is not an analysis basis".into());
        }
        let distinct: std::collections::HashSet<_> = self.analyses.bases.iter().collect();
        if distinct.len() != self.analyses.bases.len() {
            return cfg("analyses.bases contains duplicates".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model(&self) -> Result<OpticalModel> {
        let mut m = OpticalModel::default();
        if let Some(o) = self.medium.ordinary {
            m.ordinary = o;
        }
        if let Some(e) = self.medium.eta {
            m.eta = e;
        }
        match &self.medium.theta {
            Auto::Value(t) => m.theta = *t,
            Auto::Keyword(k) if k == "degenerate" => m.theta = m.degenerate_phase_matching_angle(self.pump.wavelength)?,
            Auto::Keyword(_) => {}
        }
        Ok(m)
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut cur = table;
    for p in &path[..path.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}` descends into a non-table")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

/// Grid, coupling and loss built from a scenario.
#[derive(Debug)]
pub struct Setup {
    pub model: OpticalModel,
    pub grid: FrequencyGrid,
    pub coupling: Coupling,
    pub loss: LossProfile,
}

pub fn setup(sc: &Scenario) -> Result<Setup> {
    let model = sc.model()?;
    sc.pump.validate()?;
    let half_width = match sc.grid.half_width {
        Auto::Value(h) => h,
        Auto::Keyword(_) if sc.grid.n == 1 => 0.0,
        Auto::Keyword(_) => dispersion::default_half_width(&model, &sc.pump, sc.medium.length)?,
    };
    let center = sc.grid.center.unwrap_or(0.5 * sc.pump.central_frequency(&model));
    let grid = FrequencyGrid::new(center, half_width, sc.grid.n)?;
    let coupling = Coupling::new(&grid, &sc.pump, &model)?;
    let loss = match sc.loss.kind {
        LossModel::None => LossProfile::none(grid.len()),
        LossModel::Constant => LossProfile::constant(sc.loss.db_per_cm.unwrap_or(0.0), &grid)?,
        LossModel::Tabulated => {
            let pts: Vec<(f64, f64)> = sc.loss.points.iter().flatten().map(|p| (p[0], p[1])).collect();
            LossProfile::tabulated(&pts, &grid)?
        }
    };
    Ok(Setup {
        model,
        grid,
        coupling,
        loss,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub gamma: f64,
    pub target_n1: Option<f64>,
    /// First Schmidt-mode photon number of the lossless crystal at `gamma`.
    pub n1: f64,
    pub iterations: usize,
}

/// Resolves Γ, returning the lossless transformation at that gain.
pub fn calibrate(sc: &Scenario, st: &Setup) -> Result<(CalibrationReport, BogoliubovPair)> {
    let (len, steps) = (sc.medium.length, sc.solver.steps);
    match (sc.gain.gamma, sc.gain.target_n1) {
        (Some(gamma), _) => {
            let pair = lossless::integrate_bogoliubov(gamma, &st.coupling, len, steps)?;
            let n1 = lossless::first_mode_photons(&pair)?;
            let rep = CalibrationReport {
                gamma,
                target_n1: None,
                n1,
                iterations: 0,
            };
            Ok((rep, pair))
        }
        (None, Some(target)) => {
            let cal = lossless::calibrate_gamma(target, &st.coupling, len, steps, CalibrationOptions::default())?;
            let rep = CalibrationReport {
                gamma: cal.gamma,
                target_n1: Some(target),
                n1: cal.n1,
                iterations: cal.iterations,
            };
            Ok((rep, cal.pair))
        }
        (None, None) => Err(Error::Config("gain is unspecified".into())),
    }
}

/// Per-frequency table in the monochromatic basis.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    /// rad/fs.
    pub omega: Vec<f64>,
    /// μm.
    pub wavelength: Vec<f64>,
    /// 1/μm.
    pub alpha: Vec<f64>,
    /// ⟨a†a⟩ per grid point.
    pub photons: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Overlap {
    pub a: BasisKind,
    pub b: BasisKind,
    /// |χ| with rows indexed by modes of `a`.
    pub abs: Vec<Vec<f64>>,
    /// ‖|χ| − I‖_F.
    pub distance_from_identity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub solver: SolverModel,
    pub steps: usize,
    pub segments: Option<usize>,
    pub theta: f64,
    pub half_width: f64,
    /// Wall-clock time; kept out of `report.json` so that numeric outputs
    /// are reproducible byte for byte.
    #[serde(skip)]
    pub runtime_s: f64,
    pub version: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub calibration: CalibrationReport,
    pub spectrum: Spectrum,
    pub bases: Vec<BasisReport>,
    pub overlaps: Vec<Overlap>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub correlations: CorrelationPair,
    #[serde(skip)]
    pub mode_bases: Vec<ModeBasis>,
}

impl RunReport {
    pub fn basis(&self, kind: BasisKind) -> Option<&BasisReport> {
        self.bases.iter().find(|b| b.kind == kind)
    }
}

/// Output correlations of the configured solver.
pub fn propagate(sc: &Scenario, st: &Setup, gamma: f64, lossless_pair: &BogoliubovPair) -> Result<CorrelationPair> {
    let n = st.grid.len();
    let input = sc.input.occupations(n);
    let env = sc.environment.occupations(n);
    let model = match sc.solver.model {
        // without loss the beamsplitters are transparent
        SolverModel::Discrete if st.loss.is_lossless() => SolverModel::Lossless,
        m => m,
    };
    match model {
        SolverModel::Lossless => {
            let partial = PartialBogoliubov {
                e: vec![lossless_pair.e.clone()],
                f: vec![lossless_pair.f.clone()],
            };
            discrete::correlations_from_partial(&partial, &input, &env)
        }
        SolverModel::Discrete => {
            let m = sc.solver.segments.unwrap_or(1);
            let per = sc.solver.steps.div_ceil(m);
            let chain = discrete::build_chain(gamma, &st.coupling, &st.loss.alpha, sc.medium.length, m, per)?;
            let partial = discrete::assemble_partial(&chain)?;
            discrete::correlations_from_partial(&partial, &input, &env)
        }
        SolverModel::Continuous => {
            let input = match sc.input.kind {
                StateModel::Vacuum => InputState::vacuum(n),
                StateModel::Thermal => InputState::thermal(input)?,
            };
            let env = match sc.environment.kind {
                StateModel::Vacuum => EnvironmentSpec::vacuum(n),
                StateModel::Thermal => EnvironmentSpec::thermal(env)?,
            };
            continuous::integrate_master(gamma, &st.coupling, &st.loss.alpha, &input, &env, sc.medium.length, sc.solver.steps)
        }
    }
}

/// Mode basis of the requested kind. The Schmidt basis is that of the
/// lossless crystal at the same gain.
pub fn build_basis(kind: BasisKind, corr: &CorrelationPair, lossless_pair: &BogoliubovPair) -> Result<ModeBasis> {
    match kind {
        BasisKind::Schmidt => Ok(lossless::bloch_messiah(lossless_pair)?.basis()),
        BasisKind::MercerWolf => bases::mercer_wolf(corr),
        BasisKind::WilliamsonEuler => bases::williamson_euler_basis(&gaussian::covariance_from_correlations(corr)?),
        BasisKind::Msq => bases::msq_basis(&gaussian::covariance_from_correlations(corr)?),
        BasisKind::Custom => Err(Error::Config("`custom` is not an analysis basis".into())),
    }
}

fn overlap_entry(a: &ModeBasis, b: &ModeBasis) -> Result<Overlap> {
    let chi: CMat = gaussian::overlap(a, b)?;
    let n = a.n();
    let abs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| chi[(i, j)].norm()).collect()).collect();
    let mut d2 = 0.0;
    for (i, row) in abs.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let id = if i == j { 1.0 } else { 0.0 };
            d2 += (v - id) * (v - id);
        }
    }
    Ok(Overlap {
        a: a.kind,
        b: b.kind,
        abs,
        distance_from_identity: d2.sqrt(),
    })
}

/// Calibrate, propagate, decompose and report. Errors carry the stage name.
pub fn run_scenario(sc: &Scenario) -> Result<RunReport> {
    let start = Instant::now();
    sc.validate().map_err(|e| e.in_stage("config"))?;
    let st = setup(sc).map_err(|e| e.in_stage("setup"))?;
    let (calibration, pair) = calibrate(sc, &st).map_err(|e| e.in_stage("calibrate"))?;
    let corr = propagate(sc, &st, calibration.gamma, &pair).map_err(|e| e.in_stage("propagate"))?;
    corr.validate().map_err(|e| e.in_stage("correlations"))?;
    let mut mode_bases = Vec::new();
    let mut reports = Vec::new();
    for &kind in &sc.analyses.bases {
        let b = build_basis(kind, &corr, &pair).map_err(|e| e.in_stage("bases"))?;
        reports.push(bases::basis_report(&corr, &b, sc.analyses.purity_depth).map_err(|e| e.in_stage("report"))?);
        mode_bases.push(b);
    }
    let mut overlaps = Vec::new();
    for i in 0..mode_bases.len() {
        for j in i + 1..mode_bases.len() {
            overlaps.push(overlap_entry(&mode_bases[i], &mode_bases[j]).map_err(|e| e.in_stage("report"))?);
        }
    }
    let spectrum = Spectrum {
        omega: st.grid.omegas.clone(),
        wavelength: st.grid.omegas.iter().map(|&w| st.model.wavelength(w)).collect(),
        alpha: st.loss.alpha.clone(),
        photons: corr.photon_numbers(),
    };
    Ok(RunReport {
        calibration,
        spectrum,
        bases: reports,
        overlaps,
        provenance: Provenance {
            config_hash: sc.hash(),
            solver: sc.solver.model,
            steps: sc.solver.steps,
            segments: sc.solver.segments,
            theta: st.model.theta,
            half_width: st.grid.half_width,
            runtime_s: start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION"),
        },
        correlations: corr,
        mode_bases,
    })
}

/// [`run_scenario`] for at least two bases.
pub fn compare_bases(sc: &Scenario) -> Result<RunReport> {
    if sc.analyses.bases.len() < 2 {
        return Err(Error::Config("basis comparison needs at least two bases".into()).in_stage("config"));
    }
    run_scenario(sc)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    /// "segments" or "steps".
    pub parameter: &'static str,
    pub value: usize,
    /// Max-abs correlation difference to the reference.
    pub error: f64,
    /// Error of the previous row divided by this one.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub gamma: f64,
    pub reference_steps: usize,
    pub rows: Vec<ConvergenceRow>,
    pub config_hash: String,
}

fn with_ratios(parameter: &'static str, values: &[usize], errors: Vec<f64>) -> Vec<ConvergenceRow> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (k, (&value, error)) in values.iter().zip(errors).enumerate() {
        let ratio = if k > 0 { Some(rows[k - 1].error / error) } else { None };
        rows.push(ConvergenceRow {
            parameter,
            value,
            error,
            ratio,
        });
    }
    rows
}

/// Discrete chains with each `M` against the continuous solution at
/// `solver.steps`, then RK4 self-convergence: for each `s` the difference
/// between `s` and `2s` steps.
pub fn convergence_study(sc: &Scenario, segments: &[usize], steps: &[usize]) -> Result<ConvergenceReport> {
    sc.validate().map_err(|e| e.in_stage("config"))?;
    if sc.loss.kind == LossModel::None {
        return Err(Error::Config("convergence study needs a loss profile".into()).in_stage("config"));
    }
    if segments.contains(&0) || steps.contains(&0) {
        return Err(Error::Config("segment and step counts must be positive".into()).in_stage("config"));
    }
    let st = setup(sc).map_err(|e| e.in_stage("setup"))?;
    let (calibration, pair) = calibrate(sc, &st).map_err(|e| e.in_stage("calibrate"))?;
    let gamma = calibration.gamma;
    let run = |model: SolverModel, steps: usize, m: Option<usize>| -> Result<CorrelationPair> {
        let mut s = sc.clone();
        s.solver = SolverConfig {
            model,
            steps,
            segments: m,
        };
        propagate(&s, &st, gamma, &pair)
    };
    let coarse = |steps: usize| -> Result<CorrelationPair> {
        let n = st.grid.len();
        let input = match sc.input.kind {
            StateModel::Vacuum => InputState::vacuum(n),
            StateModel::Thermal => InputState::thermal(sc.input.occupations(n))?,
        };
        let env = match sc.environment.kind {
            StateModel::Vacuum => EnvironmentSpec::vacuum(n),
            StateModel::Thermal => EnvironmentSpec::thermal(sc.environment.occupations(n))?,
        };
        let run = continuous::integrate_master_traced(gamma, &st.coupling, &st.loss.alpha, &input, &env, sc.medium.length, steps)?;
        Ok(run.corr)
    };
    let reference = run(SolverModel::Continuous, sc.solver.steps, None).map_err(|e| e.in_stage("propagate"))?;
    let mut errors = Vec::new();
    for &m in segments {
        let c = run(SolverModel::Discrete, sc.solver.steps, Some(m)).map_err(|e| e.in_stage("propagate"))?;
        errors.push(c.max_abs_diff(&reference));
    }
    let mut rows = with_ratios("segments", segments, errors);
    let mut errors = Vec::new();
    let mut cache: BTreeMap<usize, CorrelationPair> = BTreeMap::new();
    for &s in steps {
        for k in [s, 2 * s] {
            if let std::collections::btree_map::Entry::Vacant(slot) = cache.entry(k) {
                // coarse runs may slightly violate the uncertainty bound
                slot.insert(coarse(k).map_err(|e| e.in_stage("propagate"))?);
            }
        }
        errors.push(cache[&s].max_abs_diff(&cache[&(2 * s)]));
    }
    rows.extend(with_ratios("steps", steps, errors));
    Ok(ConvergenceReport {
        gamma,
        reference_steps: sc.solver.steps,
        rows,
        config_hash: sc.hash(),
    })
}
