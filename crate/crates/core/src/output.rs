//! Plot-ready output files.
//!
//! CSV files start with `#` comment lines carrying the config hash, the
//! basis and the column units. JSON files hold complex matrices as arrays of
//! rows of `{"re", "im"}` objects next to the same metadata.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::gaussian::{BasisTag, ModeBasis};
use crate::lossless::BogoliubovPair;
use crate::scenario::{CalibrationReport, ConvergenceReport, Format, RunReport};
use crate::linalg::CMat;
use crate::{Error, Result};

/// Collects files and writes them atomically; on failure every file of the
/// batch that was already written is removed.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    hash: String,
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>, config_hash: &str) -> Self {
        OutputSet {
            dir: dir.into(),
            hash: config_hash.to_string(),
            files: Vec::new(),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// CSV with a comment header. `units` has one entry per column.
    pub fn csv(&mut self, name: &str, basis: &str, columns: &[&str], units: &[&str], rows: &[Vec<String>]) {
        let mut s = String::new();
        let _ = writeln!(s, "# config_hash: {}", self.hash);
        let _ = writeln!(s, "# basis: {basis}");
        let _ = writeln!(s, "# units: {}", units.join(","));
        let _ = writeln!(s, "{}", columns.join(","));
        for r in rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        self.files.push((name.to_string(), s));
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.files.push((name.to_string(), s));
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn write(&self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::new();
        let res = self.write_all(&mut done);
        if res.is_err() {
            for p in &done {
                let _ = fs::remove_file(p);
            }
        }
        res.map(|_| done).map_err(|e| e.in_stage("write"))
    }

    fn write_all(&self, done: &mut Vec<PathBuf>) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        for (name, body) in &self.files {
            let path = self.dir.join(name);
            let tmp = self.dir.join(format!(".{name}.tmp"));
            let written = (|| -> std::io::Result<()> {
                let mut f = fs::File::create(&tmp)?;
                f.write_all(body.as_bytes())?;
                f.sync_all()?;
                fs::rename(&tmp, &path)
            })();
            if let Err(e) = written {
                let _ = fs::remove_file(&tmp);
                return Err(Error::Io(e));
            }
            done.push(path);
        }
        Ok(())
    }
}

/// Shortest round-trip representation; deterministic across runs.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn complex_rows(m: &CMat) -> Vec<Vec<serde_json::Value>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| json!({"re": m[(i, j)].re, "im": m[(i, j)].im})).collect())
        .collect()
}

/// Complex matrix document.
pub fn complex_matrix_json(hash: &str, basis: &str, units: &str, rows_index: &str, m: &CMat) -> serde_json::Value {
    json!({
        "config_hash": hash,
        "basis": basis,
        "units": units,
        "rows": rows_index,
        "shape": [m.nrows(), m.ncols()],
        "data": complex_rows(m),
    })
}

fn tag_name(tag: BasisTag) -> &'static str {
    match tag {
        BasisTag::Monochromatic => "monochromatic",
        BasisTag::Basis(k) => k.name(),
    }
}

/// Files produced by a simulation or basis comparison.
pub fn run_outputs(report: &RunReport, dir: &Path, formats: &[Format]) -> OutputSet {
    let mut out = OutputSet::new(dir, &report.provenance.config_hash);
    let csv = formats.contains(&Format::Csv);
    let json_out = formats.contains(&Format::Json);
    let sp = &report.spectrum;
    if csv {
        let rows: Vec<Vec<String>> = (0..sp.omega.len())
            .map(|i| vec![num(sp.omega[i]), num(sp.wavelength[i]), num(sp.alpha[i]), num(sp.photons[i])])
            .collect();
        out.csv(
            "spectrum.csv",
            "monochromatic",
            &["omega", "wavelength", "alpha", "photons"],
            &["rad/fs", "um", "1/um", "1"],
            &rows,
        );
        let depth = report.bases.iter().map(|b| b.purities.len()).max().unwrap_or(0);
        let mut cols = vec!["basis", "first_dp2_db", "best_dp2_db", "k"];
        let pnames: Vec<String> = (1..=depth).map(|d| format!("purity_{d}")).collect();
        cols.extend(pnames.iter().map(|s| s.as_str()));
        let mut units = vec!["-", "dB", "dB", "1"];
        units.extend(std::iter::repeat_n("1", depth));
        let rows: Vec<Vec<String>> = report
            .bases
            .iter()
            .map(|b| {
                let best = b.quadratures.iter().map(|q| q.dp2_db).fold(f64::INFINITY, f64::min);
                let mut r = vec![b.kind.name().to_string(), num(b.quadratures[0].dp2_db), num(best), opt(b.k)];
                r.extend((0..depth).map(|d| opt(b.purities.get(d).copied())));
                r
            })
            .collect();
        out.csv("summary.csv", "per-row", &cols, &units, &rows);
        for b in &report.bases {
            let rows: Vec<Vec<String>> = (0..b.photons.len())
                .map(|m| {
                    let q = &b.quadratures[m];
                    vec![m.to_string(), num(b.photons[m]), num(q.dq2), num(q.dp2), num(q.dq2_db), num(q.dp2_db)]
                })
                .collect();
            out.csv(
                &format!("modes_{}.csv", b.kind.name()),
                b.kind.name(),
                &["mode", "photons", "dq2", "dp2", "dq2_db", "dp2_db"],
                &["1", "1", "vacuum=1", "vacuum=1", "dB", "dB"],
                &rows,
            );
        }
        for o in &report.overlaps {
            let rows: Vec<Vec<String>> = o.abs.iter().map(|r| r.iter().map(|&v| num(v)).collect()).collect();
            let n = o.abs.len();
            let names: Vec<String> = (0..n).map(|j| format!("{}_{j}", o.b.name())).collect();
            let cols: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let units = vec!["1"; n];
            out.csv(
                &format!("overlap_{}_{}.csv", o.a.name(), o.b.name()),
                &format!("rows {} / columns {}", o.a.name(), o.b.name()),
                &cols,
                &units,
                &rows,
            );
        }
        if !report.overlaps.is_empty() {
            let rows: Vec<Vec<String>> = report
                .overlaps
                .iter()
                .map(|o| vec![o.a.name().into(), o.b.name().into(), num(o.distance_from_identity)])
                .collect();
            out.csv(
                "overlap_distances.csv",
                "per-row",
                &["basis_a", "basis_b", "frobenius_distance"],
                &["-", "-", "1"],
                &rows,
            );
        }
    }
    if json_out {
        out.json("report.json", report);
        out.json(
            "timing.json",
            &json!({ "config_hash": out.hash(), "runtime_s": report.provenance.runtime_s }),
        );
        let c = &report.correlations;
        let basis = tag_name(c.basis);
        out.json("c1.json", &complex_matrix_json(out.hash(), basis, "photons", "frequency", &c.c1));
        out.json("c2.json", &complex_matrix_json(out.hash(), basis, "photons", "frequency", &c.c2));
        for b in &report.mode_bases {
            out.json(&format!("basis_{}.json", b.kind.name()), &mode_basis_json(out.hash(), b));
        }
    }
    out
}

fn mode_basis_json(hash: &str, b: &ModeBasis) -> serde_json::Value {
    complex_matrix_json(hash, b.kind.name(), "1 (unitary rows)", "mode", &b.u)
}

pub fn calibration_outputs(report: &CalibrationReport, hash: &str, pair: &BogoliubovPair, dir: &Path, formats: &[Format]) -> OutputSet {
    let mut out = OutputSet::new(dir, hash);
    if formats.contains(&Format::Csv) {
        out.csv(
            "calibration.csv",
            "schmidt",
            &["gamma", "target_n1", "n1", "iterations"],
            &["rad^(1/2)/um (grid-normalized)", "1", "1", "1"],
            &[vec![num(report.gamma), opt(report.target_n1), num(report.n1), report.iterations.to_string()]],
        );
    }
    if formats.contains(&Format::Json) {
        out.json("calibration.json", &json!({ "config_hash": hash, "calibration": report }));
        out.json("bogoliubov_e.json", &complex_matrix_json(hash, "monochromatic", "1", "output frequency", &pair.e));
        out.json("bogoliubov_f.json", &complex_matrix_json(hash, "monochromatic", "1", "output frequency", &pair.f));
    }
    out
}

/// The convergence table is always written as CSV.
pub fn convergence_outputs(report: &ConvergenceReport, dir: &Path, formats: &[Format]) -> OutputSet {
    let mut out = OutputSet::new(dir, &report.config_hash);
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.parameter.to_string(), r.value.to_string(), num(r.error), opt(r.ratio)])
        .collect();
    out.csv(
        "convergence.csv",
        "monochromatic",
        &["parameter", "value", "max_abs_error", "ratio"],
        &["-", "1", "photons", "1"],
        &rows,
    );
    if formats.contains(&Format::Json) {
        out.json("convergence.json", report);
    }
    out
}
