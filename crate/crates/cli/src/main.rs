use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lossy_pdc::output::{self, OutputSet};
use lossy_pdc::scenario::{self, Scenario};
use lossy_pdc::{Error, Result};

/// Multimode squeezing in lossy parametric down-conversion.
#[derive(Parser)]
#[command(name = "lossy-pdc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured pipeline and write all reports.
    Simulate(Common),
    /// Overlap matrices and the joint table for every pair of bases.
    CompareBases(Common),
    /// Discrete-vs-continuous and RK4 self-convergence table.
    Convergence(Common),
    /// Resolve the gain constant only.
    Calibrate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted `key=value` applied on top of the file, e.g. `solver.steps=500`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for randomized checks. The physics is deterministic and ignores it.
    #[arg(long)]
    #[allow(dead_code)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(Scenario, PathBuf)> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", self.config.display())))?;
        let sc = Scenario::from_toml_with_overrides(&text, &self.overrides)?;
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(&sc.outputs.directory));
        Ok((sc, dir))
    }
}

fn finish(set: OutputSet) -> Result<()> {
    for p in set.write()? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let (sc, dir) = c.load().map_err(|e| e.in_stage("config"))?;
            let report = scenario::run_scenario(&sc)?;
            print_summary(&report);
            finish(output::run_outputs(&report, &dir, &sc.outputs.formats))
        }
        Command::CompareBases(c) => {
            let (sc, dir) = c.load().map_err(|e| e.in_stage("config"))?;
            let report = scenario::compare_bases(&sc)?;
            print_summary(&report);
            for o in &report.overlaps {
                println!(
                    "|chi({}, {})| distance from identity {:.4}",
                    o.a.name(),
                    o.b.name(),
                    o.distance_from_identity
                );
            }
            finish(output::run_outputs(&report, &dir, &sc.outputs.formats))
        }
        Command::Convergence(c) => {
            let (sc, dir) = c.load().map_err(|e| e.in_stage("config"))?;
            let report = scenario::convergence_study(&sc, &sc.convergence.segments, &sc.convergence.steps)?;
            for r in &report.rows {
                let ratio = r.ratio.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
                println!("{:>8} {:>6} error {:.3e} ratio {ratio}", r.parameter, r.value, r.error);
            }
            finish(output::convergence_outputs(&report, &dir, &sc.outputs.formats))
        }
        Command::Calibrate(c) => {
            let (sc, dir) = c.load().map_err(|e| e.in_stage("config"))?;
            let st = scenario::setup(&sc).map_err(|e| e.in_stage("setup"))?;
            let (rep, pair) = scenario::calibrate(&sc, &st).map_err(|e| e.in_stage("calibrate"))?;
            println!("gamma {:e} n1 {:.6} iterations {}", rep.gamma, rep.n1, rep.iterations);
            finish(output::calibration_outputs(&rep, &sc.hash(), &pair, &dir, &sc.outputs.formats))
        }
    }
}

fn print_summary(report: &scenario::RunReport) {
    println!("gamma {:e} (first Schmidt mode n1 {:.4})", report.calibration.gamma, report.calibration.n1);
    println!("{:<18} {:>12} {:>8}  purities", "basis", "dP2_1 [dB]", "K");
    for b in &report.bases {
        let k = b.k.map(|k| format!("{k:.3}")).unwrap_or_else(|| "-".into());
        let p: Vec<String> = b.purities.iter().map(|p| format!("{p:.3}")).collect();
        println!("{:<18} {:>12.3} {:>8}  {}", b.kind.name(), b.quadratures[0].dp2_db, k, p.join(" "));
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
