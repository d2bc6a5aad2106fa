//! `smoother`: run scenarios, regenerate the gadget calibration, check scenario files.

mod output;
mod run;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use smoother::certify::pool;
use smoother::gadgets::calibrate;
use smoother::Error;

use scenario::Scenario;

const EXIT_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "smoother", version, about = "Certified smooth approximation of semialgebraic functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write certificates, metadata, error table and plot data
    Run {
        scenario: PathBuf,
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's grid spacing
        #[arg(long)]
        spacing: Option<f64>,
        /// Override the scenario's largest refinement level
        #[arg(long = "jmax")]
        j_max: Option<u32>,
    },
    /// Search for gadget constants and write them atomically
    Calibrate {
        #[arg(long)]
        out: PathBuf,
        /// Grid spacing of the contract checks
        #[arg(long, default_value_t = 1e-3)]
        spacing: f64,
    },
    /// Parse and check a scenario without running it
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("SMOOTHER_THREADS") {
        if !matches!(v.parse::<usize>(), Ok(n) if n > 0) {
            eprintln!("error: SMOOTHER_THREADS must be a positive integer, got {v:?}");
            return ExitCode::from(EXIT_INVALID);
        }
    }
    match cli.command {
        Command::Run { scenario, out, spacing, j_max } => run(&scenario, &out, spacing, j_max),
        Command::Calibrate { out, spacing } => calibrate_to(&out, spacing),
        Command::Validate { scenario } => validate(&scenario),
    }
}

/// Exit code for a library error raised while running.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence(_) | Error::TubeEscape(_) => EXIT_NO_CONVERGENCE,
        Error::Cover(_) | Error::Unresolved(_) | Error::Calibration(_) => EXIT_FAILED,
        _ => EXIT_INVALID,
    }
}

fn validate(path: &Path) -> ExitCode {
    match Scenario::load(path).and_then(Scenario::prepare) {
        Ok(p) => {
            println!("{}: valid {} scenario in dimension {}", path.display(), p.scenario.pipeline.name(), p.scenario.dimension);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn run(path: &Path, out: &Path, spacing: Option<f64>, j_max: Option<u32>) -> ExitCode {
    let prepared = match Scenario::load(path).map(|s| s.with_overrides(spacing, j_max)).and_then(Scenario::prepare) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return ExitCode::from(EXIT_INVALID);
    }
    let s = &prepared.scenario;
    let header = json!({
        "name": s.name,
        "pipeline": s.pipeline.name(),
        "dimension": s.dimension,
        "grid_spacing": s.grid_spacing,
        "j_max": s.j_max,
        "threads": pool().current_num_threads(),
    });
    let start = Instant::now();
    let outcome = run::run(&prepared);
    let elapsed = start.elapsed().as_secs_f64();
    let mut result = header;
    result["elapsed_seconds"] = json!(elapsed);
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let code = exit_code(&e);
            let status = if code == EXIT_NO_CONVERGENCE { "no_convergence" } else { "error" };
            result["status"] = json!(status);
            result["passed"] = json!(false);
            result["error"] = json!(e.to_string());
            if let Err(w) = output::write_json(out, "result.json", &result) {
                eprintln!("error: {w:#}");
            }
            eprintln!("error: {e}");
            return ExitCode::from(code);
        }
    };
    let passed = outcome.passed();
    let failed = outcome.certificates.iter().filter(|c| !c.passed()).count();
    result["status"] = json!(if passed { "pass" } else { "fail" });
    result["passed"] = json!(passed);
    result["certificates"] = json!({ "total": outcome.certificates.len(), "failed": failed });
    result["failures"] = json!(outcome.failures);
    result["metrics"] = outcome.result.clone();
    let written = output::write_json(out, "certificates.json", &outcome.certificates)
        .and_then(|_| output::write_json(out, "result.json", &result))
        .and_then(|_| output::write_csv(out, "errors.csv", &outcome.errors))
        .and_then(|_| output::write_csv(out, "plotdata.csv", &outcome.plot));
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_INVALID);
    }
    println!("{}: {} certificates, {failed} failed, {elapsed:.2} s", s.name, outcome.certificates.len());
    for c in outcome.certificates.iter().filter(|c| !c.passed()) {
        println!("  FAIL {} {} {} on {}: bound {:e}", c.claim.lhs, c.claim.relation, c.claim.rhs, c.claim.region, c.bound());
    }
    for f in &outcome.failures {
        println!("  FAIL {f}");
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn calibrate_to(out: &Path, spacing: f64) -> ExitCode {
    if !(spacing > 0.0 && spacing.is_finite()) {
        eprintln!("error: spacing {spacing} must be positive");
        return ExitCode::from(EXIT_INVALID);
    }
    let cal = match calibrate(spacing) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    };
    if let Err(e) = cal.save(out) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAILED);
    }
    println!("A_psi = {:e}", cal.a_psi);
    println!("L_Psi = {:e}", cal.l_psi);
    println!("sigmoid sharpness = {}", cal.sharpness);
    println!("{:>8} {:>12} {:>12}", "mu", "radius", "sharpness");
    for r in &cal.rules {
        println!("{:>8} {:>12.4e} {:>12.4e}", r.mu, r.radius, r.sharpness);
    }
    println!("wrote {}", out.display());
    ExitCode::SUCCESS
}
