//! `fmk` — residual-based verification of F-manifold constructions on chart
//! models.
//!
//! Exit codes: 0 all checks passed, 1 at least one check failed,
//! 2 configuration or load error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fmk_core::models::{builtin_spec, Model, ModelSpec, BUILTIN_NAMES};
use fmk_core::verify::{list_checks, run_suite, SUITES};
use fmk_core::Error;

#[derive(Parser)]
#[command(name = "fmk", version, about = "F-manifold chart verification kit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a check suite against a model and report per-check residuals.
    Check {
        /// Model file path, or `builtin:<name>` (semisimple2, semisimple3,
        /// kappa2d, frob-cp1).
        #[arg(long)]
        model: String,
        /// Suite to run: algebra, duality, connections, flatness, lorenz,
        /// legendre, pullback, kappa, or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Sampling seed (reports are byte-identical for fixed inputs).
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Number of admissible sample points per check.
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Default tolerance for residual checks (absolute).
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Write the JSON report here (deterministic bytes).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Override the eventual-identity gate applied at load and before
        /// twisting (default 1e-8; raise it to treat gate violations as
        /// reported defects rather than errors).
        #[arg(long)]
        ei_gate: Option<f64>,
        /// List the checks of the suite (with anchors) instead of running.
        #[arg(long, default_value_t = false)]
        list_checks: bool,
    },
    /// Write a built-in model (or re-serialize a model file) as JSON.
    Export {
        /// Model file path or `builtin:<name>`.
        #[arg(long)]
        model: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in models.
    Models,
}

fn load_spec(arg: &str) -> Result<ModelSpec, Error> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return builtin_spec(name);
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| Error::Config(format!("cannot read model file `{arg}`: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("model file `{arg}`: {e}")))
}

fn run() -> Result<bool, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Models => {
            for name in BUILTIN_NAMES {
                println!("builtin:{name}");
            }
            Ok(true)
        }
        Command::Export { model, out } => {
            let spec = load_spec(&model)?;
            let mut json = serde_json::to_string_pretty(&spec)
                .map_err(|e| Error::Schema(format!("serialization failed: {e}")))?;
            json.push('\n');
            match out {
                Some(path) => std::fs::write(&path, json)
                    .map_err(|e| Error::Config(format!("cannot write `{}`: {e}", path.display())))?,
                None => print!("{json}"),
            }
            Ok(true)
        }
        Command::Check {
            model,
            suite,
            seed,
            points,
            tol,
            report,
            ei_gate,
            list_checks: list,
        } => {
            if list {
                if !SUITES.contains(&suite.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown suite `{suite}` (available: {})",
                        SUITES.join(", ")
                    )));
                }
                for (name, anchor) in list_checks(&suite) {
                    println!("{name:55} {anchor}");
                }
                return Ok(true);
            }
            let mut spec = load_spec(&model)?;
            if let Some(g) = ei_gate {
                spec.tolerances
                    .insert("gates.eventual_identity".to_string(), g);
            }
            let m: Model<f64> = spec.build()?;
            let rep = run_suite(&m, &suite, seed, points, tol)?;
            for c in &rep.checks {
                println!(
                    "{:4} {:55} max {:11.3e}  mean {:11.3e}  tol {:8.1e}",
                    c.status, c.name, c.max_residual, c.mean_residual, c.tolerance
                );
            }
            println!(
                "{}: {}/{} checks passed in {:.2}s (model {}, suite {}, seed {}, points {}, tol {:.1e})",
                if rep.all_pass { "PASS" } else { "FAIL" },
                rep.passed,
                rep.passed + rep.failed,
                rep.wall_clock_secs.unwrap_or(0.0),
                rep.model,
                rep.suite,
                rep.seed,
                rep.points,
                rep.tolerance,
            );
            if let Some(path) = report {
                std::fs::write(&path, rep.to_canonical_json())
                    .map_err(|e| Error::Config(format!("cannot write `{}`: {e}", path.display())))?;
            }
            Ok(rep.all_pass)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
