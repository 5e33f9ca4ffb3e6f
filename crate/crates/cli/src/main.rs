//! `hsn` — benchmark CLI for streaming logistic-regression optimizers.
//!
//! Exit codes: 0 success (all checked diagnostics passed), 2 invalid
//! configuration, 3 a diagnostic ran to completion but failed its check,
//! 1 any other runtime failure. Failures print a JSON error document to
//! stderr; validation failures write no output files.

mod args;
mod emit;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use hsn_core::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "error": {
                            "kind": "diagnostic_failed",
                            "message": "one or more diagnostic checks failed; see the emitted report",
                        }
                    })
                );
                ExitCode::from(3)
            }
        }
        Err(err) => {
            let kind = match &err {
                Error::InvalidConfig(_)
                | Error::InvalidWeights { .. }
                | Error::InvalidSchedule(_)
                | Error::DiagnosticPrecondition(_)
                | Error::MissingColumn { .. } => "invalid_config",
                _ => "runtime_error",
            };
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": { "kind": kind, "message": err.to_string() }
                })
            );
            if kind == "invalid_config" {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cli: &Cli) -> hsn_core::Result<run::CommandOutcome> {
    let file = args::load_file_config(cli.config.as_ref())?;
    if let Some(workers) = cli.workers.or(file.workers) {
        // Ignore the error when a pool already exists (tests share a process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let out_dir: PathBuf = cli
        .out
        .clone()
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os("HSN_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match &cli.command {
        Command::Synth(a) => run::run_synth(a, &file, &out_dir),
        Command::Real(a) => run::run_real(a, &file, &out_dir),
        Command::Clt(a) => run::run_clt(a, &file, &out_dir),
        Command::Qsl(a) => run::run_qsl(a, &file, &out_dir),
        Command::Rates(a) => run::run_rates(a, &file, &out_dir),
        Command::Hessian(a) => run::run_hessian(a, &file, &out_dir),
        Command::Compare(a) => run::run_compare(a, &file, &out_dir),
        Command::Selftest(a) => run::run_selftest(a, &file, &out_dir),
    }
}
