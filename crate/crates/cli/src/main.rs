//! Configuration-driven harness for the sturm-heat spectral solver.
//!
//! Usage: sturm-heat <config-path> [--output DIR] [--threads K] [--verbose]
//!
//! Exit codes: 0 success, 2 config error, 3 solver failure,
//! 4 experiment verdict failure.

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod run;

use run::{Outcome, Options, RunError};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "usage: sturm-heat <config-path> [--output DIR] [--threads K] [--verbose]";

struct Args {
    config_path: PathBuf,
    options: Options,
    threads: Option<usize>,
}

fn parse_args(mut argv: std::env::Args) -> Result<Args, String> {
    let _program = argv.next();
    let mut config_path: Option<PathBuf> = None;
    let mut output_dir = None;
    let mut threads = None;
    let mut verbose = false;
    while let Some(arg) = argv.next() {
        match arg.as_str() {
            "--output" => {
                let dir = argv.next().ok_or("--output needs a directory")?;
                output_dir = Some(PathBuf::from(dir));
            }
            "--threads" => {
                let k = argv.next().ok_or("--threads needs a count")?;
                threads = Some(k.parse::<usize>().map_err(|_| format!("bad thread count {k:?}"))?);
            }
            "--verbose" => verbose = true,
            "--help" | "-h" => return Err(USAGE.to_string()),
            other if config_path.is_none() && !other.starts_with('-') => {
                config_path = Some(PathBuf::from(other));
            }
            other => return Err(format!("unexpected argument {other:?}\n{USAGE}")),
        }
    }
    let config_path = config_path.ok_or(USAGE)?;
    Ok(Args { config_path, options: Options { output_dir, verbose }, threads })
}

fn main() -> ExitCode {
    let args = match parse_args(std::env::args()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };

    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("failed to configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let text = match std::fs::read_to_string(&args.config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config_path.display());
            return ExitCode::from(2);
        }
    };
    let config = match config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };

    match run::execute(&config, &args.options) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFail(msg)) => {
            eprintln!("verdict failure: {msg}");
            ExitCode::from(4)
        }
        Err(RunError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
