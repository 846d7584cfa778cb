//! `concord`: agreement analysis for paired continuous measurements.
//!
//! Exit status is 0 only when the full report was produced and written; any
//! module failure prints a structured error object to standard error and
//! exits nonzero. Reports are deterministic given the invocation and seed.

mod args;
mod commands;
mod ingest;
mod json;

use std::io::Write;

use anyhow::Context;
use clap::Parser;
use serde::Serialize;

use args::{Cli, Command, OutputFormat};
use commands::{Ctx, Rendered};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            emit_error(&err);
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = resolve_seed(cli.seed)?;
    let format = cli.format.unwrap_or(match &cli.command {
        Command::Gof(_) | Command::Simulate(_) => OutputFormat::Csv,
        _ => OutputFormat::Json,
    });
    let ctx = Ctx { seed, format };
    let rendered: Rendered = match &cli.command {
        Command::Agree(a) => commands::agree::run(a, &ctx)?,
        Command::Fit(a) => commands::fit::run(a, &ctx)?,
        Command::TestMeans(a) => commands::test_means::run(a, &ctx)?,
        Command::Gof(a) => commands::gof::run(a, &ctx)?,
        Command::Ustat(a) => commands::ustat::run(a, &ctx)?,
        Command::Simulate(a) => commands::simulate::run(a, &ctx)?,
    };
    for warning in &rendered.warnings {
        eprintln!("warning: {warning}");
    }
    match &cli.output {
        Some(path) => std::fs::write(path, rendered.body.as_bytes())
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout()
            .write_all(rendered.body.as_bytes())
            .context("cannot write to standard output")?,
    }
    Ok(())
}

/// Flag value first, then the CONCORD_SEED environment variable, then 0.
fn resolve_seed(flag: Option<u64>) -> anyhow::Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("CONCORD_SEED") {
        Ok(raw) => raw.trim().parse::<u64>().map_err(|_| {
            concord_core::Error::Config(format!(
                "CONCORD_SEED must be an unsigned integer, got {raw:?}"
            ))
            .into()
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(concord_core::Error::Config(format!(
            "CONCORD_SEED is not valid unicode: {e}"
        ))
        .into()),
    }
}

#[derive(Serialize)]
struct ErrorObject {
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ErrorBody {
    error: ErrorObject,
}

fn classify(err: &anyhow::Error) -> &'static str {
    use concord_core::Error as E;
    if let Some(core) = err.downcast_ref::<E>() {
        return match core {
            E::Domain(_) => "domain",
            E::NotPositiveDefinite(_) => "not-positive-definite",
            E::Quadrature { .. } => "quadrature",
            E::TooFewObservations { .. } => "too-few-observations",
            E::DimensionMismatch(_) => "dimension-mismatch",
            E::Undefined(_) => "undefined",
            E::Unsupported(_) => "unsupported",
            E::Estimation(_) => "estimation",
            E::Config(_) => "config",
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    if err.downcast_ref::<csv::Error>().is_some() {
        return "input";
    }
    "cli"
}

fn emit_error(err: &anyhow::Error) {
    let body = ErrorBody {
        error: ErrorObject {
            kind: classify(err),
            message: format!("{err:#}"),
        },
    };
    match json::to_json_string(&body) {
        Ok(s) => eprintln!("{s}"),
        Err(_) => eprintln!("{{\"error\":{{\"kind\":\"cli\",\"message\":\"unserializable error\"}}}}"),
    }
}
