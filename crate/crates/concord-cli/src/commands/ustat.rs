//! The `ustat` command: model-free pair-average agreement estimate with an
//! asymptotic, jackknife, or bootstrap standard error.

use concord_core::{bootstrap_se_detailed, ustat_estimate, ustat_variance_jackknife};
use serde::Serialize;

use super::{csv_float, Ctx, Rendered, VERSION};
use crate::args::{OutputFormat, UstatArgs, UstatSeArg};
use crate::ingest::ingest_csv;
use crate::json::to_json_string;

#[derive(Serialize)]
struct UstatReport {
    command: &'static str,
    version: &'static str,
    seed: u64,
    input: String,
    columns: [String; 2],
    n: usize,
    dropped_rows: usize,
    phi: &'static str,
    u1: f64,
    u2: f64,
    h: f64,
    g: f64,
    rho_hat: f64,
    se: f64,
    se_method: &'static str,
    bootstrap_replicates: Option<usize>,
    bootstrap_failed: Option<usize>,
    bootstrap_seed: Option<u64>,
    warnings: Vec<String>,
}

pub fn run(args: &UstatArgs, ctx: &Ctx) -> anyhow::Result<Rendered> {
    let ing = ingest_csv(&args.input.input, &args.input.columns)?;
    let mut warnings = Vec::new();
    if ing.dropped > 0 {
        warnings.push(format!(
            "dropped {} row(s) with missing or non-numeric values",
            ing.dropped
        ));
    }
    let phi = args.phi.to_phi();
    let est = ustat_estimate(&ing.sample, phi)?;

    let (se, method, boot_reps, boot_failed, boot_seed) = match args.se {
        UstatSeArg::Asymptotic => (est.se(), "asymptotic", None, None, None),
        UstatSeArg::Jackknife => (
            ustat_variance_jackknife(&ing.sample, phi)?.sqrt(),
            "jackknife",
            None,
            None,
            None,
        ),
        UstatSeArg::Bootstrap => {
            let summary = bootstrap_se_detailed(
                &ing.sample,
                move |s| ustat_estimate(s, phi).map(|e| e.rho_hat()),
                args.bootstrap_replicates,
                ctx.seed,
            )?;
            (
                summary.se,
                "bootstrap",
                Some(summary.replicates_used),
                Some(summary.failed_replicates),
                Some(ctx.seed),
            )
        }
    };

    let report = UstatReport {
        command: "ustat",
        version: VERSION,
        seed: ctx.seed,
        input: args.input.input.display().to_string(),
        columns: ing.columns.clone(),
        n: est.n(),
        dropped_rows: ing.dropped,
        phi: args.phi.label(),
        u1: est.u1(),
        u2: est.u2(),
        h: est.h(),
        g: est.g(),
        rho_hat: est.rho_hat(),
        se,
        se_method: method,
        bootstrap_replicates: boot_reps,
        bootstrap_failed: boot_failed,
        bootstrap_seed: boot_seed,
        warnings: warnings.clone(),
    };

    let body = match ctx.format {
        OutputFormat::Json => {
            let mut s = to_json_string(&report)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => render_csv(&report),
        OutputFormat::Text => render_text(&report),
    };
    Ok(Rendered { body, warnings })
}

fn render_csv(r: &UstatReport) -> String {
    let mut out = String::from("phi,n,u1,u2,h,g,rho_hat,se,se_method\n");
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        r.phi,
        r.n,
        csv_float(r.u1),
        csv_float(r.u2),
        csv_float(r.h),
        csv_float(r.g),
        csv_float(r.rho_hat),
        csv_float(r.se),
        r.se_method,
    ));
    out
}

fn render_text(r: &UstatReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "pair-average agreement  (phi: {}, n = {}, dropped rows: {})\n",
        r.phi, r.n, r.dropped_rows
    ));
    out.push_str(&format!(
        "input: {} (columns {}, {})\n\n",
        r.input, r.columns[0], r.columns[1]
    ));
    out.push_str(&format!("estimate: {:.4}\n", r.rho_hat));
    let method = match r.bootstrap_replicates {
        Some(b) => format!("{} (B={b})", r.se_method),
        None => r.se_method.to_string(),
    };
    out.push_str(&format!("standard error: {:.4} ({method})\n", r.se));
    out.push_str(&format!(
        "components: within-pair mean {:.6}, between-pair mean {:.6}\n",
        r.u1, r.u2
    ));
    if !r.warnings.is_empty() {
        out.push('\n');
        for w in &r.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
    }
    out
}
