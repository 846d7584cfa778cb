//! The `gof` command: distance diagnostics as plot-ready data — sorted
//! transformed distances, their theoretical quantiles, and simulated
//! envelope bands — plus the normality screen and outlier flags.

use concord_core::special::gamma_quantile;
use concord_core::{gof_report, wilson_hilferty_z, ConvergenceSpec, Family};
use serde::Serialize;

use super::{csv_float, fit_model, Ctx, Rendered, VERSION};
use crate::args::{GofArgs, OutputFormat};
use crate::ingest::ingest_csv;
use crate::json::to_json_string;

#[derive(Serialize)]
struct TestRow {
    name: String,
    statistic: f64,
    df: usize,
    p_value: f64,
}

#[derive(Serialize)]
struct EnvelopeRow {
    index: usize,
    z: f64,
    theoretical: f64,
    lower: f64,
    median: f64,
    upper: f64,
}

#[derive(Serialize)]
struct GofJsonReport {
    command: &'static str,
    version: &'static str,
    seed: u64,
    input: String,
    columns: [String; 2],
    n: usize,
    dropped_rows: usize,
    family: String,
    constrained: bool,
    envelope_simulations: usize,
    jarque_bera: TestRow,
    outliers: Vec<usize>,
    distances: Vec<f64>,
    z: Vec<f64>,
    envelope_rows: Vec<EnvelopeRow>,
    warnings: Vec<String>,
}

pub fn run(args: &GofArgs, ctx: &Ctx) -> anyhow::Result<Rendered> {
    let ing = ingest_csv(&args.input.input, &args.input.columns)?;
    let mut warnings = Vec::new();
    if ing.dropped > 0 {
        warnings.push(format!(
            "dropped {} row(s) with missing or non-numeric values",
            ing.dropped
        ));
    }
    let family = args.family.to_family();
    let spec = ConvergenceSpec::default();
    let fit = fit_model(&ing.sample, family, args.constrained, &spec)?;
    let report = gof_report(&ing.sample, &fit, args.envelope_sims, ctx.seed)?;

    // Sorted scores with the reference-law quantiles at plotting positions
    // (i - 1/2)/n. The reference for the normalized distance is a
    // Gamma(shape, 1/2) variable divided by its mean 2*shape.
    let n = ing.sample.n();
    let shape = match family {
        Family::Laplace => 2.0,
        _ => 1.0,
    };
    let mut sorted_z = report.z().to_vec();
    sorted_z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rows = Vec::with_capacity(n);
    for (i, &z) in sorted_z.iter().enumerate() {
        let p = (i as f64 + 0.5) / n as f64;
        let theoretical =
            wilson_hilferty_z(gamma_quantile(shape, 0.5, p)? / (2.0 * shape), shape)?;
        rows.push(EnvelopeRow {
            index: i + 1,
            z,
            theoretical,
            lower: report.envelope().lower()[i],
            median: report.envelope().median()[i],
            upper: report.envelope().upper()[i],
        });
    }
    let outside = rows
        .iter()
        .filter(|r| r.z < r.lower || r.z > r.upper)
        .count();

    let jb = report.jarque_bera();
    let json_report = GofJsonReport {
        command: "gof",
        version: VERSION,
        seed: ctx.seed,
        input: args.input.input.display().to_string(),
        columns: ing.columns.clone(),
        n,
        dropped_rows: ing.dropped,
        family: family.to_string(),
        constrained: args.constrained,
        envelope_simulations: args.envelope_sims,
        jarque_bera: TestRow {
            name: jb.name.to_string(),
            statistic: jb.statistic,
            df: jb.df,
            p_value: jb.p_value,
        },
        outliers: report.outlier_flags().to_vec(),
        distances: report.distances().to_vec(),
        z: report.z().to_vec(),
        envelope_rows: rows,
        warnings: warnings.clone(),
    };

    let body = match ctx.format {
        OutputFormat::Json => {
            let mut s = to_json_string(&json_report)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => render_csv(&json_report),
        OutputFormat::Text => render_text(&json_report, outside),
    };
    Ok(Rendered { body, warnings })
}

fn render_csv(r: &GofJsonReport) -> String {
    let mut out =
        String::from("index,sorted-z,theoretical-quantile,band-lower,band-median,band-upper\n");
    for row in &r.envelope_rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.index,
            csv_float(row.z),
            csv_float(row.theoretical),
            csv_float(row.lower),
            csv_float(row.median),
            csv_float(row.upper),
        ));
    }
    out
}

fn render_text(r: &GofJsonReport, outside: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "distance diagnostics  (family: {}, equal means: {}, n = {}, dropped rows: {})\n",
        r.family,
        if r.constrained { "yes" } else { "no" },
        r.n,
        r.dropped_rows
    ));
    out.push_str(&format!(
        "input: {} (columns {}, {})\n",
        r.input, r.columns[0], r.columns[1]
    ));
    out.push_str(&format!(
        "normality screen ({}): statistic {:.4}, p = {:.4}\n",
        r.jarque_bera.name, r.jarque_bera.statistic, r.jarque_bera.p_value
    ));
    out.push_str(&format!(
        "envelope: {} simulations, {} of {} points outside the 95% bands\n",
        r.envelope_simulations, outside, r.n
    ));
    if r.outliers.is_empty() {
        out.push_str("outliers (0.995 reference quantile): none\n");
    } else {
        let list: Vec<String> = r.outliers.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!(
            "outliers (0.995 reference quantile), zero-based row indices: {}\n",
            list.join(", ")
        ));
    }
    if !r.warnings.is_empty() {
        out.push('\n');
        for w in &r.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
    }
    out
}
