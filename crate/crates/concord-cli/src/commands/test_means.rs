//! The `test-means` command: the four likelihood-based mean-equality tests
//! for one family plus the model-free Hotelling T2, in a fixed row order.

use concord_core::{hotelling_t2, test_means, ConvergenceSpec, TestResult};
use serde::Serialize;

use super::{csv_float, fit_model, Convergence, Ctx, FitFlags, Rendered, VERSION};
use crate::args::{OutputFormat, TestMeansArgs};
use crate::ingest::ingest_csv;
use crate::json::to_json_string;

#[derive(Serialize)]
struct TestRow {
    name: String,
    statistic: f64,
    df: usize,
    p_value: f64,
}

impl TestRow {
    fn of(t: &TestResult) -> Self {
        Self {
            name: t.name.to_string(),
            statistic: t.statistic,
            df: t.df,
            p_value: t.p_value,
        }
    }
}

#[derive(Serialize)]
struct TestMeansReport {
    command: &'static str,
    version: &'static str,
    seed: u64,
    input: String,
    columns: [String; 2],
    n: usize,
    dropped_rows: usize,
    family: String,
    convergence: Convergence,
    tests: Vec<TestRow>,
    warnings: Vec<String>,
}

pub fn run(args: &TestMeansArgs, ctx: &Ctx) -> anyhow::Result<Rendered> {
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
    let unc = fit_model(&ing.sample, family, false, &spec)?;
    let con = fit_model(&ing.sample, family, true, &spec)?;
    let mut tests: Vec<TestRow> = test_means(&ing.sample, &unc, &con, None)?
        .iter()
        .map(TestRow::of)
        .collect();
    tests.push(TestRow::of(&hotelling_t2(&ing.sample, None)?));

    let report = TestMeansReport {
        command: "test-means",
        version: VERSION,
        seed: ctx.seed,
        input: args.input.input.display().to_string(),
        columns: ing.columns.clone(),
        n: ing.sample.n(),
        dropped_rows: ing.dropped,
        family: family.to_string(),
        convergence: Convergence {
            unconstrained: FitFlags::of(&unc),
            constrained: FitFlags::of(&con),
        },
        tests,
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

fn render_csv(r: &TestMeansReport) -> String {
    let mut out = String::from("test,statistic,df,p_value\n");
    for t in &r.tests {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.name,
            csv_float(t.statistic),
            t.df,
            csv_float(t.p_value)
        ));
    }
    out
}

fn render_text(r: &TestMeansReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "mean-equality tests  (family: {}, n = {}, dropped rows: {})\n",
        r.family, r.n, r.dropped_rows
    ));
    out.push_str(&format!(
        "input: {} (columns {}, {})\n\n",
        r.input, r.columns[0], r.columns[1]
    ));
    out.push_str(&format!(
        "{:<14} {:>10} {:>4} {:>10}\n",
        "test", "statistic", "df", "p-value"
    ));
    for t in &r.tests {
        out.push_str(&format!(
            "{:<14} {:>10.4} {:>4} {:>10.4}\n",
            t.name, t.statistic, t.df, t.p_value
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
