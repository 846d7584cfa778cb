//! The `agree` command: coefficient estimates under unconstrained and
//! equal-means fits, with a standard-error policy driven by the
//! mean-equality check.

use concord_core::{
    bootstrap_se_detailed, estimate_agreement, plug_in_asymptotic_se, sample_moments, stream_seed,
    test_means, BivariateSample, CoefficientKind, ConvergenceSpec, Error as CoreError, Family,
};
use serde::Serialize;

use super::{csv_float, fit_model, Convergence, Ctx, FitFlags, Rendered, VERSION};
use crate::args::{AgreeArgs, CoefficientArg, OutputFormat, SePolicyArg};
use crate::ingest::ingest_csv;
use crate::json::to_json_string;

#[derive(Serialize)]
struct MeanTestSummary {
    name: String,
    statistic: f64,
    df: usize,
    p_value: f64,
    reject_at_5pct: bool,
}

#[derive(Serialize)]
struct EstimateRow {
    coefficient: &'static str,
    p: Option<u32>,
    fit: &'static str,
    estimate: f64,
    se: f64,
    se_method: &'static str,
    bootstrap_replicates: Option<usize>,
    bootstrap_failed: Option<usize>,
    bootstrap_seed: Option<u64>,
}

#[derive(Serialize)]
struct AgreeReport {
    command: &'static str,
    version: &'static str,
    seed: u64,
    input: String,
    columns: [String; 2],
    n: usize,
    dropped_rows: usize,
    family: String,
    convergence: Option<Convergence>,
    mean_test: Option<MeanTestSummary>,
    estimates: Vec<EstimateRow>,
    warnings: Vec<String>,
}

fn coefficient_label(kind: CoefficientKind) -> (&'static str, Option<u32>) {
    match kind {
        CoefficientKind::Lin => ("rho-c", None),
        CoefficientKind::L1 => ("rho-1", None),
        CoefficientKind::Lp { p } => ("rho-p", Some(p)),
        CoefficientKind::ScaledPhi { .. } => ("scaled-phi", None),
    }
}

fn requested_kinds(args: &AgreeArgs) -> anyhow::Result<Vec<CoefficientKind>> {
    match args.coefficient {
        CoefficientArg::All => Ok(vec![CoefficientKind::Lin, CoefficientKind::L1]),
        CoefficientArg::Lin => Ok(vec![CoefficientKind::Lin]),
        CoefficientArg::L1 => Ok(vec![CoefficientKind::L1]),
        CoefficientArg::Lp => {
            let p = args.power.ok_or_else(|| {
                CoreError::Config("--coefficient lp requires --power".into())
            })?;
            if p == 0 {
                return Err(CoreError::Config("--power must be at least 1".into()).into());
            }
            Ok(vec![CoefficientKind::Lp { p }])
        }
    }
}

/// Perfect concordance makes every model fit singular while the coefficient
/// itself is trivially 1; report it directly instead of failing.
fn perfectly_concordant(sample: &BivariateSample) -> bool {
    let Ok(m) = sample_moments(sample) else {
        return false;
    };
    let (s11, s12, s22) = (m.cov_ml[(0, 0)], m.cov_ml[(0, 1)], m.cov_ml[(1, 1)]);
    let det = s11 * s22 - s12 * s12;
    let scale = s11 * s22;
    if !(scale > 0.0) || det / scale > 1e-12 {
        return false;
    }
    let gamma = m.mean[0] - m.mean[1];
    let lin = 2.0 * s12 / (s11 + s22 + gamma * gamma);
    (lin - 1.0).abs() <= 1e-9
}

struct RowSe {
    se: f64,
    method: &'static str,
    replicates: Option<usize>,
    failed: Option<usize>,
    seed: Option<u64>,
}

fn bootstrap_row(
    sample: &BivariateSample,
    family: Family,
    constrained: bool,
    kind: CoefficientKind,
    replicates: usize,
    seed: u64,
) -> anyhow::Result<RowSe> {
    let recipe = move |s: &BivariateSample| {
        let spec = ConvergenceSpec::default();
        let fit = fit_model(s, family, constrained, &spec)?;
        estimate_agreement(&fit, kind).map(|v| v.value())
    };
    let summary = bootstrap_se_detailed(sample, recipe, replicates, seed)?;
    Ok(RowSe {
        se: summary.se,
        method: "bootstrap",
        replicates: Some(summary.replicates_used),
        failed: Some(summary.failed_replicates),
        seed: Some(seed),
    })
}

pub fn run(args: &AgreeArgs, ctx: &Ctx) -> anyhow::Result<Rendered> {
    let kinds = requested_kinds(args)?;
    let ing = ingest_csv(&args.input.input, &args.input.columns)?;
    let mut warnings = Vec::new();
    if ing.dropped > 0 {
        warnings.push(format!(
            "dropped {} row(s) with missing or non-numeric values",
            ing.dropped
        ));
    }
    let family = args.family.to_family();
    let n = ing.sample.n();

    let fit_slots: &[(&'static str, bool)] = if args.constrained {
        &[("constrained", true)]
    } else {
        &[("unconstrained", false), ("constrained", true)]
    };

    let (convergence, mean_test, estimates) = if perfectly_concordant(&ing.sample) {
        warnings.push(
            "the two columns are perfectly concordant; model fitting is degenerate, the \
             coefficient is exactly 1, and its sampling variance is zero"
                .into(),
        );
        let mut rows = Vec::new();
        for &kind in &kinds {
            let (label, p) = coefficient_label(kind);
            for &(fit_label, _) in fit_slots {
                rows.push(EstimateRow {
                    coefficient: label,
                    p,
                    fit: fit_label,
                    estimate: 1.0,
                    se: 0.0,
                    se_method: "degenerate",
                    bootstrap_replicates: None,
                    bootstrap_failed: None,
                    bootstrap_seed: None,
                });
            }
        }
        (None, None, rows)
    } else {
        let spec = ConvergenceSpec::default();
        let unc = fit_model(&ing.sample, family, false, &spec)?;
        let con = fit_model(&ing.sample, family, true, &spec)?;
        let tests = test_means(&ing.sample, &unc, &con, None)?;
        let lrt = tests[3];
        let reject = lrt.p_value < 0.05;
        if reject {
            warnings.push(format!(
                "the {family} likelihood-ratio check rejects mean equality at the 5% level \
                 (p = {:.4}); equal-means estimates may be misleading",
                lrt.p_value
            ));
        }

        let mut rows = Vec::new();
        let mut row_idx = 0u64;
        for &kind in &kinds {
            let (label, p) = coefficient_label(kind);
            for &(fit_label, constrained) in fit_slots {
                let fit = if constrained { &con } else { &unc };
                let estimate = estimate_agreement(fit, kind)?.value();
                let use_asymptotic = match args.se {
                    SePolicyArg::Asymptotic => true,
                    SePolicyArg::Bootstrap => false,
                    SePolicyArg::Auto => constrained && !reject,
                };
                let se = if use_asymptotic {
                    match plug_in_asymptotic_se(&fit.covariance_parts(), n, kind) {
                        Ok(se) => RowSe {
                            se,
                            method: "asymptotic",
                            replicates: None,
                            failed: None,
                            seed: None,
                        },
                        Err(e) if args.se == SePolicyArg::Auto => {
                            warnings.push(format!(
                                "asymptotic standard error unavailable for {label} \
                                 ({fit_label}): {e}; falling back to bootstrap"
                            ));
                            bootstrap_row(
                                &ing.sample,
                                family,
                                constrained,
                                kind,
                                args.bootstrap_replicates,
                                stream_seed(ctx.seed, row_idx),
                            )?
                        }
                        Err(e) => return Err(e.into()),
                    }
                } else {
                    bootstrap_row(
                        &ing.sample,
                        family,
                        constrained,
                        kind,
                        args.bootstrap_replicates,
                        stream_seed(ctx.seed, row_idx),
                    )?
                };
                rows.push(EstimateRow {
                    coefficient: label,
                    p,
                    fit: fit_label,
                    estimate,
                    se: se.se,
                    se_method: se.method,
                    bootstrap_replicates: se.replicates,
                    bootstrap_failed: se.failed,
                    bootstrap_seed: se.seed,
                });
                row_idx += 1;
            }
        }
        let summary = MeanTestSummary {
            name: lrt.name.to_string(),
            statistic: lrt.statistic,
            df: lrt.df,
            p_value: lrt.p_value,
            reject_at_5pct: reject,
        };
        (
            Some(Convergence {
                unconstrained: FitFlags::of(&unc),
                constrained: FitFlags::of(&con),
            }),
            Some(summary),
            rows,
        )
    };

    let report = AgreeReport {
        command: "agree",
        version: VERSION,
        seed: ctx.seed,
        input: args.input.input.display().to_string(),
        columns: ing.columns.clone(),
        n,
        dropped_rows: ing.dropped,
        family: family.to_string(),
        convergence,
        mean_test,
        estimates,
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

fn render_csv(report: &AgreeReport) -> String {
    let mut out = String::from(
        "coefficient,p,fit,estimate,se,se_method,bootstrap_replicates,bootstrap_failed,bootstrap_seed\n",
    );
    for row in &report.estimates {
        let opt_u32 = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_u64 = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.coefficient,
            opt_u32(row.p),
            row.fit,
            csv_float(row.estimate),
            csv_float(row.se),
            row.se_method,
            opt_usize(row.bootstrap_replicates),
            opt_usize(row.bootstrap_failed),
            opt_u64(row.bootstrap_seed),
        ));
    }
    out
}

fn render_text(report: &AgreeReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "agreement estimates  (family: {}, n = {}, dropped rows: {})\n",
        report.family, report.n, report.dropped_rows
    ));
    out.push_str(&format!(
        "input: {} (columns {}, {})\n",
        report.input, report.columns[0], report.columns[1]
    ));
    if let Some(t) = &report.mean_test {
        out.push_str(&format!(
            "mean-equality check ({}): statistic {:.4}, df {}, p = {:.4} -> {}\n",
            t.name,
            t.statistic,
            t.df,
            t.p_value,
            if t.reject_at_5pct {
                "rejected at 5%"
            } else {
                "retained at 5%"
            }
        ));
    }
    out.push('\n');
    out.push_str(&format!(
        "{:<12} {:<14} {:>10} {:>10}  method\n",
        "coefficient", "fit", "estimate", "se"
    ));
    for row in &report.estimates {
        let label = match row.p {
            Some(p) => format!("{} (p={p})", row.coefficient),
            None => row.coefficient.to_string(),
        };
        let method = match row.bootstrap_replicates {
            Some(b) => format!("{} (B={b})", row.se_method),
            None => row.se_method.to_string(),
        };
        out.push_str(&format!(
            "{label:<12} {:<14} {:>10.4} {:>10.4}  {method}\n",
            row.fit, row.estimate, row.se
        ));
    }
    if !report.warnings.is_empty() {
        out.push('\n');
        for w in &report.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
    }
    out
}
