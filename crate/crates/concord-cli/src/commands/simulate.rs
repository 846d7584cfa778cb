//! The `simulate` command: runs every scenario cell from a configuration
//! file and renders the estimate, standard-error, and size tables.

use anyhow::Context;
use concord_core::{
    parse_scenario_config, render_tables, run_scenario, CoeffStats, FamilyStats, SimCell,
    SimScenario, TableLayout, TestSizes,
};
use serde::Serialize;

use super::{Ctx, Rendered, VERSION};
use crate::args::{OutputFormat, SimulateArgs, TableArg};
use crate::json::to_json_string;

#[derive(Serialize)]
struct CoeffOut {
    mean_estimate: f64,
    sd_estimate: f64,
    mean_se: f64,
}

impl CoeffOut {
    fn of(c: CoeffStats) -> Self {
        Self {
            mean_estimate: c.mean_estimate,
            sd_estimate: c.sd_estimate,
            mean_se: c.mean_se,
        }
    }
}

#[derive(Serialize)]
struct SizesOut {
    score: f64,
    gradient: f64,
    wald: f64,
    lrt: f64,
    hotelling_t2: f64,
}

impl SizesOut {
    fn of(s: TestSizes) -> Self {
        Self {
            score: s.score,
            gradient: s.gradient,
            wald: s.wald,
            lrt: s.lrt,
            hotelling_t2: s.hotelling_t2,
        }
    }
}

#[derive(Serialize)]
struct FitStatsOut {
    fitted: String,
    lin: CoeffOut,
    l1: CoeffOut,
    sizes: SizesOut,
}

impl FitStatsOut {
    fn of(f: &FamilyStats) -> Self {
        Self {
            fitted: f.fitted.to_string(),
            lin: CoeffOut::of(f.lin),
            l1: CoeffOut::of(f.l1),
            sizes: SizesOut::of(f.sizes),
        }
    }
}

#[derive(Serialize)]
struct CellOut {
    family: String,
    m: usize,
    n: usize,
    epsilon: Option<f64>,
    eta: Option<f64>,
    replicates: usize,
    seed: u64,
    failed_replicates: usize,
    fits: Vec<FitStatsOut>,
    ustat_square: CoeffOut,
    ustat_abs: CoeffOut,
}

impl CellOut {
    fn of(cell: &SimCell) -> Self {
        let sc = cell.scenario();
        Self {
            family: sc.family().to_string(),
            m: sc.m(),
            n: sc.n(),
            epsilon: sc.contamination().map(|c| c.epsilon()),
            eta: sc.contamination().map(|c| c.eta()),
            replicates: sc.replicates(),
            seed: sc.master_seed(),
            failed_replicates: cell.failed_replicates(),
            fits: cell.by_family().iter().map(FitStatsOut::of).collect(),
            ustat_square: CoeffOut::of(cell.ustat_square()),
            ustat_abs: CoeffOut::of(cell.ustat_abs()),
        }
    }
}

#[derive(Serialize)]
struct SimulateReport {
    command: &'static str,
    version: &'static str,
    config: String,
    replicates_override: Option<usize>,
    cells: Vec<CellOut>,
    warnings: Vec<String>,
}

fn chosen_layouts(table: TableArg) -> Vec<(TableLayout, &'static str)> {
    match table {
        TableArg::All => vec![
            (TableLayout::Estimates, "estimates"),
            (TableLayout::StandardErrors, "standard-errors"),
            (TableLayout::Sizes, "sizes"),
        ],
        TableArg::Estimates => vec![(TableLayout::Estimates, "estimates")],
        TableArg::StandardErrors => vec![(TableLayout::StandardErrors, "standard-errors")],
        TableArg::Sizes => vec![(TableLayout::Sizes, "sizes")],
    }
}

pub fn run(args: &SimulateArgs, ctx: &Ctx) -> anyhow::Result<Rendered> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))?;
    let mut scenarios = parse_scenario_config(&text)?;
    if let Some(reps) = args.replicates {
        scenarios = scenarios
            .into_iter()
            .map(|s| {
                SimScenario::new(
                    s.family(),
                    s.m(),
                    s.n(),
                    s.contamination(),
                    reps,
                    s.master_seed(),
                    s.fitted_models().to_vec(),
                )
            })
            .collect::<concord_core::Result<Vec<_>>>()?;
    }
    let cells: Vec<SimCell> = scenarios
        .iter()
        .map(run_scenario)
        .collect::<concord_core::Result<_>>()?;

    let mut warnings: Vec<String> = Vec::new();
    for cell in &cells {
        if cell.failed_replicates() > 0 {
            let sc = cell.scenario();
            warnings.push(format!(
                "{} m={} n={}: {} of {} replicates failed and were excluded",
                sc.family(),
                sc.m(),
                sc.n(),
                cell.failed_replicates(),
                sc.replicates()
            ));
        }
    }

    let body = match ctx.format {
        OutputFormat::Json => {
            let report = SimulateReport {
                command: "simulate",
                version: VERSION,
                config: args.config.display().to_string(),
                replicates_override: args.replicates,
                cells: cells.iter().map(CellOut::of).collect(),
                warnings: warnings.clone(),
            };
            let mut s = to_json_string(&report)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut out = String::new();
            for (layout, label) in chosen_layouts(args.table) {
                let doc = render_tables(&cells, layout)?;
                out.push_str(&format!("# table: {label}\n"));
                out.push_str(&doc.csv);
                out.push('\n');
                warnings.extend(doc.warnings);
            }
            out
        }
        OutputFormat::Text => {
            let mut out = String::new();
            for (layout, label) in chosen_layouts(args.table) {
                let doc = render_tables(&cells, layout)?;
                out.push_str(&format!("== {label} ==\n"));
                out.push_str(&doc.text);
                out.push('\n');
                warnings.extend(doc.warnings);
            }
            out
        }
    };
    Ok(Rendered { body, warnings })
}
