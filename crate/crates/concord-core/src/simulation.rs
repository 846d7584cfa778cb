//! Monte Carlo harness: draws samples from one of four bivariate laws at a
//! fixed scatter, fits the requested model families with and without the
//! equal-means constraint, aggregates agreement estimates and their
//! standard errors, and tallies empirical sizes of the mean-equality tests.
//! Renders estimate/standard-error/size grids as CSV and aligned text.

use rayon::prelude::*;

use crate::concordance::{CoefficientKind, Phi};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_agreement, fit_gaussian, fit_laplace, fit_laplace_constrained, ConvergenceSpec,
};
use crate::inference::{hotelling_t2, plug_in_asymptotic_se, test_means};
use crate::sampling::{sample_from_params, stream_seed, Contamination, Family, ModelParams};
use crate::ustat::ustat_estimate;

/// Scatter matrix used by the study design: unit variances with covariance
/// 0.95, 0.85, or 0.75 for m = 1, 2, 3.
pub fn scenario_sigma(m: usize) -> Result<(f64, f64, f64)> {
    match m {
        1 => Ok((1.0, 0.95, 1.0)),
        2 => Ok((1.0, 0.85, 1.0)),
        3 => Ok((1.0, 0.75, 1.0)),
        other => Err(Error::Config(format!(
            "scenario index m must be 1, 2, or 3, got {other}"
        ))),
    }
}

/// Population squared-distance agreement for scenario m: with unit variances
/// and equal means this is the covariance itself.
pub fn scenario_rho_c(m: usize) -> Result<f64> {
    Ok(scenario_sigma(m)?.1)
}

/// Population L1 agreement for scenario m, `1 - sqrt(1 - rho_c)`.
pub fn scenario_rho_1(m: usize) -> Result<f64> {
    Ok(1.0 - (1.0 - scenario_rho_c(m)?).sqrt())
}

/// One cell of the study design.
#[derive(Clone, Debug, PartialEq)]
pub struct SimScenario {
    family: Family,
    m: usize,
    n: usize,
    contamination: Option<Contamination>,
    replicates: usize,
    master_seed: u64,
    fitted_models: Vec<Family>,
}

impl SimScenario {
    pub fn new(
        family: Family,
        m: usize,
        n: usize,
        contamination: Option<Contamination>,
        replicates: usize,
        master_seed: u64,
        fitted_models: Vec<Family>,
    ) -> Result<Self> {
        scenario_sigma(m)?;
        if n < 4 {
            return Err(Error::Config(format!(
                "scenario sample size must be at least 4, got {n}"
            )));
        }
        if replicates == 0 {
            return Err(Error::Config("scenario needs at least 1 replicate".into()));
        }
        if (family == Family::ContaminatedNormal) != contamination.is_some() {
            return Err(Error::Config(
                "contamination parameters are required exactly for the contaminated-normal family"
                    .into(),
            ));
        }
        let mut fitted = Vec::new();
        for f in fitted_models {
            if f != Family::Gaussian && f != Family::Laplace {
                return Err(Error::Config(format!(
                    "only gaussian and laplace fits are supported, got {f}"
                )));
            }
            if !fitted.contains(&f) {
                fitted.push(f);
            }
        }
        if fitted.is_empty() {
            return Err(Error::Config(
                "scenario must request at least one fitted model".into(),
            ));
        }
        Ok(Self {
            family,
            m,
            n,
            contamination,
            replicates,
            master_seed,
            fitted_models: fitted,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contamination(&self) -> Option<Contamination> {
        self.contamination
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn fitted_models(&self) -> &[Family] {
        &self.fitted_models
    }

    /// Data-generating parameters: zero means, scenario scatter, and the
    /// scenario's contamination if any.
    pub fn population(&self) -> Result<ModelParams> {
        let (s11, s12, s22) = scenario_sigma(self.m)?;
        match self.contamination {
            Some(c) => ModelParams::bivariate_contaminated(0.0, 0.0, s11, s12, s22, c),
            None => ModelParams::bivariate(self.family, 0.0, 0.0, s11, s12, s22),
        }
    }
}

/// Replicate averages for one estimator: mean estimate, spread of the
/// estimates, and mean reported standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoeffStats {
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub mean_se: f64,
}

/// Empirical rejection rates at the nominal 5% level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestSizes {
    pub score: f64,
    pub gradient: f64,
    pub wald: f64,
    pub lrt: f64,
    pub hotelling_t2: f64,
}

/// Per-fitted-family aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyStats {
    pub fitted: Family,
    pub lin: CoeffStats,
    pub l1: CoeffStats,
    pub sizes: TestSizes,
}

/// Aggregated results of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct SimCell {
    scenario: SimScenario,
    by_family: Vec<FamilyStats>,
    ustat_square: CoeffStats,
    ustat_abs: CoeffStats,
    failed_replicates: usize,
}

impl SimCell {
    pub fn scenario(&self) -> &SimScenario {
        &self.scenario
    }

    pub fn by_family(&self) -> &[FamilyStats] {
        &self.by_family
    }

    pub fn family_stats(&self, fitted: Family) -> Option<&FamilyStats> {
        self.by_family.iter().find(|f| f.fitted == fitted)
    }

    /// Squared-payoff U-statistic aggregates.
    pub fn ustat_square(&self) -> CoeffStats {
        self.ustat_square
    }

    /// Absolute-payoff U-statistic aggregates.
    pub fn ustat_abs(&self) -> CoeffStats {
        self.ustat_abs
    }

    pub fn failed_replicates(&self) -> usize {
        self.failed_replicates
    }
}

/// Raw per-replicate numbers before aggregation.
struct ReplicateOutcome {
    /// (estimate, se) for lin and l1, per fitted family in scenario order.
    plug_ins: Vec<[(f64, f64); 2]>,
    /// Rejections at 5%: score, gradient, wald, lrt per family.
    rejections: Vec<[bool; 4]>,
    hotelling_rejects: bool,
    ustat: [(f64, f64); 2],
}

fn run_replicate(scenario: &SimScenario, seed: u64) -> Result<ReplicateOutcome> {
    let spec = ConvergenceSpec::default();
    let population = scenario.population()?;
    let sample = sample_from_params(&population, scenario.n(), seed)?;

    let mut plug_ins = Vec::with_capacity(scenario.fitted_models().len());
    let mut rejections = Vec::with_capacity(scenario.fitted_models().len());
    for &fitted in scenario.fitted_models() {
        let (unconstrained, constrained) = match fitted {
            Family::Gaussian => (
                fit_gaussian(&sample, false, &spec)?,
                fit_gaussian(&sample, true, &spec)?,
            ),
            Family::Laplace => (
                fit_laplace(&sample, &spec)?,
                fit_laplace_constrained(&sample, &spec)?,
            ),
            _ => unreachable!("validated in SimScenario::new"),
        };
        let mut pair = [(0.0, 0.0); 2];
        for (slot, kind) in pair
            .iter_mut()
            .zip([CoefficientKind::Lin, CoefficientKind::L1])
        {
            let value = estimate_agreement(&constrained, kind)?.value();
            let se =
                plug_in_asymptotic_se(&constrained.covariance_parts(), scenario.n(), kind)?;
            *slot = (value, se);
        }
        plug_ins.push(pair);

        let tests = test_means(&sample, &unconstrained, &constrained, None)?;
        rejections.push([
            tests[1].p_value < 0.05,
            tests[2].p_value < 0.05,
            tests[0].p_value < 0.05,
            tests[3].p_value < 0.05,
        ]);
    }

    let hotelling_rejects = hotelling_t2(&sample, None)?.p_value < 0.05;

    let mut ustat = [(0.0, 0.0); 2];
    for (slot, phi) in ustat.iter_mut().zip([Phi::Square, Phi::Abs]) {
        let est = ustat_estimate(&sample, phi)?;
        *slot = (est.rho_hat(), est.se());
    }

    Ok(ReplicateOutcome {
        plug_ins,
        rejections,
        hotelling_rejects,
        ustat,
    })
}

fn aggregate_coeff(values: &[(f64, f64)]) -> CoeffStats {
    let r = values.len() as f64;
    let mean_estimate = values.iter().map(|v| v.0).sum::<f64>() / r;
    let mean_se = values.iter().map(|v| v.1).sum::<f64>() / r;
    let sd_estimate = if values.len() > 1 {
        (values
            .iter()
            .map(|v| (v.0 - mean_estimate) * (v.0 - mean_estimate))
            .sum::<f64>()
            / (r - 1.0))
            .sqrt()
    } else {
        0.0
    };
    CoeffStats {
        mean_estimate,
        sd_estimate,
        mean_se,
    }
}

/// Runs every replicate of a scenario and aggregates. Replicate r draws its
/// sample with seed `stream_seed(master_seed, r)`; failed replicates (fit
/// errors or non-convergence) are skipped and counted, and the cell fails if
/// more than 10% of replicates fail. Deterministic given the scenario.
pub fn run_scenario(scenario: &SimScenario) -> Result<SimCell> {
    let outcomes: Vec<Result<ReplicateOutcome>> = (0..scenario.replicates() as u64)
        .into_par_iter()
        .map(|rep| run_replicate(scenario, stream_seed(scenario.master_seed(), rep)))
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    if 10 * failed > scenario.replicates() {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err())
            .map(|e| format!("; first error: {e}"))
            .unwrap_or_default();
        return Err(Error::Estimation(format!(
            "{failed} of {} replicates failed{first}",
            scenario.replicates()
        )));
    }
    let good: Vec<&ReplicateOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let r = good.len() as f64;

    let mut by_family = Vec::with_capacity(scenario.fitted_models().len());
    for (idx, &fitted) in scenario.fitted_models().iter().enumerate() {
        let lin: Vec<(f64, f64)> = good.iter().map(|o| o.plug_ins[idx][0]).collect();
        let l1: Vec<(f64, f64)> = good.iter().map(|o| o.plug_ins[idx][1]).collect();
        let count = |pick: fn(&[bool; 4]) -> bool| {
            good.iter().filter(|o| pick(&o.rejections[idx])).count() as f64 / r
        };
        by_family.push(FamilyStats {
            fitted,
            lin: aggregate_coeff(&lin),
            l1: aggregate_coeff(&l1),
            sizes: TestSizes {
                score: count(|rej| rej[0]),
                gradient: count(|rej| rej[1]),
                wald: count(|rej| rej[2]),
                lrt: count(|rej| rej[3]),
                hotelling_t2: good.iter().filter(|o| o.hotelling_rejects).count() as f64 / r,
            },
        });
    }

    let square: Vec<(f64, f64)> = good.iter().map(|o| o.ustat[0]).collect();
    let abs: Vec<(f64, f64)> = good.iter().map(|o| o.ustat[1]).collect();
    Ok(SimCell {
        scenario: scenario.clone(),
        by_family,
        ustat_square: aggregate_coeff(&square),
        ustat_abs: aggregate_coeff(&abs),
        failed_replicates: failed,
    })
}

/// Which statistic a rendered table aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableLayout {
    Estimates,
    StandardErrors,
    Sizes,
}

/// Rendered grid: machine-readable CSV, aligned text, and any warnings about
/// gaps in the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TableDocument {
    pub csv: String,
    pub text: String,
    pub warnings: Vec<String>,
}

fn condition_key(s: &SimScenario) -> (String, String, String) {
    let (eps, eta) = match s.contamination() {
        Some(c) => (format!("{}", c.epsilon()), format!("{}", c.eta())),
        None => (String::new(), String::new()),
    };
    (s.family().to_string(), eps, eta)
}

fn estimate_rows(fitted: &[Family]) -> Vec<(String, Option<Family>, usize)> {
    // (row label, fitted family if model-based, slot: 0 = lin, 1 = l1,
    //  2 = ustat-square, 3 = ustat-abs)
    let mut rows = Vec::new();
    for &f in fitted {
        rows.push((format!("{f} rho-c"), Some(f), 0));
        rows.push((format!("{f} rho-1"), Some(f), 1));
    }
    rows.push(("ustat square".into(), None, 2));
    rows.push(("ustat abs".into(), None, 3));
    rows
}

const SIZE_TESTS: [&str; 5] = ["score", "gradient", "wald", "hotelling-t2", "lrt"];

fn size_value(stats: &FamilyStats, test: &str) -> f64 {
    match test {
        "score" => stats.sizes.score,
        "gradient" => stats.sizes.gradient,
        "wald" => stats.sizes.wald,
        "hotelling-t2" => stats.sizes.hotelling_t2,
        "lrt" => stats.sizes.lrt,
        _ => unreachable!(),
    }
}

/// Renders a list of cells as one table per layout. Cells are grouped by
/// data-generating condition (family, contamination); columns are the (m, n)
/// pairs present anywhere in the list, sorted by m then n; gaps become blank
/// fields and a warning. Byte-identical output for identical input.
pub fn render_tables(cells: &[SimCell], layout: TableLayout) -> Result<TableDocument> {
    if cells.is_empty() {
        return Err(Error::Config("no cells to render".into()));
    }

    // Column grid.
    let mut columns: Vec<(usize, usize)> = Vec::new();
    for c in cells {
        let key = (c.scenario().m(), c.scenario().n());
        if !columns.contains(&key) {
            columns.push(key);
        }
    }
    columns.sort_unstable();

    // Row groups in first-appearance order.
    let mut groups: Vec<(String, String, String)> = Vec::new();
    for c in cells {
        let key = condition_key(c.scenario());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }

    let mut warnings = Vec::new();
    let mut csv = String::new();
    let mut text = String::new();
    let header_label = match layout {
        TableLayout::Estimates => "estimator",
        TableLayout::StandardErrors => "estimator",
        TableLayout::Sizes => "test",
    };
    csv.push_str(&format!("family,epsilon,eta,fitted,{header_label}"));
    for (m, n) in &columns {
        csv.push_str(&format!(",m{m}_n{n}"));
    }
    csv.push('\n');

    for group in &groups {
        let group_cells: Vec<&SimCell> = cells
            .iter()
            .filter(|c| condition_key(c.scenario()) == *group)
            .collect();
        text.push_str(&format!("data: {}", group.0));
        if !group.1.is_empty() {
            text.push_str(&format!(" (epsilon={}, eta={})", group.1, group.2));
        }
        text.push('\n');
        let mut text_header = format!("{:<24} {:<14}", header_label, "fitted");
        for &(m, n) in &columns {
            text_header.push_str(&format!(" {:>8}", format!("m{m}/n{n}")));
        }
        text.push_str(&text_header);
        text.push('\n');
        let find = |m: usize, n: usize| {
            group_cells
                .iter()
                .find(|c| c.scenario().m() == m && c.scenario().n() == n)
                .copied()
        };
        let fitted = group_cells[0].scenario().fitted_models().to_vec();

        // (fitted label, row label, accessor) triples for this layout.
        let rows: Vec<(String, String, Box<dyn Fn(&SimCell) -> Option<f64>>)> = match layout {
            TableLayout::Estimates | TableLayout::StandardErrors => {
                let pick_mean = layout == TableLayout::Estimates;
                estimate_rows(&fitted)
                    .into_iter()
                    .map(|(label, fam, slot)| {
                        let fitted_label = fam.map(|f| f.to_string()).unwrap_or_default();
                        let accessor: Box<dyn Fn(&SimCell) -> Option<f64>> =
                            Box::new(move |cell: &SimCell| {
                                let stats = match (fam, slot) {
                                    (Some(f), 0) => cell.family_stats(f)?.lin,
                                    (Some(f), _) => cell.family_stats(f)?.l1,
                                    (None, 2) => cell.ustat_square(),
                                    (None, _) => cell.ustat_abs(),
                                };
                                Some(if pick_mean {
                                    stats.mean_estimate
                                } else {
                                    stats.mean_se
                                })
                            });
                        (fitted_label, label, accessor)
                    })
                    .collect()
            }
            TableLayout::Sizes => {
                let mut rows: Vec<(String, String, Box<dyn Fn(&SimCell) -> Option<f64>>)> =
                    Vec::new();
                for &f in &fitted {
                    for test in SIZE_TESTS {
                        let accessor: Box<dyn Fn(&SimCell) -> Option<f64>> =
                            Box::new(move |cell: &SimCell| {
                                cell.family_stats(f).map(|s| size_value(s, test))
                            });
                        rows.push((f.to_string(), test.to_string(), accessor));
                    }
                }
                rows
            }
        };

        for (fitted_label, row_label, accessor) in rows {
            csv.push_str(&format!(
                "{},{},{},{fitted_label},{row_label}",
                group.0, group.1, group.2
            ));
            let mut text_line = format!("{:<24} {:<14}", row_label, fitted_label);
            for &(m, n) in &columns {
                match find(m, n).and_then(|cell| accessor(cell)) {
                    Some(v) => {
                        csv.push_str(&format!(",{v}"));
                        text_line.push_str(&format!(" {v:>8.4}"));
                    }
                    None => {
                        csv.push(',');
                        text_line.push_str(&format!(" {:>8}", "-"));
                        let w = format!("missing cell: family={} m={m} n={n}", group.0);
                        if !warnings.contains(&w) {
                            warnings.push(w);
                        }
                    }
                }
            }
            csv.push('\n');
            text.push_str(&text_line);
            text.push('\n');
        }
        text.push('\n');
    }

    Ok(TableDocument {
        csv,
        text,
        warnings,
    })
}

/// Parses a plain-text scenario configuration. One `[section]` per study
/// condition; keys `family`, `m`, `n`, `epsilon`, `eta`, `replicates`,
/// `seed`, `fits`; `m` and `n` accept comma lists and expand to their grid,
/// row-major with m outermost, cell i taking master seed
/// `stream_seed(section_seed, i)`. `#` starts a comment. `fits` defaults to
/// `gaussian,laplace`; `replicates` to 1000; `seed` to 0.
pub fn parse_scenario_config(text: &str) -> Result<Vec<SimScenario>> {
    struct Section {
        name: String,
        family: Option<Family>,
        ms: Vec<usize>,
        ns: Vec<usize>,
        epsilon: Option<f64>,
        eta: Option<f64>,
        replicates: usize,
        seed: u64,
        fits: Vec<Family>,
    }

    impl Section {
        fn new(name: &str) -> Self {
            Self {
                name: name.to_string(),
                family: None,
                ms: Vec::new(),
                ns: Vec::new(),
                epsilon: None,
                eta: None,
                replicates: 1000,
                seed: 0,
                fits: vec![Family::Gaussian, Family::Laplace],
            }
        }

        fn into_scenarios(self) -> Result<Vec<SimScenario>> {
            let family = self.family.ok_or_else(|| {
                Error::Config(format!("section [{}] is missing 'family'", self.name))
            })?;
            if self.ms.is_empty() || self.ns.is_empty() {
                return Err(Error::Config(format!(
                    "section [{}] needs both 'm' and 'n'",
                    self.name
                )));
            }
            let contamination = match (self.epsilon, self.eta) {
                (Some(e), Some(h)) => Some(Contamination::new(e, h)?),
                (None, None) => None,
                _ => {
                    return Err(Error::Config(format!(
                        "section [{}] must set both epsilon and eta or neither",
                        self.name
                    )))
                }
            };
            let mut out = Vec::new();
            let mut index = 0u64;
            for &m in &self.ms {
                for &n in &self.ns {
                    out.push(SimScenario::new(
                        family,
                        m,
                        n,
                        contamination,
                        self.replicates,
                        stream_seed(self.seed, index),
                        self.fits.clone(),
                    )?);
                    index += 1;
                }
            }
            Ok(out)
        }
    }

    fn parse_family(value: &str) -> Result<Family> {
        match value {
            "gaussian" => Ok(Family::Gaussian),
            "laplace" => Ok(Family::Laplace),
            "cauchy" => Ok(Family::Cauchy),
            "contaminated-normal" => Ok(Family::ContaminatedNormal),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }

    fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
        value
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse '{}' in '{key}'", p.trim())))
            })
            .collect()
    }

    let mut sections: Vec<Section> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push(Section::new(name.trim()));
            continue;
        }
        let section = sections.last_mut().ok_or_else(|| {
            Error::Config(format!(
                "line {}: key outside of any [section]",
                lineno + 1
            ))
        })?;
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "family" => section.family = Some(parse_family(value)?),
            "m" => section.ms = parse_list(value, "m")?,
            "n" => section.ns = parse_list(value, "n")?,
            "epsilon" => {
                section.epsilon = Some(value.parse().map_err(|_| {
                    Error::Config(format!("cannot parse epsilon '{value}'"))
                })?)
            }
            "eta" => {
                section.eta = Some(
                    value
                        .parse()
                        .map_err(|_| Error::Config(format!("cannot parse eta '{value}'")))?,
                )
            }
            "replicates" => {
                section.replicates = value.parse().map_err(|_| {
                    Error::Config(format!("cannot parse replicates '{value}'"))
                })?
            }
            "seed" => {
                section.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse seed '{value}'")))?
            }
            "fits" => {
                section.fits = value
                    .split(',')
                    .map(|p| parse_family(p.trim()))
                    .collect::<Result<_>>()?
            }
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    if sections.is_empty() {
        return Err(Error::Config("configuration has no [section]".into()));
    }
    let mut out = Vec::new();
    for s in sections {
        out.extend(s.into_scenarios()?);
    }
    Ok(out)
}
