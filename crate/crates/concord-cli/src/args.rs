//! Command-line surface: one subcommand per task, with shared global flags
//! for seeding, output format, and output destination.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use concord_core::Family;

#[derive(Parser, Debug)]
#[command(
    name = "concord",
    version,
    about = "Agreement analysis for paired continuous measurements",
    long_about = "Estimates agreement coefficients (the squared-distance coefficient rho-c and \
                  an L1/L_p family) under Gaussian or heavy-tailed Laplace models, tests mean \
                  equality, runs distance diagnostics, computes model-free pair-average \
                  estimates, and orchestrates simulation studies."
)]
pub struct Cli {
    /// Seed for randomized steps (bootstrap resampling, envelope simulation).
    /// Falls back to the CONCORD_SEED environment variable, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Report format. Defaults to json; `gof` and `simulate` default to csv.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,

    /// Write the report to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate agreement coefficients under a fitted model
    Agree(AgreeArgs),
    /// Fit a bivariate model and report its parameters
    Fit(FitArgs),
    /// Test mean equality (Wald, score, gradient, likelihood ratio, Hotelling T2)
    TestMeans(TestMeansArgs),
    /// Distance diagnostics with a simulated envelope, as plot-ready data
    Gof(GofArgs),
    /// Model-free pair-average agreement estimate
    Ustat(UstatArgs),
    /// Run simulation scenarios from a configuration file
    Simulate(SimulateArgs),
}

/// Input file and column selection, shared by every data command.
#[derive(Args, Debug)]
pub struct InputArgs {
    /// CSV file with a header row and at least three data rows.
    #[arg(long, short = 'i')]
    pub input: PathBuf,

    /// The two columns to analyze: a comma-separated pair of header names
    /// or zero-based indices.
    #[arg(long, default_value = "0,1")]
    pub columns: String,
}

#[derive(Args, Debug)]
pub struct AgreeArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Model family to fit.
    #[arg(long, value_enum)]
    pub family: FamilyArg,

    /// Which coefficient(s) to report.
    #[arg(long, value_enum, default_value_t = CoefficientArg::All)]
    pub coefficient: CoefficientArg,

    /// Power for the lp coefficient (required with --coefficient lp).
    #[arg(long)]
    pub power: Option<u32>,

    /// Report only the equal-means (constrained) fit rows.
    #[arg(long)]
    pub constrained: bool,

    /// Standard-error method. auto = asymptotic for the equal-means fit when
    /// the mean-equality check is retained at the 5% level, bootstrap
    /// otherwise.
    #[arg(long, value_enum, default_value_t = SePolicyArg::Auto)]
    pub se: SePolicyArg,

    /// Bootstrap replicate count.
    #[arg(long, short = 'B', default_value_t = 1000)]
    pub bootstrap_replicates: usize,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Model family to fit.
    #[arg(long, value_enum)]
    pub family: FamilyArg,

    /// Impose the equal-means constraint.
    #[arg(long)]
    pub constrained: bool,
}

#[derive(Args, Debug)]
pub struct TestMeansArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Model family for the likelihood-based tests.
    #[arg(long, value_enum)]
    pub family: FamilyArg,
}

#[derive(Args, Debug)]
pub struct GofArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Model family to fit and diagnose.
    #[arg(long, value_enum)]
    pub family: FamilyArg,

    /// Diagnose the equal-means (constrained) fit instead.
    #[arg(long)]
    pub constrained: bool,

    /// Number of synthetic replicates behind the envelope bands.
    #[arg(long, default_value_t = 100)]
    pub envelope_sims: usize,
}

#[derive(Args, Debug)]
pub struct UstatArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Payoff function applied to the pairwise differences.
    #[arg(long, value_enum, default_value_t = PhiArg::Abs)]
    pub phi: PhiArg,

    /// Standard-error method.
    #[arg(long, value_enum, default_value_t = UstatSeArg::Asymptotic)]
    pub se: UstatSeArg,

    /// Bootstrap replicate count.
    #[arg(long, short = 'B', default_value_t = 1000)]
    pub bootstrap_replicates: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario configuration file (sections of key=value lines; see
    /// docs/scenario-config.md).
    #[arg(long, short = 'c')]
    pub config: PathBuf,

    /// Override every section's replicate count (e.g. 1000 for full tables).
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Which table(s) to emit.
    #[arg(long, value_enum, default_value_t = TableArg::All)]
    pub table: TableArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Laplace,
}

impl FamilyArg {
    pub fn to_family(self) -> Family {
        match self {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Laplace => Family::Laplace,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CoefficientArg {
    /// Both rho-c and rho-1.
    All,
    /// The squared-distance coefficient rho-c.
    Lin,
    /// The L1 coefficient rho-1.
    #[value(name = "l1")]
    L1,
    /// The power-family coefficient rho-p (needs --power).
    Lp,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SePolicyArg {
    Auto,
    Asymptotic,
    Bootstrap,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PhiArg {
    Abs,
    Square,
}

impl PhiArg {
    pub fn to_phi(self) -> concord_core::Phi {
        match self {
            PhiArg::Abs => concord_core::Phi::Abs,
            PhiArg::Square => concord_core::Phi::Square,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PhiArg::Abs => "abs",
            PhiArg::Square => "square",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum UstatSeArg {
    Asymptotic,
    Jackknife,
    Bootstrap,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    All,
    Estimates,
    StandardErrors,
    Sizes,
}
