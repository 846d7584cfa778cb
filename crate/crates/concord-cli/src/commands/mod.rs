//! One module per subcommand, plus the bits they share: the run context,
//! the rendered-output carrier, and fit plumbing.

pub mod agree;
pub mod fit;
pub mod gof;
pub mod simulate;
pub mod test_means;
pub mod ustat;

use concord_core::{
    fit_gaussian, fit_laplace, fit_laplace_constrained, BivariateSample, ConvergenceSpec, Family,
    ModelFit, Result as CoreResult,
};
use serde::Serialize;

use crate::args::OutputFormat;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings resolved once in `main` and shared by every command.
pub struct Ctx {
    pub seed: u64,
    pub format: OutputFormat,
}

/// A fully rendered report plus warnings for standard error. The body is
/// only written once the whole computation has succeeded.
pub struct Rendered {
    pub body: String,
    pub warnings: Vec<String>,
}

/// Convergence flags included in every model-based JSON report.
#[derive(Serialize)]
pub struct FitFlags {
    pub converged: bool,
    pub iterations: usize,
}

impl FitFlags {
    pub fn of(fit: &ModelFit) -> Self {
        Self {
            converged: fit.converged(),
            iterations: fit.iterations(),
        }
    }
}

#[derive(Serialize)]
pub struct Convergence {
    pub unconstrained: FitFlags,
    pub constrained: FitFlags,
}

/// Fits one family with or without the equal-means constraint.
pub fn fit_model(
    sample: &BivariateSample,
    family: Family,
    constrained: bool,
    spec: &ConvergenceSpec,
) -> CoreResult<ModelFit> {
    match (family, constrained) {
        (Family::Gaussian, c) => fit_gaussian(sample, c, spec),
        (Family::Laplace, false) => fit_laplace(sample, spec),
        (Family::Laplace, true) => fit_laplace_constrained(sample, spec),
        (other, _) => Err(concord_core::Error::Unsupported(format!(
            "no maximum-likelihood fit for the {other} family"
        ))),
    }
}

/// CSV field rendering for floats: shortest representation that round-trips.
pub fn csv_float(v: f64) -> String {
    format!("{v}")
}
