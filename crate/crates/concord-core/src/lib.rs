//! Agreement analysis for paired continuous measurements.
//!
//! This crate implements concordance coefficients — the classical
//! squared-distance coefficient and an L1/L_p family — under Gaussian,
//! elliptically contoured, and bivariate heavy-tailed (Laplace) models,
//! together with:
//!
//! * maximum-likelihood fitting, including EM/ECM schemes with an
//!   equal-means constraint,
//! * large-sample tests of mean equality (Wald, score, gradient, likelihood
//!   ratio, Hotelling T²),
//! * distribution-free U-statistic estimators with asymptotic variances,
//! * Wilson–Hilferty distance diagnostics with simulated envelopes, and
//! * a deterministic Monte Carlo harness for estimator and test-size studies.

pub mod concordance;
pub mod error;
pub mod estimation;
pub mod gof;
pub mod inference;
pub mod sampling;
pub mod simulation;
pub mod special;
pub mod ustat;

pub use concordance::{
    folded_normal_mean, lin_ec, lin_gaussian, lin_laplace, rho1_ec, rho1_gaussian,
    rho1_gaussian_from_parts, rho_p_from_rho_c, scaled_phi_gaussian, AgreementValue, Assumption,
    CoefficientKind, Phi, RHO1_LOWER_BOUND,
};
pub use error::{Error, Result};
pub use estimation::{
    estimate_agreement, fit_gaussian, fit_laplace, fit_laplace_constrained, sample_moments,
    ConvergenceSpec, ModelFit, SampleMoments,
};
pub use gof::{
    distance_fhat_z, fitted_distances, gof_report, jarque_bera, wilson_hilferty_z, EnvelopeBand,
    GofReport,
};
pub use inference::{
    bootstrap_se, bootstrap_se_detailed, commutation_matrix, duplication_matrix, fisher_z,
    fisher_z_inverse, hotelling_t2, laplace_excess_kurtosis, lin_asymptotic_variance,
    plug_in_asymptotic_se, rho_p_asymptotic_variance, test_means, vech_s_asymptotic_cov,
    AgreementEstimate, BootstrapSummary, SeMethod, TestName, TestResult,
};
pub use sampling::{
    builtin_generators, sample_cauchy, sample_contaminated, sample_from_params, sample_gaussian,
    sample_laplace, stream_seed, BivariateParts, BivariateSample, Contamination, DensityGenerator,
    Family, ModelParams, ScatterMatrix,
};
pub use simulation::{
    parse_scenario_config, render_tables, run_scenario, scenario_rho_1, scenario_rho_c,
    scenario_sigma, CoeffStats, FamilyStats, SimCell, SimScenario, TableDocument, TableLayout,
    TestSizes,
};
pub use special::QuadratureSpec;
pub use ustat::{ustat_estimate, ustat_variance, ustat_variance_jackknife, UStatEstimate};
