//! Maximum-likelihood fitting of the bivariate Gaussian and Laplace models,
//! with and without the equal-means constraint, plus plug-in agreement
//! estimation from a fitted model.
//!
//! The Laplace fits use an EM-style iteration: conditional on the current
//! parameters, each observation receives the posterior mean of its inverse
//! squared mixing scale, `w_i = 1/(2 D_i)` with `D_i` the unsquared
//! Mahalanobis distance. These weights majorize the Laplace log-likelihood,
//! so every iteration ascends it; heavily outlying observations get small
//! weights. The equal-means fits alternate a weighted scatter update with the
//! generalized-least-squares update of the common mean.

use nalgebra::{Matrix2, Vector2};

use crate::concordance::{
    lin_gaussian_from_parts, rho1_gaussian_from_parts, rho_p_from_rho_c,
    scaled_phi_gaussian_from_parts, AgreementValue, Assumption, CoefficientKind,
};
use crate::error::{Error, Result};
use crate::sampling::{BivariateParts, BivariateSample, DensityGenerator, Family, ModelParams};
use crate::special::QuadratureSpec;
use crate::{lin_laplace, rho1_ec};

/// Iteration controls for the fitting routines: stop when the relative
/// log-likelihood change `|dl| / max(1, |l|)` falls below `tolerance`, or
/// after `max_iterations` updates (the latter flags non-convergence).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceSpec {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Config(format!(
                "convergence tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sample means and both covariance normalizations of a bivariate sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: Vector2<f64>,
    /// Maximum-likelihood scatter, divisor `n` (the plug-in convention).
    pub cov_ml: Matrix2<f64>,
    /// Unbiased covariance, divisor `n - 1` (the Hotelling T-squared convention).
    pub cov_unbiased: Matrix2<f64>,
}

impl SampleMoments {
    /// Difference of the two means.
    pub fn gamma(&self) -> f64 {
        self.mean[0] - self.mean[1]
    }
}

/// Means plus 1/n and 1/(n-1) covariance matrices. Requires n >= 2.
pub fn sample_moments(sample: &BivariateSample) -> Result<SampleMoments> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let nf = n as f64;
    let m1 = sample.x1().iter().sum::<f64>() / nf;
    let m2 = sample.x2().iter().sum::<f64>() / nf;
    let (mut a11, mut a12, mut a22) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let (x1, x2) = sample.pair(i);
        let d1 = x1 - m1;
        let d2 = x2 - m2;
        a11 += d1 * d1;
        a12 += d1 * d2;
        a22 += d2 * d2;
    }
    let ml = Matrix2::new(a11 / nf, a12 / nf, a12 / nf, a22 / nf);
    let unb = Matrix2::new(
        a11 / (nf - 1.0),
        a12 / (nf - 1.0),
        a12 / (nf - 1.0),
        a22 / (nf - 1.0),
    );
    Ok(SampleMoments {
        n,
        mean: Vector2::new(m1, m2),
        cov_ml: ml,
        cov_unbiased: unb,
    })
}

/// A fitted bivariate model.
#[derive(Clone, Debug)]
pub struct ModelFit {
    family: Family,
    constrained: bool,
    theta: ModelParams,
    lambda: Option<f64>,
    loglik: f64,
    weights: Vec<f64>,
    iterations: usize,
    converged: bool,
    loglik_trace: Vec<f64>,
}

impl ModelFit {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn constrained(&self) -> bool {
        self.constrained
    }

    pub fn theta(&self) -> &ModelParams {
        &self.theta
    }

    /// Scalar view of the fitted parameters.
    pub fn parts(&self) -> BivariateParts {
        self.theta
            .bivariate_parts()
            .expect("fits are always bivariate")
    }

    /// Fitted parameters on the covariance scale: for a Laplace fit the
    /// scatter entries are multiplied by 12 so that they equal the implied
    /// covariance matrix; Gaussian fits are returned unchanged.
    pub fn covariance_parts(&self) -> BivariateParts {
        let mut parts = self.parts();
        if self.family == Family::Laplace {
            parts.s11 *= 12.0;
            parts.s12 *= 12.0;
            parts.s22 *= 12.0;
        }
        parts
    }

    /// Common mean under the equal-means constraint.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Per-observation E-step weights at the returned parameters (all 1 for
    /// Gaussian fits).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn loglik_trace(&self) -> &[f64] {
        &self.loglik_trace
    }
}

/// 2x2 symmetric scatter in scalar form, with the quadratic-form helpers the
/// fitting loops need.
#[derive(Clone, Copy, Debug)]
struct Scatter2 {
    s11: f64,
    s12: f64,
    s22: f64,
}

impl Scatter2 {
    fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    fn check_pd(&self) -> Result<()> {
        if !(self.s11 > 0.0) || !(self.s22 > 0.0) || !(self.det() > 0.0) {
            return Err(Error::Estimation(
                "scatter matrix became singular: degenerate data".into(),
            ));
        }
        Ok(())
    }

    /// d' Sigma^{-1} d for d = (d1, d2).
    fn quadform(&self, d1: f64, d2: f64) -> f64 {
        (self.s22 * d1 * d1 - 2.0 * self.s12 * d1 * d2 + self.s11 * d2 * d2) / self.det()
    }

    /// Generalized-least-squares common mean: 1' Sigma^{-1} m / 1' Sigma^{-1} 1.
    fn common_mean(&self, m1: f64, m2: f64) -> f64 {
        ((self.s22 - self.s12) * m1 + (self.s11 - self.s12) * m2)
            / (self.s11 + self.s22 - 2.0 * self.s12)
    }
}

/// Floor on Mahalanobis distances in the E-step, so exact duplicates of the
/// current center cannot produce unbounded weights.
const DISTANCE_FLOOR: f64 = 1e-8;

const LN_2PI: f64 = 1.8378770664093453;
/// log(1/(8*pi)), the bivariate Laplace log-density at its center with unit
/// scatter.
const LAPLACE_CENTER_LOG: f64 = -3.2241714275292361;

fn gaussian_loglik(sample: &BivariateSample, mu1: f64, mu2: f64, sigma: &Scatter2) -> f64 {
    let n = sample.n() as f64;
    let mut quad = 0.0;
    for i in 0..sample.n() {
        let (x1, x2) = sample.pair(i);
        quad += sigma.quadform(x1 - mu1, x2 - mu2);
    }
    -n * LN_2PI - 0.5 * n * sigma.det().ln() - 0.5 * quad
}

fn laplace_loglik(sample: &BivariateSample, mu1: f64, mu2: f64, sigma: &Scatter2) -> f64 {
    let n = sample.n() as f64;
    let mut dist_sum = 0.0;
    for i in 0..sample.n() {
        let (x1, x2) = sample.pair(i);
        dist_sum += sigma.quadform(x1 - mu1, x2 - mu2).max(0.0).sqrt();
    }
    n * (LAPLACE_CENTER_LOG - 0.5 * sigma.det().ln()) - 0.5 * dist_sum
}

/// E-step weights `1/(2 D_i)` at the given parameters, distances floored.
fn laplace_weights(sample: &BivariateSample, mu1: f64, mu2: f64, sigma: &Scatter2) -> Vec<f64> {
    (0..sample.n())
        .map(|i| {
            let (x1, x2) = sample.pair(i);
            let d = sigma.quadform(x1 - mu1, x2 - mu2).max(0.0).sqrt();
            0.5 / d.max(DISTANCE_FLOOR)
        })
        .collect()
}

/// Weighted scatter (divisor n) about the given center.
fn weighted_scatter(
    sample: &BivariateSample,
    weights: &[f64],
    mu1: f64,
    mu2: f64,
) -> Scatter2 {
    let n = sample.n() as f64;
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    for i in 0..sample.n() {
        let (x1, x2) = sample.pair(i);
        let w = weights[i];
        let d1 = x1 - mu1;
        let d2 = x2 - mu2;
        a11 += w * d1 * d1;
        a12 += w * d1 * d2;
        a22 += w * d2 * d2;
    }
    Scatter2 {
        s11: a11 / n,
        s12: a12 / n,
        s22: a22 / n,
    }
}

fn build_fit(
    family: Family,
    constrained: bool,
    mu1: f64,
    mu2: f64,
    sigma: Scatter2,
    lambda: Option<f64>,
    loglik: f64,
    weights: Vec<f64>,
    iterations: usize,
    converged: bool,
    loglik_trace: Vec<f64>,
) -> Result<ModelFit> {
    let theta = ModelParams::bivariate(family, mu1, mu2, sigma.s11, sigma.s12, sigma.s22)
        .map_err(|e| Error::Estimation(format!("fitted parameters are degenerate: {e}")))?;
    Ok(ModelFit {
        family,
        constrained,
        theta,
        lambda,
        loglik,
        weights,
        iterations,
        converged,
        loglik_trace,
    })
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1.0)
}

fn require_n(sample: &BivariateSample, needed: usize) -> Result<()> {
    if sample.n() < needed {
        return Err(Error::TooFewObservations {
            needed,
            got: sample.n(),
        });
    }
    Ok(())
}

/// Gaussian maximum likelihood. Unconstrained: closed form (`mu = x-bar`,
/// `Sigma` the divisor-n scatter). Constrained (equal means): coordinate
/// ascent alternating the generalized-least-squares common mean with the
/// scatter about it.
pub fn fit_gaussian(
    sample: &BivariateSample,
    constrained: bool,
    spec: &ConvergenceSpec,
) -> Result<ModelFit> {
    require_n(sample, 3)?;
    spec.validate()?;
    let moments = sample_moments(sample)?;
    let (m1, m2) = (moments.mean[0], moments.mean[1]);
    let base = Scatter2 {
        s11: moments.cov_ml[(0, 0)],
        s12: moments.cov_ml[(0, 1)],
        s22: moments.cov_ml[(1, 1)],
    };
    base.check_pd()?;
    let ones = vec![1.0; sample.n()];
    if !constrained {
        let loglik = gaussian_loglik(sample, m1, m2, &base);
        return build_fit(
            Family::Gaussian,
            false,
            m1,
            m2,
            base,
            None,
            loglik,
            ones,
            0,
            true,
            vec![loglik],
        );
    }
    let mut sigma = base;
    let mut lambda = sigma.common_mean(m1, m2);
    let mut loglik = gaussian_loglik(sample, lambda, lambda, &sigma);
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..spec.max_iterations {
        iterations += 1;
        sigma = weighted_scatter(sample, &ones, lambda, lambda);
        sigma.check_pd()?;
        lambda = sigma.common_mean(m1, m2);
        let new_loglik = gaussian_loglik(sample, lambda, lambda, &sigma);
        let change = relative_change(new_loglik, loglik);
        loglik = new_loglik;
        trace.push(loglik);
        if change < spec.tolerance {
            converged = true;
            break;
        }
    }
    build_fit(
        Family::Gaussian,
        true,
        lambda,
        lambda,
        sigma,
        Some(lambda),
        loglik,
        ones,
        iterations,
        converged,
        trace,
    )
}

/// Bivariate Laplace maximum likelihood by EM. Starts from the Gaussian
/// estimates (scatter divided by 12, the Laplace variance factor), then
/// alternates the inverse-distance weights with weighted mean and scatter
/// updates until the log-likelihood stabilizes.
pub fn fit_laplace(sample: &BivariateSample, spec: &ConvergenceSpec) -> Result<ModelFit> {
    require_n(sample, 3)?;
    spec.validate()?;
    let moments = sample_moments(sample)?;
    let mut mu1 = moments.mean[0];
    let mut mu2 = moments.mean[1];
    let mut sigma = Scatter2 {
        s11: moments.cov_ml[(0, 0)] / 12.0,
        s12: moments.cov_ml[(0, 1)] / 12.0,
        s22: moments.cov_ml[(1, 1)] / 12.0,
    };
    sigma.check_pd()?;
    let mut loglik = laplace_loglik(sample, mu1, mu2, &sigma);
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..spec.max_iterations {
        iterations += 1;
        let weights = laplace_weights(sample, mu1, mu2, &sigma);
        let wsum: f64 = weights.iter().sum();
        let mut w1 = 0.0;
        let mut w2 = 0.0;
        for i in 0..sample.n() {
            let (x1, x2) = sample.pair(i);
            w1 += weights[i] * x1;
            w2 += weights[i] * x2;
        }
        mu1 = w1 / wsum;
        mu2 = w2 / wsum;
        sigma = weighted_scatter(sample, &weights, mu1, mu2);
        sigma.check_pd()?;
        let new_loglik = laplace_loglik(sample, mu1, mu2, &sigma);
        let change = relative_change(new_loglik, loglik);
        loglik = new_loglik;
        trace.push(loglik);
        if change < spec.tolerance {
            converged = true;
            break;
        }
    }
    let weights = laplace_weights(sample, mu1, mu2, &sigma);
    build_fit(
        Family::Laplace,
        false,
        mu1,
        mu2,
        sigma,
        None,
        loglik,
        weights,
        iterations,
        converged,
        trace,
    )
}

/// Bivariate Laplace maximum likelihood under the equal-means constraint, by
/// expectation/conditional-maximization: weights at distances from the common
/// mean, then the weighted mean is projected onto the equal-means line with
/// the current scatter's generalized-least-squares coefficients, then the
/// weighted scatter is recentered about the updated common mean.
pub fn fit_laplace_constrained(
    sample: &BivariateSample,
    spec: &ConvergenceSpec,
) -> Result<ModelFit> {
    require_n(sample, 3)?;
    spec.validate()?;
    let gaussian = fit_gaussian(sample, true, spec)?;
    let gp = gaussian.parts();
    let mut lambda = gaussian.lambda().expect("constrained fit has a common mean");
    let mut sigma = Scatter2 {
        s11: gp.s11 / 12.0,
        s12: gp.s12 / 12.0,
        s22: gp.s22 / 12.0,
    };
    sigma.check_pd()?;
    let mut loglik = laplace_loglik(sample, lambda, lambda, &sigma);
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..spec.max_iterations {
        iterations += 1;
        let weights = laplace_weights(sample, lambda, lambda, &sigma);
        let wsum: f64 = weights.iter().sum();
        let mut w1 = 0.0;
        let mut w2 = 0.0;
        for i in 0..sample.n() {
            let (x1, x2) = sample.pair(i);
            w1 += weights[i] * x1;
            w2 += weights[i] * x2;
        }
        // Project the weighted mean onto the equal-means line using the
        // current scatter.
        lambda = sigma.common_mean(w1 / wsum, w2 / wsum);
        sigma = weighted_scatter(sample, &weights, lambda, lambda);
        sigma.check_pd()?;
        let new_loglik = laplace_loglik(sample, lambda, lambda, &sigma);
        let change = relative_change(new_loglik, loglik);
        loglik = new_loglik;
        trace.push(loglik);
        if change < spec.tolerance {
            converged = true;
            break;
        }
    }
    let weights = laplace_weights(sample, lambda, lambda, &sigma);
    build_fit(
        Family::Laplace,
        true,
        lambda,
        lambda,
        sigma,
        Some(lambda),
        loglik,
        weights,
        iterations,
        converged,
        trace,
    )
}

/// Plugs a fitted model into the matching population coefficient.
///
/// Gaussian fits use the Gaussian closed forms; Laplace fits use the Laplace
/// moment structure (covariance `12 * Sigma`). The L1 coefficient under
/// unequal fitted means uses the model's own difference distribution: a
/// folded-normal ratio for Gaussian fits, and the Laplace-difference
/// generator by quadrature for Laplace fits. Under the equal-means constraint
/// the L1 value is exactly `1 - sqrt(1 - rho_c)`. The power-family
/// coefficient is always the `rho_p` map of the fitted Lin coefficient.
pub fn estimate_agreement(fit: &ModelFit, kind: CoefficientKind) -> Result<AgreementValue> {
    if !fit.converged() {
        return Err(Error::Estimation(
            "agreement estimation requires a converged fit".into(),
        ));
    }
    let parts = fit.parts();
    let gamma = parts.mu1 - parts.mu2;
    match fit.family() {
        Family::Gaussian => {
            let lin = lin_gaussian_from_parts(&parts);
            let value = match kind {
                CoefficientKind::Lin => lin,
                CoefficientKind::L1 => {
                    if gamma == 0.0 {
                        rho_p_from_rho_c(lin, 1)?
                    } else {
                        rho1_gaussian_from_parts(&parts)
                    }
                }
                CoefficientKind::Lp { p } => rho_p_from_rho_c(lin, p)?,
                CoefficientKind::ScaledPhi { phi } => {
                    scaled_phi_gaussian_from_parts(&parts, phi)
                }
            };
            AgreementValue::new(kind, Assumption::Gaussian, value)
        }
        Family::Laplace => {
            let lin = lin_laplace(fit.theta())?;
            let value = match kind {
                CoefficientKind::Lin => lin,
                CoefficientKind::L1 => {
                    if gamma == 0.0 {
                        rho_p_from_rho_c(lin, 1)?
                    } else {
                        let tau = (parts.s11 + parts.s22 - 2.0 * parts.s12).max(0.0).sqrt();
                        let indep_scale = (parts.s11 + parts.s22).sqrt();
                        rho1_ec(
                            gamma,
                            tau,
                            indep_scale,
                            &DensityGenerator::laplace_difference(),
                            &QuadratureSpec::default(),
                        )?
                    }
                }
                CoefficientKind::Lp { p } => rho_p_from_rho_c(lin, p)?,
                CoefficientKind::ScaledPhi { .. } => {
                    return Err(Error::Unsupported(
                        "the scaled phi coefficient is only available for Gaussian fits".into(),
                    ))
                }
            };
            AgreementValue::new(kind, Assumption::Laplace, value)
        }
        other => Err(Error::Unsupported(format!(
            "agreement estimation is not defined for {other} fits"
        ))),
    }
}
