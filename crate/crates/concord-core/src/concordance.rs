//! Population-level agreement coefficients for paired measurements.
//!
//! The central quantity is Lin's concordance coefficient
//! `rho_c = 2*sigma12 / (sigma11 + sigma22 + (mu1 - mu2)^2)`, together with an
//! L1-based relative `rho_1 = 1 - E|X1 - X2| / E0|X1 - X2|` (the denominator
//! taken under independence with the same marginal locations and scales) and
//! its power-family generalization `rho_p`. All functions here are pure
//! closed forms or one-dimensional quadratures over a density generator.

use crate::error::{Error, Result};
use crate::sampling::{BivariateParts, DensityGenerator, ModelParams};
use crate::special::{integrate_1d, std_normal_cdf, QuadratureSpec};

/// Distance function used by the scaled agreement coefficient and the
/// U-statistic estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phi {
    /// phi(z) = |z|
    Abs,
    /// phi(z) = z^2
    Square,
}

impl Phi {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Phi::Abs => z.abs(),
            Phi::Square => z * z,
        }
    }
}

/// Which member of the agreement-coefficient family a value belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientKind {
    /// Lin's concordance coefficient (squared-distance form).
    Lin,
    /// The L1 coefficient `rho_1`.
    L1,
    /// The power-family coefficient `rho_p = 1 - (1 - rho_c)^(p/2)`.
    Lp { p: u32 },
    /// The scaled coefficient built from five phi-expectations.
    ScaledPhi { phi: Phi },
}

/// Model under which a population value was computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Assumption {
    Gaussian,
    Laplace,
    /// Elliptically-contoured model identified by its generator label.
    Ec { generator: String },
}

/// A labelled population agreement value with range validation.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementValue {
    kind: CoefficientKind,
    assumption: Assumption,
    value: f64,
}

/// Smallest attainable value of the L1 coefficient, `1 - sqrt(2)`.
pub const RHO1_LOWER_BOUND: f64 = -0.41421356237309515;

impl AgreementValue {
    pub fn new(kind: CoefficientKind, assumption: Assumption, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Domain(format!(
                "agreement value must be finite, got {value}"
            )));
        }
        let tol = 1e-9;
        let in_range = match kind {
            CoefficientKind::Lin | CoefficientKind::ScaledPhi { .. } => {
                value >= -1.0 - tol && value <= 1.0 + tol
            }
            CoefficientKind::L1 => value > RHO1_LOWER_BOUND - tol && value <= 1.0 + tol,
            CoefficientKind::Lp { .. } => value <= 1.0 + tol,
        };
        if !in_range {
            return Err(Error::Domain(format!(
                "value {value} outside the admissible range for {kind:?}"
            )));
        }
        Ok(Self {
            kind,
            assumption,
            value,
        })
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn assumption(&self) -> &Assumption {
        &self.assumption
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Mean of |W| for W ~ N(mean, variance). A zero (or numerically negative)
/// variance degenerates to |mean|.
pub fn folded_normal_mean(mean: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return mean.abs();
    }
    let sd = variance.sqrt();
    let standardized = mean / sd;
    mean * (1.0 - 2.0 * std_normal_cdf(-standardized))
        + sd * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * standardized * standardized).exp()
}

/// Lin's coefficient under the Gaussian model, from scalar moments.
pub fn lin_gaussian_from_parts(parts: &BivariateParts) -> f64 {
    let gamma = parts.mu1 - parts.mu2;
    2.0 * parts.s12 / (parts.s11 + parts.s22 + gamma * gamma)
}

/// Lin's coefficient `2*sigma12 / (sigma11 + sigma22 + (mu1 - mu2)^2)`.
pub fn lin_gaussian(params: &ModelParams) -> Result<f64> {
    Ok(lin_gaussian_from_parts(&params.bivariate_parts()?))
}

/// Lin's coefficient under the bivariate Laplace model, from scalar moments.
pub fn lin_laplace_from_parts(parts: &BivariateParts) -> f64 {
    let gamma = parts.mu1 - parts.mu2;
    24.0 * parts.s12 / (12.0 * (parts.s11 + parts.s22) + gamma * gamma)
}

/// Lin's coefficient for the bivariate Laplace model, whose covariance is
/// `12 * Sigma`: `24*sigma12 / (12*(sigma11 + sigma22) + (mu1 - mu2)^2)`.
/// Reduces to `2*sigma12/(sigma11 + sigma22)` under equal means.
pub fn lin_laplace(params: &ModelParams) -> Result<f64> {
    Ok(lin_laplace_from_parts(&params.bivariate_parts()?))
}

/// Lin's coefficient for a bivariate elliptically-contoured model with
/// second radial moment `E(R^2)`:
///
/// `rho_c = rho * C12` with `C12 = 2 / (b + 1/b + a^2 / (E(R^2)/2))`,
/// `a = (mu1 - mu2) / (sigma11 * sigma22)^(1/4)` and `b = sqrt(sigma11/sigma22)`.
///
/// `E(R^2) = 2` recovers the Gaussian form and `E(R^2) = 24` the bivariate
/// Laplace form.
pub fn lin_ec(params: &ModelParams, second_radial_moment: f64) -> Result<f64> {
    if !(second_radial_moment > 0.0) || !second_radial_moment.is_finite() {
        return Err(Error::Domain(format!(
            "second radial moment must be positive and finite, got {second_radial_moment}"
        )));
    }
    let parts = params.bivariate_parts()?;
    let gamma = parts.mu1 - parts.mu2;
    let geo = (parts.s11 * parts.s22).sqrt();
    let a = gamma / geo.sqrt();
    let b = (parts.s11 / parts.s22).sqrt();
    let rho = parts.s12 / geo;
    let c12 = 2.0 / (b + 1.0 / b + a * a / (0.5 * second_radial_moment));
    Ok(rho * c12)
}

/// The L1 coefficient under the Gaussian model, from scalar moments.
pub fn rho1_gaussian_from_parts(parts: &BivariateParts) -> f64 {
    let gamma = parts.mu1 - parts.mu2;
    let indep_var = parts.s11 + parts.s22;
    let diff_var = (indep_var - 2.0 * parts.s12).max(0.0);
    if diff_var == 0.0 {
        // Degenerate difference: the two instruments agree up to a constant;
        // reported as perfect agreement (see rho1_gaussian).
        return 1.0;
    }
    1.0 - folded_normal_mean(gamma, diff_var) / folded_normal_mean(gamma, indep_var)
}

/// The L1 coefficient `rho_1 = 1 - E|X1 - X2| / E0|X1 - X2|` under the
/// Gaussian model, where the denominator expectation sets sigma12 = 0.
/// Both means are folded-normal means. With equal means this reduces to
/// `1 - sqrt(tau^2 / (sigma11 + sigma22))` with `tau^2` the variance of the
/// difference; a degenerate `tau = 0` is reported as exactly 1 (the analytic
/// limit under equal means, adopted for numerically singular inputs).
pub fn rho1_gaussian(params: &ModelParams) -> Result<f64> {
    Ok(rho1_gaussian_from_parts(&params.bivariate_parts()?))
}

/// The L1 coefficient for an elliptically-contoured difference with location
/// `gamma`, scale `tau`, and independence-scale `indep_scale` (the scale of
/// the difference when the two instruments are uncorrelated), computed from a
/// univariate density generator:
///
/// `rho_1 = 1 - E|Z| / E0|Z|`, each folded mean evaluated as
/// `gamma * (1 - 2*C_g*I0(alpha)) - 2*scale*C_g*I1(alpha)` with
/// `I0(alpha) = integral of g(r^2) for r < -alpha`,
/// `I1(alpha) = integral of r*g(r^2) for r < -alpha`, and `alpha = gamma/scale`.
///
/// For `gamma = 0` the ratio collapses to `1 - tau/indep_scale` for every
/// generator; a degenerate `tau = 0` is reported as 1.
pub fn rho1_ec(
    gamma: f64,
    tau: f64,
    indep_scale: f64,
    gen: &DensityGenerator,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be finite, got {gamma}")));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "tau must be nonnegative and finite, got {tau}"
        )));
    }
    if !(indep_scale > 0.0) || !indep_scale.is_finite() {
        return Err(Error::Domain(format!(
            "indep_scale must be positive and finite, got {indep_scale}"
        )));
    }
    if gamma == 0.0 {
        return Ok(1.0 - tau / indep_scale);
    }
    if tau == 0.0 {
        return Ok(1.0);
    }
    let c = gen.normalizing_constant();
    let folded_mean = |scale: f64| -> Result<f64> {
        let alpha = gamma / scale;
        let i0 = integrate_1d(|r| gen.g(r * r), f64::NEG_INFINITY, -alpha, spec)?;
        let i1 = integrate_1d(|r| r * gen.g(r * r), f64::NEG_INFINITY, -alpha, spec)?;
        Ok(gamma * (1.0 - 2.0 * c * i0) - 2.0 * scale * c * i1)
    };
    let numerator = folded_mean(tau)?;
    let denominator = folded_mean(indep_scale)?;
    if !(denominator > 0.0) {
        return Err(Error::Undefined(format!(
            "independence folded mean must be positive, got {denominator}"
        )));
    }
    Ok(1.0 - numerator / denominator)
}

/// Maps Lin's coefficient to the power-family coefficient
/// `rho_p = 1 - (1 - rho_c)^(p/2)` (p = 2 is the identity, p = 1 gives the
/// L1 coefficient under equal means).
pub fn rho_p_from_rho_c(rho_c: f64, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("power p must be at least 1".into()));
    }
    if !rho_c.is_finite() || rho_c > 1.0 {
        return Err(Error::Domain(format!(
            "rho_c must be finite and at most 1, got {rho_c}"
        )));
    }
    Ok(1.0 - (1.0 - rho_c).powf(0.5 * p as f64))
}

/// The scaled phi-agreement coefficient under the Gaussian model, from scalar
/// moments (no positive-definiteness requirement beyond nonnegative
/// variances, so boundary cases such as perfectly correlated instruments are
/// representable).
pub fn scaled_phi_gaussian_from_parts(parts: &BivariateParts, phi: Phi) -> f64 {
    let mean_phi = |mean: f64, variance: f64| -> f64 {
        match phi {
            Phi::Abs => folded_normal_mean(mean, variance),
            Phi::Square => mean * mean + variance.max(0.0),
        }
    };
    let gamma = parts.mu1 - parts.mu2;
    let sum_mean = parts.mu1 + parts.mu2;
    let indep_var = parts.s11 + parts.s22;
    let diff_var = indep_var - 2.0 * parts.s12;
    let sum_var = indep_var + 2.0 * parts.s12;

    let indep_diff = mean_phi(gamma, indep_var);
    let indep_sum = mean_phi(sum_mean, indep_var);
    let dep_diff = mean_phi(gamma, diff_var);
    let dep_sum = mean_phi(sum_mean, sum_var);
    let double_first = mean_phi(2.0 * parts.mu1, 4.0 * parts.s11);
    let double_second = mean_phi(2.0 * parts.mu2, 4.0 * parts.s22);

    let numerator = (indep_diff - indep_sum) - (dep_diff - dep_sum);
    let denominator = (indep_diff - indep_sum) + 0.5 * (double_first + double_second);
    numerator / denominator
}

/// The scaled phi-agreement coefficient: a ratio built from five
/// phi-expectations of the differences, sums, and doubled coordinates (the
/// dependence-free expectations set sigma12 = 0), normalized to lie in
/// [-1, 1]. For `phi = Square` it coincides with [`lin_gaussian`] exactly;
/// for `phi = Abs` every expectation is a closed-form folded-normal mean.
pub fn scaled_phi_gaussian(params: &ModelParams, phi: Phi) -> Result<f64> {
    Ok(scaled_phi_gaussian_from_parts(&params.bivariate_parts()?, phi))
}
