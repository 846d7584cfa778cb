//! Goodness-of-fit diagnostics: Wilson–Hilferty-transformed model
//! distances, simulated order-statistic envelopes, outlier flags, and a
//! Jarque–Bera omnibus normality check on the transformed values.
//!
//! Under a correctly specified Laplace fit the unsquared distances follow
//! Gamma(k, rate 1/2); under a Gaussian fit the squared distances follow
//! chi-squared(k). Either way the mean-normalized value `fhat` is a
//! Gamma(shape a)/mean variable whose cube root is close to normal, giving
//! the plot-ready scores `z`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{fit_gaussian, fit_laplace, fit_laplace_constrained, ConvergenceSpec, ModelFit};
use crate::inference::{TestName, TestResult};
use crate::sampling::{sample_from_params, BivariateSample, Family};
use crate::special::gamma_quantile;

/// Pointwise envelope bands for the sorted transformed distances, one entry
/// per order statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeBand {
    lower: Vec<f64>,
    median: Vec<f64>,
    upper: Vec<f64>,
    simulations: usize,
}

impl EnvelopeBand {
    /// Pointwise 2.5th percentile per order statistic.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Pointwise median per order statistic.
    pub fn median(&self) -> &[f64] {
        &self.median
    }

    /// Pointwise 97.5th percentile per order statistic.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Number of synthetic replicates the bands were built from.
    pub fn simulations(&self) -> usize {
        self.simulations
    }
}

/// Distance diagnostics for one fitted model.
#[derive(Clone, Debug, PartialEq)]
pub struct GofReport {
    distances: Vec<f64>,
    fhat: Vec<f64>,
    z: Vec<f64>,
    jarque_bera: TestResult,
    envelope: EnvelopeBand,
    outlier_flags: Vec<usize>,
}

impl GofReport {
    /// Unsquared Mahalanobis distances at the fitted parameters, in
    /// observation order.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Mean-normalized distances (`D/(2k)` for Laplace fits, `D^2/k` for
    /// Gaussian fits), in observation order.
    pub fn fhat(&self) -> &[f64] {
        &self.fhat
    }

    /// Wilson–Hilferty scores, in observation order.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Jarque–Bera normality check on the scores.
    pub fn jarque_bera(&self) -> &TestResult {
        &self.jarque_bera
    }

    /// Simulated pointwise bands for the sorted scores.
    pub fn envelope(&self) -> &EnvelopeBand {
        &self.envelope
    }

    /// Indices whose normalized distance exceeds the 0.995 quantile of its
    /// reference law.
    pub fn outlier_flags(&self) -> &[usize] {
        &self.outlier_flags
    }
}

/// Wilson–Hilferty normal score for a mean-normalized Gamma(shape) variable:
/// `(fhat^(1/3) - (1 - 1/(9 shape))) * sqrt(9 shape)`.
pub fn wilson_hilferty_z(fhat: f64, shape: f64) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::Domain(format!(
            "Wilson-Hilferty shape must be positive, got {shape}"
        )));
    }
    if !(fhat >= 0.0) || !fhat.is_finite() {
        return Err(Error::Domain(format!(
            "normalized distance must be nonnegative, got {fhat}"
        )));
    }
    let nine_a = 9.0 * shape;
    Ok((fhat.cbrt() - (1.0 - 1.0 / nine_a)) * nine_a.sqrt())
}

/// Gamma shape parameter of the distance law implied by a family in
/// dimension k: the Laplace unsquared distance is Gamma(k, 1/2); the
/// Gaussian squared distance is chi-squared(k) = Gamma(k/2, 1/2).
fn distance_shape(family: Family, k: usize) -> Result<f64> {
    match family {
        Family::Laplace => Ok(k as f64),
        Family::Gaussian => Ok(k as f64 / 2.0),
        other => Err(Error::Unsupported(format!(
            "distance diagnostics are not defined for {other} fits"
        ))),
    }
}

/// Normalized distance and Wilson–Hilferty score for one unsquared distance
/// under the given family in dimension k.
pub fn distance_fhat_z(family: Family, k: usize, d: f64) -> Result<(f64, f64)> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!(
            "distance must be nonnegative, got {d}"
        )));
    }
    let shape = distance_shape(family, k)?;
    let fhat = match family {
        Family::Laplace => d / (2.0 * k as f64),
        Family::Gaussian => d * d / k as f64,
        _ => unreachable!(),
    };
    Ok((fhat, wilson_hilferty_z(fhat, shape)?))
}

/// Unsquared Mahalanobis distances of every observation at the fitted
/// parameters.
pub fn fitted_distances(sample: &BivariateSample, fit: &ModelFit) -> Result<Vec<f64>> {
    if fit.weights().len() != sample.n() {
        return Err(Error::DimensionMismatch(
            "fit was not produced from this sample".into(),
        ));
    }
    let parts = fit.parts();
    let det = parts.s11 * parts.s22 - parts.s12 * parts.s12;
    if !(det > 0.0) {
        return Err(Error::NotPositiveDefinite(
            "fitted scatter matrix is singular".into(),
        ));
    }
    let mut out = Vec::with_capacity(sample.n());
    for i in 0..sample.n() {
        let (x1, x2) = sample.pair(i);
        let d1 = x1 - parts.mu1;
        let d2 = x2 - parts.mu2;
        let q = (parts.s22 * d1 * d1 - 2.0 * parts.s12 * d1 * d2 + parts.s11 * d2 * d2) / det;
        out.push(q.max(0.0).sqrt());
    }
    Ok(out)
}

/// Jarque–Bera normality statistic `(n/6)(skewness^2 + excess-kurtosis^2/4)`
/// referred to chi-squared(2).
pub fn jarque_bera(values: &[f64]) -> Result<TestResult> {
    let n = values.len();
    if n < 8 {
        return Err(Error::TooFewObservations { needed: 8, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for v in values {
        let d = v - mean;
        m2 += d * d / nf;
        m3 += d * d * d / nf;
        m4 += d * d * d * d / nf;
    }
    if m2 == 0.0 {
        return Err(Error::Undefined(
            "normality check is undefined for zero-variance input".into(),
        ));
    }
    let skew = m3 / m2.powf(1.5);
    let excess = m4 / (m2 * m2) - 3.0;
    let jb = nf / 6.0 * (skew * skew + 0.25 * excess * excess);
    TestResult::from_statistic(TestName::JarqueBera, jb, 2)
}

/// Type-7 (linear interpolation) percentile of an ascending-sorted slice.
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let s = sorted.len();
    if s == 1 {
        return sorted[0];
    }
    let h = (s as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// One synthetic replicate: draw from the fitted model, refit with the same
/// family and constraint, and return its sorted scores.
fn envelope_replicate(fit: &ModelFit, n: usize, seed: u64) -> Result<Vec<f64>> {
    let spec = ConvergenceSpec::default();
    for attempt in 0..10u64 {
        let sim = sample_from_params(fit.theta(), n, crate::sampling::stream_seed(seed, attempt))?;
        let refit = match (fit.family(), fit.constrained()) {
            (Family::Gaussian, c) => fit_gaussian(&sim, c, &spec),
            (Family::Laplace, false) => fit_laplace(&sim, &spec),
            (Family::Laplace, true) => fit_laplace_constrained(&sim, &spec),
            (other, _) => {
                return Err(Error::Unsupported(format!(
                    "distance diagnostics are not defined for {other} fits"
                )))
            }
        };
        let refit = match refit {
            Ok(f) if f.converged() => f,
            _ => continue,
        };
        let mut z: Vec<f64> = fitted_distances(&sim, &refit)?
            .into_iter()
            .map(|d| distance_fhat_z(refit.family(), 2, d).map(|(_, z)| z))
            .collect::<Result<_>>()?;
        z.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return Ok(z);
    }
    Err(Error::Estimation(
        "envelope simulation failed to refit after 10 attempts".into(),
    ))
}

/// Full distance diagnostic for a converged fit: distances, normalized
/// distances, Wilson–Hilferty scores, a Jarque–Bera check, outlier flags at
/// the 0.995 reference quantile, and pointwise 95% envelope bands from
/// `envelope_sims` synthetic replicates (each drawn from the fitted model
/// and refitted). Deterministic given the seed.
pub fn gof_report(
    sample: &BivariateSample,
    fit: &ModelFit,
    envelope_sims: usize,
    seed: u64,
) -> Result<GofReport> {
    if envelope_sims < 19 {
        return Err(Error::Config(format!(
            "envelope needs at least 19 simulations, got {envelope_sims}"
        )));
    }
    if !fit.converged() {
        return Err(Error::Estimation(
            "distance diagnostics require a converged fit".into(),
        ));
    }
    let k = 2usize;
    let shape = distance_shape(fit.family(), k)?;
    let distances = fitted_distances(sample, fit)?;
    let mut fhat = Vec::with_capacity(distances.len());
    let mut z = Vec::with_capacity(distances.len());
    for &d in &distances {
        let (f, score) = distance_fhat_z(fit.family(), k, d)?;
        fhat.push(f);
        z.push(score);
    }

    // Reference 0.995 cutoff for the normalized distance: Gamma(shape, 1/2)
    // scaled by its mean 2*shape.
    let cutoff = gamma_quantile(shape, 0.5, 0.995)? / (2.0 * shape);
    let outlier_flags: Vec<usize> = fhat
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| (f > cutoff).then_some(i))
        .collect();

    let jb = jarque_bera(&z)?;

    let sims: Vec<Vec<f64>> = (0..envelope_sims as u64)
        .into_par_iter()
        .map(|rep| envelope_replicate(fit, sample.n(), crate::sampling::stream_seed(seed, rep)))
        .collect::<Result<_>>()?;
    let n = sample.n();
    let mut lower = Vec::with_capacity(n);
    let mut median = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut column = vec![0.0; envelope_sims];
    for i in 0..n {
        for (c, sim) in column.iter_mut().zip(&sims) {
            *c = sim[i];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lower.push(percentile_sorted(&column, 0.025));
        median.push(percentile_sorted(&column, 0.5));
        upper.push(percentile_sorted(&column, 0.975));
    }

    Ok(GofReport {
        distances,
        fhat,
        z,
        jarque_bera: jb,
        envelope: EnvelopeBand {
            lower,
            median,
            upper,
            simulations: envelope_sims,
        },
        outlier_flags,
    })
}
