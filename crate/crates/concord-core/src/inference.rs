//! Large-sample inference: the asymptotic variance of the agreement
//! estimators, the Fisher Z-transformation, four likelihood-based tests of
//! mean equality (Wald, score, gradient, likelihood ratio), the generalized
//! Hotelling T-squared statistic, the asymptotic covariance of the sample
//! scatter under the Laplace model, and a pairs bootstrap for standard
//! errors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::concordance::{lin_gaussian_from_parts, AgreementValue, CoefficientKind};
use crate::error::{Error, Result};
use crate::estimation::ModelFit;
use crate::sampling::{stream_seed, BivariateParts, BivariateSample, Family, ScatterMatrix};
use crate::special::chi_squared_sf;

/// Which test a [`TestResult`] reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestName {
    Wald,
    Score,
    Gradient,
    Lrt,
    HotellingT2,
    JarqueBera,
}

impl std::fmt::Display for TestName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TestName::Wald => "wald",
            TestName::Score => "score",
            TestName::Gradient => "gradient",
            TestName::Lrt => "lrt",
            TestName::HotellingT2 => "hotelling-t2",
            TestName::JarqueBera => "jarque-bera",
        };
        f.write_str(s)
    }
}

/// One asymptotic chi-squared test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub name: TestName,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl TestResult {
    pub(crate) fn from_statistic(name: TestName, statistic: f64, df: usize) -> Result<Self> {
        let statistic = statistic.max(0.0);
        Ok(Self {
            name,
            statistic,
            df,
            p_value: chi_squared_sf(statistic, df as f64)?,
        })
    }
}

/// How a standard error was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeMethod {
    Asymptotic,
    Bootstrap { replicates: usize, seed: u64 },
}

/// A point estimate of an agreement coefficient with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementEstimate {
    pub value: AgreementValue,
    pub se: f64,
    pub se_method: SeMethod,
    pub n: usize,
}

impl AgreementEstimate {
    pub fn new(value: AgreementValue, se: f64, se_method: SeMethod, n: usize) -> Result<Self> {
        if !se.is_finite() || se < 0.0 {
            return Err(Error::Domain(format!(
                "standard error must be finite and nonnegative, got {se}"
            )));
        }
        if let SeMethod::Bootstrap { replicates, .. } = se_method {
            if replicates < 100 {
                return Err(Error::Config(format!(
                    "bootstrap requires at least 100 replicates, got {replicates}"
                )));
            }
        }
        Ok(Self {
            value,
            se,
            se_method,
            n,
        })
    }
}

/// The squared coefficient of the limiting normal for the Fisher-transformed
/// Lin estimator:
///
/// `v^2 = 1/(n-2) * { (1-rho^2)rho_c^2 / ((1-rho_c^2)rho^2)
///        + 2rho_c^3(1-rho_c)u^2 / (rho(1-rho_c^2)^2)
///        - rho_c^4 u^4 / (2rho^2(1-rho_c^2)^2) }`
///
/// with `rho` the correlation and `u = (mu1-mu2)/(sigma11*sigma22)^(1/4)` the
/// standardized mean difference. The sampling variance of the Lin estimator
/// itself is `(1-rho_c^2)^2 * v^2`.
pub fn lin_asymptotic_variance(rho_c: f64, rho: f64, u: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: n });
    }
    if !rho_c.is_finite() || rho_c.abs() >= 1.0 {
        return Err(Error::Undefined(format!(
            "asymptotic variance requires |rho_c| < 1, got {rho_c}"
        )));
    }
    if !rho.is_finite() || rho == 0.0 {
        return Err(Error::Undefined(format!(
            "asymptotic variance requires a nonzero correlation, got {rho}"
        )));
    }
    if !u.is_finite() {
        return Err(Error::Domain(format!("u must be finite, got {u}")));
    }
    let one_minus = 1.0 - rho_c * rho_c;
    let term1 = (1.0 - rho * rho) * rho_c * rho_c / (one_minus * rho * rho);
    let term2 = 2.0 * rho_c.powi(3) * (1.0 - rho_c) * u * u / (rho * one_minus * one_minus);
    let term3 = rho_c.powi(4) * u.powi(4) / (2.0 * rho * rho * one_minus * one_minus);
    Ok((term1 + term2 - term3) / (n as f64 - 2.0))
}

/// Delta-method variance of the power-family estimator:
/// `v2 * (1-rho_c^2)^2 * (p/2)^2 * (1-rho_c)^(p-2)`. At p = 2 this is the
/// Lin-estimator variance itself.
pub fn rho_p_asymptotic_variance(rho_c: f64, v2: f64, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("power p must be at least 1".into()));
    }
    if !rho_c.is_finite() || rho_c >= 1.0 {
        return Err(Error::Undefined(format!(
            "delta-method variance requires rho_c < 1, got {rho_c}"
        )));
    }
    if !(v2 >= 0.0) || !v2.is_finite() {
        return Err(Error::Domain(format!(
            "v2 must be nonnegative and finite, got {v2}"
        )));
    }
    let one_minus_sq = 1.0 - rho_c * rho_c;
    let pf = p as f64;
    Ok(v2 * one_minus_sq * one_minus_sq * (pf * pf / 4.0) * (1.0 - rho_c).powi(p as i32 - 2))
}

/// Plug-in asymptotic standard error of an agreement estimator, from the
/// fitted covariance-scale parameters. Available for the Lin, L1, and
/// power-family coefficients.
pub fn plug_in_asymptotic_se(
    parts: &BivariateParts,
    n: usize,
    kind: CoefficientKind,
) -> Result<f64> {
    let rho_c = lin_gaussian_from_parts(parts);
    let geo = (parts.s11 * parts.s22).sqrt();
    if !(geo > 0.0) {
        return Err(Error::Undefined(
            "asymptotic standard error requires positive variances".into(),
        ));
    }
    let rho = parts.s12 / geo;
    let u = (parts.mu1 - parts.mu2) / geo.sqrt();
    let v2 = lin_asymptotic_variance(rho_c, rho, u, n)?;
    let p = match kind {
        CoefficientKind::Lin => 2,
        CoefficientKind::L1 => 1,
        CoefficientKind::Lp { p } => p,
        CoefficientKind::ScaledPhi { .. } => {
            return Err(Error::Unsupported(
                "no plug-in asymptotic standard error for the scaled phi coefficient".into(),
            ))
        }
    };
    Ok(rho_p_asymptotic_variance(rho_c, v2, p)?.sqrt())
}

/// Fisher Z-transformation, `atanh(rho)`.
pub fn fisher_z(rho: f64) -> Result<f64> {
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "Fisher Z requires |rho| < 1, got {rho}"
        )));
    }
    Ok(rho.atanh())
}

/// Inverse Fisher Z-transformation, `tanh(z)`.
pub fn fisher_z_inverse(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::Domain("Fisher Z inverse requires a number".into()));
    }
    Ok(z.tanh())
}

fn default_contrast() -> DMatrix<f64> {
    DMatrix::from_row_slice(1, 2, &[1.0, -1.0])
}

fn validate_contrast(a: &DMatrix<f64>, require_zero_sum: bool) -> Result<usize> {
    if a.ncols() != 2 || a.nrows() == 0 || a.nrows() > 2 {
        return Err(Error::DimensionMismatch(format!(
            "contrast matrix must be r x 2 with 1 <= r <= 2, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    for r in 0..a.nrows() {
        let row = a.row(r);
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::Domain("contrast rows must be nonzero".into()));
        }
        if require_zero_sum && (row.sum()).abs() > 1e-12 * norm.max(1.0) {
            return Err(Error::Domain(
                "mean-equality contrasts must have zero row sums".into(),
            ));
        }
    }
    Ok(a.nrows())
}

fn quadratic_form(a: &DMatrix<f64>, sigma: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    let av = a * v;
    if av.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let middle = a * sigma * a.transpose();
    let chol = nalgebra::Cholesky::new(middle).ok_or_else(|| {
        Error::NotPositiveDefinite("contrasted scatter matrix is singular".into())
    })?;
    Ok((av.transpose() * chol.solve(&av))[(0, 0)])
}

/// The x-bar vector of a sample as a dynamic vector.
fn mean_vector(sample: &BivariateSample) -> DVector<f64> {
    let n = sample.n() as f64;
    DVector::from_vec(vec![
        sample.x1().iter().sum::<f64>() / n,
        sample.x2().iter().sum::<f64>() / n,
    ])
}

/// Wald, score, gradient, and likelihood-ratio tests of mean equality from a
/// matched pair of fits (unconstrained and equal-means constrained, same
/// family, same sample).
///
/// With `S_w = sum_i w_i (x_i - mu~)` the weighted score displacement at the
/// constrained fit:
///
/// * Wald: `c_w * (A mu-hat)' (A Sigma-hat A')^{-1} (A mu-hat)`,
/// * score: `c_r * S_w' Sigma~^{-1} S_w`,
/// * gradient: `S_w' Sigma~^{-1} (mu-hat - mu~)`,
/// * likelihood ratio: `2(l-hat - l~)`,
///
/// where the information scalings are `c_w = n/(4k)`, `c_r = 4k/n` for the
/// Laplace family (whose location information is `Sigma^{-1}/(4k)` per
/// observation) and `c_w = n`, `c_r = 1/n` for the Gaussian family. Each
/// statistic is referred to chi-squared with `rank(A)` degrees of freedom.
/// `A` defaults to the single contrast `(1, -1)`; rows must sum to zero so
/// the null matches the constrained fit.
pub fn test_means(
    sample: &BivariateSample,
    unconstrained: &ModelFit,
    constrained: &ModelFit,
    contrast: Option<&DMatrix<f64>>,
) -> Result<Vec<TestResult>> {
    if unconstrained.family() != constrained.family() {
        return Err(Error::Config(
            "mean-equality tests need fits from the same family".into(),
        ));
    }
    if unconstrained.constrained() || !constrained.constrained() {
        return Err(Error::Config(
            "expected an (unconstrained, constrained) fit pair".into(),
        ));
    }
    if unconstrained.weights().len() != sample.n() || constrained.weights().len() != sample.n() {
        return Err(Error::DimensionMismatch(
            "fits were not produced from this sample".into(),
        ));
    }
    if !unconstrained.converged() || !constrained.converged() {
        return Err(Error::Estimation(
            "mean-equality tests require converged fits".into(),
        ));
    }
    let family = unconstrained.family();
    let k = 2.0_f64;
    let (wald_scale, score_scale) = match family {
        Family::Gaussian => (sample.n() as f64, 1.0 / sample.n() as f64),
        Family::Laplace => (sample.n() as f64 / (4.0 * k), 4.0 * k / sample.n() as f64),
        other => {
            return Err(Error::Unsupported(format!(
                "mean-equality tests are not defined for {other} fits"
            )))
        }
    };
    let a_storage;
    let a = match contrast {
        Some(m) => m,
        None => {
            a_storage = default_contrast();
            &a_storage
        }
    };
    let df = validate_contrast(a, true)?;

    let hat = unconstrained.parts();
    let tilde = constrained.parts();
    let mu_hat = DVector::from_vec(vec![hat.mu1, hat.mu2]);
    let mu_tilde = DVector::from_vec(vec![tilde.mu1, tilde.mu2]);
    let sigma_hat = unconstrained.theta().sigma().entries().clone();
    let sigma_tilde = constrained.theta().sigma();

    // Wald at the unconstrained estimate.
    let wald = wald_scale * quadratic_form(a, &sigma_hat, &mu_hat)?;

    // Weighted score displacement at the constrained estimate.
    let mut s = DVector::zeros(2);
    for i in 0..sample.n() {
        let (x1, x2) = sample.pair(i);
        let w = constrained.weights()[i];
        s[0] += w * (x1 - tilde.mu1);
        s[1] += w * (x2 - tilde.mu2);
    }
    let (score, gradient) = if s.iter().all(|&x| x == 0.0) {
        (0.0, 0.0)
    } else {
        let solved = sigma_tilde.solve(&s);
        let score = score_scale * s.dot(&solved);
        let gradient = solved.dot(&(&mu_hat - &mu_tilde));
        (score, gradient)
    };

    let lrt = 2.0 * (unconstrained.loglik() - constrained.loglik());

    Ok(vec![
        TestResult::from_statistic(TestName::Wald, wald, df)?,
        TestResult::from_statistic(TestName::Score, score, df)?,
        TestResult::from_statistic(TestName::Gradient, gradient, df)?,
        TestResult::from_statistic(TestName::Lrt, lrt, df)?,
    ])
}

/// Generalized Hotelling T-squared statistic
/// `T2 = n * x-bar' A' (A S A')^{-1} A x-bar` with `S` the divisor-(n-1)
/// covariance, referred to its asymptotic chi-squared distribution with
/// `rank(A)` degrees of freedom. `A` defaults to `(1, -1)`, for which the
/// statistic reduces to `n (x1-bar - x2-bar)^2 / (s11 + s22 - 2 s12)`.
pub fn hotelling_t2(
    sample: &BivariateSample,
    contrast: Option<&DMatrix<f64>>,
) -> Result<TestResult> {
    if sample.n() < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            got: sample.n(),
        });
    }
    let a_storage;
    let a = match contrast {
        Some(m) => m,
        None => {
            a_storage = default_contrast();
            &a_storage
        }
    };
    let df = validate_contrast(a, false)?;
    let moments = crate::estimation::sample_moments(sample)?;
    let s = DMatrix::from_row_slice(
        2,
        2,
        &[
            moments.cov_unbiased[(0, 0)],
            moments.cov_unbiased[(0, 1)],
            moments.cov_unbiased[(0, 1)],
            moments.cov_unbiased[(1, 1)],
        ],
    );
    let xbar = mean_vector(sample);
    let t2 = sample.n() as f64 * quadratic_form(a, &s, &xbar)?;
    TestResult::from_statistic(TestName::HotellingT2, t2, df)
}

/// Duplication matrix D_k: maps the half-vectorization of a symmetric k x k
/// matrix to its full vectorization, `D_k vech(A) = vec(A)`.
pub fn duplication_matrix(k: usize) -> DMatrix<f64> {
    let cols = k * (k + 1) / 2;
    let mut d = DMatrix::zeros(k * k, cols);
    let mut c = 0;
    for j in 0..k {
        for i in j..k {
            d[(i + j * k, c)] = 1.0;
            if i != j {
                d[(j + i * k, c)] = 1.0;
            }
            c += 1;
        }
    }
    d
}

/// Commutation matrix K_k: `K_k vec(A) = vec(A')` for k x k matrices.
pub fn commutation_matrix(k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k * k, k * k);
    for i in 0..k {
        for j in 0..k {
            m[(i + j * k, j + i * k)] = 1.0;
        }
    }
    m
}

/// Excess kurtosis of each margin of a k-variate Laplace vector, `2/(k+1)`.
pub fn laplace_excess_kurtosis(k: usize) -> f64 {
    2.0 / (k as f64 + 1.0)
}

/// Asymptotic covariance of the duplication-projected sample covariance
/// `D_k' vec(S)` under the k-variate Laplace law:
///
/// `Omega = (1/(k+1)) * D_k' { (k+3)(I + K_k)(Sigma (x) Sigma)
///          + 2 vec(Sigma) vec(Sigma)' } D_k`.
pub fn vech_s_asymptotic_cov(sigma: &ScatterMatrix) -> DMatrix<f64> {
    let k = sigma.k();
    let d = duplication_matrix(k);
    let kk = commutation_matrix(k);
    let s = sigma.entries();
    let kron = s.kronecker(s);
    let vec_s = DVector::from_column_slice(s.as_slice());
    let identity = DMatrix::identity(k * k, k * k);
    let inner = (k as f64 + 3.0) * (identity + kk) * kron + 2.0 * &vec_s * vec_s.transpose();
    (1.0 / (k as f64 + 1.0)) * d.transpose() * inner * d
}

/// Outcome of a pairs bootstrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapSummary {
    pub se: f64,
    pub replicates_used: usize,
    pub failed_replicates: usize,
}

/// Nonparametric pairs bootstrap: resamples rows with replacement, re-runs
/// the estimator recipe on each resample, and reports the standard deviation
/// of the estimates. Resamples on which the recipe fails are redrawn up to 10
/// times and counted. Deterministic given the seed, independent of thread
/// scheduling.
pub fn bootstrap_se_detailed<F>(
    sample: &BivariateSample,
    estimator: F,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapSummary>
where
    F: Fn(&BivariateSample) -> Result<f64> + Sync,
{
    if replicates < 100 {
        return Err(Error::Config(format!(
            "bootstrap requires at least 100 replicates, got {replicates}"
        )));
    }
    let n = sample.n();
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: n });
    }
    let estimates: Vec<Option<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, b));
            for _attempt in 0..10 {
                let mut x1 = Vec::with_capacity(n);
                let mut x2 = Vec::with_capacity(n);
                for _ in 0..n {
                    let idx = rng.random_range(0..n);
                    let (a, bb) = sample.pair(idx);
                    x1.push(a);
                    x2.push(bb);
                }
                let resample =
                    BivariateSample::new(x1, x2).expect("resampled rows are finite");
                if let Ok(value) = estimator(&resample) {
                    if value.is_finite() {
                        return Some(value);
                    }
                }
            }
            None
        })
        .collect();
    let used: Vec<f64> = estimates.iter().filter_map(|v| *v).collect();
    let failed = replicates - used.len();
    if used.len() < 2 {
        return Err(Error::Estimation(format!(
            "bootstrap failed on {failed} of {replicates} resamples"
        )));
    }
    // Bit-identical estimates (e.g. a degenerate sample of repeated rows)
    // have exactly zero spread; skip the mean round-off.
    let var = if used.iter().all(|&v| v == used[0]) {
        0.0
    } else {
        let mean = used.iter().sum::<f64>() / used.len() as f64;
        used.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (used.len() as f64 - 1.0)
    };
    Ok(BootstrapSummary {
        se: var.sqrt(),
        replicates_used: used.len(),
        failed_replicates: failed,
    })
}

/// [`bootstrap_se_detailed`] reduced to the standard error alone.
pub fn bootstrap_se<F>(
    sample: &BivariateSample,
    estimator: F,
    replicates: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&BivariateSample) -> Result<f64> + Sync,
{
    Ok(bootstrap_se_detailed(sample, estimator, replicates, seed)?.se)
}
