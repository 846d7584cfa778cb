//! Model parameterization and random generation for the bivariate families
//! used throughout the crate: Gaussian, multivariate Laplace (a normal
//! scale-mixture with heavier tails), Cauchy, and scale-contaminated normal.
//!
//! All samplers are pure functions of `(params, n, seed)`: the same inputs
//! always reproduce the same sample, and parallel callers partition streams
//! with [`stream_seed`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Symmetric positive-definite scatter matrix with its Cholesky factor
/// computed (and positive-definiteness verified) at construction.
#[derive(Clone, Debug)]
pub struct ScatterMatrix {
    entries: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
}

impl ScatterMatrix {
    /// Validates symmetry and positive definiteness, then stores the matrix
    /// together with its lower Cholesky factor.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let k = entries.nrows();
        if k == 0 || entries.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "scatter matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let mut scale = 0.0f64;
        for value in entries.iter() {
            if !value.is_finite() {
                return Err(Error::Domain(
                    "scatter matrix entries must be finite".into(),
                ));
            }
            scale = scale.max(value.abs());
        }
        let tol = 1e-12 * scale.max(1.0);
        for i in 0..k {
            for j in (i + 1)..k {
                if (entries[(i, j)] - entries[(j, i)]).abs() > tol {
                    return Err(Error::Domain(format!(
                        "scatter matrix is not symmetric at ({i},{j}): {} vs {}",
                        entries[(i, j)],
                        entries[(j, i)]
                    )));
                }
            }
        }
        // Symmetrize exactly so downstream algebra sees a true symmetric matrix.
        let symmetrized = 0.5 * (&entries + entries.transpose());
        let chol = nalgebra::Cholesky::new(symmetrized.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite(
                "scatter matrix Cholesky factorization failed".into(),
            )
        })?;
        Ok(Self {
            entries: symmetrized,
            chol_lower: chol.l(),
        })
    }

    /// Convenience constructor for the 2x2 case.
    pub fn bivariate(s11: f64, s12: f64, s22: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[s11, s12, s12, s22]))
    }

    /// Dimension of the matrix.
    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    /// The symmetric matrix itself.
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Single entry accessor.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Lower-triangular Cholesky factor L with L Lᵀ equal to the matrix.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    /// Log-determinant, computed from the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.k())
            .map(|i| self.chol_lower[(i, i)].ln())
            .sum::<f64>()
    }

    /// Solves `self * x = rhs` using the stored factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = rhs.clone();
        self.chol_lower.solve_lower_triangular_mut(&mut x);
        self.chol_lower
            .transpose()
            .solve_upper_triangular_mut(&mut x);
        x
    }

    /// Explicit inverse (small k only; prefer [`ScatterMatrix::solve`]).
    pub fn inverse(&self) -> DMatrix<f64> {
        let k = self.k();
        let mut inv = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut e = DVector::zeros(k);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        // Clean up round-off asymmetry.
        0.5 * (&inv + inv.transpose())
    }

    /// Squared Mahalanobis norm `diffᵀ Σ⁻¹ diff`.
    pub fn mahalanobis_squared(&self, diff: &DVector<f64>) -> f64 {
        let mut v = diff.clone();
        self.chol_lower.solve_lower_triangular_mut(&mut v);
        v.norm_squared()
    }

    /// Unsquared Mahalanobis distance.
    pub fn mahalanobis(&self, diff: &DVector<f64>) -> f64 {
        self.mahalanobis_squared(diff).sqrt()
    }
}

/// Distributional family of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Laplace,
    Cauchy,
    ContaminatedNormal,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::Cauchy => "cauchy",
            Family::ContaminatedNormal => "contaminated-normal",
        };
        f.write_str(name)
    }
}

/// Scale-contamination settings: with probability `epsilon` a draw's scatter
/// is inflated by the factor `eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contamination {
    epsilon: f64,
    eta: f64,
}

impl Contamination {
    pub fn new(epsilon: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) || !epsilon.is_finite() {
            return Err(Error::Domain(format!(
                "contamination probability must lie in [0, 1], got {epsilon}"
            )));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Domain(format!(
                "contamination inflation factor must be positive and finite, got {eta}"
            )));
        }
        Ok(Self { epsilon, eta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Location/scatter parameters with a family tag.
#[derive(Clone, Debug)]
pub struct ModelParams {
    mu: DVector<f64>,
    sigma: ScatterMatrix,
    family: Family,
    contamination: Option<Contamination>,
}

/// Scalar view of bivariate parameters, for closed-form coefficient work.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BivariateParts {
    pub mu1: f64,
    pub mu2: f64,
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl ModelParams {
    pub fn new(
        mu: DVector<f64>,
        sigma: ScatterMatrix,
        family: Family,
        contamination: Option<Contamination>,
    ) -> Result<Self> {
        if mu.len() != sigma.k() {
            return Err(Error::DimensionMismatch(format!(
                "mean vector length {} does not match scatter dimension {}",
                mu.len(),
                sigma.k()
            )));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain("mean vector must be finite".into()));
        }
        match (family, contamination.is_some()) {
            (Family::ContaminatedNormal, false) => {
                return Err(Error::Domain(
                    "contaminated-normal params require contamination settings".into(),
                ))
            }
            (Family::ContaminatedNormal, true) => {}
            (_, true) => {
                return Err(Error::Domain(
                    "contamination settings are only valid for the contaminated-normal family"
                        .into(),
                ))
            }
            (_, false) => {}
        }
        Ok(Self {
            mu,
            sigma,
            family,
            contamination,
        })
    }

    /// Bivariate constructor for the uncontaminated families.
    pub fn bivariate(
        family: Family,
        mu1: f64,
        mu2: f64,
        s11: f64,
        s12: f64,
        s22: f64,
    ) -> Result<Self> {
        Self::new(
            DVector::from_vec(vec![mu1, mu2]),
            ScatterMatrix::bivariate(s11, s12, s22)?,
            family,
            None,
        )
    }

    /// Bivariate constructor for the contaminated-normal family.
    pub fn bivariate_contaminated(
        mu1: f64,
        mu2: f64,
        s11: f64,
        s12: f64,
        s22: f64,
        contamination: Contamination,
    ) -> Result<Self> {
        Self::new(
            DVector::from_vec(vec![mu1, mu2]),
            ScatterMatrix::bivariate(s11, s12, s22)?,
            Family::ContaminatedNormal,
            Some(contamination),
        )
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &ScatterMatrix {
        &self.sigma
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn contamination(&self) -> Option<Contamination> {
        self.contamination
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// Scalar components for the bivariate case.
    pub fn bivariate_parts(&self) -> Result<BivariateParts> {
        if self.k() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "expected bivariate parameters, got dimension {}",
                self.k()
            )));
        }
        Ok(BivariateParts {
            mu1: self.mu[0],
            mu2: self.mu[1],
            s11: self.sigma.entry(0, 0),
            s12: self.sigma.entry(0, 1),
            s22: self.sigma.entry(1, 1),
        })
    }
}

/// Paired observations from two measurement instruments.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariateSample {
    x1: Vec<f64>,
    x2: Vec<f64>,
    labels: [String; 2],
}

impl BivariateSample {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        Self::with_labels(x1, x2, "x1", "x2")
    }

    pub fn with_labels(
        x1: Vec<f64>,
        x2: Vec<f64>,
        label1: impl Into<String>,
        label2: impl Into<String>,
    ) -> Result<Self> {
        if x1.len() != x2.len() {
            return Err(Error::DimensionMismatch(format!(
                "columns have different lengths: {} vs {}",
                x1.len(),
                x2.len()
            )));
        }
        if x1.iter().chain(x2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "sample entries must all be finite".into(),
            ));
        }
        Ok(Self {
            x1,
            x2,
            labels: [label1.into(), label2.into()],
        })
    }

    pub fn n(&self) -> usize {
        self.x1.len()
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    pub fn labels(&self) -> (&str, &str) {
        (&self.labels[0], &self.labels[1])
    }

    pub fn pair(&self, i: usize) -> (f64, f64) {
        (self.x1[i], self.x2[i])
    }

    /// Per-observation differences `x1 - x2`.
    pub fn differences(&self) -> Vec<f64> {
        self.x1
            .iter()
            .zip(self.x2.iter())
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// A univariate elliptical density generator: the density of a standardized
/// variable W is `C_g * g(w^2)`.
#[derive(Clone)]
pub struct DensityGenerator {
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    normalizing_constant: f64,
    label: String,
}

impl fmt::Debug for DensityGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityGenerator")
            .field("label", &self.label)
            .field("normalizing_constant", &self.normalizing_constant)
            .finish()
    }
}

impl DensityGenerator {
    pub fn new(
        label: impl Into<String>,
        normalizing_constant: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            g: Arc::new(g),
            normalizing_constant,
            label: label.into(),
        }
    }

    /// Evaluates g(t) for t >= 0.
    pub fn g(&self, t: f64) -> f64 {
        (self.g)(t)
    }

    /// The constant C_g with `C_g * integral of g(r^2) over the real line = 1`.
    pub fn normalizing_constant(&self) -> f64 {
        self.normalizing_constant
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Standard normal generator: g(t) = exp(-t/2), C_g = 1/sqrt(2*pi).
    pub fn gaussian() -> Self {
        Self::new("gaussian", 1.0 / (2.0 * std::f64::consts::PI).sqrt(), |t| {
            (-0.5 * t).exp()
        })
    }

    /// Generator of the standardized difference of a bivariate Laplace vector:
    /// mixing the conditional normal density of W = (X1 - X2 - gamma)/tau over
    /// the scale-mixture weight law gives the closed form
    /// g(t) = 4*sqrt(t)*K1(sqrt(t)/2) with C_g = 1/(16*pi), where K1 is the
    /// modified Bessel function of the second kind.
    pub fn laplace_difference() -> Self {
        Self::new(
            "laplace-difference",
            1.0 / (16.0 * std::f64::consts::PI),
            |t| {
                if t <= 0.0 {
                    // Limit of 4*sqrt(t)*K1(sqrt(t)/2) as t -> 0.
                    return 8.0;
                }
                let r = t.sqrt();
                4.0 * r
                    * crate::special::bessel_k(1.0, 0.5 * r)
                        .expect("K1 is defined for positive arguments")
            },
        )
    }

    /// Double-exponential generator: g(t) = exp(-sqrt(t)/2), C_g = 1/4.
    pub fn double_exponential() -> Self {
        Self::new("double-exponential", 0.25, |t| (-0.5 * t.max(0.0).sqrt()).exp())
    }
}

/// The generators shipped with the crate.
pub fn builtin_generators() -> Vec<DensityGenerator> {
    vec![
        DensityGenerator::gaussian(),
        DensityGenerator::laplace_difference(),
        DensityGenerator::double_exponential(),
    ]
}

/// Derives an independent RNG seed for a work-item index from a master seed,
/// so that parallel and serial executions of an indexed workload consume
/// identical streams.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    fn splitmix64(state: u64) -> u64 {
        let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(splitmix64(master).wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Scalar form of a bivariate location + Cholesky factor, for fast sampling.
struct BivariateScales {
    mu1: f64,
    mu2: f64,
    l11: f64,
    l21: f64,
    l22: f64,
}

impl BivariateScales {
    fn from_params(params: &ModelParams) -> Result<Self> {
        let parts = params.bivariate_parts()?;
        let chol = params.sigma().cholesky_lower();
        Ok(Self {
            mu1: parts.mu1,
            mu2: parts.mu2,
            l11: chol[(0, 0)],
            l21: chol[(1, 0)],
            l22: chol[(1, 1)],
        })
    }

    /// One correlated standard-normal pair scaled by `scale`, shifted by mu.
    fn shifted_draw(&self, rng: &mut ChaCha12Rng, scale: f64) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (
            self.mu1 + scale * self.l11 * z1,
            self.mu2 + scale * (self.l21 * z1 + self.l22 * z2),
        )
    }
}

fn require_family(params: &ModelParams, family: Family, op: &str) -> Result<()> {
    if params.family() != family {
        return Err(Error::Domain(format!(
            "{op} requires family {family}, got {}",
            params.family()
        )));
    }
    Ok(())
}

fn collect_sample(
    n: usize,
    mut draw: impl FnMut() -> (f64, f64),
) -> Result<BivariateSample> {
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b) = draw();
        x1.push(a);
        x2.push(b);
    }
    BivariateSample::new(x1, x2)
}

/// `n` iid draws from the bivariate normal N(mu, Sigma).
pub fn sample_gaussian(params: &ModelParams, n: usize, seed: u64) -> Result<BivariateSample> {
    require_family(params, Family::Gaussian, "sample_gaussian")?;
    let scales = BivariateScales::from_params(params)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    collect_sample(n, || scales.shifted_draw(&mut rng, 1.0))
}

/// `n` iid draws from the bivariate Laplace law with location mu and scatter
/// Sigma, generated through its normal scale-mixture: t ~ Gamma(3/2, scale 8),
/// omega = sqrt(t), X = mu + omega * L z. The population covariance is
/// 12 * Sigma.
pub fn sample_laplace(params: &ModelParams, n: usize, seed: u64) -> Result<BivariateSample> {
    require_family(params, Family::Laplace, "sample_laplace")?;
    let scales = BivariateScales::from_params(params)?;
    let k = 2.0_f64;
    let mixing = Gamma::new(0.5 * (k + 1.0), 8.0)
        .map_err(|e| Error::Domain(format!("invalid mixing distribution: {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    collect_sample(n, || {
        let t: f64 = rng.sample(mixing);
        scales.shifted_draw(&mut rng, t.sqrt())
    })
}

/// `n` iid draws from the bivariate Cauchy law: X = mu + (L z)/sqrt(w) with
/// w ~ chi-squared(1).
pub fn sample_cauchy(params: &ModelParams, n: usize, seed: u64) -> Result<BivariateSample> {
    require_family(params, Family::Cauchy, "sample_cauchy")?;
    let scales = BivariateScales::from_params(params)?;
    let chi = ChiSquared::new(1.0)
        .map_err(|e| Error::Domain(format!("invalid chi-squared distribution: {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    collect_sample(n, || {
        let w: f64 = rng.sample(chi);
        scales.shifted_draw(&mut rng, 1.0 / w.max(1e-300).sqrt())
    })
}

/// `n` iid draws from the scale-contaminated normal: each observation comes
/// from N(mu, Sigma) with probability 1 - epsilon and from N(mu, eta * Sigma)
/// with probability epsilon. With epsilon = 0 or eta = 1 this reduces to the
/// plain Gaussian sampler and consumes the identical random stream.
pub fn sample_contaminated(params: &ModelParams, n: usize, seed: u64) -> Result<BivariateSample> {
    require_family(params, Family::ContaminatedNormal, "sample_contaminated")?;
    let contamination = params.contamination().ok_or_else(|| {
        Error::Domain("contaminated-normal params require contamination settings".into())
    })?;
    let scales = BivariateScales::from_params(params)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let epsilon = contamination.epsilon();
    let inflation = contamination.eta().sqrt();
    if epsilon == 0.0 || contamination.eta() == 1.0 {
        return collect_sample(n, || scales.shifted_draw(&mut rng, 1.0));
    }
    collect_sample(n, || {
        let u: f64 = rng.random();
        let scale = if u < epsilon { inflation } else { 1.0 };
        scales.shifted_draw(&mut rng, scale)
    })
}

/// Dispatches to the sampler matching `params.family()`.
pub fn sample_from_params(params: &ModelParams, n: usize, seed: u64) -> Result<BivariateSample> {
    match params.family() {
        Family::Gaussian => sample_gaussian(params, n, seed),
        Family::Laplace => sample_laplace(params, n, seed),
        Family::Cauchy => sample_cauchy(params, n, seed),
        Family::ContaminatedNormal => sample_contaminated(params, n, seed),
    }
}

/// Log-density of the k-variate Laplace law at `x` for the location/scatter in
/// `params`:
///
/// `log f = ln Γ(k/2) − (k/2) ln π − ln Γ(k) − (k+1) ln 2 − ½ ln|Σ| − D/2`,
///
/// where `D` is the unsquared Mahalanobis distance of `x` from the location.
pub fn laplace_log_density(x: &DVector<f64>, params: &ModelParams) -> Result<f64> {
    let k = params.k();
    if x.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "point has dimension {}, parameters have dimension {k}",
            x.len()
        )));
    }
    let kf = k as f64;
    let diff = x - params.mu();
    let distance = params.sigma().mahalanobis(&diff);
    Ok(ln_gamma(0.5 * kf)
        - 0.5 * kf * std::f64::consts::PI.ln()
        - ln_gamma(kf)
        - (kf + 1.0) * std::f64::consts::LN_2
        - 0.5 * params.sigma().log_det()
        - 0.5 * distance)
}
