//! Scalar special functions and one-dimensional adaptive quadrature.
//!
//! Everything here is pure and reentrant. The rest of the crate builds on
//! these primitives: the normal CDF feeds the closed-form agreement
//! coefficients, the Bessel functions feed the heavy-tailed density
//! generator, the gamma machinery feeds p-values and goodness-of-fit
//! thresholds, and `integrate_1d` evaluates the generator-based coefficient
//! integrals.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// ln(2π)/2, the normalizing constant of the standard normal log-density.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Tolerances and budget for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub absolute_tolerance: f64,
    pub relative_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            absolute_tolerance: 1e-10,
            relative_tolerance: 1e-8,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.absolute_tolerance > 0.0) || !(self.relative_tolerance > 0.0) {
            return Err(Error::Domain(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Domain(
                "quadrature needs at least one subdivision".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Gamma function machinery
// ---------------------------------------------------------------------------

/// Natural log of the gamma function for x > 0 (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        let sin_term = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - sin_term.abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, c) in COEF.iter().enumerate() {
        acc += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x) for a > 0, x ≥ 0.
pub fn reg_gamma_lower(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        lower_gamma_series(a, x)
    } else {
        1.0 - upper_gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn reg_gamma_upper(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_cf(a, x)
    }
}

/// Series expansion of P(a, x), accurate for x < a + 1.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = 1.0;
    while n < 10_000.0 {
        term *= x / (a + n);
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
        n += 1.0;
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Continued fraction for Q(a, x) (modified Lentz), accurate for x ≥ a + 1.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// CDF of Gamma(shape, rate) at x (rate parameterization: mean = shape/rate).
pub fn gamma_cdf(shape: f64, rate: f64, x: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::Domain(
            "gamma shape and rate must be positive".into(),
        ));
    }
    Ok(reg_gamma_lower(shape, rate * x.max(0.0)))
}

/// Upper tail of the chi-squared distribution with `df` degrees of freedom.
pub fn chi_squared_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Domain("degrees of freedom must be positive".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(reg_gamma_upper(0.5 * df, 0.5 * x))
}

/// Quantile of Gamma(shape, rate): the x with P(shape, rate·x) = p, solved to
/// an absolute CDF error below 1e-10 by a safeguarded Newton iteration.
pub fn gamma_quantile(shape: f64, rate: f64, p: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::Domain(
            "gamma shape and rate must be positive".into(),
        ));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(
            "gamma quantile needs p strictly inside (0, 1)".into(),
        ));
    }

    // Wilson–Hilferty starting point for Gamma(shape, 1).
    let z = std_normal_quantile(p)?;
    let c = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * shape.sqrt());
    let mut x = if c > 0.0 {
        shape * c.powi(3)
    } else {
        // Deep lower tail: invert the leading series term P ≈ x^a / (a Γ(a)).
        ((p * shape).ln() + ln_gamma(shape)).exp().powf(1.0 / shape)
    };
    if !(x > 0.0) || !x.is_finite() {
        x = shape;
    }

    // Bracket for bisection safeguarding.
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..200 {
        let f = reg_gamma_lower(shape, x) - p;
        if f.abs() < 1e-13 {
            break;
        }
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        // Newton step on the CDF; density in log form to survive the tails.
        let log_pdf = (shape - 1.0) * x.ln() - x - ln_gamma(shape);
        let step = f * (-log_pdf).exp();
        let mut next = x - step;
        if !(next > lo) || !(next < hi) || !next.is_finite() {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                x * 2.0
            };
        }
        if (next - x).abs() <= 1e-15 * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x / rate)
}

// ---------------------------------------------------------------------------
// Standard normal distribution
// ---------------------------------------------------------------------------

/// Standard normal CDF Φ(x), absolute error below 1e-15 on finite inputs.
///
/// Evaluated through the regularized incomplete gamma functions of order 1/2,
/// which keeps the tails fully relative-accurate.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let z = 0.5 * x * x;
    if x > 0.0 {
        if z < 1.5 {
            0.5 + 0.5 * lower_gamma_series(0.5, z)
        } else {
            1.0 - 0.5 * upper_gamma_cf(0.5, z)
        }
    } else if z < 1.5 {
        0.5 - 0.5 * lower_gamma_series(0.5, z)
    } else {
        0.5 * upper_gamma_cf(0.5, z)
    }
}

/// Standard normal density φ(x).
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal quantile Φ⁻¹(p), accurate to full double precision via
/// Newton refinement on `std_normal_cdf`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(
            "normal quantile needs p strictly inside (0, 1)".into(),
        ));
    }
    let q = p - 0.5;
    let mut x = if q.abs() < 0.2 {
        // Low-order central approximation, fixed up by Newton below.
        q * (2.0 * std::f64::consts::PI).sqrt()
    } else {
        let r = p.min(1.0 - p);
        let t = (-2.0 * r.ln()).sqrt();
        if q < 0.0 {
            -t
        } else {
            t
        }
    };
    for _ in 0..100 {
        let err = std_normal_cdf(x) - p;
        // err/φ stays well-scaled even deep in the tails.
        let step = err / std_normal_pdf(x);
        let capped = step.clamp(-1.0, 1.0);
        x -= capped;
        if capped.abs() < 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Modified Bessel function of the second kind
// ---------------------------------------------------------------------------

/// K_ν(x) for x > 0 and ν a nonnegative integer or half-integer.
///
/// Half-integer orders use the closed-form finite sum; integer orders use the
/// classical ascending series for K₀/K₁ below x = 2 and a continued fraction
/// above it, with the stable upward recurrence for higher orders. Relative
/// accuracy is better than 1e-12 across x ∈ [0.01, 50].
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "bessel_k requires x > 0, got {x}"
        )));
    }
    let nu = nu.abs(); // K_{−ν} = K_ν
    let two_nu = 2.0 * nu;
    if (two_nu - two_nu.round()).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "bessel_k supports integer and half-integer orders, got {nu}"
        )));
    }
    let doubled = two_nu.round() as i64;
    if doubled % 2 == 1 {
        return Ok(bessel_k_half_integer(((doubled - 1) / 2) as usize, x));
    }
    let order = (doubled / 2) as usize;

    let (k0, k1) = if x <= 2.0 {
        bessel_k01_series(x)
    } else {
        bessel_k01_continued_fraction(x)
    };
    match order {
        0 => Ok(k0),
        1 => Ok(k1),
        n => {
            let mut km = k0;
            let mut k = k1;
            for j in 1..n {
                let next = km + (2.0 * j as f64 / x) * k;
                km = k;
                k = next;
            }
            Ok(k)
        }
    }
}

/// K_{m+1/2}(x) = √(π/2x)·e^(−x)·Σ_{j≤m} (m+j)!/(j!(m−j)!)·(2x)^(−j).
fn bessel_k_half_integer(m: usize, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=m {
        term *= ((m + j) as f64) * ((m - j + 1) as f64) / (j as f64 * 2.0 * x);
        sum += term;
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// Ascending series for K₀ and K₁, accurate for 0 < x ≤ 2.
fn bessel_k01_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let lnh = (0.5 * x).ln();

    // K₀ = −(ln(x/2) + γ)·I₀ + Σ_{j≥1} t^j/(j!)²·H_j
    let mut i0 = 1.0;
    let mut k0_sum = 0.0;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    for j in 1..200 {
        let jf = j as f64;
        term *= t / (jf * jf);
        harmonic += 1.0 / jf;
        i0 += term;
        k0_sum += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    let k0 = -(lnh + EULER_GAMMA) * i0 + k0_sum;

    // K₁ = 1/x + ln(x/2)·I₁ − (x/4)·Σ_{j≥0} [ψ(j+1)+ψ(j+2)]·t^j/(j!(j+1)!)
    let mut i1_sum = 1.0; // Σ t^j/(j!(j+1)!), j = 0 term
    let mut psi_sum = 2.0 * -EULER_GAMMA + 1.0; // ψ(1)+ψ(2) at j = 0
    let mut k1_sum = psi_sum;
    let mut term1 = 1.0;
    let mut h_j = 0.0;
    for j in 1..200 {
        let jf = j as f64;
        term1 *= t / (jf * (jf + 1.0));
        h_j += 1.0 / jf;
        let h_j1 = h_j + 1.0 / (jf + 1.0);
        psi_sum = -2.0 * EULER_GAMMA + h_j + h_j1;
        i1_sum += term1;
        k1_sum += term1 * psi_sum;
        if term1 * (1.0 + psi_sum.abs()) < 1e-18 * i1_sum {
            break;
        }
    }
    let i1 = 0.5 * x * i1_sum;
    let k1 = 1.0 / x + lnh * i1 - 0.25 * x * k1_sum;
    (k0, k1)
}

/// Steed-style continued fraction for K₀ and K₁, accurate for x ≥ 2.
fn bessel_k01_continued_fraction(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25; // 1/4 − μ² at μ = 0
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..30_000 {
        a -= 2.0 * (i as f64 - 1.0);
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() <= EPS {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

/// Integrate `f` over (lower, upper); either bound may be infinite.
///
/// Semi-infinite and doubly infinite ranges are mapped onto finite intervals
/// with rational transforms, then integrated by adaptive 21-point
/// Gauss–Kronrod subdivision. Returns the estimate once the accumulated error
/// bound satisfies the spec, or a [`Error::Quadrature`] carrying the best
/// estimate when the subdivision budget runs out.
pub fn integrate_1d<F>(f: F, lower: f64, upper: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if lower.is_nan() || upper.is_nan() {
        return Err(Error::Domain("integration bounds must not be NaN".into()));
    }
    if lower == upper {
        return Ok(0.0);
    }
    let (lower, upper, sign) = if lower < upper {
        (lower, upper, 1.0)
    } else {
        (upper, lower, -1.0)
    };

    let oriented = match (lower.is_finite(), upper.is_finite()) {
        (true, true) => adaptive_gk(&f, lower, upper, spec),
        (true, false) => {
            let a = lower;
            let g = |t: f64| {
                let u = 1.0 - t;
                f(a + t / u) / (u * u)
            };
            adaptive_gk(&g, 0.0, 1.0, spec)
        }
        (false, true) => {
            let b = upper;
            let g = |t: f64| {
                let u = 1.0 - t;
                f(b - t / u) / (u * u)
            };
            adaptive_gk(&g, 0.0, 1.0, spec)
        }
        (false, false) => {
            let g = |t: f64| {
                let u = 1.0 - t * t;
                f(t / u) * (1.0 + t * t) / (u * u)
            };
            adaptive_gk(&g, -1.0, 1.0, spec)
        }
    };
    oriented.map(|v| sign * v).map_err(|e| match e {
        Error::Quadrature { estimate, error } => Error::Quadrature {
            estimate: sign * estimate,
            error,
        },
        other => other,
    })
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let first = gk21(f, a, b)?;
    let mut segments = vec![first];
    let mut splits = 0usize;
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        let tol = spec
            .absolute_tolerance
            .max(spec.relative_tolerance * total.abs());
        if err <= tol {
            return Ok(total);
        }
        if splits >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
            });
        }
        // Split the segment with the largest error bound.
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval no longer splittable in floating point; accept as is.
            segments.push(seg);
            let total: f64 = segments.iter().map(|s| s.value).sum();
            return Ok(total);
        }
        segments.push(gk21(f, seg.a, mid)?);
        segments.push(gk21(f, mid, seg.b)?);
        splits += 1;
    }
}

/// 21-point Gauss–Kronrod rule with the QUADPACK error rescaling.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    const XGK: [f64; 11] = [
        0.995_657_163_025_808_1,
        0.973_906_528_517_171_7,
        0.930_157_491_355_708_2,
        0.865_063_366_688_984_5,
        0.780_817_726_586_416_9,
        0.679_409_568_299_024_4,
        0.562_757_134_668_604_7,
        0.433_395_394_129_247_2,
        0.294_392_862_701_460_2,
        0.148_874_338_981_631_21,
        0.0,
    ];
    const WG: [f64; 5] = [
        0.066_671_344_308_688_14,
        0.149_451_349_150_580_6,
        0.219_086_362_515_982_04,
        0.269_266_719_309_996_36,
        0.295_524_224_714_752_87,
    ];
    const WGK: [f64; 11] = [
        0.011_694_638_867_371_874,
        0.032_558_162_307_964_725,
        0.054_755_896_574_351_995,
        0.075_039_674_810_919_95,
        0.093_125_454_583_697_6,
        0.109_387_158_802_297_64,
        0.123_491_976_262_065_85,
        0.134_709_217_311_473_33,
        0.142_775_938_577_060_08,
        0.147_739_104_901_338_49,
        0.149_445_554_002_916_9,
    ];

    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_nan() {
            return Err(Error::Domain(format!(
                "integrand returned NaN at x = {x}"
            )));
        }
        Ok(v)
    };

    let fc = eval(center)?;
    let mut kron = fc * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kron.abs();
    let mut values = [0.0f64; 21];
    values[10] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        values[j] = f1;
        values[20 - j] = f2;
        kron += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kron;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((values[j] - mean).abs() + (values[20 - j] - mean).abs());
    }

    let raw_err = ((kron - gauss) * half).abs();
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = raw_err;
    if res_asc != 0.0 && error != 0.0 {
        let scale = (200.0 * error / res_asc).powf(1.5);
        error = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }

    Ok(Segment {
        a,
        b,
        value: kron * half,
        error,
    })
}
