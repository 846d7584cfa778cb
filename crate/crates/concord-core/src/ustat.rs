//! Distribution-free U-statistic estimators of the agreement coefficient
//! for a payoff function phi (absolute or squared difference), with
//! projection-based and jackknife variance estimates.
//!
//! With `U1` the average within-pair payoff and `U2` the average cross-pair
//! payoff, the estimator is the ratio of `H = (n-1)(U2 - U1)` to
//! `G = U1 + (n-1)U2`. Both averages are evaluated by an exact O(n^2) pair
//! loop with compensated summation; rows are computed in parallel and
//! reduced in index order, so results do not depend on thread scheduling.

use rayon::prelude::*;

use crate::concordance::Phi;
use crate::error::{Error, Result};
use crate::sampling::BivariateSample;

/// Compensated (Kahan) accumulator.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum
    }
}

/// A U-statistic agreement estimate for one payoff function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UStatEstimate {
    phi: Phi,
    n: usize,
    u1: f64,
    u2: f64,
    h: f64,
    g: f64,
    rho_hat: f64,
    var_hat: f64,
}

impl UStatEstimate {
    pub fn phi(&self) -> Phi {
        self.phi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Average within-pair payoff; an unbiased estimate of `E phi(X1 - X2)`.
    pub fn u1(&self) -> f64 {
        self.u1
    }

    /// Average cross-pair payoff; an unbiased estimate of the payoff between
    /// independent copies of the two margins.
    pub fn u2(&self) -> f64 {
        self.u2
    }

    /// `(n-1)(U2 - U1)`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `U1 + (n-1)U2`.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// The agreement estimate `H/G`.
    pub fn rho_hat(&self) -> f64 {
        self.rho_hat
    }

    /// Projection-based estimate of `var(rho-hat)`.
    pub fn var_hat(&self) -> f64 {
        self.var_hat
    }

    /// `sqrt(var_hat)`.
    pub fn se(&self) -> f64 {
        self.var_hat.sqrt()
    }
}

/// Per-observation row sums of the two symmetric pair kernels.
struct KernelRows {
    /// `sum_{j != i} (phi_i + phi_j)/2` per observation.
    rows1: Vec<f64>,
    /// `sum_{j != i} (phi(x1_i - x2_j) + phi(x1_j - x2_i))/2` per observation.
    rows2: Vec<f64>,
}

fn kernel_rows(sample: &BivariateSample, phi: Phi) -> KernelRows {
    let n = sample.n();
    let x1 = sample.x1();
    let x2 = sample.x2();
    let payoffs: Vec<f64> = (0..n).map(|i| phi.apply(x1[i] - x2[i])).collect();
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut k1 = Kahan::default();
            let mut k2 = Kahan::default();
            for j in 0..n {
                if j == i {
                    continue;
                }
                k1.add(0.5 * (payoffs[i] + payoffs[j]));
                k2.add(0.5 * (phi.apply(x1[i] - x2[j]) + phi.apply(x1[j] - x2[i])));
            }
            (k1.total(), k2.total())
        })
        .collect();
    KernelRows {
        rows1: rows.iter().map(|r| r.0).collect(),
        rows2: rows.iter().map(|r| r.1).collect(),
    }
}

fn ordered_total(values: &[f64]) -> f64 {
    let mut k = Kahan::default();
    for &v in values {
        k.add(v);
    }
    k.total()
}

/// Delta-method variance of the ratio `H/G` from the joint variance of
/// `(U1, U2)`: expanded so that only `G` appears in a denominator, which
/// keeps the formula defined when the estimate itself is zero.
fn ratio_variance(n: usize, h: f64, g: f64, var_u1: f64, var_u2: f64, cov: f64) -> f64 {
    let m = n as f64 - 1.0;
    let var_h = m * m * (var_u1 + var_u2 - 2.0 * cov);
    let var_g = var_u1 + m * m * var_u2 + 2.0 * m * cov;
    let cov_hg = m * (m * var_u2 - var_u1 - (n as f64 - 2.0) * cov);
    ((g * g * var_h + h * h * var_g - 2.0 * h * g * cov_hg) / g.powi(4)).max(0.0)
}

fn estimate_from_rows(sample: &BivariateSample, phi: Phi, rows: &KernelRows) -> Result<UStatEstimate> {
    let n = sample.n();
    let nf = n as f64;
    let pairs_twice = nf * (nf - 1.0);
    let u1 = ordered_total(&rows.rows1) / pairs_twice;
    let u2 = ordered_total(&rows.rows2) / pairs_twice;
    let h = (nf - 1.0) * (u2 - u1);
    let g = u1 + (nf - 1.0) * u2;
    if g == 0.0 {
        return Err(Error::Undefined(
            "agreement ratio is undefined: all pair payoffs are zero".into(),
        ));
    }

    // First-order projections: q_{c,i} = (1/(n-1)) sum_{j != i} kernel_c(i, j)
    // estimates the conditional expectation given observation i, and
    // var(U_c) is approximately (4/n) times the variance of the projections.
    let mut c11 = Kahan::default();
    let mut c22 = Kahan::default();
    let mut c12 = Kahan::default();
    for i in 0..n {
        let d1 = rows.rows1[i] / (nf - 1.0) - u1;
        let d2 = rows.rows2[i] / (nf - 1.0) - u2;
        c11.add(d1 * d1);
        c22.add(d2 * d2);
        c12.add(d1 * d2);
    }
    let scale = 4.0 / (nf * (nf - 1.0));
    let var_u1 = scale * c11.total();
    let var_u2 = scale * c22.total();
    let cov = scale * c12.total();

    Ok(UStatEstimate {
        phi,
        n,
        u1,
        u2,
        h,
        g,
        rho_hat: h / g,
        var_hat: ratio_variance(n, h, g, var_u1, var_u2, cov),
    })
}

/// Computes the U-statistic agreement estimate for the given payoff
/// function, together with its projection-based variance. Exact O(n^2) pair
/// enumeration.
pub fn ustat_estimate(sample: &BivariateSample, phi: Phi) -> Result<UStatEstimate> {
    if sample.n() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: sample.n(),
        });
    }
    let rows = kernel_rows(sample, phi);
    estimate_from_rows(sample, phi, &rows)
}

/// Recomputes the projection-based variance of an estimate against its
/// sample. The estimate must have been produced from this sample.
pub fn ustat_variance(sample: &BivariateSample, est: &UStatEstimate) -> Result<f64> {
    if sample.n() < 4 {
        return Err(Error::TooFewObservations {
            needed: 4,
            got: sample.n(),
        });
    }
    if est.n != sample.n() {
        return Err(Error::DimensionMismatch(format!(
            "estimate was built from {} observations, sample has {}",
            est.n,
            sample.n()
        )));
    }
    let recomputed = ustat_estimate(sample, est.phi)?;
    let tol = 1e-9 * est.u2.abs().max(1.0);
    if (recomputed.u1 - est.u1).abs() > tol || (recomputed.u2 - est.u2).abs() > tol {
        return Err(Error::Domain(
            "estimate does not match this sample".into(),
        ));
    }
    Ok(recomputed.var_hat)
}

/// Delete-one jackknife variance of the U-statistic agreement estimate; an
/// independent check on the projection-based variance. O(n^2) total using
/// the kernel row sums.
pub fn ustat_variance_jackknife(sample: &BivariateSample, phi: Phi) -> Result<f64> {
    let n = sample.n();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    let rows = kernel_rows(sample, phi);
    let nf = n as f64;
    // Totals over unordered pairs; each row counts every pair touching i.
    let p1 = 0.5 * ordered_total(&rows.rows1);
    let p2 = 0.5 * ordered_total(&rows.rows2);
    let m = nf - 1.0;
    let pairs_less_one = m * (m - 1.0) / 2.0;
    let mut loo = Vec::with_capacity(n);
    for i in 0..n {
        let u1 = (p1 - rows.rows1[i]) / pairs_less_one;
        let u2 = (p2 - rows.rows2[i]) / pairs_less_one;
        let g = u1 + (m - 1.0) * u2;
        if g == 0.0 {
            return Err(Error::Undefined(
                "agreement ratio is undefined after deleting an observation".into(),
            ));
        }
        loo.push((m - 1.0) * (u2 - u1) / g);
    }
    let mean = ordered_total(&loo) / nf;
    let mut ss = Kahan::default();
    for v in &loo {
        ss.add((v - mean) * (v - mean));
    }
    Ok((m / nf) * ss.total())
}
