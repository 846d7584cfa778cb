use nalgebra::DVector;

use concord_core::sampling::laplace_log_density;
use concord_core::{
    estimate_agreement, fit_gaussian, fit_laplace, fit_laplace_constrained, lin_gaussian,
    lin_laplace, rho1_gaussian, sample_gaussian, sample_laplace, sample_moments, BivariateSample,
    CoefficientKind, ConvergenceSpec, Error, Family, ModelParams, Phi,
};

fn default_spec() -> ConvergenceSpec {
    ConvergenceSpec::default()
}

fn assert_trace_nondecreasing(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0),
            "log-likelihood decreased from {} to {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn sample_moments_hand_dataset() {
    let s = BivariateSample::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).unwrap();
    let m = sample_moments(&s).unwrap();
    assert_eq!(m.mean[0], 1.0);
    assert_eq!(m.mean[1], 1.0);
    assert!((m.cov_unbiased[(0, 0)] - 1.0).abs() < 1e-15);
    assert!((m.cov_unbiased[(1, 1)] - 1.0).abs() < 1e-15);
    assert!((m.cov_unbiased[(0, 1)] - 0.5).abs() < 1e-15);
    assert!((m.cov_ml[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
    assert!((m.cov_ml[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(m.gamma(), 0.0);
}

#[test]
fn sample_moments_degenerate_columns() {
    let s = BivariateSample::new(vec![2.0, 2.0, 2.0], vec![5.0, 5.0, 5.0]).unwrap();
    let m = sample_moments(&s).unwrap();
    assert_eq!(m.cov_ml, nalgebra::Matrix2::zeros());
    let t = BivariateSample::new(vec![1.0, 2.0, 4.0], vec![1.0, 2.0, 4.0]).unwrap();
    let mt = sample_moments(&t).unwrap();
    assert_eq!(mt.cov_ml[(0, 0)], mt.cov_ml[(0, 1)]);
    assert_eq!(mt.cov_ml[(1, 1)], mt.cov_ml[(0, 1)]);
    let tiny = BivariateSample::new(vec![1.0], vec![2.0]).unwrap();
    assert!(matches!(
        sample_moments(&tiny),
        Err(Error::TooFewObservations { needed: 2, got: 1 })
    ));
}

#[test]
fn gaussian_unconstrained_fit_is_closed_form() {
    let p = ModelParams::bivariate(Family::Gaussian, 1.0, 0.5, 1.0, 0.6, 1.2).unwrap();
    let s = sample_gaussian(&p, 250, 101).unwrap();
    let fit = fit_gaussian(&s, false, &default_spec()).unwrap();
    let m = sample_moments(&s).unwrap();
    let parts = fit.parts();
    assert_eq!(parts.mu1, m.mean[0]);
    assert_eq!(parts.mu2, m.mean[1]);
    assert!((parts.s11 - m.cov_ml[(0, 0)]).abs() < 1e-14);
    assert!((parts.s12 - m.cov_ml[(0, 1)]).abs() < 1e-14);
    assert!((parts.s22 - m.cov_ml[(1, 1)]).abs() < 1e-14);
    assert!(fit.converged());
    assert!(!fit.constrained());
    assert!(fit.weights().iter().all(|&w| w == 1.0));

    // The stored log-likelihood must equal the analytic value
    // -n*(log(2*pi*... )): cross-check against the determinant identity.
    let det = parts.s11 * parts.s22 - parts.s12 * parts.s12;
    let n = s.n() as f64;
    let expected = -n * (2.0 * std::f64::consts::PI).ln() - 0.5 * n * det.ln() - n;
    assert!(
        (fit.loglik() - expected).abs() < 1e-8 * n,
        "loglik {} vs analytic {expected}",
        fit.loglik()
    );
}

#[test]
fn gaussian_constrained_fit_honors_constraint() {
    let p = ModelParams::bivariate(Family::Gaussian, 1.0, 0.3, 1.0, 0.4, 0.8).unwrap();
    let s = sample_gaussian(&p, 200, 102).unwrap();
    let unconstrained = fit_gaussian(&s, false, &default_spec()).unwrap();
    let constrained = fit_gaussian(&s, true, &default_spec()).unwrap();
    let parts = constrained.parts();
    assert_eq!(parts.mu1, parts.mu2);
    assert_eq!(Some(parts.mu1), constrained.lambda());
    assert!(constrained.converged());
    assert!(constrained.loglik() <= unconstrained.loglik() + 1e-9);
    assert_trace_nondecreasing(constrained.loglik_trace());
    // Nested-model likelihood-ratio statistic is nonnegative.
    assert!(2.0 * (unconstrained.loglik() - constrained.loglik()) >= -1e-9);
}

#[test]
fn gaussian_fits_coincide_when_means_match() {
    // Column means are exactly equal, so the equal-means constraint is
    // inactive and both fits agree.
    let s = BivariateSample::new(
        vec![0.0, 1.0, 2.0, 3.0],
        vec![3.0, 1.0, 0.0, 2.0],
    )
    .unwrap();
    let unc = fit_gaussian(&s, false, &default_spec()).unwrap();
    let con = fit_gaussian(&s, true, &default_spec()).unwrap();
    assert!((unc.loglik() - con.loglik()).abs() < 1e-9);
    assert!((con.lambda().unwrap() - 1.5).abs() < 1e-12);
    let (u, c) = (unc.parts(), con.parts());
    assert!((u.s11 - c.s11).abs() < 1e-10);
    assert!((u.s12 - c.s12).abs() < 1e-10);
    assert!((u.s22 - c.s22).abs() < 1e-10);
}

#[test]
fn degenerate_data_is_an_estimation_error() {
    // Identical columns give a singular scatter.
    let x = vec![1.0, 2.0, 3.0, 4.0];
    let s = BivariateSample::new(x.clone(), x).unwrap();
    assert!(matches!(
        fit_gaussian(&s, false, &default_spec()),
        Err(Error::Estimation(_))
    ));
    assert!(matches!(
        fit_laplace(&s, &default_spec()),
        Err(Error::Estimation(_))
    ));
    let tiny = BivariateSample::new(vec![1.0, 2.0], vec![2.0, 1.0]).unwrap();
    assert!(matches!(
        fit_gaussian(&tiny, false, &default_spec()),
        Err(Error::TooFewObservations { needed: 3, got: 2 })
    ));
    // Invalid convergence controls are rejected.
    let s3 = BivariateSample::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).unwrap();
    let bad = ConvergenceSpec {
        tolerance: 0.0,
        max_iterations: 10,
    };
    assert!(matches!(
        fit_gaussian(&s3, false, &bad),
        Err(Error::Config(_))
    ));
    let bad_iter = ConvergenceSpec {
        tolerance: 1e-8,
        max_iterations: 0,
    };
    assert!(matches!(
        fit_laplace(&s3, &bad_iter),
        Err(Error::Config(_))
    ));
}

#[test]
fn laplace_em_recovers_simulated_parameters() {
    let truth = ModelParams::bivariate(Family::Laplace, 0.0, 0.0, 1.0, 0.85, 1.0).unwrap();
    let s = sample_laplace(&truth, 2000, 103).unwrap();
    let fit = fit_laplace(&s, &default_spec()).unwrap();
    assert!(fit.converged(), "EM did not converge");
    let parts = fit.parts();
    assert!((parts.s11 - 1.0).abs() < 0.1, "s11 {}", parts.s11);
    assert!((parts.s22 - 1.0).abs() < 0.1, "s22 {}", parts.s22);
    assert!((parts.s12 - 0.85).abs() < 0.085, "s12 {}", parts.s12);
    assert!(parts.mu1.abs() < 0.1);
    assert!(parts.mu2.abs() < 0.1);
    assert_trace_nondecreasing(fit.loglik_trace());
}

#[test]
fn laplace_em_ascends_and_satisfies_fixed_point_identity() {
    let truth = ModelParams::bivariate(Family::Laplace, 0.5, 0.0, 1.0, 0.5, 2.0).unwrap();
    let s = sample_laplace(&truth, 300, 104).unwrap();
    let fit = fit_laplace(&s, &default_spec()).unwrap();
    assert!(fit.converged());
    assert_trace_nondecreasing(fit.loglik_trace());

    // The stored log-likelihood must match the per-point density sum.
    let direct: f64 = (0..s.n())
        .map(|i| {
            let (a, b) = s.pair(i);
            laplace_log_density(&DVector::from_vec(vec![a, b]), fit.theta()).unwrap()
        })
        .sum();
    assert!(
        (direct - fit.loglik()).abs() < 1e-8,
        "density sum {direct} vs stored {}",
        fit.loglik()
    );

    // At the fixed point the scatter update forces mean(D_i) = 2k = 4.
    let parts = fit.parts();
    let sigma = fit.theta().sigma();
    let mut mean_distance = 0.0;
    for i in 0..s.n() {
        let (a, b) = s.pair(i);
        let diff = DVector::from_vec(vec![a - parts.mu1, b - parts.mu2]);
        mean_distance += sigma.mahalanobis(&diff);
    }
    mean_distance /= s.n() as f64;
    assert!(
        (mean_distance - 4.0).abs() < 1e-4,
        "mean Mahalanobis distance {mean_distance}"
    );

    // Weights are positive and strictly decreasing in the distance.
    let mut pairs: Vec<(f64, f64)> = (0..s.n())
        .map(|i| {
            let (a, b) = s.pair(i);
            let diff = DVector::from_vec(vec![a - parts.mu1, b - parts.mu2]);
            (sigma.mahalanobis(&diff), fit.weights()[i])
        })
        .collect();
    assert!(pairs.iter().all(|&(_, w)| w > 0.0));
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in pairs.windows(2) {
        if w[1].0 > w[0].0 + 1e-12 {
            assert!(
                w[1].1 <= w[0].1,
                "weight must not increase with distance: {:?} then {:?}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn laplace_constrained_fit_honors_constraint() {
    let truth = ModelParams::bivariate(Family::Laplace, 0.6, 0.4, 1.0, 0.7, 1.0).unwrap();
    let s = sample_laplace(&truth, 400, 105).unwrap();
    let unconstrained = fit_laplace(&s, &default_spec()).unwrap();
    let constrained = fit_laplace_constrained(&s, &default_spec()).unwrap();
    let parts = constrained.parts();
    assert_eq!(parts.mu1, parts.mu2);
    assert_eq!(Some(parts.mu1), constrained.lambda());
    assert!(constrained.converged());
    assert_trace_nondecreasing(constrained.loglik_trace());
    assert!(constrained.loglik() <= unconstrained.loglik() + 1e-9);
    assert!(2.0 * (unconstrained.loglik() - constrained.loglik()) >= -1e-9);
    // Weights at the constrained center are positive.
    assert!(constrained.weights().iter().all(|&w| w > 0.0));
}

#[test]
fn fits_are_affine_equivariant_under_shifts() {
    let truth = ModelParams::bivariate(Family::Laplace, 0.0, 0.0, 1.0, 0.6, 1.0).unwrap();
    let s = sample_laplace(&truth, 250, 106).unwrap();
    let shifted = BivariateSample::new(
        s.x1().iter().map(|v| v + 7.5).collect(),
        s.x2().iter().map(|v| v + 7.5).collect(),
    )
    .unwrap();
    for (a, b) in [
        (
            fit_gaussian(&s, false, &default_spec()).unwrap(),
            fit_gaussian(&shifted, false, &default_spec()).unwrap(),
        ),
        (
            fit_laplace(&s, &default_spec()).unwrap(),
            fit_laplace(&shifted, &default_spec()).unwrap(),
        ),
    ] {
        let (pa, pb) = (a.parts(), b.parts());
        assert!((pb.mu1 - pa.mu1 - 7.5).abs() < 1e-7);
        assert!((pb.mu2 - pa.mu2 - 7.5).abs() < 1e-7);
        assert!((pb.s11 - pa.s11).abs() < 1e-7);
        assert!((pb.s12 - pa.s12).abs() < 1e-7);
        assert!((pb.s22 - pa.s22).abs() < 1e-7);
        let lin_a = estimate_agreement(&a, CoefficientKind::Lin).unwrap();
        let lin_b = estimate_agreement(&b, CoefficientKind::Lin).unwrap();
        assert!((lin_a.value() - lin_b.value()).abs() < 1e-7);
    }
}

#[test]
fn agreement_plug_in_matches_population_formulas() {
    let p = ModelParams::bivariate(Family::Gaussian, 0.7, 0.2, 1.0, 0.5, 1.3).unwrap();
    let s = sample_gaussian(&p, 150, 107).unwrap();
    let fit = fit_gaussian(&s, false, &default_spec()).unwrap();
    let lin = estimate_agreement(&fit, CoefficientKind::Lin).unwrap();
    assert_eq!(lin.value(), lin_gaussian(fit.theta()).unwrap());
    let l1 = estimate_agreement(&fit, CoefficientKind::L1).unwrap();
    assert_eq!(l1.value(), rho1_gaussian(fit.theta()).unwrap());
    let square = estimate_agreement(
        &fit,
        CoefficientKind::ScaledPhi { phi: Phi::Square },
    )
    .unwrap();
    assert!((square.value() - lin.value()).abs() < 1e-12);

    let lt = ModelParams::bivariate(Family::Laplace, 0.0, 0.0, 1.0, 0.75, 1.0).unwrap();
    let sl = sample_laplace(&lt, 300, 108).unwrap();
    let lfit = fit_laplace(&sl, &default_spec()).unwrap();
    let llin = estimate_agreement(&lfit, CoefficientKind::Lin).unwrap();
    assert_eq!(llin.value(), lin_laplace(lfit.theta()).unwrap());
    // Scaled-phi is not defined for Laplace fits.
    assert!(matches!(
        estimate_agreement(&lfit, CoefficientKind::ScaledPhi { phi: Phi::Abs }),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn constrained_l1_equals_power_map_exactly() {
    let p = ModelParams::bivariate(Family::Gaussian, 0.4, 0.1, 1.0, 0.6, 0.9).unwrap();
    let s = sample_gaussian(&p, 120, 109).unwrap();
    for fit in [
        fit_gaussian(&s, true, &default_spec()).unwrap(),
        fit_laplace_constrained(&s, &default_spec()).unwrap(),
    ] {
        let lin = estimate_agreement(&fit, CoefficientKind::Lin).unwrap().value();
        let l1 = estimate_agreement(&fit, CoefficientKind::L1).unwrap().value();
        let lp1 = estimate_agreement(&fit, CoefficientKind::Lp { p: 1 })
            .unwrap()
            .value();
        assert_eq!(l1, 1.0 - (1.0 - lin).sqrt());
        assert_eq!(l1, lp1);
        // The power map at p = 2 returns Lin itself.
        let lp2 = estimate_agreement(&fit, CoefficientKind::Lp { p: 2 })
            .unwrap()
            .value();
        assert!((lp2 - lin).abs() < 1e-15);
    }
}

#[test]
fn zero_covariance_equal_means_gives_zero_agreement() {
    let s = BivariateSample::new(
        vec![-1.0, -1.0, 1.0, 1.0],
        vec![-1.0, 1.0, -1.0, 1.0],
    )
    .unwrap();
    let fit = fit_gaussian(&s, false, &default_spec()).unwrap();
    let lin = estimate_agreement(&fit, CoefficientKind::Lin).unwrap();
    assert_eq!(lin.value(), 0.0);
    let l1 = estimate_agreement(&fit, CoefficientKind::L1).unwrap();
    assert_eq!(l1.value(), 0.0);
}

#[test]
fn laplace_unequal_means_l1_uses_model_difference_law() {
    // Shift the first column so the fitted means differ clearly; the L1
    // plug-in must then differ from both the equal-means map and the
    // double-exponential folded-mean value.
    let truth = ModelParams::bivariate(Family::Laplace, 1.5, 0.0, 1.0, 0.7, 1.0).unwrap();
    let s = sample_laplace(&truth, 400, 110).unwrap();
    let fit = fit_laplace(&s, &default_spec()).unwrap();
    let parts = fit.parts();
    assert!((parts.mu1 - parts.mu2).abs() > 0.5, "means should differ");
    let lin = estimate_agreement(&fit, CoefficientKind::Lin).unwrap().value();
    let l1 = estimate_agreement(&fit, CoefficientKind::L1).unwrap().value();
    let map = 1.0 - (1.0 - lin).sqrt();
    assert!(
        (l1 - map).abs() > 1e-4,
        "unequal-means L1 {l1} should differ from the equal-means map {map}"
    );
    // Direct quadrature with the Laplace-difference generator reproduces it.
    let tau = (parts.s11 + parts.s22 - 2.0 * parts.s12).sqrt();
    let indep = (parts.s11 + parts.s22).sqrt();
    let direct = concord_core::rho1_ec(
        parts.mu1 - parts.mu2,
        tau,
        indep,
        &concord_core::DensityGenerator::laplace_difference(),
        &concord_core::special::QuadratureSpec::default(),
    )
    .unwrap();
    assert!((l1 - direct).abs() < 1e-12);
    // The double-exponential generator gives a visibly different value for
    // this mean gap.
    let de = concord_core::rho1_ec(
        parts.mu1 - parts.mu2,
        tau,
        indep,
        &concord_core::DensityGenerator::double_exponential(),
        &concord_core::special::QuadratureSpec::default(),
    )
    .unwrap();
    assert!(
        (l1 - de).abs() > 1e-4,
        "induced-generator value {l1} vs double-exponential {de}"
    );
}

#[test]
fn unconverged_fit_is_rejected_for_agreement() {
    let truth = ModelParams::bivariate(Family::Laplace, 0.9, 0.0, 1.0, 0.5, 1.0).unwrap();
    let s = sample_laplace(&truth, 500, 111).unwrap();
    let strict = ConvergenceSpec {
        tolerance: 1e-15,
        max_iterations: 2,
    };
    let fit = fit_laplace(&s, &strict).unwrap();
    assert!(!fit.converged());
    assert_eq!(fit.iterations(), 2);
    assert!(matches!(
        estimate_agreement(&fit, CoefficientKind::Lin),
        Err(Error::Estimation(_))
    ));
}
