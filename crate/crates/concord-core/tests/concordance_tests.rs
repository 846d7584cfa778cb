use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use concord_core::concordance::{
    lin_gaussian_from_parts, rho1_gaussian_from_parts, scaled_phi_gaussian_from_parts,
    RHO1_LOWER_BOUND,
};
use concord_core::special::QuadratureSpec;
use concord_core::{
    folded_normal_mean, lin_ec, lin_gaussian, lin_laplace, rho1_ec, rho1_gaussian,
    rho_p_from_rho_c, scaled_phi_gaussian, AgreementValue, Assumption, BivariateParts,
    CoefficientKind, DensityGenerator, Error, Family, ModelParams, Phi, ScatterMatrix,
};

fn params(mu1: f64, mu2: f64, s11: f64, s12: f64, s22: f64) -> ModelParams {
    ModelParams::bivariate(Family::Gaussian, mu1, mu2, s11, s12, s22).unwrap()
}

fn grid() -> Vec<ModelParams> {
    vec![
        params(0.0, 0.0, 1.0, 0.95, 1.0),
        params(0.0, 0.0, 1.0, 0.5, 1.0),
        params(1.0, 0.0, 1.0, 0.5, 1.0),
        params(2.5, -1.0, 2.0, -0.4, 0.7),
        params(-0.3, 0.4, 0.5, 0.1, 3.0),
        params(5.0, 5.0, 4.0, 1.2, 1.0),
    ]
}

#[test]
fn lin_gaussian_reference_values() {
    assert!((lin_gaussian(&params(0.0, 0.0, 1.0, 0.95, 1.0)).unwrap() - 0.95).abs() < 1e-15);
    assert_eq!(lin_gaussian(&params(0.7, -0.3, 2.0, 0.0, 1.0)).unwrap(), 0.0);
    let v = lin_gaussian(&params(1.0, 0.0, 1.0, 0.5, 1.0)).unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn lin_laplace_reference_values() {
    assert!((lin_laplace(&params(0.0, 0.0, 1.0, 0.85, 1.0)).unwrap() - 0.85).abs() < 1e-15);
    assert_eq!(lin_laplace(&params(0.7, -0.3, 2.0, 0.0, 1.0)).unwrap(), 0.0);
    let v = lin_laplace(&params(1.0, 0.0, 1.0, 0.5, 1.0)).unwrap();
    assert!((v - 0.48).abs() < 1e-15);
    // Equal means: reduces to 2*s12/(s11+s22).
    let p = params(0.4, 0.4, 1.7, 0.6, 0.9);
    let reduced = 2.0 * 0.6 / (1.7 + 0.9);
    assert!((lin_laplace(&p).unwrap() - reduced).abs() < 1e-15);
    // Dimension error for k = 3 parameters.
    let p3 = ModelParams::new(
        DVector::zeros(3),
        ScatterMatrix::new(DMatrix::identity(3, 3)).unwrap(),
        Family::Laplace,
        None,
    )
    .unwrap();
    assert!(matches!(
        lin_laplace(&p3),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn lin_ec_interpolates_gaussian_and_laplace() {
    for p in grid() {
        let gauss = lin_gaussian(&p).unwrap();
        let lap = lin_laplace(&p).unwrap();
        assert!((lin_ec(&p, 2.0).unwrap() - gauss).abs() < 1e-14);
        assert!((lin_ec(&p, 24.0).unwrap() - lap).abs() < 1e-14);
    }
    // Equal means and equal variances: rho_c equals the correlation for any
    // second radial moment.
    let p = params(1.0, 1.0, 2.0, 0.8, 2.0);
    for er2 in [1.0, 2.0, 7.3, 24.0] {
        assert!((lin_ec(&p, er2).unwrap() - 0.4).abs() < 1e-14);
    }
    for bad in [0.0, -3.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(lin_ec(&p, bad), Err(Error::Domain(_))));
    }
}

#[test]
fn rho1_gaussian_reference_values() {
    // Equal means with sigma12 = 0.75 on unit variances: 1 - sqrt(0.5/2).
    let v = rho1_gaussian(&params(0.0, 0.0, 1.0, 0.75, 1.0)).unwrap();
    assert!((v - 0.5).abs() < 1e-15);
    // Equal means, no covariance: difference and independence scales agree.
    assert_eq!(rho1_gaussian(&params(1.0, 1.0, 1.0, 0.0, 1.0)).unwrap(), 0.0);
    // Unequal means (30-digit folded-normal reference).
    let v = rho1_gaussian(&params(1.0, 0.0, 1.0, 0.5, 1.0)).unwrap();
    assert!((v - 0.16626486986318002).abs() < 1e-14);
    // Degenerate difference variance reports perfect agreement.
    let parts = BivariateParts {
        mu1: 0.3,
        mu2: 0.3,
        s11: 1.0,
        s12: 1.0,
        s22: 1.0,
    };
    assert_eq!(rho1_gaussian_from_parts(&parts), 1.0);
}

#[test]
fn rho1_gaussian_matches_monte_carlo_expectation_ratio() {
    // Brute-force the defining ratio E|X1-X2| / E0|X1-X2| for
    // mu = (1, 0), unit variances, sigma12 = 0.5.
    let mut rng = ChaCha12Rng::seed_from_u64(20_240_817);
    let n = 10_000_000usize;
    let (l11, l21, l22) = (1.0, 0.5, (1.0f64 - 0.25).sqrt());
    let mut dep_sum = 0.0f64;
    let mut indep_sum = 0.0f64;
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let z3: f64 = rng.sample(StandardNormal);
        let x1 = 1.0 + l11 * z1;
        let x2 = l21 * z1 + l22 * z2;
        // An independent copy of the second instrument for the denominator.
        let y2 = l21 * z3 + l22 * rng.sample::<f64, _>(StandardNormal);
        dep_sum += (x1 - x2).abs();
        indep_sum += (x1 - y2).abs();
    }
    let mc = 1.0 - dep_sum / indep_sum;
    let closed = rho1_gaussian(&params(1.0, 0.0, 1.0, 0.5, 1.0)).unwrap();
    assert!(
        (mc - closed).abs() < 2e-3,
        "Monte Carlo {mc} vs closed form {closed}"
    );
}

#[test]
fn rho1_ec_gaussian_generator_matches_closed_form() {
    let gen = DensityGenerator::gaussian();
    let spec = QuadratureSpec::default();
    for (mu1, mu2, s11, s12, s22) in [
        (0.0, 0.0, 1.0, 0.75, 1.0),
        (1.0, 0.0, 1.0, 0.5, 1.0),
        (2.0, -1.0, 2.0, 0.3, 0.8),
        (-0.4, 0.6, 1.5, -0.2, 1.1),
        (0.05, 0.0, 1.0, 0.9, 1.0),
    ] {
        let p = params(mu1, mu2, s11, s12, s22);
        let gamma = mu1 - mu2;
        let tau = (s11 + s22 - 2.0 * s12).sqrt();
        let indep = (s11 + s22).sqrt();
        let via_quadrature = rho1_ec(gamma, tau, indep, &gen, &spec).unwrap();
        let closed = rho1_gaussian(&p).unwrap();
        assert!(
            (via_quadrature - closed).abs() < 1e-6,
            "({mu1},{mu2},{s11},{s12},{s22}): {via_quadrature} vs {closed}"
        );
    }
}

#[test]
fn rho1_ec_is_generator_free_under_equal_means() {
    let spec = QuadratureSpec::default();
    for gen in [
        DensityGenerator::gaussian(),
        DensityGenerator::laplace_difference(),
        DensityGenerator::double_exponential(),
    ] {
        let v = rho1_ec(0.0, 0.5, 2.0, &gen, &spec).unwrap();
        assert_eq!(v, 1.0 - 0.25);
        // Equal scales with equal means: no agreement gain over independence.
        assert_eq!(rho1_ec(0.0, 2.0, 2.0, &gen, &spec).unwrap(), 0.0);
    }
}

#[test]
fn rho1_ec_double_exponential_matches_closed_form() {
    // For the double-exponential generator the folded mean is
    // |gamma| + 2*scale*exp(-|gamma|/(2*scale)) in closed form.
    let gen = DensityGenerator::double_exponential();
    let spec = QuadratureSpec::default();
    for (gamma, tau, indep, want) in [
        (0.3, 0.5, 1.5, 0.65473080453947604),
        (1.0, 0.5, 1.5, 0.56569657205814897),
        (2.5, 1.2, 3.0, 0.48154167103942978),
        (1.0, 1.2, 1.5, 0.1801554205212064),
    ] {
        let got = rho1_ec(gamma, tau, indep, &gen, &spec).unwrap();
        assert!(
            (got - want).abs() < 1e-8,
            "({gamma},{tau},{indep}): got {got}, want {want}"
        );
    }
}

#[test]
fn rho1_ec_rejects_bad_scales() {
    let gen = DensityGenerator::gaussian();
    let spec = QuadratureSpec::default();
    assert!(matches!(
        rho1_ec(0.5, -0.1, 1.0, &gen, &spec),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        rho1_ec(0.5, 0.5, 0.0, &gen, &spec),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        rho1_ec(f64::NAN, 0.5, 1.0, &gen, &spec),
        Err(Error::Domain(_))
    ));
    // Degenerate tau with nonzero gamma falls back to perfect agreement.
    assert_eq!(rho1_ec(0.7, 0.0, 1.0, &gen, &spec).unwrap(), 1.0);
}

#[test]
fn rho_p_map_reference_values() {
    assert!((rho_p_from_rho_c(0.75, 1).unwrap() - 0.5).abs() < 1e-15);
    assert!((rho_p_from_rho_c(0.85, 1).unwrap() - 0.6127016653792583).abs() < 1e-15);
    assert!((rho_p_from_rho_c(0.95, 1).unwrap() - 0.7763932022500210).abs() < 1e-15);
    for p in 1..6 {
        assert_eq!(rho_p_from_rho_c(0.0, p).unwrap(), 0.0);
    }
    assert!((rho_p_from_rho_c(-1.0, 1).unwrap() - RHO1_LOWER_BOUND).abs() < 1e-15);
    // p = 2 is the identity.
    for rho in [-0.9, -0.3, 0.0, 0.4, 0.75, 1.0] {
        assert!((rho_p_from_rho_c(rho, 2).unwrap() - rho).abs() < 1e-15);
    }
    assert!(matches!(rho_p_from_rho_c(0.5, 0), Err(Error::Domain(_))));
    assert!(matches!(rho_p_from_rho_c(1.2, 1), Err(Error::Domain(_))));
    assert!(matches!(
        rho_p_from_rho_c(f64::NAN, 1),
        Err(Error::Domain(_))
    ));
}

#[test]
fn rho_p_deficit_shrinks_with_p() {
    // For rho_c in (0,1) the deficit 1 - rho_p = (1 - rho_c)^(p/2) decreases
    // with p, i.e. rho_p is nondecreasing in p.
    for rho in [0.1, 0.5, 0.75, 0.95] {
        let mut prev = rho_p_from_rho_c(rho, 1).unwrap();
        for p in 2..9 {
            let next = rho_p_from_rho_c(rho, p).unwrap();
            assert!(
                next >= prev - 1e-15,
                "rho_p decreased from {prev} to {next} at p = {p}"
            );
            prev = next;
        }
    }
}

#[test]
fn rho1_orders_against_lin_by_sign() {
    // With unit variances and equal means, rho_c equals sigma12 and
    // rho_1 = 1 - sqrt(1 - rho_c): below rho_c on (0,1), above it on (-1,0),
    // equal at 0 and 1.
    let mut rho_c = -0.95;
    while rho_c < 1.0 {
        let rho_1 = rho_p_from_rho_c(rho_c, 1).unwrap();
        if rho_c > 1e-12 {
            assert!(rho_1 < rho_c, "expected rho_1 < rho_c at {rho_c}");
        } else if rho_c < -1e-12 {
            assert!(rho_1 > rho_c, "expected rho_1 > rho_c at {rho_c}");
        }
        rho_c += 0.05;
    }
    assert_eq!(rho_p_from_rho_c(0.0, 1).unwrap(), 0.0);
    assert_eq!(rho_p_from_rho_c(1.0, 1).unwrap(), 1.0);
}

#[test]
fn coefficients_are_scale_invariant() {
    let spec = QuadratureSpec::default();
    for c in [0.25f64, 4.0, 100.0] {
        let base = params(1.0, 0.2, 2.0, 0.7, 1.1);
        let scaled = params(
            1.0 * c.sqrt(),
            0.2 * c.sqrt(),
            2.0 * c,
            0.7 * c,
            1.1 * c,
        );
        assert!(
            (lin_gaussian(&base).unwrap() - lin_gaussian(&scaled).unwrap()).abs() < 1e-12
        );
        assert!(
            (lin_laplace(&base).unwrap() - lin_laplace(&scaled).unwrap()).abs() < 1e-12
        );
        assert!(
            (rho1_gaussian(&base).unwrap() - rho1_gaussian(&scaled).unwrap()).abs() < 1e-12
        );
        assert!(
            (scaled_phi_gaussian(&base, Phi::Abs).unwrap()
                - scaled_phi_gaussian(&scaled, Phi::Abs).unwrap())
            .abs()
                < 1e-12
        );
        let gen = DensityGenerator::double_exponential();
        let a = rho1_ec(0.8, 0.9, 1.8, &gen, &spec).unwrap();
        let b = rho1_ec(0.8 * c.sqrt(), 0.9 * c.sqrt(), 1.8 * c.sqrt(), &gen, &spec).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn scaled_phi_square_equals_lin() {
    for p in grid() {
        let scaled = scaled_phi_gaussian(&p, Phi::Square).unwrap();
        let lin = lin_gaussian(&p).unwrap();
        assert!(
            (scaled - lin).abs() < 1e-12,
            "square-phi {scaled} vs lin {lin}"
        );
    }
}

#[test]
fn scaled_phi_abs_reference_values() {
    let v = scaled_phi_gaussian(&params(0.0, 0.0, 1.0, 0.5, 1.0), Phi::Abs).unwrap();
    assert!((v - 0.36602540378443865).abs() < 1e-12);
    assert!(v.abs() <= 1.0);
    let v = scaled_phi_gaussian(&params(0.4, -0.2, 1.2, 0.3, 0.7), Phi::Abs).unwrap();
    assert!((v - 0.19295462443226452).abs() < 1e-12);
    // Identical instruments (boundary, exactly singular scatter): value 1.
    let boundary = BivariateParts {
        mu1: 0.7,
        mu2: 0.7,
        s11: 1.0,
        s12: 1.0,
        s22: 1.0,
    };
    assert_eq!(scaled_phi_gaussian_from_parts(&boundary, Phi::Abs), 1.0);
    assert_eq!(scaled_phi_gaussian_from_parts(&boundary, Phi::Square), 1.0);
}

#[test]
fn scaled_phi_abs_matches_monte_carlo() {
    // Simulate all five expectations for mu = 0, unit variances, s12 = 0.5.
    let mut rng = ChaCha12Rng::seed_from_u64(555_123);
    let n = 4_000_000usize;
    let (l11, l21, l22) = (1.0, 0.5, (1.0f64 - 0.25).sqrt());
    let (mut dep_diff, mut dep_sum) = (0.0f64, 0.0f64);
    let (mut indep_diff, mut indep_sum) = (0.0f64, 0.0f64);
    let (mut dbl1, mut dbl2) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let w1: f64 = rng.sample(StandardNormal);
        let w2: f64 = rng.sample(StandardNormal);
        let x1 = l11 * z1;
        let x2 = l21 * z1 + l22 * z2;
        let y2 = l21 * w1 + l22 * w2;
        dep_diff += (x1 - x2).abs();
        dep_sum += (x1 + x2).abs();
        indep_diff += (x1 - y2).abs();
        indep_sum += (x1 + y2).abs();
        dbl1 += (2.0 * x1).abs();
        dbl2 += (2.0 * x2).abs();
    }
    let nf = n as f64;
    let numerator = (indep_diff - indep_sum) / nf - (dep_diff - dep_sum) / nf;
    let denominator = (indep_diff - indep_sum) / nf + 0.5 * (dbl1 + dbl2) / nf;
    let mc = numerator / denominator;
    let closed = scaled_phi_gaussian(&params(0.0, 0.0, 1.0, 0.5, 1.0), Phi::Abs).unwrap();
    assert!((mc - closed).abs() < 4e-3, "MC {mc} vs closed {closed}");
}

#[test]
fn folded_normal_mean_special_cases() {
    assert_eq!(folded_normal_mean(-2.5, 0.0), 2.5);
    // Zero mean: sqrt(2v/pi).
    let v = folded_normal_mean(0.0, 4.0);
    assert!((v - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
    // Large positive mean: approximately the mean itself.
    assert!((folded_normal_mean(50.0, 1.0) - 50.0).abs() < 1e-12);
    // Symmetry in the mean.
    assert!((folded_normal_mean(1.3, 0.7) - folded_normal_mean(-1.3, 0.7)).abs() < 1e-14);
    // Frozen references.
    assert!((folded_normal_mean(1.0, 1.0) - 1.1666309411753726).abs() < 1e-14);
    assert!((folded_normal_mean(1.0, 2.0) - 1.3992824567484913).abs() < 1e-14);
}

#[test]
fn agreement_value_validates_ranges() {
    let ok = AgreementValue::new(CoefficientKind::Lin, Assumption::Gaussian, 0.9).unwrap();
    assert_eq!(ok.value(), 0.9);
    assert_eq!(ok.kind(), &CoefficientKind::Lin);
    assert!(AgreementValue::new(CoefficientKind::Lin, Assumption::Gaussian, 1.5).is_err());
    assert!(AgreementValue::new(CoefficientKind::Lin, Assumption::Gaussian, f64::NAN).is_err());
    // L1 range is (1 - sqrt(2), 1].
    assert!(AgreementValue::new(CoefficientKind::L1, Assumption::Laplace, -0.4).is_ok());
    assert!(AgreementValue::new(CoefficientKind::L1, Assumption::Laplace, -0.45).is_err());
    assert!(AgreementValue::new(
        CoefficientKind::ScaledPhi { phi: Phi::Abs },
        Assumption::Gaussian,
        -1.05
    )
    .is_err());
    let ec = AgreementValue::new(
        CoefficientKind::Lp { p: 3 },
        Assumption::Ec {
            generator: "double-exponential".into(),
        },
        0.4,
    )
    .unwrap();
    assert_eq!(
        ec.assumption(),
        &Assumption::Ec {
            generator: "double-exponential".into()
        }
    );
    // Verify parts-based Lin agrees with the params route.
    let p = params(1.0, 0.0, 1.0, 0.5, 1.0);
    assert_eq!(
        lin_gaussian(&p).unwrap(),
        lin_gaussian_from_parts(&p.bivariate_parts().unwrap())
    );
}
