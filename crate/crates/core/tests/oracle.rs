use pcwk::estimators::{extrapolate_noiseless, interpolate, Truncation};
use pcwk::factorization::{spectral_factorize, Factorization};
use pcwk::oracle::suite::{run_suite, SuiteDensity};
use pcwk::oracle::{
    compare_values, converged_projection, covariances_from_density, covariances_from_factor,
    empirical_mse, simulate_sequence, time_domain_projection,
};
use pcwk::spectral::SpectralDensity;
use pcwk::{CMat, Error, FunctionalWeights, Horizon, C64};

const G: usize = 512;

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[test]
fn suite_agrees_for_k1_and_k2() {
    let rows = run_suite(&[1, 2], G, 5, 1e-5).unwrap();
    assert_eq!(rows.len(), 2 * 7 * 4 - 7);
    for row in &rows {
        assert!(row.pass, "{row:?}");
    }
}

#[test]
fn ma_covariance_identity() {
    let d = vec![
        CMat::from_row_slice(2, 2, &[r(1.0), r(0.0), C64::new(0.2, 0.1), r(0.8)]),
        CMat::from_row_slice(2, 2, &[r(0.3), r(-0.2), r(0.0), C64::new(0.1, -0.4)]),
    ];
    let fact = Factorization::from_coefficients(d.clone(), G).unwrap();
    let f = SpectralDensity::from_moving_average(&d, G).unwrap();
    let from_factor = covariances_from_factor(&fact, 3);
    let from_density = covariances_from_density(&f, 3).unwrap();
    for j in -3..=3 {
        let diff = (from_factor.get(j).unwrap() - from_density.get(j).unwrap()).norm();
        assert!(diff < 1e-13, "lag {j}: {diff}");
    }
    assert!(from_factor.get(2).unwrap().norm() < 1e-15);
}

#[test]
fn simulated_moments_match_covariances() {
    let fact = Factorization::from_coefficients(
        vec![CMat::identity(1, 1), CMat::identity(1, 1) * r(0.5)],
        G,
    )
    .unwrap();
    let n = 40_000;
    let path = simulate_sequence(&fact, n, 42);
    assert_eq!(path.len(), n);
    let lag = |j: usize| {
        path[j..]
            .iter()
            .zip(&path)
            .map(|(a, b)| (a[0] * b[0].conj()).re)
            .sum::<f64>()
            / (n - j) as f64
    };
    // Standard errors are below 0.01 at this length.
    assert!((lag(0) - 1.25).abs() < 0.05, "{}", lag(0));
    assert!((lag(1) - 0.5).abs() < 0.05, "{}", lag(1));
    assert!(lag(2).abs() < 0.05, "{}", lag(2));
    assert_eq!(
        simulate_sequence(&fact, 10, 42),
        simulate_sequence(&fact, 10, 42)
    );
    assert_ne!(
        simulate_sequence(&fact, 10, 42),
        simulate_sequence(&fact, 10, 43)
    );
}

#[test]
fn monte_carlo_extrapolation_error() {
    let fact = Factorization::from_coefficients(
        vec![CMat::identity(1, 1), CMat::identity(1, 1) * r(0.5)],
        G,
    )
    .unwrap();
    let f = fact.density().unwrap();
    let w = FunctionalWeights::scalar(&[1.0, 1.0], Horizon::Extrapolation).unwrap();
    let sol = extrapolate_noiseless(&f, &w, Truncation::Auto).unwrap();
    let report = empirical_mse(&fact, &sol, &w, 20_000, 9).unwrap();
    assert!((report.theoretical - 3.25).abs() < 1e-8);
    assert!(report.within_band, "{report:?}");
}

#[test]
fn projection_refuses_singular_covariance() {
    let zero = SpectralDensity::constant(&CMat::zeros(1, 1), G).unwrap();
    let w = FunctionalWeights::scalar(&[1.0], Horizon::Interpolation(0)).unwrap();
    let err = time_domain_projection(&zero, None, &w, 4).unwrap_err();
    assert!(matches!(err, Error::IllPosed(_)), "{err}");
}

#[test]
fn projection_window_converges_for_ar1() {
    let f = SuiteDensity::Autoregressive.build(1, G).unwrap().unwrap();
    let noise = SpectralDensity::identity(1, G).unwrap();
    let w = FunctionalWeights::scalar(&[1.0, -1.0], Horizon::Interpolation(1)).unwrap();
    let oracle = converged_projection(&f, Some(&noise), &w, 4, 256, 1e-12).unwrap();
    assert!(oracle.converged);
    let spectral = interpolate(&f, &noise, &w).unwrap();
    let cmp = compare_values(spectral.mse, oracle.mse, 1e-10);
    assert!(cmp.pass, "{cmp:?}");
}

#[test]
fn factor_of_suite_density_reproduces_covariances() {
    let f = SuiteDensity::CoupledMovingAverage
        .build(2, G)
        .unwrap()
        .unwrap();
    let fact = spectral_factorize(&f, 1e-12, 100).unwrap();
    let a = covariances_from_factor(&fact, 4);
    let b = covariances_from_density(&f, 4).unwrap();
    for j in 0..=4 {
        assert!((a.get(j).unwrap() - b.get(j).unwrap()).norm() < 1e-10);
    }
}
