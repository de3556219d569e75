use std::collections::BTreeMap;
use std::f64::consts::PI;

use pcwk::spectral::{
    check_minimality, fourier_coefficient, validate_density, GridMatrixFunction, SpectralDensity,
};
use pcwk::{CMat, Error, C64};
use proptest::prelude::*;

const G: usize = 256;

fn c(x: f64) -> CMat {
    CMat::from_element(1, 1, C64::new(x, 0.0))
}

#[test]
fn evaluation_examples() {
    let one = SpectralDensity::scalar_symmetric(&[1.0], G)
        .unwrap()
        .evaluate_on_grid();
    assert!(one
        .values()
        .iter()
        .all(|v| (v[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15));

    let ma = SpectralDensity::scalar_symmetric(&[1.25, 0.5], G)
        .unwrap()
        .evaluate_on_grid();
    for g in 0..G {
        let lambda = ma.lambda(g);
        let expected = (C64::new(1.0, 0.0) + C64::from_polar(0.5, -lambda)).norm_sqr();
        assert!((ma.value(g)[(0, 0)].re - expected).abs() < 1e-14);
        assert!((ma.value(g)[(0, 0)].re - (1.25 + lambda.cos())).abs() < 1e-14);
    }

    let eye = SpectralDensity::identity(2, G).unwrap().evaluate_on_grid();
    assert!(eye
        .values()
        .iter()
        .all(|v| (v - CMat::identity(2, 2)).norm() < 1e-15));
}

#[test]
fn coefficient_examples() {
    let eye = GridMatrixFunction::constant(&CMat::identity(2, 2), G).unwrap();
    assert!((fourier_coefficient(&eye, 0).unwrap() - CMat::identity(2, 2)).norm() < 1e-15);
    assert!(fourier_coefficient(&eye, 3).unwrap().norm() < 1e-15);

    let ma = SpectralDensity::scalar_symmetric(&[1.25, 0.5], G)
        .unwrap()
        .evaluate_on_grid();
    assert!((fourier_coefficient(&ma, 1).unwrap()[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-15);
    assert!(matches!(
        fourier_coefficient(&ma, (G / 2) as i64),
        Err(Error::Aliasing { .. })
    ));
}

#[test]
fn minimality_examples() {
    let one = SpectralDensity::scalar_symmetric(&[1.0], G).unwrap();
    let rep = check_minimality(&one, Some(&one), 1e12).unwrap();
    assert!(rep.pass);
    assert!((rep.integral - PI).abs() < 1e-12);

    // |1 - e^{-iλ}|² vanishes at λ = 0, which is a grid node.
    let diff = SpectralDensity::scalar_symmetric(&[2.0, -1.0], G).unwrap();
    let rep = check_minimality(&diff, None, 1e12).unwrap();
    assert!(!rep.pass);
    assert_eq!(rep.worst_node, Some(G / 2));

    let mut coeffs = BTreeMap::new();
    coeffs.insert(
        0,
        CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ])),
    );
    let diag = SpectralDensity::new(2, coeffs, G).unwrap();
    let zero = SpectralDensity::constant(&CMat::zeros(2, 2), G).unwrap();
    let rep = check_minimality(&diag, Some(&zero), 1e12).unwrap();
    assert!((rep.integral - 3.0 * PI).abs() < 1e-12);
}

#[test]
fn validation_examples() {
    let rep = validate_density(&SpectralDensity::identity(3, G).unwrap());
    assert!(rep.valid());
    assert!((rep.min_eigenvalue - 1.0).abs() < 1e-15);

    let rep = validate_density(&SpectralDensity::scalar_symmetric(&[1.0, 0.6], G).unwrap());
    assert!(!rep.psd);
    assert!((rep.min_eigenvalue + 0.2).abs() < 1e-12);
    assert!((rep.min_lambda.abs() - PI).abs() < 1e-12);
    let err = rep.to_error().unwrap();
    assert!(matches!(err, Error::NotPsd { .. }));

    let mut coeffs = BTreeMap::new();
    coeffs.insert(0, c(1.0));
    coeffs.insert(1, c(0.2));
    let rep = validate_density(&SpectralDensity::new(1, coeffs, G).unwrap());
    assert!(!rep.hermitian);
    assert_eq!(rep.hermitian_violations, vec![1]);
}

#[test]
fn grid_round_trip_keeps_trig_polynomials() {
    let f = SpectralDensity::scalar_symmetric(&[2.0, 0.5, -0.25], G).unwrap();
    let back = SpectralDensity::from_grid(&f.evaluate_on_grid(), None, 1e-14).unwrap();
    assert_eq!(back.max_lag(), 2);
    for m in -2..=2 {
        assert!((back.coeff(m) - f.coeff(m)).norm() < 1e-14);
    }
}

proptest! {
    #[test]
    fn minimality_integral_decreases_with_noise(a in 0.1..0.45f64, s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let f = SpectralDensity::scalar_symmetric(&[1.0, a], G).unwrap();
        let (lo, hi) = if s < t { (s, t) } else { (t, s) };
        let g_lo = SpectralDensity::scalar_symmetric(&[lo], G).unwrap();
        let g_hi = SpectralDensity::scalar_symmetric(&[hi], G).unwrap();
        let i_lo = check_minimality(&f, Some(&g_lo), 1e12).unwrap().integral;
        let i_hi = check_minimality(&f, Some(&g_hi), 1e12).unwrap().integral;
        prop_assert!(i_hi <= i_lo + 1e-12);
    }

    #[test]
    fn covariance_symmetry(a in -0.45..0.45f64, b in -0.2..0.2f64, j in 0i64..4) {
        let f = SpectralDensity::scalar_symmetric(&[1.0, a, b], G).unwrap();
        let inv = SpectralDensity::from_grid(&f.evaluate_on_grid().inverse(1e12).unwrap(), None, 1e-17).unwrap();
        prop_assert!((inv.covariance(-j) - inv.covariance(j).adjoint()).norm() < 1e-14);
    }
}
