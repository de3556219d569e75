use pcwk::lift::{
    check_weight_summability, compute_weights, compute_weights_fn, conjugate_pair_permutation,
    frequency_index, lift_samples, reconstruct_pc,
};
use pcwk::{CVec, FunctionalWeights, Horizon, LiftConfig, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

fn close(a: &CVec, b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, &y)| (x - C64::new(y, 0.0)).norm() < tol)
}

#[test]
fn basis_indexing() {
    assert_eq!(frequency_index(1).unwrap(), 0);
    assert_eq!(frequency_index(2).unwrap(), 1);
    assert_eq!(frequency_index(3).unwrap(), -1);
    assert_eq!(conjugate_pair_permutation(1).unwrap(), 1);
    assert_eq!(conjugate_pair_permutation(2).unwrap(), 3);
    assert_eq!(conjugate_pair_permutation(5).unwrap(), 4);
    assert!(frequency_index(0).is_err());
}

#[test]
fn constant_weight_function() {
    let cfg = LiftConfig::new(1.0, 3, 16).unwrap();
    let w = compute_weights_fn(|_| C64::new(1.0, 0.0), &cfg, 0, Horizon::Extrapolation).unwrap();
    assert!(close(&w.blocks()[0], &[1.0, 0.0, 0.0], 1e-14));

    let cfg = LiftConfig::new(1.0, 1, 8).unwrap();
    let w = compute_weights_fn(|_| C64::new(1.0, 0.0), &cfg, 1, Horizon::Extrapolation).unwrap();
    assert_eq!(w.len(), 2);
    assert!(close(&w.blocks()[0], &[1.0], 1e-14));
    assert!(close(&w.blocks()[1], &[1.0], 1e-14));
}

#[test]
fn cosine_weight_function() {
    let cfg = LiftConfig::new(1.0, 3, 12).unwrap();
    let w = compute_weights_fn(
        |t| C64::new((2.0 * PI * t).cos(), 0.0),
        &cfg,
        0,
        Horizon::Extrapolation,
    )
    .unwrap();
    assert!(close(&w.blocks()[0], &[0.0, 0.5, 0.5], 1e-14));
}

#[test]
fn closed_and_periodic_rules_agree_for_periodic_functions() {
    let cfg = LiftConfig::new(2.0, 5, 40).unwrap();
    let a = |t: f64| C64::new((PI * t).sin() + 0.3, 0.2 * (2.0 * PI * t).cos());
    let periodic: Vec<C64> = (0..80).map(|i| a(i as f64 * 2.0 / 40.0)).collect();
    let mut closed = periodic.clone();
    closed.push(a(4.0));
    let wp = compute_weights(&periodic, &cfg, 1, Horizon::Extrapolation).unwrap();
    let wc = compute_weights(&closed, &cfg, 1, Horizon::Extrapolation).unwrap();
    for (x, y) in wp.blocks().iter().zip(wc.blocks()) {
        assert!((x - y).norm() < 1e-13);
    }
    assert!(compute_weights(&periodic[..79], &cfg, 1, Horizon::Extrapolation).is_err());
}

#[test]
fn reconstruction_examples() {
    let cfg = LiftConfig::new(1.0, 3, 12).unwrap();
    let u = cfg.nodes();
    let one = CVec::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    ]);
    let path = reconstruct_pc(&[one], &cfg, &u).unwrap();
    assert!(path[0]
        .iter()
        .all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-14));

    let zero = CVec::zeros(3);
    let path = reconstruct_pc(&[zero], &cfg, &u).unwrap();
    assert!(path[0].iter().all(|z| z.norm() == 0.0));

    let cos = CVec::from_vec(vec![
        C64::new(0.0, 0.0),
        C64::new(0.5, 0.0),
        C64::new(0.5, 0.0),
    ]);
    let path = reconstruct_pc(&[cos], &cfg, &u).unwrap();
    for (z, &t) in path[0].iter().zip(&u) {
        assert!((z - C64::new((2.0 * PI * t).cos(), 0.0)).norm() < 1e-14);
    }
}

#[test]
fn summability_examples() {
    let single = FunctionalWeights::new(
        vec![CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])],
        Horizon::Extrapolation,
    )
    .unwrap();
    let rep = check_weight_summability(&single);
    assert!(rep.pass);
    assert_eq!(rep.norm_sum, 1.0);

    let geometric: Vec<f64> = (0..=20).map(|j| 0.5f64.powi(j)).collect();
    let rep = check_weight_summability(
        &FunctionalWeights::scalar(&geometric, Horizon::Extrapolation).unwrap(),
    );
    assert!(rep.pass, "{rep:?}");
    assert!((rep.norm_sum - 2.0).abs() < 1e-5);
    assert!((rep.weighted_square_sum - 16.0 / 9.0).abs() < 1e-10);

    let harmonic: Vec<f64> = (0..=10_000).map(|j| 1.0 / (j + 1) as f64).collect();
    let rep = check_weight_summability(
        &FunctionalWeights::scalar(&harmonic, Horizon::Extrapolation).unwrap(),
    );
    assert!(!rep.pass);
    assert!(rep.message.unwrap().starts_with("tail not decaying"));
}

fn complex_blocks(k: usize, n: usize) -> impl Strategy<Value = Vec<CVec>> {
    prop::collection::vec(prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), k), n).prop_map(
        |blocks| {
            blocks
                .into_iter()
                .map(|b| {
                    CVec::from_iterator(b.len(), b.into_iter().map(|(re, im)| C64::new(re, im)))
                })
                .collect()
        },
    )
}

proptest! {
    #[test]
    fn lift_inverts_reconstruction(k in 1usize..8, blocks in 1usize..4, seed in complex_blocks(8, 3), period in 0.5..3.0f64) {
        let cfg = LiftConfig::new(period, k, 4 * k + 3).unwrap();
        let coeffs: Vec<CVec> = seed.into_iter().take(blocks).map(|b| b.rows(0, k).into_owned()).collect();
        let path = reconstruct_pc(&coeffs, &cfg, &cfg.nodes()).unwrap();
        let samples: Vec<C64> = path.into_iter().flatten().collect();
        let back = lift_samples(&samples, &cfg).unwrap();
        for (x, y) in back.iter().zip(&coeffs) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn weights_of_reconstructed_function_are_conjugate_pairs(k in 1usize..8, c in complex_blocks(8, 1)) {
        // compute_weights pairs each component with the conjugate basis element.
        let cfg = LiftConfig::new(1.0, k, 4 * k).unwrap();
        let coeffs = vec![c[0].rows(0, k).into_owned()];
        let path = reconstruct_pc(&coeffs, &cfg, &cfg.nodes()).unwrap();
        let w = compute_weights(&path[0], &cfg, 0, Horizon::Extrapolation).unwrap();
        for kk in 1..=k {
            let s = conjugate_pair_permutation(kk as i64).unwrap() as usize;
            if s <= k {
                prop_assert!((w.blocks()[0][kk - 1] - coeffs[0][s - 1]).norm() < 1e-12);
            }
        }
    }
}
