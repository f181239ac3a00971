mod common;

use fdi_core::modelspace::Euclidean;
use fdi_core::ocsvm::{fold_ranges, train_ocs, train_ocs_gram, training_outlier_fraction};
use rand::Rng;

#[test]
fn smo_matches_dense_reference_solver() {
    let mut rng = common::rng(21);
    for (n, dim, sigma, nu) in [
        (40, 2, 1.0, 0.1),
        (120, 3, 0.5, 0.05),
        (200, 5, 0.25, 0.2),
        (150, 2, 2.0, 0.5),
    ] {
        let (_, d) = common::gaussian_cloud(&mut rng, n, dim);
        let k = common::kernel(&d, sigma);
        let sol = train_ocs_gram(&k, nu).unwrap();
        let (alpha, reference) = common::dense_ocs_qp(&k, nu, 20_000);
        let rel = (sol.objective - reference).abs() / reference;
        assert!(
            rel <= 1e-6,
            "n {n}: {} vs {reference} ({rel:e})",
            sol.objective
        );
        // the reference solution is feasible, so SMO cannot beat it by more than the tolerance
        assert!(sol.objective <= reference * (1.0 + 1e-6));
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn outlier_fraction_tracks_nu() {
    let mut rng = common::rng(5);
    let (_, d) = common::gaussian_cloud(&mut rng, 100, 2);
    let sol = train_ocs_gram(&common::kernel(&d, 1.0), 0.5).unwrap();
    let frac = training_outlier_fraction(&sol);
    assert!((0.35..=0.65).contains(&frac), "{frac}");
}

#[test]
fn held_out_scores_match_direct_summation() {
    let mut rng = common::rng(6);
    let (train, _) = common::gaussian_cloud(&mut rng, 150, 3);
    let (held_out, _) = common::gaussian_cloud(&mut rng, 50, 3);
    let sigma = 0.7;
    let model = train_ocs(&train, sigma, 0.1, &Euclidean).unwrap();
    // the dual solution over all training points, zeros included
    let d = nalgebra::DMatrix::from_fn(150, 150, |i, j| common::euclid(&train[i], &train[j]));
    let sol = train_ocs_gram(&common::kernel(&d, sigma), 0.1).unwrap();
    for p in &held_out {
        let direct: f64 = (0..150)
            .map(|i| sol.alpha[i] * (-sigma * common::euclid(p, &train[i])).exp())
            .sum::<f64>()
            - sol.rho;
        let got = model.decide(&Euclidean, p).unwrap().score;
        assert!((got - direct).abs() <= 1e-8, "{got} vs {direct}");
    }
}

#[test]
fn nu_property_on_random_clouds() {
    let mut rng = common::rng(7);
    for _ in 0..20 {
        let n = rng.random_range(50..=200);
        let dim = rng.random_range(1..=4);
        let nu = [0.05, 0.1, 0.2, 0.5][rng.random_range(0..4)];
        let sigma = [0.25, 1.0, 2.0][rng.random_range(0..3)];
        let (_, d) = common::gaussian_cloud(&mut rng, n, dim);
        let sol = train_ocs_gram(&common::kernel(&d, sigma), nu).unwrap();
        let slack = 2.0 / (n as f64).sqrt();
        let outliers = training_outlier_fraction(&sol);
        let support = sol.alpha.iter().filter(|a| **a > 0.0).count() as f64 / n as f64;
        assert!(outliers <= nu + slack, "outliers {outliers} nu {nu}");
        assert!(support >= nu - slack, "support {support} nu {nu}");
    }
}

#[test]
fn five_folds_of_five_hundred() {
    let folds = fold_ranges(500, 5);
    assert_eq!(folds.len(), 5);
    for (i, f) in folds.iter().enumerate() {
        assert_eq!(*f, i * 100..(i + 1) * 100);
    }
}
