mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use unmixkit::io::{generate_scene, synthetic_library};
use unmixkit::solvers::{
    lambda_max, lasso_cv, lasso_objective, lasso_solve, nnls_solve, ols_solve, LassoConfig,
};
use unmixkit::SpectralLibrary;

use common::{random_library, rng, ssr};

#[test]
fn lasso_identity_example_matches_grid_search() {
    let library = SpectralLibrary::unlabeled(DMatrix::identity(2, 2)).unwrap();
    let pixel = library.pixel(vec![0.3, 0.7]).unwrap();
    let solution = lasso_solve(&library, &pixel, 0.1).unwrap();
    assert!((solution.abundance(0) - 0.2).abs() < 1e-12);
    assert!((solution.abundance(1) - 0.6).abs() < 1e-12);

    // Brute-force the objective over a 1e-3 grid on [0, 1]^2.
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=1000 {
        for j in 0..=1000 {
            let a = [i as f64 / 1000.0, j as f64 / 1000.0];
            let value = lasso_objective(&library, &pixel, &a, 0.1).unwrap();
            if value < best.0 {
                best = (value, a[0], a[1]);
            }
        }
    }
    assert!((best.1 - 0.2).abs() < 1e-9 && (best.2 - 0.6).abs() < 1e-9, "{best:?}");
}

#[test]
fn empty_model_exactly_when_zero_satisfies_the_subgradient_condition() {
    let mut rng = rng(1);
    for _ in 0..50 {
        let library = random_library(&mut rng, 20, 8);
        let pixel = library.pixel((0..20).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let top = lambda_max(&library, &pixel).unwrap();
        // a = 0 is optimal iff every (2/M) s_i^T y <= lambda.
        let grad = library.matrix().tr_mul(&DVector::from_column_slice(pixel.values())) * (2.0 / 20.0);
        assert!(grad.iter().all(|&g| g <= top * (1.0 + 1e-12)));
        assert!(lasso_solve(&library, &pixel, top * 1.0001).unwrap().coefficients().is_empty());
        assert!(!lasso_solve(&library, &pixel, top * 0.99).unwrap().coefficients().is_empty());
    }
}

#[test]
fn nnls_beats_random_feasible_points() {
    let mut rng = rng(2);
    let library = random_library(&mut rng, 30, 10);
    let y: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..2.0)).collect();
    let pixel = library.pixel(y.clone()).unwrap();
    let best = nnls_solve(&library, &pixel).unwrap();
    let optimum = ssr(&library, &y, &best.dense(10));
    assert!((best.ssr() - optimum).abs() <= 1e-10 * optimum.max(1.0));
    for _ in 0..1000 {
        let a: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..0.5)).collect();
        assert!(ssr(&library, &y, &a) >= optimum - 1e-12);
    }
}

#[test]
fn ols_solves_square_invertible_systems() {
    let mut rng = rng(3);
    for _ in 0..20 {
        let m = rng.random_range(2..12);
        let library = random_library(&mut rng, m, m);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = ols_solve(&library, &library.pixel(y.clone()).unwrap()).unwrap().dense(m);
        let fitted = library.matrix() * DVector::from_vec(a);
        let y = DVector::from_vec(y);
        assert!((fitted - &y).norm() <= 1e-8 * y.norm());
    }
}

#[test]
fn support_shrinks_with_penalty_on_identity_designs() {
    let mut rng = rng(4);
    let m = 12;
    let library = SpectralLibrary::unlabeled(DMatrix::identity(m, m)).unwrap();
    let pixel = library.pixel((0..m).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let mut previous = usize::MAX;
    for step in 0..=40 {
        let size = lasso_solve(&library, &pixel, step as f64 * 0.005).unwrap().coefficients().len();
        assert!(size <= previous);
        previous = size;
    }
    assert_eq!(previous, 0);
}

#[test]
fn cross_validated_fit_keeps_the_true_support_of_noiseless_pixels() {
    let library = synthetic_library(30, 80, 21).unwrap();
    let scene = generate_scene(&library, 20, 3, (0.2, 1.0), f64::INFINITY, 22).unwrap();
    for (pixel, truth) in scene.pixels.iter().zip(&scene.ground_truth) {
        let (lambda, solution) = lasso_cv(&library, pixel, &LassoConfig::default()).unwrap();
        assert!((0.001..=0.1).contains(&lambda));
        for index in truth.keys() {
            assert!(solution.coefficients().contains_key(index), "missing {index}");
        }
    }
}
