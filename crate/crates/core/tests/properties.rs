use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use unmixkit::metrics::{
    detection_percentage, mean_average_precision, precision_at_k, RankedModel, TargetGroup,
};
use unmixkit::solvers::{lasso_solve, nnls_solve};
use unmixkit::stepwise::f_pvalue;
use unmixkit::whiten::{ace_score, WhitenStats};
use unmixkit::{residual, rmse, Coefficients, SpectralLibrary};

/// A nonnegative library and a pixel over the same bands.
fn problem() -> impl Strategy<Value = (SpectralLibrary, Vec<f64>)> {
    (1usize..=12, 1usize..=24).prop_flat_map(|(n, m)| {
        (prop::collection::vec(0.0f64..1.0, m * n), prop::collection::vec(-0.5f64..2.0, m)).prop_map(
            move |(entries, y)| (SpectralLibrary::unlabeled(DMatrix::from_vec(m, n, entries)).unwrap(), y),
        )
    })
}

fn ranking() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (
        Just((0..10).collect::<Vec<usize>>()).prop_shuffle(),
        0usize..=10,
        prop::collection::btree_set(0usize..10, 0..4),
    )
        .prop_map(|(order, len, targets)| (order[..len].to_vec(), targets.into_iter().collect()))
}

fn model(ranked: &[usize], targets: &[usize]) -> RankedModel {
    let entries = ranked.iter().enumerate().map(|(r, &i)| (i, 1.0 / (r + 1) as f64)).collect();
    RankedModel::new(entries, TargetGroup::from_indices("t", targets.iter().copied())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nnls_is_nonnegative_and_stationary((library, y) in problem()) {
        let pixel = library.pixel(y.clone()).unwrap();
        let solution = nnls_solve(&library, &pixel).unwrap();
        let a = DVector::from_vec(solution.dense(library.len()));
        prop_assert!(a.iter().all(|&v| v >= 0.0));
        let gradient = library.matrix().tr_mul(&(library.matrix() * &a - DVector::from_vec(y)));
        for i in 0..library.len() {
            if a[i] == 0.0 {
                prop_assert!(gradient[i] >= -1e-8);
            } else {
                prop_assert!(gradient[i].abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn lasso_l1_norm_shrinks_as_penalty_grows((library, y) in problem(), l1 in 0.0f64..0.05, extra in 0.0f64..0.05) {
        let pixel = library.pixel(y).unwrap();
        let norm = |lambda: f64| -> f64 {
            lasso_solve(&library, &pixel, lambda).unwrap().coefficients().values().sum()
        };
        prop_assert!(norm(l1 + extra) <= norm(l1) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn residual_scales_with_pixel_and_coefficients(
        (library, y) in problem(),
        c in 0.0f64..5.0,
        weights in prop::collection::vec(0.0f64..1.0, 12),
    ) {
        let a: Coefficients = weights.iter().take(library.len()).enumerate()
            .filter(|(_, &w)| w > 0.0).map(|(i, &w)| (i, w)).collect();
        let scaled_a: Coefficients = a.iter().map(|(&i, &w)| (i, c * w)).collect();
        let base = residual(&library, &library.pixel(y.clone()).unwrap(), &a).unwrap();
        let scaled_pixel = library.pixel(y.iter().map(|v| c * v).collect()).unwrap();
        let scaled = residual(&library, &scaled_pixel, &scaled_a).unwrap();
        for (s, b) in scaled.iter().zip(&base) {
            prop_assert!((s - c * b).abs() <= 1e-12 * (1.0 + c * b.abs()));
        }
        prop_assert!(rmse(&base).unwrap() >= 0.0);
    }

    #[test]
    fn rmse_ignores_order(mut values in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let before = rmse(&values).unwrap();
        values.reverse();
        let half = values.len() / 2;
        values.rotate_left(half);
        prop_assert!((rmse(&values).unwrap() - before).abs() <= 1e-12 * before.max(1.0));
    }

    #[test]
    fn ace_lies_in_unit_interval(
        seed_cov in prop::collection::vec(-1.0f64..1.0, 36),
        x in prop::collection::vec(-2.0f64..2.0, 6),
        t in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let a = DMatrix::from_vec(6, 6, seed_cov);
        let stats = WhitenStats::from_mean_covariance(vec![0.1; 6], &a * a.transpose()).unwrap();
        let score = ace_score(&x, &t, &stats).unwrap();
        prop_assert!((0.0..=1.0).contains(&score));
    }

    #[test]
    fn f_tail_decreases_in_f(f in 0.0f64..20.0, step in 0.001f64..5.0, d1 in 1usize..40, d2 in 1usize..40) {
        let (lo, hi) = (f_pvalue(f, d1, d2).unwrap(), f_pvalue(f + step, d1, d2).unwrap());
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi <= lo);
    }

    #[test]
    fn promoting_a_target_never_lowers_precision((ranked, targets) in ranking(), k in 1usize..12) {
        let before = precision_at_k(&model(&ranked, &targets), k).unwrap();
        if let Some(pos) = ranked.iter().position(|i| targets.contains(i)).filter(|&p| p > 0) {
            let mut promoted = ranked.clone();
            promoted.swap(pos - 1, pos);
            prop_assert!(precision_at_k(&model(&promoted, &targets), k).unwrap() >= before);
        }
        prop_assert!((0.0..=1.0).contains(&before));
    }

    #[test]
    fn map_is_unchanged_by_duplicating_the_models(
        models in prop::collection::vec(ranking(), 1..6),
        k in 1usize..8,
    ) {
        let list: Vec<RankedModel> = models.iter().map(|(r, t)| model(r, t)).collect();
        let doubled: Vec<RankedModel> = list.iter().chain(&list).cloned().collect();
        let (once, twice) = (
            mean_average_precision(&list, k).unwrap(),
            mean_average_precision(&doubled, k).unwrap(),
        );
        prop_assert!((once - twice).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&once));
    }

    #[test]
    fn detection_of_a_concatenation_is_a_weighted_mean(
        left in prop::collection::vec(ranking(), 1..6),
        right in prop::collection::vec(ranking(), 1..6),
    ) {
        let a: Vec<RankedModel> = left.iter().map(|(r, t)| model(r, t)).collect();
        let b: Vec<RankedModel> = right.iter().map(|(r, t)| model(r, t)).collect();
        let joined: Vec<RankedModel> = a.iter().chain(&b).cloned().collect();
        let (pa, pb) = (detection_percentage(&a).unwrap(), detection_percentage(&b).unwrap());
        let expected = (pa * a.len() as f64 + pb * b.len() as f64) / joined.len() as f64;
        prop_assert!((detection_percentage(&joined).unwrap() - expected).abs() <= 1e-12);
    }
}
