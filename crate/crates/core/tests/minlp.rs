mod common;

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::Rng;
use unmixkit::minlp::{minlp_unmix, minlp_unmix_audited, MinlpConfig, DEFAULT_ABUNDANCE_CAP};

use common::{box_lsq_by_faces, random_library, rng, subsets_up_to};

#[test]
fn six_spectra_two_sparse_matches_enumeration() {
    let mut rng = rng(10);
    for _ in 0..20 {
        let library = random_library(&mut rng, 10, 6);
        let s = library.matrix().clone();
        let mut a = DVector::zeros(6);
        let i = rng.random_range(0..6);
        let j = (i + rng.random_range(1..6)) % 6;
        a[i] = rng.random_range(0.1..1.0);
        a[j] = rng.random_range(0.1..1.0);
        let y = &s * a + DVector::from_fn(10, |_, _| rng.random_range(0.0..0.02));
        let pixel = library.pixel(y.iter().copied().collect()).unwrap();
        let result = minlp_unmix(&library, &pixel, &MinlpConfig::with_p(2)).unwrap();
        let supports = subsets_up_to(6, 2);
        assert_eq!(supports.len(), 1 + 6 + 15);
        let best = supports
            .iter()
            .map(|c| box_lsq_by_faces(&s, &y, c, DEFAULT_ABUNDANCE_CAP))
            .fold(f64::INFINITY, f64::min);
        let oracle = (best / 10.0).sqrt();
        assert!((result.objective - oracle).abs() <= 1e-9 * oracle.max(1e-12));
        assert!(result.proven_optimal);
    }
}

#[test]
fn node_bounds_never_exceed_any_completion() {
    let mut rng = rng(11);
    for _ in 0..10 {
        let n = 7;
        let library = random_library(&mut rng, 9, n);
        let s = library.matrix().clone();
        let y = DVector::from_fn(9, |_, _| rng.random_range(0.0..2.0));
        let pixel = library.pixel(y.iter().copied().collect()).unwrap();
        let p = 3;
        let (_, nodes) = minlp_unmix_audited(&library, &pixel, &MinlpConfig::with_p(p)).unwrap();
        assert!(!nodes.is_empty());
        let all = subsets_up_to(n, p);
        for node in &nodes {
            let fixed: BTreeSet<usize> = node.fixed_in.iter().copied().collect();
            let best_completion = all
                .iter()
                .filter(|c| {
                    fixed.iter().all(|f| c.contains(f)) && !c.iter().any(|i| node.excluded.contains(i))
                })
                .map(|c| box_lsq_by_faces(&s, &y, c, DEFAULT_ABUNDANCE_CAP))
                .fold(f64::INFINITY, f64::min);
            assert!(
                node.bound_ssr <= best_completion * (1.0 + 1e-9) + 1e-12,
                "{node:?} vs {best_completion}"
            );
        }
    }
}

#[test]
fn larger_model_size_never_worsens_the_objective() {
    let mut rng = rng(12);
    for _ in 0..10 {
        let library = random_library(&mut rng, 12, 8);
        let pixel = library.pixel((0..12).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
        let mut previous = f64::INFINITY;
        for p in 1..=4 {
            let result = minlp_unmix(&library, &pixel, &MinlpConfig::with_p(p)).unwrap();
            assert!(result.objective <= previous * (1.0 + 1e-12));
            assert!(result.solution.coefficients().len() <= p);
            for &a in result.solution.coefficients().values() {
                assert!(a > 0.0 && a <= DEFAULT_ABUNDANCE_CAP);
            }
            previous = result.objective;
        }
    }
}
