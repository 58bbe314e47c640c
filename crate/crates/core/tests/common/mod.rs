#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unmixkit::SpectralLibrary;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Library with entries uniform in `[0, 1)`.
pub fn random_library(rng: &mut ChaCha8Rng, bands: usize, spectra: usize) -> SpectralLibrary {
    let m = DMatrix::from_fn(bands, spectra, |_, _| rng.random_range(0.0..1.0));
    SpectralLibrary::unlabeled(m).unwrap()
}

pub fn ssr(library: &SpectralLibrary, y: &[f64], a: &[f64]) -> f64 {
    (DVector::from_column_slice(y) - library.matrix() * DVector::from_column_slice(a)).norm_squared()
}

/// Minimum of `||y - S_C a||^2` over `0 <= a <= cap` for the columns `C`,
/// found by trying every assignment of each variable to its lower bound,
/// its upper bound or the free least squares solution.
pub fn box_lsq_by_faces(s: &DMatrix<f64>, y: &DVector<f64>, columns: &[usize], cap: f64) -> f64 {
    let k = columns.len();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(k as u32) {
        let state: Vec<usize> = (0..k).map(|j| code / 3usize.pow(j as u32) % 3).collect();
        let mut rhs = y.clone();
        let mut a = vec![0.0; k];
        let free: Vec<usize> = (0..k).filter(|&j| state[j] == 2).collect();
        for j in 0..k {
            if state[j] == 1 {
                a[j] = cap;
                rhs -= s.column(columns[j]) * cap;
            }
        }
        if !free.is_empty() {
            let sub = DMatrix::from_fn(s.nrows(), free.len(), |r, c| s[(r, columns[free[c]])]);
            let Ok(x) = sub.svd(true, true).solve(&rhs, 1e-14) else {
                continue;
            };
            if x.iter().any(|&v| v < 0.0 || v > cap) {
                continue;
            }
            for (f, &j) in free.iter().enumerate() {
                a[j] = x[f];
            }
        }
        let mut r = y.clone();
        for (j, &col) in columns.iter().enumerate() {
            r -= s.column(col) * a[j];
        }
        best = best.min(r.norm_squared());
    }
    best
}

/// All subsets of `0..n` with at most `p` elements, in lexicographic order
/// by size.
pub fn subsets_up_to(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..p.min(n) {
        let mut next = Vec::new();
        for set in &frontier {
            let start = set.last().map_or(0, |&l| l + 1);
            for i in start..n {
                let mut grown = set.clone();
                grown.push(i);
                next.push(grown);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
