//! Band decorrelation from image statistics, whitened-space unmixing and
//! adaptive coherence estimator (ACE) target detection.
//!
//! The image covariance `C = E diag(lambda) E^T` defines the whitening
//! transform `W = diag(lambda + eps)^(-1/2) E^T`. A spectrum `x` maps to
//! `W (x - mean)`.

mod jacobi;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::abundance::{AbundanceSolution, RmseUnits};
use crate::error::{Error, Result};
use crate::solvers::{lasso_cv_dense, LassoConfig};
use crate::spectra::{PixelSpectrum, SpectralLibrary};

pub use jacobi::{symmetric_eigen, SymmetricEigen};

/// Eigenvalue floor relative to the largest eigenvalue.
pub const EIGEN_FLOOR_RTOL: f64 = 1e-8;

/// Band statistics of an image and the whitening transform derived from
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenStats {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// `W`, applied as `W (x - mean)`.
    pub transform: DMatrix<f64>,
    /// The `eps` added to every eigenvalue before inversion.
    pub regularization: f64,
}

impl WhitenStats {
    /// Zero mean, identity covariance and `W = I` exactly.
    pub fn identity(bands: usize) -> Self {
        WhitenStats {
            mean: vec![0.0; bands],
            covariance: DMatrix::identity(bands, bands),
            eigenvalues: vec![1.0; bands],
            eigenvectors: DMatrix::identity(bands, bands),
            transform: DMatrix::identity(bands, bands),
            regularization: 0.0,
        }
    }

    /// Builds the whitening transform for a given mean and covariance. The
    /// covariance is symmetrized before decomposition.
    pub fn from_mean_covariance(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let bands = mean.len();
        if bands == 0 {
            return Err(Error::EmptyInput);
        }
        if covariance.shape() != (bands, bands) {
            return Err(Error::DimensionMismatch { expected: bands, found: covariance.nrows() });
        }
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let eigen = symmetric_eigen(&covariance)?;
        let eigenvalues: Vec<f64> = eigen.values.iter().map(|v| v.max(0.0)).collect();
        let largest = eigenvalues[0];
        let regularization = if largest > 0.0 { EIGEN_FLOOR_RTOL * largest } else { EIGEN_FLOOR_RTOL };
        let mut transform = eigen.vectors.transpose();
        for (k, mut row) in transform.row_iter_mut().enumerate() {
            row /= (eigenvalues[k] + regularization).sqrt();
        }
        Ok(WhitenStats {
            mean,
            covariance,
            eigenvalues,
            eigenvectors: eigen.vectors,
            transform,
            regularization,
        })
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.bands() {
            return Err(Error::DimensionMismatch { expected: self.bands(), found: len });
        }
        Ok(())
    }
}

/// Sample mean and covariance (denominator `n - 1`) of a set of pixels and
/// the resulting whitening transform.
///
/// Fewer than `M + 1` pixels give a singular covariance; the eigenvalue
/// floor keeps the transform finite.
pub fn compute_stats(cube: &[PixelSpectrum]) -> Result<WhitenStats> {
    let first = cube.first().ok_or(Error::EmptyCube)?;
    let bands = first.len();
    if let Some(bad) = cube.iter().find(|p| p.len() != bands) {
        return Err(Error::DimensionMismatch { expected: bands, found: bad.len() });
    }
    let n = cube.len();
    let mut mean = vec![0.0; bands];
    for p in cube {
        for (m, v) in mean.iter_mut().zip(p.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut centered = DMatrix::<f64>::zeros(bands, n);
    for (j, p) in cube.iter().enumerate() {
        for (b, v) in p.values().iter().enumerate() {
            centered[(b, j)] = v - mean[b];
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let covariance = (&centered * centered.transpose()) / denom;
    WhitenStats::from_mean_covariance(mean, covariance)
}

/// `W (spectrum - mean)`.
pub fn whiten_spectrum(stats: &WhitenStats, spectrum: &[f64]) -> Result<Vec<f64>> {
    stats.check_len(spectrum.len())?;
    let centered =
        DVector::from_iterator(spectrum.len(), spectrum.iter().zip(&stats.mean).map(|(x, m)| x - m));
    Ok((&stats.transform * centered).iter().copied().collect())
}

/// LASSO unmixing in whitened band space.
///
/// The pixel and the library are both mapped through `W`. The image mean
/// enters both sides of `y = S a` identically and cancels, so the model is
/// fitted as `W y = (W S) a` and abundances stay in library units. The
/// penalty is chosen by cross-validation as in
/// [`lasso_cv`](crate::solvers::lasso_cv). The returned residual is
/// `W (y - S a)`, in whitened units.
pub fn hysudeb_unmix(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    stats: &WhitenStats,
    config: &LassoConfig,
) -> Result<AbundanceSolution> {
    config.validate()?;
    library.check_pixel(pixel)?;
    stats.check_len(library.bands())?;
    let start = Instant::now();
    let design = &stats.transform * library.matrix();
    let target = &stats.transform * pixel.to_vector();
    let (_, coeffs) = lasso_cv_dense(&design, &target, config)?;
    Ok(AbundanceSolution::from_dense(
        &design,
        &target,
        &coeffs,
        None,
        RmseUnits::Whitened,
        config.solver.nonneg,
    )
    .with_runtime(start.elapsed().as_secs_f64()))
}

/// ACE detection score: the squared cosine between the whitened pixel and
/// the whitened target, in `[0, 1]`. Zero when either whitened vector
/// vanishes.
pub fn ace_score(pixel: &[f64], target: &[f64], stats: &WhitenStats) -> Result<f64> {
    let x = whiten_spectrum(stats, pixel)?;
    let t = whiten_spectrum(stats, target)?;
    Ok(squared_cosine(&x, &t))
}

fn squared_cosine(x: &[f64], t: &[f64]) -> f64 {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let tt: f64 = t.iter().map(|v| v * v).sum();
    if xx == 0.0 || tt == 0.0 {
        return 0.0;
    }
    let xt: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
    (xt * xt / (xx * tt)).clamp(0.0, 1.0)
}

/// Per-pixel ACE scores for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct AceScoreMap {
    pub scores: Vec<f64>,
    pub target_name: String,
    pub threshold: f64,
}

impl AceScoreMap {
    pub fn compute(
        cube: &[PixelSpectrum],
        target_name: impl Into<String>,
        target: &[f64],
        stats: &WhitenStats,
        threshold: f64,
    ) -> Result<Self> {
        check_threshold(threshold)?;
        let t = whiten_spectrum(stats, target)?;
        let scores = cube
            .iter()
            .map(|p| whiten_spectrum(stats, p.values()).map(|x| squared_cosine(&x, &t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(AceScoreMap { scores, target_name: target_name.into(), threshold })
    }

    /// Pixels scoring at or above the threshold.
    pub fn mask(&self) -> Vec<bool> {
        self.scores.iter().map(|&s| s >= self.threshold).collect()
    }
}

/// How a region of interest is cut from the score map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoiRule {
    /// Every pixel with score `>=` the threshold.
    Threshold(f64),
    /// The `k` highest-scoring pixels, ties to the lowest pixel index.
    TopK(usize),
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(t))
    }
}

/// Selects ROI pixels by ACE score. Returns one flag per pixel together
/// with the scores.
pub fn select_roi(
    cube: &[PixelSpectrum],
    target: &[f64],
    stats: &WhitenStats,
    rule: RoiRule,
) -> Result<(Vec<bool>, Vec<f64>)> {
    match rule {
        RoiRule::Threshold(t) => {
            let map = AceScoreMap::compute(cube, "", target, stats, t)?;
            Ok((map.mask(), map.scores))
        }
        RoiRule::TopK(k) => {
            if k == 0 || k > cube.len() {
                return Err(Error::InvalidK(k));
            }
            let map = AceScoreMap::compute(cube, "", target, stats, 0.0)?;
            let mut order: Vec<usize> = (0..cube.len()).collect();
            order.sort_by(|&a, &b| map.scores[b].total_cmp(&map.scores[a]).then(a.cmp(&b)));
            let mut mask = vec![false; cube.len()];
            order[..k].iter().for_each(|&i| mask[i] = true);
            Ok((mask, map.scores))
        }
    }
}
