//! Closed-form and nonnegative least squares.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::active_set::box_lsq;
use super::lsq::lstsq_columns;
use crate::abundance::{AbundanceSolution, RmseUnits, SolverConfig};
use crate::error::{Error, Result};
use crate::spectra::{PixelSpectrum, SpectralLibrary};

/// Largest tolerated condition number of the normal matrix `S^T S`.
pub const MAX_NORMAL_CONDITION: f64 = 1e12;

/// Unconstrained least squares `a = (S^T S)^-1 S^T y`.
///
/// The returned solution keeps negative abundances and reports
/// [`AbundanceSolution::is_constrained`] as false. Fails with
/// [`Error::Underdetermined`] when there are more spectra than bands and with
/// [`Error::SingularNormalMatrix`] when `S^T S` is numerically singular.
pub fn ols_solve(library: &SpectralLibrary, pixel: &PixelSpectrum) -> Result<AbundanceSolution> {
    library.check_pixel(pixel)?;
    let start = Instant::now();
    let y = pixel.to_vector();
    let coeffs = ols_dense(library.matrix(), &y)?;
    Ok(AbundanceSolution::from_dense(library.matrix(), &y, &coeffs, None, RmseUnits::Reflectance, false)
        .with_runtime(start.elapsed().as_secs_f64()))
}

pub(crate) fn ols_dense(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<Vec<f64>> {
    let (bands, spectra) = design.shape();
    if spectra > bands {
        return Err(Error::Underdetermined { spectra, bands });
    }
    let condition = normal_condition(design);
    if !(condition <= MAX_NORMAL_CONDITION) {
        return Err(Error::SingularNormalMatrix { condition });
    }
    let columns: Vec<usize> = (0..spectra).collect();
    lstsq_columns(design, &columns, target)
        .map(|a| a.iter().copied().collect())
        .ok_or(Error::SingularNormalMatrix { condition: f64::INFINITY })
}

/// Condition number of `S^T S`, i.e. the squared ratio of the extreme
/// singular values of `S`.
fn normal_condition(design: &DMatrix<f64>) -> f64 {
    let sv = design.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        (max / min).powi(2)
    }
}

/// Nonnegative least squares with the default iteration cap of `3 N`
/// active-set iterations.
pub fn nnls_solve(library: &SpectralLibrary, pixel: &PixelSpectrum) -> Result<AbundanceSolution> {
    let config = SolverConfig { max_iter: 3 * library.len(), ..SolverConfig::default() };
    nnls_solve_with(library, pixel, &config)
}

/// Nonnegative least squares (Lawson–Hanson active set).
///
/// `config.max_iter` caps the active-set iterations. With
/// `config.nonneg == false` this falls back to [`ols_solve`].
pub fn nnls_solve_with(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &SolverConfig,
) -> Result<AbundanceSolution> {
    config.validate()?;
    if !config.nonneg {
        return ols_solve(library, pixel);
    }
    library.check_pixel(pixel)?;
    let start = Instant::now();
    let y = pixel.to_vector();
    let coeffs = nnls_dense(library.matrix(), &y, config.max_iter)?;
    Ok(AbundanceSolution::from_dense(library.matrix(), &y, &coeffs, None, RmseUnits::Reflectance, true)
        .with_runtime(start.elapsed().as_secs_f64()))
}

pub(crate) fn nnls_dense(design: &DMatrix<f64>, target: &DVector<f64>, max_iter: usize) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..design.ncols()).collect();
    Ok(box_lsq(design, target, &all, None, max_iter)?.coeffs)
}
