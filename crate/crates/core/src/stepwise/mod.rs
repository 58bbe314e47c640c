//! Forward stepwise selection of library spectra by F-test.
//!
//! Starting from the empty model, each step scores every excluded spectrum
//! by the partial F statistic of adding it to the current least squares
//! fit. The best candidate enters when its p-value is below `alpha` and a
//! nonnegative refit keeps it in the model. The final abundances come from
//! a nonnegative refit on the selected spectra.

mod fdist;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::abundance::{AbundanceSolution, RmseUnits};
use crate::error::{Error, Result};
use crate::solvers::active_set::box_lsq;
use crate::solvers::lsq::lstsq_columns;
use crate::spectra::{PixelSpectrum, SpectralLibrary};

use fdist::partial_f;
pub use fdist::{f_pvalue, f_statistic};

/// Relative residual energy below which the current model is treated as an
/// exact fit and the search stops.
const EXACT_FIT_RTOL: f64 = 1e-18;

/// Relative norm below which a candidate is considered a linear combination
/// of the spectra already selected.
const DEPENDENCE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseConfig {
    /// p-value inclusion threshold in `(0, 1)`.
    pub alpha: f64,
    /// Cap on the model size; `None` means `min(M - 1, 20)`.
    pub max_features: Option<usize>,
    /// Refit the selected spectra with nonnegative least squares.
    pub refit_nonneg: bool,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        StepwiseConfig { alpha: 0.05, max_features: None, refit_nonneg: true }
    }
}

impl StepwiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidConfig("max_features must be at least 1".into()));
        }
        Ok(())
    }

    fn feature_cap(&self, bands: usize) -> usize {
        self.max_features.unwrap_or_else(|| bands.saturating_sub(1).min(20))
    }
}

/// One accepted inclusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub index: usize,
    pub f: f64,
    pub p_value: f64,
    /// Least squares residual sum of squares after the step.
    pub rss: f64,
}

/// Forward selection; see the module docs.
pub fn dfs_select(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &StepwiseConfig,
) -> Result<AbundanceSolution> {
    dfs_select_traced(library, pixel, config).map(|(sol, _)| sol)
}

/// Like [`dfs_select`], also returning the accepted steps in order.
pub fn dfs_select_traced(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &StepwiseConfig,
) -> Result<(AbundanceSolution, Vec<SelectionStep>)> {
    config.validate()?;
    library.check_pixel(pixel)?;
    let start = Instant::now();
    let y = pixel.to_vector();
    let design = library.matrix();
    let steps = forward_steps(design, &y, config)?;
    let order: Vec<usize> = steps.iter().map(|s| s.index).collect();

    let mut dense = vec![0.0; library.len()];
    if config.refit_nonneg {
        let refit = box_lsq(design, &y, &order, None, 3 * order.len().max(1))?;
        dense = refit.coeffs;
    } else if let Some(a) = lstsq_columns(design, &order, &y) {
        for (&i, &v) in order.iter().zip(a.iter()) {
            dense[i] = v;
        }
    }
    let solution = AbundanceSolution::from_dense(
        design,
        &y,
        &dense,
        Some(&order),
        RmseUnits::Reflectance,
        config.refit_nonneg,
    )
    .with_runtime(start.elapsed().as_secs_f64());
    Ok((solution, steps))
}

fn forward_steps(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &StepwiseConfig,
) -> Result<Vec<SelectionStep>> {
    let (bands, count) = design.shape();
    let cap = config.feature_cap(bands);
    let signal = y.norm_squared();

    // orthonormal basis of the selected columns and the least squares
    // residual against it
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut residual = y.clone();
    let mut rss = signal;
    let mut in_model = vec![false; count];
    let mut steps = Vec::new();

    while steps.len() < cap && bands > steps.len() + 1 {
        if rss <= EXACT_FIT_RTOL * signal {
            break;
        }
        let df = bands - (steps.len() + 1);
        let mut best: Option<(usize, f64, f64, DVector<f64>)> = None;
        for (c, &used) in in_model.iter().enumerate() {
            if used {
                continue;
            }
            let col = design.column(c);
            let norm = col.norm();
            if norm == 0.0 {
                continue;
            }
            let mut v = col.into_owned();
            // two passes of Gram-Schmidt keep v orthogonal to the basis
            for _ in 0..2 {
                for q in &basis {
                    let proj = q.dot(&v);
                    v.axpy(-proj, q, 1.0);
                }
            }
            let vn = v.norm();
            if vn <= DEPENDENCE_RTOL * norm {
                continue;
            }
            v /= vn;
            let gain = v.dot(&residual).powi(2);
            let f = partial_f(gain, (rss - gain).max(0.0), 1, df);
            // at a fixed step all candidates share degrees of freedom, so the
            // largest F is the smallest p-value
            if best.as_ref().is_none_or(|(_, bf, _, _)| f > *bf) {
                best = Some((c, f, gain, v));
            }
        }
        let Some((c, f, gain, q)) = best else { break };
        let p_value = f_pvalue(f, 1, df)?;
        if p_value >= config.alpha {
            break;
        }

        let mut trial: Vec<usize> = steps.iter().map(|s: &SelectionStep| s.index).collect();
        trial.push(c);
        let nonneg = box_lsq(design, y, &trial, None, 3 * trial.len())?;
        if nonneg.coeffs[c] <= 0.0 {
            break;
        }

        let proj = q.dot(&residual);
        residual.axpy(-proj, &q, 1.0);
        basis.push(q);
        in_model[c] = true;
        rss = (rss - gain).max(0.0);
        steps.push(SelectionStep { index: c, f, p_value, rss });
    }
    Ok(steps)
}
