//! Abundance estimates, residuals and fit error.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{PixelSpectrum, SpectralLibrary};

/// Sparse abundance map: library index to abundance.
pub type Coefficients = BTreeMap<usize, f64>;

/// Units of a solution's residual and RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RmseUnits {
    /// Raw reflectance units.
    Reflectance,
    /// Units of the whitened band space. Not comparable with reflectance.
    Whitened,
}

impl RmseUnits {
    pub fn as_str(self) -> &'static str {
        match self {
            RmseUnits::Reflectance => "reflectance",
            RmseUnits::Whitened => "whitened",
        }
    }
}

/// The result of unmixing one pixel.
///
/// `coefficients` holds only the nonzero abundances, and `selected` lists
/// exactly the same indices (in inclusion order for the stepwise solver,
/// ascending otherwise). Constrained solvers only ever store positive
/// abundances. The closed-form least squares solver stores raw signed
/// values and reports `is_constrained() == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceSolution {
    coefficients: Coefficients,
    residual: Vec<f64>,
    rmse: f64,
    runtime: f64,
    selected: Vec<usize>,
    units: RmseUnits,
    constrained: bool,
}

impl AbundanceSolution {
    /// Builds a solution from a dense coefficient vector over the columns of
    /// `design`, computing the residual `target - design * dense`.
    ///
    /// `order` gives the preferred ordering of the selected indices; indices
    /// with zero abundance are dropped from it.
    pub(crate) fn from_dense(
        design: &DMatrix<f64>,
        target: &DVector<f64>,
        dense: &[f64],
        order: Option<&[usize]>,
        units: RmseUnits,
        constrained: bool,
    ) -> Self {
        debug_assert_eq!(dense.len(), design.ncols());
        let mut residual = target.clone();
        for (i, &a) in dense.iter().enumerate() {
            if a != 0.0 {
                residual.axpy(-a, &design.column(i), 1.0);
            }
        }
        let coefficients: Coefficients = dense
            .iter()
            .enumerate()
            .filter(|(_, &a)| if constrained { a > 0.0 } else { a != 0.0 })
            .map(|(i, &a)| (i, a))
            .collect();
        let selected = match order {
            Some(order) => order.iter().copied().filter(|i| coefficients.contains_key(i)).collect(),
            None => coefficients.keys().copied().collect(),
        };
        let residual: Vec<f64> = residual.iter().copied().collect();
        let rmse = rmse(&residual).unwrap_or(0.0);
        AbundanceSolution { coefficients, residual, rmse, runtime: 0.0, selected, units, constrained }
    }

    pub(crate) fn with_runtime(mut self, seconds: f64) -> Self {
        self.runtime = seconds;
        self
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    /// Abundance of `index`, zero when it is not in the model.
    pub fn abundance(&self, index: usize) -> f64 {
        self.coefficients.get(&index).copied().unwrap_or(0.0)
    }

    /// Dense coefficient vector of length `n`.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &a) in &self.coefficients {
            out[i] = a;
        }
        out
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn rmse(&self) -> f64 {
        self.rmse
    }

    /// Sum of squared residuals.
    pub fn ssr(&self) -> f64 {
        self.residual.iter().map(|r| r * r).sum()
    }

    /// Wall-clock solve time in seconds.
    pub fn runtime(&self) -> f64 {
        self.runtime
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn units(&self) -> RmseUnits {
        self.units
    }

    /// False for the unconstrained closed-form solution, which may hold
    /// negative abundances.
    pub fn is_constrained(&self) -> bool {
        self.constrained
    }
}

/// Settings shared by the iterative solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Enforce `a >= 0`.
    pub nonneg: bool,
    /// Iteration cap (coordinate-descent sweeps, active-set iterations).
    pub max_iter: usize,
    /// Convergence tolerance on the largest coefficient change.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { nonneg: true, max_iter: 10_000, tol: 1e-8 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Residual `y - S a` of a pixel against a sparse abundance map.
pub fn residual(library: &SpectralLibrary, pixel: &PixelSpectrum, coeffs: &Coefficients) -> Result<Vec<f64>> {
    if pixel.len() != library.bands() {
        return Err(Error::DimensionMismatch { expected: library.bands(), found: pixel.len() });
    }
    let mut out = pixel.values().to_vec();
    for (&index, &a) in coeffs {
        if index >= library.len() {
            return Err(Error::IndexOutOfRange { index, len: library.len() });
        }
        for (r, s) in out.iter_mut().zip(library.spectrum(index)) {
            *r -= a * s;
        }
    }
    Ok(out)
}

/// Root mean squared value of a residual vector.
pub fn rmse(residual: &[f64]) -> Result<f64> {
    if residual.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ss: f64 = residual.iter().map(|r| r * r).sum();
    Ok((ss / residual.len() as f64).sqrt())
}
