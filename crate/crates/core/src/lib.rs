//! Library-based hyperspectral unmixing.
//!
//! A mixed pixel `y` observed over `M` bands is modelled as a nonnegative
//! combination of `N` library spectra plus a residual:
//!
//! ```text
//! y = S a + E,    a >= 0
//! ```
//!
//! where `S` is the `M x N` [`SpectralLibrary`] matrix and `a` the
//! abundances. This crate estimates `a` in several ways:
//!
//! * [`solvers::ols_solve`]: closed-form least squares, unconstrained.
//! * [`solvers::nnls_solve`]: nonnegative least squares (active set).
//! * [`solvers::lasso_solve`] / [`solvers::lasso_cv`]: nonnegative L1-penalized
//!   regression with the penalty picked by cross-validation over bands.
//! * [`stepwise::dfs_select`]: greedy forward selection driven by F-test
//!   p-values.
//! * [`minlp::minlp_unmix`]: exact cardinality-constrained least squares by
//!   branch and bound.
//! * [`whiten::hysudeb_unmix`]: LASSO after decorrelating bands with image
//!   statistics.
//!
//! It also provides an adaptive coherence estimator for target detection
//! ([`whiten::ace_score`]), ranking metrics for evaluating detections
//! ([`metrics`]), and readers and writers for spectral libraries, ENVI-style
//! cubes and results files ([`io`]).
//!
//! ```
//! use unmixkit::{solvers, SpectralLibrary};
//! use nalgebra::DMatrix;
//!
//! // two spectra over three bands
//! let s = DMatrix::from_column_slice(3, 2, &[0.2, 0.4, 0.6, 0.5, 0.1, 0.3]);
//! let library = SpectralLibrary::unlabeled(s)?;
//! let pixel = library.pixel(vec![0.34, 0.14, 0.30])?;
//!
//! let fit = solvers::nnls_solve(&library, &pixel)?;
//! assert!((fit.abundance(0) - 0.2).abs() < 1e-12);
//! assert!((fit.abundance(1) - 0.6).abs() < 1e-12);
//! # Ok::<(), unmixkit::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abundance;
pub mod error;
pub mod io;
pub mod metrics;
pub mod minlp;
pub mod solvers;
pub mod spectra;
pub mod stepwise;
pub mod whiten;

pub use abundance::{residual, rmse, AbundanceSolution, Coefficients, RmseUnits, SolverConfig};
pub use error::{Error, Result};
pub use spectra::{PixelSpectrum, SpectralLibrary};
