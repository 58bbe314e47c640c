use std::path::PathBuf;

/// Errors produced by the unmixing toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("wavelength grids differ at band {band}")]
    WavelengthMismatch { band: usize },

    #[error("library index {index} out of range for {len} spectra")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("pixel {line}:{sample} lies outside a cube of {lines} lines by {samples} samples")]
    PixelOutOfRange { line: usize, sample: usize, lines: usize, samples: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("wavelength {wavelength} lies outside the library grid [{min}, {max}]")]
    OutOfRange { wavelength: f64, min: f64, max: f64 },

    #[error("invalid library: {0}")]
    InvalidLibrary(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("normal matrix is singular (condition estimate {condition:e})")]
    SingularNormalMatrix { condition: f64 },

    #[error("{spectra} spectra exceed {bands} bands; the normal matrix cannot be inverted")]
    Underdetermined { spectra: usize, bands: usize },

    #[error("solver did not converge within {iterations} iterations")]
    MaxIterationsExceeded { iterations: usize },

    #[error("{bands} bands cannot be split into {folds} folds")]
    TooFewBands { bands: usize, folds: usize },

    #[error("invalid degrees of freedom: {0}")]
    InvalidDegreesOfFreedom(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("cube contains no pixels")]
    EmptyCube,

    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("invalid k = {0}; k must be at least 1")]
    InvalidK(usize),

    #[error("invalid sparsity {sparsity} for a library of {spectra} spectra")]
    InvalidSparsity { sparsity: usize, spectra: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },

    #[error("negative reflectance at line {line}")]
    NegativeReflectance { line: u64 },

    #[error("duplicate spectrum name {0:?}")]
    DuplicateName(String),

    #[error("data file holds {actual} bytes, header implies {expected}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("unsupported ENVI data type {0} (only 4 = float32 and 5 = float64)")]
    UnsupportedDataType(u32),

    #[error("header syntax error at line {line}: {message}")]
    HeaderSyntax { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
