//! Results JSON.
//!
//! ```text
//! {
//!   "library": "lib.csv",
//!   "pixels": [
//!     { "id": "0:0", "solver": "nnls", "coefficients": { "3": 0.41 },
//!       "rmse": 0.0021, "rmse_units": "reflectance", "runtime_s": 0.0004 }
//!   ],
//!   "report": null
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abundance::{AbundanceSolution, Coefficients, RmseUnits};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;

/// One solved pixel. Coefficients are stored sparsely, keyed by library
/// index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelRecord {
    pub id: String,
    pub solver: String,
    pub coefficients: Coefficients,
    pub rmse: f64,
    pub rmse_units: RmseUnits,
    pub runtime_s: f64,
}

impl PixelRecord {
    pub fn from_solution(
        id: impl Into<String>,
        solver: impl Into<String>,
        solution: &AbundanceSolution,
    ) -> Self {
        PixelRecord {
            id: id.into(),
            solver: solver.into(),
            coefficients: solution.coefficients().clone(),
            rmse: solution.rmse(),
            rmse_units: solution.units(),
            runtime_s: solution.runtime(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub library: String,
    pub pixels: Vec<PixelRecord>,
    pub report: Option<EvalReport>,
}

impl ResultsFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn save_results(path: impl AsRef<Path>, results: &ResultsFile) -> Result<()> {
    let path = path.as_ref();
    let mut text = results.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ResultsFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ResultsFile::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_are_valid_json() {
        let r = ResultsFile { library: "lib.csv".into(), pixels: vec![], report: None };
        let json = r.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["pixels"], serde_json::json!([]));
        assert_eq!(ResultsFile::from_json(&json).unwrap(), r);
    }

    #[test]
    fn values_round_trip_exactly() {
        let mut coefficients = Coefficients::new();
        coefficients.insert(3, 0.1 + 0.2);
        coefficients.insert(470, 1.0 / 3.0);
        let r = ResultsFile {
            library: "lib.csv".into(),
            pixels: vec![PixelRecord {
                id: "2:5".into(),
                solver: "hysudeb".into(),
                coefficients,
                rmse: 2.2250738585072014e-308,
                rmse_units: RmseUnits::Whitened,
                runtime_s: 1.2345678901234567e-5,
            }],
            report: None,
        };
        let json = r.to_json().unwrap();
        assert!(json.contains("\"470\""));
        assert!(json.contains("\"whitened\""));
        assert_eq!(ResultsFile::from_json(&json).unwrap(), r);
    }

    #[test]
    fn unwritable_path() {
        let r = ResultsFile { library: String::new(), pixels: vec![], report: None };
        assert!(matches!(save_results("/nonexistent-dir/results.json", &r), Err(Error::Io { .. })));
    }
}
