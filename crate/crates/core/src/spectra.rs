//! Spectral libraries and observed pixel spectra.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A matrix of reference reflectance spectra sharing one wavelength grid.
///
/// Spectra are stored as the columns of an `M x N` matrix (`M` bands, `N`
/// spectra). Storage is column-major, so each spectrum is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLibrary {
    wavelengths: Vec<f64>,
    spectra: DMatrix<f64>,
    names: Vec<String>,
    categories: Vec<String>,
}

impl SpectralLibrary {
    /// Builds a library from an `M x N` reflectance matrix.
    ///
    /// Rejects non-finite or negative reflectance, a wavelength grid that is
    /// not strictly increasing, duplicate names and empty categories.
    pub fn new(
        wavelengths: Vec<f64>,
        spectra: DMatrix<f64>,
        names: Vec<String>,
        categories: Vec<String>,
    ) -> Result<Self> {
        let (bands, count) = spectra.shape();
        if bands == 0 || count == 0 {
            return Err(Error::EmptyInput);
        }
        if wavelengths.len() != bands {
            return Err(Error::DimensionMismatch { expected: bands, found: wavelengths.len() });
        }
        if names.len() != count {
            return Err(Error::DimensionMismatch { expected: count, found: names.len() });
        }
        if categories.len() != count {
            return Err(Error::DimensionMismatch { expected: count, found: categories.len() });
        }
        check_grid(&wavelengths)?;
        for (i, col) in spectra.column_iter().enumerate() {
            if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidLibrary(format!("spectrum {:?} has reflectance {v}", names[i])));
            }
        }
        let mut seen = HashSet::with_capacity(count);
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        if let Some(i) = categories.iter().position(|c| c.trim().is_empty()) {
            return Err(Error::InvalidLibrary(format!("spectrum {:?} has an empty category", names[i])));
        }
        Ok(SpectralLibrary { wavelengths, spectra, names, categories })
    }

    /// Builds a library from per-spectrum columns.
    pub fn from_columns(
        wavelengths: Vec<f64>,
        columns: &[Vec<f64>],
        names: Vec<String>,
        categories: Vec<String>,
    ) -> Result<Self> {
        let bands = wavelengths.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != bands) {
            return Err(Error::DimensionMismatch { expected: bands, found: bad.len() });
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        let spectra = DMatrix::from_vec(bands, columns.len(), flat);
        Self::new(wavelengths, spectra, names, categories)
    }

    /// Builds a library with placeholder labels: wavelengths `1..=M`, names
    /// `s0, s1, ...` and category `"unlabeled"`. Handy for small numeric
    /// experiments.
    pub fn unlabeled(spectra: DMatrix<f64>) -> Result<Self> {
        let (bands, count) = spectra.shape();
        let wavelengths = (1..=bands).map(|b| b as f64).collect();
        let names = (0..count).map(|i| format!("s{i}")).collect();
        let categories = vec!["unlabeled".to_string(); count];
        Self::new(wavelengths, spectra, names, categories)
    }

    /// Number of bands `M`.
    pub fn bands(&self) -> usize {
        self.spectra.nrows()
    }

    /// Number of spectra `N`.
    pub fn len(&self) -> usize {
        self.spectra.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.ncols() == 0
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    /// The `M x N` reflectance matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.spectra
    }

    /// Reflectance of spectrum `index`, one value per band.
    pub fn spectrum(&self, index: usize) -> &[f64] {
        let bands = self.bands();
        &self.spectra.as_slice()[index * bands..(index + 1) * bands]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Indices of every spectrum labelled with `category`.
    pub fn category_indices(&self, category: &str) -> Vec<usize> {
        self.categories.iter().enumerate().filter(|(_, c)| c.as_str() == category).map(|(i, _)| i).collect()
    }

    /// Wraps `values` as a pixel on this library's wavelength grid.
    pub fn pixel(&self, values: Vec<f64>) -> Result<PixelSpectrum> {
        PixelSpectrum::new(values, self.wavelengths.clone())
    }

    /// Checks that `pixel` lives on this library's band grid.
    pub fn check_pixel(&self, pixel: &PixelSpectrum) -> Result<()> {
        if pixel.len() != self.bands() {
            return Err(Error::DimensionMismatch { expected: self.bands(), found: pixel.len() });
        }
        for (band, (a, b)) in self.wavelengths.iter().zip(pixel.wavelengths()).enumerate() {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::WavelengthMismatch { band });
            }
        }
        Ok(())
    }

    /// Resamples every spectrum onto `targets` by piecewise-linear
    /// interpolation. Names and categories are kept.
    pub fn align_to_bands(&self, targets: &[f64]) -> Result<SpectralLibrary> {
        if targets.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_grid(targets)?;
        let grid = &self.wavelengths;
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        let mut stencil = Vec::with_capacity(targets.len());
        for &x in targets {
            if x < lo || x > hi {
                return Err(Error::OutOfRange { wavelength: x, min: lo, max: hi });
            }
            stencil.push(Stencil::locate(grid, x));
        }
        let spectra =
            DMatrix::from_fn(targets.len(), self.len(), |row, col| stencil[row].apply(self.spectrum(col)));
        Ok(SpectralLibrary {
            wavelengths: targets.to_vec(),
            spectra,
            names: self.names.clone(),
            categories: self.categories.clone(),
        })
    }
}

/// Interpolation weights for one target wavelength.
#[derive(Debug, Clone, Copy)]
enum Stencil {
    Exact(usize),
    Between(usize, f64),
}

impl Stencil {
    fn locate(grid: &[f64], x: f64) -> Stencil {
        // first index with grid[idx] >= x
        let idx = grid.partition_point(|&w| w < x);
        if grid[idx] == x {
            Stencil::Exact(idx)
        } else {
            let (w0, w1) = (grid[idx - 1], grid[idx]);
            Stencil::Between(idx - 1, (x - w0) / (w1 - w0))
        }
    }

    fn apply(self, values: &[f64]) -> f64 {
        match self {
            Stencil::Exact(i) => values[i],
            Stencil::Between(i, t) => values[i] + t * (values[i + 1] - values[i]),
        }
    }
}

fn check_grid(wavelengths: &[f64]) -> Result<()> {
    if let Some(w) = wavelengths.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidLibrary(format!("non-finite wavelength {w}")));
    }
    if let Some(i) = wavelengths.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidLibrary(format!("wavelengths not strictly increasing at band {}", i + 1)));
    }
    Ok(())
}

/// One observed reflectance vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSpectrum {
    values: Vec<f64>,
    wavelengths: Vec<f64>,
}

impl PixelSpectrum {
    pub fn new(values: Vec<f64>, wavelengths: Vec<f64>) -> Result<Self> {
        if values.len() != wavelengths.len() {
            return Err(Error::DimensionMismatch { expected: wavelengths.len(), found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("pixel contains non-finite value {v}")));
        }
        Ok(PixelSpectrum { values, wavelengths })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib_on(grid: Vec<f64>, cols: &[Vec<f64>]) -> SpectralLibrary {
        let n = cols.len();
        SpectralLibrary::from_columns(
            grid,
            cols,
            (0..n).map(|i| format!("m{i}")).collect(),
            vec!["test".into(); n],
        )
        .unwrap()
    }

    #[test]
    fn align_midpoint() {
        let lib = lib_on(vec![1.0, 2.0], &[vec![0.2, 0.4]]);
        let out = lib.align_to_bands(&[1.5]).unwrap();
        assert!((out.spectrum(0)[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn align_piecewise() {
        let lib = lib_on(vec![1.0, 2.0, 3.0], &[vec![0.0, 1.0, 0.0]]);
        let out = lib.align_to_bands(&[1.25, 2.75]).unwrap();
        assert_eq!(out.spectrum(0), &[0.25, 0.25]);
        assert_eq!(out.names(), lib.names());
    }

    #[test]
    fn align_identity_is_bitwise() {
        let lib =
            lib_on(vec![0.4, 0.7, 1.3, 2.2], &[vec![0.1, 0.37, 0.2, 0.91], vec![0.3, 0.3, 0.7, 0.123456789]]);
        let out = lib.align_to_bands(lib.wavelengths()).unwrap();
        assert_eq!(out, lib);
    }

    #[test]
    fn align_rejects_outside_grid() {
        let lib = lib_on(vec![1.0, 2.0], &[vec![0.2, 0.4]]);
        assert!(matches!(lib.align_to_bands(&[0.5, 1.5]), Err(Error::OutOfRange { .. })));
        assert!(matches!(lib.align_to_bands(&[1.5, 1.2]), Err(Error::InvalidLibrary(_))));
    }

    #[test]
    fn rejects_bad_libraries() {
        let grid = vec![1.0, 2.0];
        let names = vec!["a".to_string(), "a".to_string()];
        let cats = vec!["x".to_string(); 2];
        let cols = [vec![0.1, 0.2], vec![0.3, 0.4]];
        assert!(matches!(
            SpectralLibrary::from_columns(grid.clone(), &cols, names, cats.clone()),
            Err(Error::DuplicateName(_))
        ));
        let names = vec!["a".to_string(), "b".to_string()];
        let neg = [vec![0.1, -0.2], vec![0.3, 0.4]];
        assert!(SpectralLibrary::from_columns(grid.clone(), &neg, names.clone(), cats).is_err());
        let cats = vec!["x".to_string(), " ".to_string()];
        assert!(SpectralLibrary::from_columns(grid.clone(), &cols, names.clone(), cats).is_err());
        let cats = vec!["x".to_string(); 2];
        assert!(SpectralLibrary::from_columns(vec![2.0, 1.0], &cols, names, cats).is_err());
    }

    #[test]
    fn pixel_grid_checks() {
        let lib = lib_on(vec![1.0, 2.0], &[vec![0.2, 0.4]]);
        assert!(lib.check_pixel(&lib.pixel(vec![0.1, 0.2]).unwrap()).is_ok());
        let off = PixelSpectrum::new(vec![0.1, 0.2], vec![1.0, 2.5]).unwrap();
        assert!(matches!(lib.check_pixel(&off), Err(Error::WavelengthMismatch { band: 1 })));
        let short = PixelSpectrum::new(vec![0.1], vec![1.0]).unwrap();
        assert!(matches!(lib.check_pixel(&short), Err(Error::DimensionMismatch { .. })));
    }
}
