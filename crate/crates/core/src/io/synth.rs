//! Synthetic libraries and mixed-pixel scenes with known ground truth.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::abundance::Coefficients;
use crate::error::{Error, Result};
use crate::minlp::DEFAULT_ABUNDANCE_CAP;
use crate::spectra::{PixelSpectrum, SpectralLibrary};

/// Categories assigned round-robin by [`synthetic_library`].
pub const SYNTH_CATEGORIES: [&str; 6] =
    ["sulfate", "phyllosilicate", "carbonate", "oxide", "silicate", "hydroxide"];

/// Mixed pixels and the abundances used to make them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub pixels: Vec<PixelSpectrum>,
    /// Per pixel, the nonzero true abundances.
    pub ground_truth: Vec<Coefficients>,
    /// Signal-to-noise ratio in dB; infinite for noiseless scenes.
    pub snr_db: f64,
    pub seed: u64,
}

impl SynthScene {
    /// Pixels stacked line-major into a `1 x n` cube layout.
    pub fn pixel_values(&self) -> Vec<Vec<f64>> {
        self.pixels.iter().map(|p| p.values().to_vec()).collect()
    }
}

/// Mixes `sparsity` distinct library spectra per pixel with abundances drawn
/// uniformly from `abundance_range`, then adds white Gaussian noise at
/// `snr_db` (pass `f64::INFINITY` for none). The noise variance is chosen so
/// that the expected noise energy is `||S a||^2 / 10^(snr_db / 10)`.
pub fn generate_scene(
    library: &SpectralLibrary,
    n_pixels: usize,
    sparsity: usize,
    abundance_range: (f64, f64),
    snr_db: f64,
    seed: u64,
) -> Result<SynthScene> {
    let n = library.len();
    if sparsity == 0 || sparsity > n {
        return Err(Error::InvalidSparsity { sparsity, spectra: n });
    }
    let (lo, hi) = abundance_range;
    if !(lo > 0.0 && lo <= hi && hi <= DEFAULT_ABUNDANCE_CAP) {
        return Err(Error::InvalidConfig(format!(
            "abundance range must satisfy 0 < lo <= hi <= {DEFAULT_ABUNDANCE_CAP}, got ({lo}, {hi})"
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!("invalid SNR {snr_db}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands = library.bands();
    let mut pixels = Vec::with_capacity(n_pixels);
    let mut ground_truth = Vec::with_capacity(n_pixels);
    for _ in 0..n_pixels {
        let mut truth = Coefficients::new();
        for i in index::sample(&mut rng, n, sparsity) {
            truth.insert(i, rng.random_range(lo..=hi));
        }
        let mut values = vec![0.0; bands];
        for (&i, &a) in &truth {
            for (v, s) in values.iter_mut().zip(library.spectrum(i)) {
                *v += a * s;
            }
        }
        if snr_db.is_finite() {
            let energy: f64 = values.iter().map(|v| v * v).sum();
            let sigma = (energy / (bands as f64 * 10f64.powf(snr_db / 10.0))).sqrt();
            if sigma > 0.0 {
                let noise = Normal::new(0.0, sigma).expect("positive finite sigma");
                for v in &mut values {
                    *v += noise.sample(&mut rng);
                }
            }
        }
        pixels.push(library.pixel(values)?);
        ground_truth.push(truth);
    }
    Ok(SynthScene { pixels, ground_truth, snr_db, seed })
}

/// RMS reflectance of every spectrum from [`synthetic_library`].
pub const SYNTH_RMS_REFLECTANCE: f64 = 0.3;

/// A library of `spectra` synthetic reflectance curves over `bands`
/// wavelengths evenly spaced in `[0.4, 2.5]` micrometers.
///
/// Each curve is a dark baseline carrying narrow diagnostic features
/// (Gaussian, 0.4 to 1 band spacing wide, about one per five bands) at
/// random positions, scaled to a common RMS reflectance. Equal brightness
/// and narrow features keep the spectra distinguishable: mutual coherence
/// stays well below one and the library is well conditioned. Libraries
/// whose spectra share a bright continuum are far more coherent, which is
/// what band whitening is meant to counter. Categories cycle through
/// [`SYNTH_CATEGORIES`].
pub fn synthetic_library(spectra: usize, bands: usize, seed: u64) -> Result<SpectralLibrary> {
    if spectra == 0 || bands < 2 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 2.1 / (bands - 1) as f64;
    let wavelengths: Vec<f64> = (0..bands).map(|b| 0.4 + spacing * b as f64).collect();
    let (fmin, fmax) = ((bands * 3 / 20).max(2), (bands * 3 / 10).max(3));
    let mut matrix = DMatrix::zeros(bands, spectra);
    for j in 0..spectra {
        let base = rng.random_range(0.02..0.08);
        let count = rng.random_range(fmin..=fmax);
        let features: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| {
                (rng.random_range(0.4..2.5), rng.random_range(0.4..1.0) * spacing, rng.random_range(0.2..0.8))
            })
            .collect();
        let mut col = matrix.column_mut(j);
        for (b, &w) in wavelengths.iter().enumerate() {
            col[b] = base
                + features
                    .iter()
                    .map(|&(c, width, height)| height * (-((w - c) / width).powi(2) / 2.0).exp())
                    .sum::<f64>();
        }
        let rms = col.norm() / (bands as f64).sqrt();
        col *= SYNTH_RMS_REFLECTANCE / rms;
    }
    let names =
        (0..spectra).map(|j| format!("{}_{j:03}", SYNTH_CATEGORIES[j % SYNTH_CATEGORIES.len()])).collect();
    let categories = (0..spectra).map(|j| SYNTH_CATEGORIES[j % SYNTH_CATEGORIES.len()].to_string()).collect();
    SpectralLibrary::new(wavelengths, matrix, names, categories)
}
