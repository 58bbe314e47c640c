//! Pixel spectra CSV.
//!
//! ```text
//! id,b0,b1,b2
//! __wavelengths__,0.45,0.55,0.65
//! pixel_0000,0.31,0.35,0.42
//! pixel_0001,0.29,-0.01,0.40
//! ```
//!
//! Like the library format but without categories, and values may be
//! negative: noisy observations of dark bands can dip below zero.

use std::fs::File;
use std::path::Path;

use super::library::WAVELENGTH_ROW;
use crate::error::{Error, Result};
use crate::spectra::PixelSpectrum;

/// A pixel and its identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedPixel {
    pub id: String,
    pub pixel: PixelSpectrum,
}

pub fn load_pixels(path: impl AsRef<Path>) -> Result<Vec<NamedPixel>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pixels(file)
}

/// Parses pixel CSV text from any reader.
pub fn read_pixels<R: std::io::Read>(reader: R) -> Result<Vec<NamedPixel>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(row) => row?,
        None => return Err(parse_error(1, 1, "missing header row")),
    };
    if header.get(0).map(str::trim) != Some("id") {
        return Err(parse_error(1, 1, "first header column must be \"id\""));
    }
    let bands = header.len() - 1;
    if bands == 0 {
        return Err(parse_error(1, 2, "no band columns"));
    }

    let mut wavelengths: Option<Vec<f64>> = None;
    let mut out: Vec<NamedPixel> = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != bands + 1 {
            return Err(parse_error(
                line,
                row.len().min(bands + 1) + 1,
                &format!("expected {} fields, found {}", bands + 1, row.len()),
            ));
        }
        let id = row[0].trim();
        let values = row
            .iter()
            .enumerate()
            .skip(1)
            .map(|(col, field)| match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_error(line, col + 1, &format!("not a finite number: {field:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        match &wavelengths {
            None if id == WAVELENGTH_ROW => wavelengths = Some(values),
            None => return Err(parse_error(line, 1, &format!("first data row must be {WAVELENGTH_ROW}"))),
            Some(_) if id == WAVELENGTH_ROW => return Err(parse_error(line, 1, "repeated wavelength row")),
            Some(grid) => {
                if id.is_empty() {
                    return Err(parse_error(line, 1, "empty pixel id"));
                }
                if out.iter().any(|p| p.id == id) {
                    return Err(Error::DuplicateName(id.to_string()));
                }
                out.push(NamedPixel { id: id.to_string(), pixel: PixelSpectrum::new(values, grid.clone())? });
            }
        }
    }
    if wavelengths.is_none() {
        return Err(parse_error(2, 1, &format!("missing {WAVELENGTH_ROW} row")));
    }
    Ok(out)
}

fn parse_error(line: u64, column: usize, message: &str) -> Error {
    Error::Parse { line, column, message: message.to_string() }
}

pub fn save_pixels(path: impl AsRef<Path>, pixels: &[NamedPixel]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pixels(file, pixels)
}

/// Writes pixel CSV; every pixel must share the first pixel's wavelengths.
pub fn write_pixels<W: std::io::Write>(writer: W, pixels: &[NamedPixel]) -> Result<()> {
    let first = pixels.first().ok_or(Error::EmptyInput)?;
    let grid = first.pixel.wavelengths();
    if let Some(band) = pixels.iter().find_map(|p| {
        (p.pixel.wavelengths() != grid).then(|| {
            p.pixel
                .wavelengths()
                .iter()
                .zip(grid)
                .position(|(a, b)| a != b)
                .unwrap_or(grid.len().min(p.pixel.len()))
        })
    }) {
        return Err(Error::WavelengthMismatch { band });
    }
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((0..grid.len()).map(|b| format!("b{b}")));
    out.write_record(&header)?;
    let mut row = vec![WAVELENGTH_ROW.to_string()];
    row.extend(grid.iter().map(|w| w.to_string()));
    out.write_record(&row)?;
    for p in pixels {
        let mut row = vec![p.id.clone()];
        row.extend(p.pixel.values().iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("<pixels>", e))?;
    Ok(())
}
