//! Spectral library CSV.
//!
//! ```text
//! name,category,b0,b1,b2
//! __wavelengths__,,0.45,0.55,0.65
//! alunite_1,sulfate,0.31,0.35,0.42
//! kaolinite_2,phyllosilicate,0.52,0.58,0.61
//! ```
//!
//! The band column labels are informational; wavelengths come from the
//! reserved first data row. Values are written in shortest round-trip form,
//! so a save followed by a load reproduces every value bit for bit.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectra::SpectralLibrary;

/// Name of the reserved row holding the wavelength grid.
pub const WAVELENGTH_ROW: &str = "__wavelengths__";

/// One spectrum as stored in a library file.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryFileRecord {
    pub name: String,
    pub category: String,
    pub wavelengths: Vec<f64>,
    pub reflectances: Vec<f64>,
}

pub fn load_library(path: impl AsRef<Path>) -> Result<SpectralLibrary> {
    let records = read_library_records(path)?;
    library_from_records(records)
}

/// Parses a library file into records without assembling a library.
pub fn read_library_records(path: impl AsRef<Path>) -> Result<Vec<LibraryFileRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(file)
}

/// Parses library CSV text from any reader.
pub fn parse_records<R: std::io::Read>(reader: R) -> Result<Vec<LibraryFileRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(row) => row?,
        None => return Err(parse_error(1, 1, "missing header row")),
    };
    let line = header.position().map_or(1, |p| p.line());
    if header.get(0).map(str::trim) != Some("name") {
        return Err(parse_error(line, 1, "first header column must be \"name\""));
    }
    if header.get(1).map(str::trim) != Some("category") {
        return Err(parse_error(line, 2, "second header column must be \"category\""));
    }
    let bands = header.len().saturating_sub(2);
    if bands == 0 {
        return Err(parse_error(line, 3, "no band columns"));
    }

    let mut wavelengths: Option<Vec<f64>> = None;
    let mut records = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != bands + 2 {
            return Err(parse_error(
                line,
                row.len().min(bands + 2) + 1,
                &format!("expected {} fields, found {}", bands + 2, row.len()),
            ));
        }
        let name = row[0].trim();
        let category = row[1].trim();
        let values = parse_values(&row, line)?;
        match &wavelengths {
            None => {
                if name != WAVELENGTH_ROW {
                    return Err(parse_error(line, 1, &format!("first data row must be {WAVELENGTH_ROW}")));
                }
                wavelengths = Some(values);
            }
            Some(grid) => {
                if name == WAVELENGTH_ROW {
                    return Err(parse_error(line, 1, "repeated wavelength row"));
                }
                if name.is_empty() {
                    return Err(parse_error(line, 1, "empty spectrum name"));
                }
                if values.iter().any(|v| *v < 0.0) {
                    return Err(Error::NegativeReflectance { line });
                }
                if records.iter().any(|r: &LibraryFileRecord| r.name == name) {
                    return Err(Error::DuplicateName(name.to_string()));
                }
                records.push(LibraryFileRecord {
                    name: name.to_string(),
                    category: category.to_string(),
                    wavelengths: grid.clone(),
                    reflectances: values,
                });
            }
        }
    }
    if wavelengths.is_none() {
        return Err(parse_error(2, 1, &format!("missing {WAVELENGTH_ROW} row")));
    }
    Ok(records)
}

fn parse_values(row: &csv::StringRecord, line: u64) -> Result<Vec<f64>> {
    row.iter()
        .enumerate()
        .skip(2)
        .map(|(col, field)| {
            let field = field.trim();
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_error(line, col + 1, &format!("not a finite number: {field:?}"))),
            }
        })
        .collect()
}

fn parse_error(line: u64, column: usize, message: &str) -> Error {
    Error::Parse { line, column, message: message.to_string() }
}

/// Assembles records sharing one wavelength grid into a library.
pub fn library_from_records(records: Vec<LibraryFileRecord>) -> Result<SpectralLibrary> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let wavelengths = first.wavelengths.clone();
    if let Some(r) = records.iter().find(|r| r.wavelengths != wavelengths) {
        return Err(Error::InvalidLibrary(format!("spectrum {:?} uses a different wavelength grid", r.name)));
    }
    let columns: Vec<Vec<f64>> = records.iter().map(|r| r.reflectances.clone()).collect();
    let names = records.iter().map(|r| r.name.clone()).collect();
    let categories = records.into_iter().map(|r| r.category).collect();
    SpectralLibrary::from_columns(wavelengths, &columns, names, categories)
}

pub fn save_library(path: impl AsRef<Path>, library: &SpectralLibrary) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_library(file, library)
}

/// Writes library CSV to any writer.
pub fn write_library<W: std::io::Write>(writer: W, library: &SpectralLibrary) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["name".to_string(), "category".to_string()];
    header.extend((0..library.bands()).map(|b| format!("b{b}")));
    out.write_record(&header)?;

    let mut row = vec![WAVELENGTH_ROW.to_string(), String::new()];
    row.extend(library.wavelengths().iter().map(|w| w.to_string()));
    out.write_record(&row)?;

    for i in 0..library.len() {
        let mut row = vec![library.names()[i].clone(), library.categories()[i].clone()];
        row.extend(library.spectrum(i).iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("<library>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SpectralLibrary> {
        library_from_records(parse_records(text.as_bytes())?)
    }

    #[test]
    fn well_formed() {
        let lib =
            parse("name,category,b0,b1,b2\n__wavelengths__,,0.5,0.6,0.7\na,x,0.1,0.2,0.3\nb,y,0.4,0.5,0.6\n")
                .unwrap();
        assert_eq!((lib.len(), lib.bands()), (2, 3));
        assert_eq!(lib.spectrum(1), &[0.4, 0.5, 0.6]);
        assert_eq!(lib.wavelengths(), &[0.5, 0.6, 0.7]);
        assert_eq!(lib.categories()[0], "x");
    }

    #[test]
    fn rejections_carry_locations() {
        let base = "name,category,b0,b1\n__wavelengths__,,0.5,0.6\n";
        match parse(&format!("{base}a,x,0.1,-0.1\n")) {
            Err(Error::NegativeReflectance { line: 3 }) => {}
            other => panic!("{other:?}"),
        }
        match parse(&format!("{base}a,x,0.1,abc\n")) {
            Err(Error::Parse { line: 3, column: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse(&format!("{base}a,x,0.1,0.2\na,y,0.3,0.4\n")) {
            Err(Error::DuplicateName(n)) => assert_eq!(n, "a"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse(&format!("{base}a,x,0.1\n")), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("name,category,b0\na,x,0.1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse(&format!("{base}a,x,0.1,NaN\n")),
            Err(Error::Parse { line: 3, column: 4, .. })
        ));
        assert!(matches!(parse("label,category,b0\n"), Err(Error::Parse { column: 1, .. })));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cols = vec![vec![0.1 + 0.2, 1.0 / 3.0, 5e-324], vec![0.0, std::f64::consts::PI, 0.7]];
        let lib = SpectralLibrary::from_columns(
            vec![0.4, 0.41 + 1e-12, 2.5],
            &cols,
            vec!["first, with comma".into(), "\"quoted\"".into()],
            vec!["sulfate".into(), "oxide".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_library(&mut buf, &lib).unwrap();
        let back = library_from_records(parse_records(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back.names(), lib.names());
        assert_eq!(back.categories(), lib.categories());
        for (a, b) in back.matrix().iter().zip(lib.matrix().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.wavelengths().iter().zip(lib.wavelengths()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
