//! ENVI-style hyperspectral cubes: a plain-text header plus raw binary
//! samples.
//!
//! ```text
//! ENVI
//! samples = 2
//! lines = 2
//! bands = 3
//! header offset = 0
//! data type = 4
//! interleave = bsq
//! byte order = 0
//! wavelength units = Micrometers
//! wavelength = {0.45, 0.55, 0.65}
//! ```
//!
//! Only 32-bit (`data type = 4`) and 64-bit (`data type = 5`) floats are
//! supported. Pixels are addressed by `(line, sample)`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::spectra::PixelSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interleave {
    /// Band sequential: `[band][line][sample]`.
    Bsq,
    /// Band interleaved by line: `[line][band][sample]`.
    Bil,
    /// Band interleaved by pixel: `[line][sample][band]`.
    Bip,
}

impl Interleave {
    pub fn as_str(self) -> &'static str {
        match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsq" => Some(Interleave::Bsq),
            "bil" => Some(Interleave::Bil),
            "bip" => Some(Interleave::Bip),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    F32,
    F64,
}

impl DataType {
    pub fn code(self) -> u32 {
        match self {
            DataType::F32 => 4,
            DataType::F64 => 5,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            4 => Ok(DataType::F32),
            5 => Ok(DataType::F64),
            other => Err(Error::UnsupportedDataType(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    /// `byte order = 0`
    Little,
    /// `byte order = 1`
    Big,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub interleave: Interleave,
    pub data_type: DataType,
    pub byte_order: ByteOrder,
    /// Band centers, one per band.
    pub wavelengths: Vec<f64>,
    pub wavelength_units: Option<String>,
    /// Bytes to skip at the start of the data file.
    pub header_offset: usize,
}

impl CubeHeader {
    pub fn new(samples: usize, lines: usize, wavelengths: Vec<f64>) -> Self {
        CubeHeader {
            samples,
            lines,
            bands: wavelengths.len(),
            interleave: Interleave::Bsq,
            data_type: DataType::F64,
            byte_order: ByteOrder::Little,
            wavelengths,
            wavelength_units: Some("Micrometers".into()),
            header_offset: 0,
        }
    }

    /// Size in bytes the data file must have.
    pub fn data_len(&self) -> u64 {
        self.header_offset as u64 + (self.samples * self.lines * self.bands * self.data_type.size()) as u64
    }

    /// Parses header text. Keys are case-insensitive; brace-delimited values
    /// may span lines; unknown keys are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        match lines.next() {
            Some((_, first)) if first.trim() == "ENVI" => {}
            _ => return Err(syntax(1, "header must start with \"ENVI\"")),
        }

        let mut samples = None;
        let mut nlines = None;
        let mut bands = None;
        let mut interleave = None;
        let mut data_type = None;
        let mut byte_order = None;
        let mut wavelengths = None;
        let mut wavelength_units = None;
        let mut header_offset = 0usize;

        while let Some((idx, raw)) = lines.next() {
            let lineno = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with(';') {
                continue;
            }
            let (key, value) =
                raw.split_once('=').ok_or_else(|| syntax(lineno, "expected \"key = value\""))?;
            let key = key.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase();
            let mut value = value.trim().to_string();
            if value.starts_with('{') {
                while !value.contains('}') {
                    let (_, more) = lines.next().ok_or_else(|| syntax(lineno, "unterminated \"{\""))?;
                    value.push(' ');
                    value.push_str(more.trim());
                }
                let end = value.find('}').expect("checked above");
                if !value[end + 1..].trim().is_empty() {
                    return Err(syntax(lineno, "text after closing \"}\""));
                }
                value = value[1..end].to_string();
            }
            match key.as_str() {
                "samples" => samples = Some(parse_count(&value, lineno)?),
                "lines" => nlines = Some(parse_count(&value, lineno)?),
                "bands" => bands = Some(parse_count(&value, lineno)?),
                "header offset" => header_offset = parse_count(&value, lineno)?,
                "interleave" => {
                    interleave = Some(
                        Interleave::parse(value.trim())
                            .ok_or_else(|| syntax(lineno, "interleave must be bsq, bil or bip"))?,
                    )
                }
                "data type" => {
                    let code = value
                        .trim()
                        .parse::<u32>()
                        .map_err(|_| syntax(lineno, "data type must be an integer"))?;
                    data_type = Some(DataType::from_code(code)?);
                }
                "byte order" => {
                    byte_order = Some(match value.trim() {
                        "0" => ByteOrder::Little,
                        "1" => ByteOrder::Big,
                        _ => return Err(syntax(lineno, "byte order must be 0 or 1")),
                    })
                }
                "wavelength" => {
                    let values = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| syntax(lineno, "wavelength list must be numeric"))?;
                    wavelengths = Some(values);
                }
                "wavelength units" => wavelength_units = Some(value.trim().to_string()),
                _ => {}
            }
        }

        let missing = |name: &str| syntax(0, &format!("missing required key {name:?}"));
        let header = CubeHeader {
            samples: samples.ok_or_else(|| missing("samples"))?,
            lines: nlines.ok_or_else(|| missing("lines"))?,
            bands: bands.ok_or_else(|| missing("bands"))?,
            interleave: interleave.ok_or_else(|| missing("interleave"))?,
            data_type: data_type.ok_or_else(|| missing("data type"))?,
            byte_order: byte_order.ok_or_else(|| missing("byte order"))?,
            wavelengths: wavelengths.ok_or_else(|| missing("wavelength"))?,
            wavelength_units,
            header_offset,
        };
        if header.wavelengths.len() != header.bands {
            return Err(syntax(
                0,
                &format!("{} wavelengths listed for {} bands", header.wavelengths.len(), header.bands),
            ));
        }
        Ok(header)
    }

    /// Header text in the layout [`CubeHeader::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::from("ENVI\n");
        let _ = writeln!(out, "samples = {}", self.samples);
        let _ = writeln!(out, "lines = {}", self.lines);
        let _ = writeln!(out, "bands = {}", self.bands);
        let _ = writeln!(out, "header offset = {}", self.header_offset);
        let _ = writeln!(out, "data type = {}", self.data_type.code());
        let _ = writeln!(out, "interleave = {}", self.interleave.as_str());
        let order = match self.byte_order {
            ByteOrder::Little => 0,
            ByteOrder::Big => 1,
        };
        let _ = writeln!(out, "byte order = {order}");
        if let Some(units) = &self.wavelength_units {
            let _ = writeln!(out, "wavelength units = {units}");
        }
        let list: Vec<String> = self.wavelengths.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(out, "wavelength = {{{}}}", list.join(", "));
        out
    }

    /// Position of `(line, sample, band)` in the flat value sequence.
    fn offset(&self, line: usize, sample: usize, band: usize) -> usize {
        let (s, l, b) = (self.samples, self.lines, self.bands);
        match self.interleave {
            Interleave::Bsq => (band * l + line) * s + sample,
            Interleave::Bil => (line * b + band) * s + sample,
            Interleave::Bip => (line * s + sample) * b + band,
        }
    }
}

fn syntax(line: usize, message: &str) -> Error {
    Error::HeaderSyntax { line, message: message.to_string() }
}

fn parse_count(value: &str, line: usize) -> Result<usize> {
    value.trim().parse().map_err(|_| syntax(line, &format!("expected a nonnegative integer, got {value:?}")))
}

/// A loaded cube. Values are held per pixel regardless of the file
/// interleave.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    header: CubeHeader,
    /// `[line][sample][band]`
    values: Vec<f64>,
}

impl HyperCube {
    /// Builds a cube from pixel spectra in line-major order.
    pub fn from_pixels(header: CubeHeader, pixels: &[Vec<f64>]) -> Result<Self> {
        if pixels.len() != header.samples * header.lines {
            return Err(Error::DimensionMismatch {
                expected: header.samples * header.lines,
                found: pixels.len(),
            });
        }
        if header.wavelengths.len() != header.bands {
            return Err(Error::DimensionMismatch { expected: header.bands, found: header.wavelengths.len() });
        }
        if let Some(bad) = pixels.iter().find(|p| p.len() != header.bands) {
            return Err(Error::DimensionMismatch { expected: header.bands, found: bad.len() });
        }
        let values = pixels.iter().flatten().copied().collect();
        Ok(HyperCube { header, values })
    }

    pub fn header(&self) -> &CubeHeader {
        &self.header
    }

    pub fn samples(&self) -> usize {
        self.header.samples
    }

    pub fn lines(&self) -> usize {
        self.header.lines
    }

    pub fn bands(&self) -> usize {
        self.header.bands
    }

    pub fn pixel_values(&self, line: usize, sample: usize) -> Result<&[f64]> {
        if line >= self.header.lines || sample >= self.header.samples {
            return Err(Error::PixelOutOfRange {
                line,
                sample,
                lines: self.header.lines,
                samples: self.header.samples,
            });
        }
        let b = self.header.bands;
        let start = (line * self.header.samples + sample) * b;
        Ok(&self.values[start..start + b])
    }

    pub fn pixel(&self, line: usize, sample: usize) -> Result<PixelSpectrum> {
        let values = self.pixel_values(line, sample)?.to_vec();
        PixelSpectrum::new(values, self.header.wavelengths.clone())
    }

    /// Every pixel, line-major.
    pub fn pixels(&self) -> Result<Vec<PixelSpectrum>> {
        let mut out = Vec::with_capacity(self.header.samples * self.header.lines);
        for line in 0..self.header.lines {
            for sample in 0..self.header.samples {
                out.push(self.pixel(line, sample)?);
            }
        }
        Ok(out)
    }

    /// Same values with a different on-disk layout.
    pub fn with_layout(mut self, interleave: Interleave, data_type: DataType, byte_order: ByteOrder) -> Self {
        self.header.interleave = interleave;
        self.header.data_type = data_type;
        self.header.byte_order = byte_order;
        self
    }

    /// Decodes raw data bytes laid out as described by `header`.
    pub fn from_bytes(header: CubeHeader, bytes: &[u8]) -> Result<Self> {
        let expected = header.data_len();
        if bytes.len() as u64 != expected {
            return Err(Error::SizeMismatch { expected, actual: bytes.len() as u64 });
        }
        let raw = &bytes[header.header_offset..];
        let size = header.data_type.size();
        let decode = |i: usize| -> f64 {
            let chunk = &raw[i * size..(i + 1) * size];
            match (header.data_type, header.byte_order) {
                (DataType::F32, ByteOrder::Little) => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
                (DataType::F32, ByteOrder::Big) => f32::from_be_bytes(chunk.try_into().unwrap()) as f64,
                (DataType::F64, ByteOrder::Little) => f64::from_le_bytes(chunk.try_into().unwrap()),
                (DataType::F64, ByteOrder::Big) => f64::from_be_bytes(chunk.try_into().unwrap()),
            }
        };
        let (s, l, b) = (header.samples, header.lines, header.bands);
        let mut values = Vec::with_capacity(s * l * b);
        for line in 0..l {
            for sample in 0..s {
                for band in 0..b {
                    values.push(decode(header.offset(line, sample, band)));
                }
            }
        }
        Ok(HyperCube { header, values })
    }

    /// Encodes the values in the header's layout. 32-bit output rounds each
    /// value to the nearest `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let size = h.data_type.size();
        let mut out = vec![0u8; h.data_len() as usize];
        let raw = &mut out[h.header_offset..];
        for line in 0..h.lines {
            for sample in 0..h.samples {
                for band in 0..h.bands {
                    let v = self.values[(line * h.samples + sample) * h.bands + band];
                    let at = h.offset(line, sample, band) * size;
                    let slot = &mut raw[at..at + size];
                    match (h.data_type, h.byte_order) {
                        (DataType::F32, ByteOrder::Little) => slot.copy_from_slice(&(v as f32).to_le_bytes()),
                        (DataType::F32, ByteOrder::Big) => slot.copy_from_slice(&(v as f32).to_be_bytes()),
                        (DataType::F64, ByteOrder::Little) => slot.copy_from_slice(&v.to_le_bytes()),
                        (DataType::F64, ByteOrder::Big) => slot.copy_from_slice(&v.to_be_bytes()),
                    }
                }
            }
        }
        out
    }
}

pub fn load_header(path: impl AsRef<Path>) -> Result<CubeHeader> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CubeHeader::parse(&text)
}

pub fn load_cube(header_path: impl AsRef<Path>, data_path: impl AsRef<Path>) -> Result<HyperCube> {
    let header = load_header(header_path)?;
    let data_path = data_path.as_ref();
    let bytes = fs::read(data_path).map_err(|e| Error::io(data_path, e))?;
    HyperCube::from_bytes(header, &bytes)
}

/// Locates the data file next to a header: the header path without its
/// extension, or with one of `.img`, `.dat`, `.raw`, `.bsq`, `.bil`,
/// `.bip`.
pub fn data_path_for(header_path: impl AsRef<Path>) -> Result<PathBuf> {
    let header_path = header_path.as_ref();
    let stem = header_path.with_extension("");
    let candidates = std::iter::once(stem.clone())
        .chain(["img", "dat", "raw", "bsq", "bil", "bip"].iter().map(|ext| stem.with_extension(ext)));
    for c in candidates {
        if c != header_path && c.is_file() {
            return Ok(c);
        }
    }
    Err(Error::io(stem, std::io::Error::new(std::io::ErrorKind::NotFound, "no data file next to the header")))
}

/// Loads a cube given only its header path; see [`data_path_for`].
pub fn open_cube(header_path: impl AsRef<Path>) -> Result<HyperCube> {
    let data = data_path_for(&header_path)?;
    load_cube(header_path, data)
}

pub fn save_cube(header_path: impl AsRef<Path>, data_path: impl AsRef<Path>, cube: &HyperCube) -> Result<()> {
    let (hp, dp) = (header_path.as_ref(), data_path.as_ref());
    fs::write(hp, cube.header.to_text()).map_err(|e| Error::io(hp, e))?;
    fs::write(dp, cube.to_bytes()).map_err(|e| Error::io(dp, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> HyperCube {
        let pixels: Vec<Vec<f64>> =
            (0..4).map(|p| (0..3).map(|b| (p * 10 + b) as f64 * 0.125).collect()).collect();
        HyperCube::from_pixels(CubeHeader::new(2, 2, vec![0.5, 0.6, 0.7]), &pixels).unwrap()
    }

    #[test]
    fn layouts_agree() {
        let base = cube();
        for il in [Interleave::Bsq, Interleave::Bil, Interleave::Bip] {
            for dt in [DataType::F32, DataType::F64] {
                for bo in [ByteOrder::Little, ByteOrder::Big] {
                    let c = base.clone().with_layout(il, dt, bo);
                    let back = HyperCube::from_bytes(c.header.clone(), &c.to_bytes()).unwrap();
                    assert_eq!(back.values, base.values, "{il:?} {dt:?} {bo:?}");
                }
            }
        }
    }

    #[test]
    fn bsq_byte_layout() {
        let c = cube().with_layout(Interleave::Bsq, DataType::F64, ByteOrder::Little);
        let bytes = c.to_bytes();
        // second value on disk is band 0 of (line 0, sample 1)
        let v = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        assert_eq!(v, c.pixel_values(0, 1).unwrap()[0]);
        let c = c.with_layout(Interleave::Bip, DataType::F64, ByteOrder::Little);
        let v = f64::from_le_bytes(c.to_bytes()[8..16].try_into().unwrap());
        assert_eq!(v, c.pixel_values(0, 0).unwrap()[1]);
    }

    #[test]
    fn header_round_trip_and_errors() {
        let mut h = CubeHeader::new(3, 2, vec![0.4, 1.0 / 3.0]);
        h.interleave = Interleave::Bil;
        h.byte_order = ByteOrder::Big;
        h.header_offset = 16;
        assert_eq!(CubeHeader::parse(&h.to_text()).unwrap(), h);

        let multi = "ENVI\nsamples = 1\nlines = 1\nbands = 2\ndata type = 4\nInterleave = BIP\nbyte order = 0\nwavelength = {\n 0.5,\n 0.6 }\ndescription = {ignored}\n";
        let parsed = CubeHeader::parse(multi).unwrap();
        assert_eq!(parsed.wavelengths, vec![0.5, 0.6]);
        assert_eq!(parsed.interleave, Interleave::Bip);

        assert!(matches!(
            CubeHeader::parse(&multi.replace("data type = 4", "data type = 12")),
            Err(Error::UnsupportedDataType(12))
        ));
        assert!(matches!(
            CubeHeader::parse(&multi.replace("bands = 2", "bands")),
            Err(Error::HeaderSyntax { line: 4, .. })
        ));
        assert!(matches!(CubeHeader::parse("samples = 1"), Err(Error::HeaderSyntax { line: 1, .. })));
        assert!(matches!(
            CubeHeader::parse(&multi.replace("bands = 2", "bands = 3")),
            Err(Error::HeaderSyntax { .. })
        ));
    }

    #[test]
    fn truncated_data() {
        let c = cube();
        let bytes = c.to_bytes();
        assert!(matches!(
            HyperCube::from_bytes(c.header.clone(), &bytes[..bytes.len() - 1]),
            Err(Error::SizeMismatch { expected: 96, actual: 95 })
        ));
    }

    #[test]
    fn pixel_access() {
        let c = cube();
        assert_eq!(c.pixel(1, 0).unwrap().values(), &[2.5, 2.625, 2.75]);
        assert!(c.pixel(2, 0).is_err());
        assert!(c.pixel(0, 2).is_err());
        assert_eq!(c.pixels().unwrap().len(), 4);
    }
}
