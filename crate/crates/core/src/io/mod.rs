//! File formats and synthetic data.
//!
//! * Spectral libraries: CSV, one spectrum per row ([`load_library`],
//!   [`save_library`]).
//! * Pixel lists: CSV, one pixel per row ([`load_pixels`],
//!   [`save_pixels`]).
//! * Cubes: ENVI-style header plus raw float32/float64 data in BSQ, BIL or
//!   BIP order ([`load_cube`], [`save_cube`]).
//! * Results: JSON with sparse coefficients per pixel ([`save_results`],
//!   [`load_results`]).
//! * Synthetic libraries and scenes with known abundances
//!   ([`synthetic_library`], [`generate_scene`]).

mod cube;
mod library;
mod pixels;
mod results;
mod synth;

pub use cube::{
    data_path_for, load_cube, load_header, open_cube, save_cube, ByteOrder, CubeHeader, DataType, HyperCube,
    Interleave,
};
pub use library::{
    library_from_records, load_library, parse_records, read_library_records, save_library, write_library,
    LibraryFileRecord, WAVELENGTH_ROW,
};
pub use pixels::{load_pixels, read_pixels, save_pixels, write_pixels, NamedPixel};
pub use results::{load_results, save_results, PixelRecord, ResultsFile};
pub use synth::{generate_scene, synthetic_library, SynthScene, SYNTH_CATEGORIES, SYNTH_RMS_REFLECTANCE};
