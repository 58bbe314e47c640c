//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use unmixkit::minlp::DEFAULT_MODEL_SIZE;

#[derive(Debug, Parser)]
#[command(
    name = "unmixkit",
    version,
    about = "Library-based hyperspectral unmixing, target detection and benchmarking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate abundances of library spectra in selected pixels.
    Unmix(UnmixArgs),
    /// Score pixels against a target spectrum (ACE) and select a region of
    /// interest.
    Detect(DetectArgs),
    /// Generate a synthetic library or a synthetic scene of mixed pixels.
    Synth(SynthArgs),
    /// Run several solvers over the same pixels and report error, runtime,
    /// detection percentage and mean average precision.
    Bench(BenchArgs),
    /// Summarize a results file from `unmix` against a target group.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverName {
    Ols,
    Nnls,
    Lasso,
    Dfs,
    Minlp,
    Hysudeb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Cardinality {
    Atmost,
    Atleast,
}

/// Output destination and encoding.
#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write results here instead of standard output.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Output encoding; each subcommand has its own default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Worker pool size for per-pixel work.
#[derive(Debug, Args)]
pub struct JobsArgs {
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long, env = "UNMIXKIT_JOBS", value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
}

/// Where pixels come from: a cube (all pixels, or those listed) or a pixel
/// CSV file.
#[derive(Debug, Args)]
pub struct PixelSource {
    /// ENVI-style header of a hyperspectral cube; the data file sits next
    /// to it.
    #[arg(long, value_name = "PATH", conflicts_with = "pixel_file")]
    pub cube: Option<PathBuf>,
    /// Comma-separated `line:sample` pairs selecting cube pixels; all
    /// pixels when omitted.
    #[arg(long, value_name = "SPEC", requires = "cube", value_parser = parse_pixel_spec)]
    pub pixels: Option<::std::vec::Vec<(usize, usize)>>,
    /// CSV of pixel spectra (`id,b0,b1,...` with a `__wavelengths__` row).
    #[arg(long, value_name = "PATH")]
    pub pixel_file: Option<PathBuf>,
}

/// Solver settings shared by `unmix` and `bench`.
#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Fixed LASSO penalty; disables cross-validation.
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Choose the LASSO penalty by cross-validation (the default).
    #[arg(long)]
    pub cv: bool,
    /// p-value inclusion threshold for stepwise selection.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Model size for the branch-and-bound solver.
    #[arg(long, default_value_t = DEFAULT_MODEL_SIZE)]
    pub p: usize,
    /// Whether the model size is an upper or a lower limit.
    #[arg(long, value_enum, default_value_t = Cardinality::Atmost)]
    pub cardinality: Cardinality,
    /// Branch-and-bound time limit per pixel, in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
    /// Seed of the cross-validation fold shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    /// Spectral library CSV.
    #[arg(long, value_name = "PATH")]
    pub library: PathBuf,
    #[command(flatten)]
    pub source: PixelSource,
    #[arg(long, value_enum)]
    pub solver: SolverName,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub jobs: JobsArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Spectral library CSV holding the target spectrum.
    #[arg(long, value_name = "PATH")]
    pub library: PathBuf,
    /// Name of the target spectrum in the library.
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub source: PixelSource,
    /// Select pixels whose ACE score is at least this value, in [0, 1].
    #[arg(long, conflicts_with = "top_k", required_unless_present = "top_k")]
    pub threshold: Option<f64>,
    /// Select the k highest-scoring pixels.
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Write a synthetic library, e.g. `spectra=60,bands=100,seed=7`.
    #[arg(long, value_name = "SPEC", conflicts_with_all = ["library", "scene"], value_parser = parse_library_spec)]
    pub make_library: Option<LibrarySpec>,
    /// Library to mix pixels from.
    #[arg(long, value_name = "PATH", requires = "scene")]
    pub library: Option<PathBuf>,
    /// Scene to generate, e.g. `pixels=50,sparsity=3,snr=30,seed=7`.
    #[arg(long, value_name = "SPEC", requires = "library", value_parser = parse_scene_spec)]
    pub scene: Option<SceneSpec>,
    /// Also write the true abundances as JSON.
    #[arg(long, value_name = "PATH", requires = "scene")]
    pub truth: Option<PathBuf>,
    /// Also write the scene as a one-line cube (header path; the data file
    /// gets the `.img` extension).
    #[arg(long, value_name = "PATH", requires = "scene")]
    pub cube_out: Option<PathBuf>,
    /// Destination of the library or pixel CSV.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Every library spectrum of this category is a target.
    #[arg(long, conflicts_with = "target", required_unless_present = "target")]
    pub target_category: Option<String>,
    /// Comma-separated names of target spectra.
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<String>>,
    /// Cutoff for precision at k.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Spectral library CSV.
    #[arg(long, value_name = "PATH")]
    pub library: PathBuf,
    /// Benchmark on a synthetic scene mixed from the library, e.g.
    /// `pixels=50,sparsity=3,snr=30,seed=7`.
    #[arg(long, value_name = "SPEC", conflicts_with_all = ["cube", "pixel_file"], value_parser = parse_scene_spec)]
    pub synth: Option<SceneSpec>,
    #[command(flatten)]
    pub source: PixelSource,
    /// Comma-separated solvers, reported in this order.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "nnls,lasso,dfs,minlp")]
    pub solvers: Vec<SolverName>,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Results JSON written by `unmix`.
    #[arg(long, value_name = "PATH")]
    pub results: PathBuf,
    /// Library the results refer to.
    #[arg(long, value_name = "PATH")]
    pub library: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibrarySpec {
    pub spectra: usize,
    pub bands: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub pixels: usize,
    pub sparsity: usize,
    /// `inf` for noiseless scenes.
    pub snr_db: f64,
    pub seed: u64,
    pub abundance_range: (f64, f64),
}

fn parse_pixel_spec(text: &str) -> Result<Vec<(usize, usize)>, String> {
    text.split(',')
        .map(|pair| {
            let (line, sample) =
                pair.trim().split_once(':').ok_or_else(|| format!("expected line:sample, got {pair:?}"))?;
            let parse =
                |s: &str| s.trim().parse::<usize>().map_err(|_| format!("not a pixel coordinate: {s:?}"));
            Ok((parse(line)?, parse(sample)?))
        })
        .collect()
}

/// Splits `key=value,key=value` into pairs, rejecting keys not in
/// `allowed`.
fn key_values<'a>(text: &'a str, allowed: &[&str]) -> Result<Vec<(&'a str, &'a str)>, String> {
    text.split(',')
        .map(|item| {
            let (key, value) =
                item.trim().split_once('=').ok_or_else(|| format!("expected key=value, got {item:?}"))?;
            let key = key.trim();
            if !allowed.contains(&key) {
                return Err(format!("unknown key {key:?}; expected one of {}", allowed.join(", ")));
            }
            Ok((key, value.trim()))
        })
        .collect()
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn parse_library_spec(text: &str) -> Result<LibrarySpec, String> {
    let mut spec = LibrarySpec { spectra: 60, bands: 100, seed: 0 };
    for (key, value) in key_values(text, &["spectra", "bands", "seed"])? {
        match key {
            "spectra" => spec.spectra = number(key, value)?,
            "bands" => spec.bands = number(key, value)?,
            _ => spec.seed = number(key, value)?,
        }
    }
    Ok(spec)
}

fn parse_scene_spec(text: &str) -> Result<SceneSpec, String> {
    let mut spec = SceneSpec { pixels: 50, sparsity: 3, snr_db: 30.0, seed: 0, abundance_range: (0.1, 1.0) };
    for (key, value) in key_values(text, &["pixels", "sparsity", "snr", "seed", "min", "max"])? {
        match key {
            "pixels" => spec.pixels = number(key, value)?,
            "sparsity" => spec.sparsity = number(key, value)?,
            "snr" => {
                spec.snr_db = match value {
                    "inf" | "none" => f64::INFINITY,
                    _ => number(key, value)?,
                }
            }
            "seed" => spec.seed = number(key, value)?,
            "min" => spec.abundance_range.0 = number(key, value)?,
            _ => spec.abundance_range.1 = number(key, value)?,
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_specs() {
        assert_eq!(parse_pixel_spec("0:0, 3:12").unwrap(), vec![(0, 0), (3, 12)]);
        assert!(parse_pixel_spec("0-0").is_err());
        assert!(parse_pixel_spec("a:1").is_err());
    }

    #[test]
    fn scene_specs() {
        let s = parse_scene_spec("pixels=50,sparsity=3,snr=30,seed=7").unwrap();
        assert_eq!((s.pixels, s.sparsity, s.snr_db, s.seed), (50, 3, 30.0, 7));
        assert_eq!(parse_scene_spec("snr=inf").unwrap().snr_db, f64::INFINITY);
        assert!(parse_scene_spec("pixels=x").is_err());
        assert!(parse_scene_spec("colour=red").is_err());
    }

    #[test]
    fn library_specs() {
        let s = parse_library_spec("spectra=40,bands=80,seed=2").unwrap();
        assert_eq!(s, LibrarySpec { spectra: 40, bands: 80, seed: 2 });
    }

    #[test]
    fn flag_definitions_are_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
