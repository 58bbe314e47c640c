//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde_json::json;
use unmixkit::io::{
    generate_scene, load_library, load_pixels, load_results, open_cube, save_cube, save_library, save_pixels,
    synthetic_library, write_library, write_pixels, CubeHeader, HyperCube, NamedPixel, PixelRecord,
    ResultsFile,
};
use unmixkit::metrics::{benchmark, summarize, EvalReport, TargetGroup, Technique};
use unmixkit::minlp::{CardinalitySense, MinlpConfig};
use unmixkit::solvers::LassoConfig;
use unmixkit::stepwise::StepwiseConfig;
use unmixkit::whiten::{compute_stats, select_roi, RoiRule};
use unmixkit::{PixelSpectrum, SpectralLibrary};

use crate::args::{
    BenchArgs, Cardinality, Command, DetectArgs, EvalArgs, Format, JobsArgs, OutputArgs, PixelSource,
    SolverArgs, SolverName, SynthArgs, TargetArgs, UnmixArgs,
};
use crate::output;

/// Why a command failed: bad flag combinations exit with status 2, data
/// and solver errors with status 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<unmixkit::Error> for Failure {
    fn from(e: unmixkit::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Unmix(args) => unmix(args),
        Command::Detect(args) => detect(args),
        Command::Synth(args) => synth(args),
        Command::Bench(args) => bench(args),
        Command::Eval(args) => eval(args),
    }
}

fn library_at(path: &Path) -> anyhow::Result<SpectralLibrary> {
    load_library(path).with_context(|| format!("loading library {}", path.display()))
}

/// Pixels named by the source flags, in input order.
fn read_source(source: &PixelSource) -> Result<Vec<NamedPixel>, Failure> {
    Ok(read_scene(source)?.selected)
}

/// Selected pixels plus the whole scene they come from; background
/// statistics are estimated from the scene, not just the selection.
struct Scene {
    selected: Vec<NamedPixel>,
    all: Vec<PixelSpectrum>,
}

fn read_scene(source: &PixelSource) -> Result<Scene, Failure> {
    if let Some(path) = &source.pixel_file {
        let selected = load_pixels(path).with_context(|| format!("loading pixels {}", path.display()))?;
        let all = selected.iter().map(|p| p.pixel.clone()).collect();
        return Ok(Scene { selected, all });
    }
    let Some(header) = &source.cube else {
        return Err(Failure::Usage(
            "no pixels given: pass --cube (optionally with --pixels) or --pixel-file".into(),
        ));
    };
    let cube = open_cube(header).with_context(|| format!("loading cube {}", header.display()))?;
    let coords: Vec<(usize, usize)> = match &source.pixels {
        Some(list) => list.clone(),
        None => (0..cube.lines()).flat_map(|l| (0..cube.samples()).map(move |s| (l, s))).collect(),
    };
    let selected = coords
        .into_iter()
        .map(|(line, sample)| {
            Ok(NamedPixel { id: format!("{line}:{sample}"), pixel: cube.pixel(line, sample)? })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok(Scene { selected, all: cube.pixels()? })
}

fn lasso_config(args: &SolverArgs) -> LassoConfig {
    LassoConfig {
        seed: args.seed,
        lambda: args.lambda.unwrap_or(LassoConfig::default().lambda),
        ..Default::default()
    }
}

/// The configured technique for `name`. Whitening statistics are estimated
/// from `pixels`.
fn technique(name: SolverName, args: &SolverArgs, scene: &[PixelSpectrum]) -> Result<Technique, Failure> {
    Ok(match name {
        SolverName::Ols => Technique::Ols,
        SolverName::Nnls => Technique::Nnls,
        SolverName::Lasso if args.lambda.is_some() => Technique::Lasso(lasso_config(args)),
        SolverName::Lasso => Technique::LassoCv(lasso_config(args)),
        SolverName::Dfs => Technique::Dfs(StepwiseConfig { alpha: args.alpha, ..Default::default() }),
        SolverName::Minlp => Technique::Minlp(MinlpConfig {
            p: args.p,
            cardinality_sense: match args.cardinality {
                Cardinality::Atmost => CardinalitySense::AtMost,
                Cardinality::Atleast => CardinalitySense::AtLeast,
            },
            time_limit: args.time_limit,
            ..Default::default()
        }),
        SolverName::Hysudeb => {
            if args.lambda.is_some() {
                return Err(Failure::Usage(
                    "--lambda cannot be used with hysudeb, which always cross-validates".into(),
                ));
            }
            warn_if_underdetermined(scene);
            Technique::Hysudeb {
                stats: compute_stats(scene).context("estimating whitening statistics")?,
                config: lasso_config(args),
            }
        }
    })
}

/// A covariance estimated from no more pixels than bands is singular; the
/// floor then dominates the whitening and every pixel looks alike.
fn warn_if_underdetermined(scene: &[PixelSpectrum]) {
    let bands = scene.first().map_or(0, PixelSpectrum::len);
    if scene.len() <= bands {
        eprintln!(
            "warning: background statistics from {} pixels over {bands} bands are rank-deficient; \
             whitened results will be unreliable",
            scene.len()
        );
    }
}

fn thread_pool(jobs: &JobsArgs) -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs.jobs {
        builder = builder.num_threads(n as usize);
    }
    builder.build().context("starting worker threads")
}

fn unmix(args: UnmixArgs) -> Outcome {
    let library = library_at(&args.library)?;
    let Scene { selected: pixels, all } = read_scene(&args.source)?;
    let technique = technique(args.solver, &args.solver_args, &all)?;
    let pool = thread_pool(&args.jobs)?;
    let solutions: Vec<_> = pool.install(|| {
        pixels
            .par_iter()
            .map(|p| technique.solve(&library, &p.pixel).with_context(|| format!("pixel {}", p.id)))
            .collect()
    });
    let mut records = Vec::with_capacity(pixels.len());
    for (p, solution) in pixels.iter().zip(solutions) {
        records.push(PixelRecord::from_solution(&p.id, technique.name(), &solution?));
    }
    let results = ResultsFile { library: args.library.display().to_string(), pixels: records, report: None };
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => results.to_json()? + "\n",
        Format::Csv => output::records_csv(&results.pixels, &library)?,
        Format::Table => output::records_table(&results.pixels, &library),
    };
    write_output(&args.output, &text)
}

fn detect(args: DetectArgs) -> Outcome {
    let library = library_at(&args.library)?;
    let index = library
        .index_of(&args.target)
        .ok_or_else(|| anyhow!("no spectrum named {:?} in the library", args.target))?;
    let Scene { selected: pixels, all } = read_scene(&args.source)?;
    warn_if_underdetermined(&all);
    let stats = compute_stats(&all).context("estimating whitening statistics")?;
    let (rule, rule_text) = match (args.threshold, args.top_k) {
        (Some(t), _) => (RoiRule::Threshold(t), format!("threshold={t}")),
        (None, Some(k)) => (RoiRule::TopK(k), format!("top_k={k}")),
        (None, None) => return Err(Failure::Usage("pass --threshold or --top-k".into())),
    };
    let cube: Vec<PixelSpectrum> = pixels.iter().map(|p| p.pixel.clone()).collect();
    let (mask, scores) = select_roi(&cube, library.spectrum(index), &stats, rule)?;
    let ids: Vec<&str> = pixels.iter().map(|p| p.id.as_str()).collect();
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => output::mask_csv(&ids, &scores, &mask)?,
        Format::Json => {
            let rows: Vec<_> = ids
                .iter()
                .zip(&scores)
                .zip(&mask)
                .map(|((id, score), selected)| json!({ "id": id, "score": score, "selected": selected }))
                .collect();
            let doc = json!({ "target": args.target, "rule": rule_text, "pixels": rows });
            serde_json::to_string_pretty(&doc).context("encoding JSON")? + "\n"
        }
        Format::Table => output::mask_table(&ids, &scores, &mask),
    };
    write_output(&args.output, &text)
}

fn synth(args: SynthArgs) -> Outcome {
    if let Some(spec) = args.make_library {
        let library = synthetic_library(spec.spectra, spec.bands, spec.seed)?;
        return match &args.output {
            Some(path) => {
                Ok(save_library(path, &library).with_context(|| format!("writing {}", path.display()))?)
            }
            None => Ok(write_library(std::io::stdout().lock(), &library)?),
        };
    }
    let (Some(path), Some(spec)) = (&args.library, &args.scene) else {
        return Err(Failure::Usage("pass --make-library SPEC, or --library PATH with --scene SPEC".into()));
    };
    let library = library_at(path)?;
    let scene =
        generate_scene(&library, spec.pixels, spec.sparsity, spec.abundance_range, spec.snr_db, spec.seed)?;
    let named: Vec<NamedPixel> = scene
        .pixels
        .iter()
        .enumerate()
        .map(|(i, p)| NamedPixel { id: format!("pixel_{i:04}"), pixel: p.clone() })
        .collect();
    if let Some(truth_path) = &args.truth {
        let rows: Vec<_> = named
            .iter()
            .zip(&scene.ground_truth)
            .map(|(p, truth)| json!({ "id": p.id, "abundances": truth }))
            .collect();
        let doc = json!({
            "library": path.display().to_string(),
            "seed": scene.seed,
            "snr_db": scene.snr_db.is_finite().then_some(scene.snr_db),
            "pixels": rows,
        });
        let text = serde_json::to_string_pretty(&doc).context("encoding JSON")? + "\n";
        fs::write(truth_path, text).with_context(|| format!("writing {}", truth_path.display()))?;
    }
    if let Some(header_path) = &args.cube_out {
        let header = CubeHeader::new(named.len(), 1, library.wavelengths().to_vec());
        let cube = HyperCube::from_pixels(header, &scene.pixel_values())?;
        let data_path = header_path.with_extension("img");
        save_cube(header_path, &data_path, &cube)
            .with_context(|| format!("writing {}", header_path.display()))?;
    }
    match &args.output {
        Some(out) => save_pixels(out, &named).with_context(|| format!("writing {}", out.display()))?,
        None => write_pixels(std::io::stdout().lock(), &named)?,
    }
    Ok(())
}

fn target_group(library: &SpectralLibrary, args: &TargetArgs) -> anyhow::Result<TargetGroup> {
    if let Some(category) = &args.target_category {
        let group = TargetGroup::from_category(library, category);
        if group.members().is_empty() {
            bail!("no library spectrum has category {category:?}");
        }
        return Ok(group);
    }
    let names = args.target.as_deref().unwrap_or_default();
    let indices = names
        .iter()
        .map(|n| library.index_of(n).ok_or_else(|| anyhow!("no spectrum named {n:?} in the library")))
        .collect::<anyhow::Result<Vec<usize>>>()?;
    Ok(TargetGroup::from_indices(names.join(","), indices))
}

fn bench(args: BenchArgs) -> Outcome {
    let library = library_at(&args.library)?;
    let cube: Vec<PixelSpectrum> = match &args.synth {
        Some(spec) => {
            generate_scene(
                &library,
                spec.pixels,
                spec.sparsity,
                spec.abundance_range,
                spec.snr_db,
                spec.seed,
            )?
            .pixels
        }
        None => read_source(&args.source)?.into_iter().map(|p| p.pixel).collect(),
    };
    let target = target_group(&library, &args.target)?;
    let techniques = args
        .solvers
        .iter()
        .map(|&s| technique(s, &args.solver_args, &cube))
        .collect::<Result<Vec<_>, _>>()?;
    let report = benchmark(&techniques, &cube, &library, &target, args.target.k)?;
    emit_report(&report, &args.output)
}

fn eval(args: EvalArgs) -> Outcome {
    let library = library_at(&args.library)?;
    let results =
        load_results(&args.results).with_context(|| format!("loading results {}", args.results.display()))?;
    let target = target_group(&library, &args.target)?;
    let mut solvers: Vec<&str> = Vec::new();
    for r in &results.pixels {
        if !solvers.contains(&r.solver.as_str()) {
            solvers.push(&r.solver);
        }
    }
    let rows = solvers
        .iter()
        .map(|&solver| {
            let records: Vec<&PixelRecord> = results.pixels.iter().filter(|r| r.solver == solver).collect();
            if let Some(r) = records.iter().find(|r| r.coefficients.keys().any(|&i| i >= library.len())) {
                bail!("pixel {} refers to a spectrum outside the library", r.id);
            }
            Ok(summarize(
                solver,
                records[0].rmse_units,
                records.iter().map(|r| (&r.coefficients, r.rmse, r.runtime_s)),
                0,
                &target,
                args.target.k,
            )?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = EvalReport { k: args.target.k, target: target.label().to_string(), rows };
    emit_report(&report, &args.output)
}

fn emit_report(report: &EvalReport, out: &OutputArgs) -> Outcome {
    let text = match out.format.unwrap_or(Format::Csv) {
        Format::Csv => report.to_csv()?,
        Format::Json => report.to_json()? + "\n",
        Format::Table => output::report_table(report),
    };
    write_output(out, &text)
}

fn write_output(out: &OutputArgs, text: &str) -> Outcome {
    write_to(out.output.as_ref(), text)
}

fn write_to(path: Option<&PathBuf>, text: &str) -> Outcome {
    match path {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("writing to standard output")?;
        }
    }
    Ok(())
}
