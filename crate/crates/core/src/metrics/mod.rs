//! Detection and ranking metrics, and timed benchmarks over pixel sets.
//!
//! A [`RankedModel`] orders the spectra a solver kept for one pixel by
//! abundance. A [`TargetGroup`] names the relevant spectra, either an
//! explicit index set or every member of a mineral category, so several
//! library variants of one mineral all count as hits.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::abundance::{AbundanceSolution, Coefficients, RmseUnits};
use crate::error::{Error, Result};
use crate::minlp::{minlp_unmix, MinlpConfig};
use crate::solvers::{lasso_cv, lasso_solve_with, nnls_solve, ols_solve, LassoConfig, LassoCvPlan};
use crate::spectra::{PixelSpectrum, SpectralLibrary};
use crate::stepwise::{dfs_select, StepwiseConfig};
use crate::whiten::{hysudeb_unmix, WhitenStats};

/// Timed repeats per (solver, pixel); the median is reported.
pub const TIMING_REPEATS: usize = 3;

/// The set of library indices that count as a detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetGroup {
    label: String,
    members: BTreeSet<usize>,
}

impl TargetGroup {
    pub fn from_indices(label: impl Into<String>, indices: impl IntoIterator<Item = usize>) -> Self {
        TargetGroup { label: label.into(), members: indices.into_iter().collect() }
    }

    /// Every spectrum of `category` in `library`.
    pub fn from_category(library: &SpectralLibrary, category: &str) -> Self {
        Self::from_indices(category, library.category_indices(category))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }
}

/// Spectra of one fitted model in rank order: abundance descending, ties to
/// the lowest library index. All abundances are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedModel {
    entries: Vec<(usize, f64)>,
    target: TargetGroup,
}

impl RankedModel {
    pub fn new(entries: Vec<(usize, f64)>, target: TargetGroup) -> Result<Self> {
        if let Some(&(i, a)) = entries.iter().find(|(_, a)| !(*a > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "ranked abundances must be positive, got {a} for spectrum {i}"
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(&(i, _)) = entries.iter().find(|(i, _)| !seen.insert(*i)) {
            return Err(Error::InvalidConfig(format!("spectrum {i} ranked twice")));
        }
        let mut entries = entries;
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(RankedModel { entries, target })
    }

    /// Ranks the positive abundances of a solution. Negative coefficients of
    /// an unconstrained fit are not detections and are left out.
    pub fn from_solution(solution: &AbundanceSolution, target: TargetGroup) -> Self {
        let entries =
            solution.coefficients().iter().filter(|(_, &a)| a > 0.0).map(|(&i, &a)| (i, a)).collect();
        RankedModel::new(entries, target).expect("positive, distinct entries")
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn target(&self) -> &TargetGroup {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn relevance(&self) -> impl Iterator<Item = bool> + '_ {
        self.entries.iter().map(|(i, _)| self.target.contains(*i))
    }
}

/// Whether any ranked spectrum belongs to the target group.
pub fn detection_hit(model: &RankedModel) -> bool {
    model.relevance().any(|r| r)
}

/// Fraction of models with a detection hit.
pub fn detection_percentage(models: &[RankedModel]) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = models.iter().filter(|m| detection_hit(m)).count();
    Ok(hits as f64 / models.len() as f64)
}

/// Target-group entries among the first `min(k, len)` ranks, divided by `k`.
pub fn precision_at_k(model: &RankedModel, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    let hits = model.relevance().take(k).filter(|&r| r).count();
    Ok(hits as f64 / k as f64)
}

/// Mean of `precision_at_i` over the ranks `i <= k` holding a target entry;
/// zero when no target appears in the top `k`.
pub fn average_precision(model: &RankedModel, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, relevant) in model.relevance().take(k).enumerate() {
        if relevant {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(if hits == 0 { 0.0 } else { sum / hits as f64 })
}

/// Mean of [`average_precision`] over models.
pub fn mean_average_precision(models: &[RankedModel], k: usize) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = 0.0;
    for m in models {
        sum += average_precision(m, k)?;
    }
    Ok(sum / models.len() as f64)
}

/// A solver together with its configuration.
#[derive(Debug, Clone)]
pub enum Technique {
    Ols,
    Nnls,
    /// LASSO with the penalty chosen by cross-validation.
    LassoCv(LassoConfig),
    /// LASSO at the fixed penalty `config.lambda`.
    Lasso(LassoConfig),
    Dfs(StepwiseConfig),
    Minlp(MinlpConfig),
    Hysudeb {
        stats: WhitenStats,
        config: LassoConfig,
    },
}

impl Technique {
    pub fn name(&self) -> &'static str {
        match self {
            Technique::Ols => "ols",
            Technique::Nnls => "nnls",
            Technique::LassoCv(_) | Technique::Lasso(_) => "lasso",
            Technique::Dfs(_) => "dfs",
            Technique::Minlp(_) => "minlp",
            Technique::Hysudeb { .. } => "hysudeb",
        }
    }

    pub fn units(&self) -> RmseUnits {
        match self {
            Technique::Hysudeb { .. } => RmseUnits::Whitened,
            _ => RmseUnits::Reflectance,
        }
    }

    pub fn solve(&self, library: &SpectralLibrary, pixel: &PixelSpectrum) -> Result<AbundanceSolution> {
        match self {
            Technique::Ols => ols_solve(library, pixel),
            Technique::Nnls => nnls_solve(library, pixel),
            Technique::LassoCv(c) => lasso_cv(library, pixel, c).map(|(_, s)| s),
            Technique::Lasso(c) => lasso_solve_with(library, pixel, c.lambda, &c.solver),
            Technique::Dfs(c) => dfs_select(library, pixel, c),
            Technique::Minlp(c) => minlp_unmix(library, pixel, c).map(|r| r.solution),
            Technique::Hysudeb { stats, config } => hysudeb_unmix(library, pixel, stats, config),
        }
    }

    /// Solves [`TIMING_REPEATS`] times and returns the first solution with
    /// its runtime replaced by the median wall-clock time.
    pub fn solve_timed(&self, library: &SpectralLibrary, pixel: &PixelSpectrum) -> Result<AbundanceSolution> {
        Prepared::Direct(self).solve_timed(library, pixel)
    }

    /// Library-only work done once per benchmark. Falls back to per-pixel
    /// solving when the setup itself fails, so the error is reported for
    /// every pixel.
    fn prepare<'a>(&'a self, library: &'a SpectralLibrary) -> Prepared<'a> {
        match self {
            Technique::LassoCv(c) => LassoCvPlan::new(library, c)
                .map_or(Prepared::Direct(self), |plan| Prepared::LassoCv(Box::new(plan))),
            _ => Prepared::Direct(self),
        }
    }
}

enum Prepared<'a> {
    Direct(&'a Technique),
    LassoCv(Box<LassoCvPlan<'a>>),
}

impl Prepared<'_> {
    fn solve(&self, library: &SpectralLibrary, pixel: &PixelSpectrum) -> Result<AbundanceSolution> {
        match self {
            Prepared::Direct(t) => t.solve(library, pixel),
            Prepared::LassoCv(plan) => plan.fit(pixel).map(|(_, s)| s),
        }
    }

    fn solve_timed(&self, library: &SpectralLibrary, pixel: &PixelSpectrum) -> Result<AbundanceSolution> {
        let mut times = Vec::with_capacity(TIMING_REPEATS);
        let mut first = None;
        for _ in 0..TIMING_REPEATS {
            let start = Instant::now();
            let solution = self.solve(library, pixel)?;
            times.push(start.elapsed().as_secs_f64());
            first.get_or_insert(solution);
        }
        times.sort_by(f64::total_cmp);
        let median = times[times.len() / 2];
        Ok(first.expect("at least one repeat").with_runtime(median))
    }
}

/// One report row. Means are over the pixels the technique solved; `None`
/// when every pixel failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub technique: String,
    pub mean_rmse: Option<f64>,
    pub rmse_units: RmseUnits,
    pub mean_runtime_s: Option<f64>,
    pub detection_pct: Option<f64>,
    pub map_at_k: Option<f64>,
    pub failures: usize,
}

impl EvalRow {
    /// RMSE in reflectance units can be compared across rows; whitened RMSE
    /// cannot.
    pub fn rmse_comparable(&self) -> bool {
        self.rmse_units == RmseUnits::Reflectance
    }
}

/// Aggregated benchmark results, one row per technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub target: String,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, technique: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.technique == technique)
    }

    /// CSV with a header line and one line per technique. Missing means are
    /// empty fields.
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row)?;
        }
        if self.rows.is_empty() {
            writer.write_record([
                "technique",
                "mean_rmse",
                "rmse_units",
                "mean_runtime_s",
                "detection_pct",
                "map_at_k",
                "failures",
            ])?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str, k: usize, target: impl Into<String>) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let rows = reader.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(EvalReport { k, target: target.into(), rows })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The outcome of one technique on one pixel.
#[derive(Debug, Clone)]
pub struct PixelOutcome {
    pub pixel: usize,
    pub technique: String,
    pub result: Result<AbundanceSolution, String>,
}

/// Runs every technique on every pixel and aggregates RMSE, runtime,
/// detection percentage and MAP at `k`. Pixel failures are counted, not
/// propagated. Work that depends only on the library (the cross-validation
/// Gram matrices of LASSO) is done once per technique and its time is
/// spread evenly over the pixels' runtimes.
pub fn benchmark(
    techniques: &[Technique],
    pixels: &[PixelSpectrum],
    library: &SpectralLibrary,
    target: &TargetGroup,
    k: usize,
) -> Result<EvalReport> {
    benchmark_detailed(techniques, pixels, library, target, k).map(|(report, _)| report)
}

/// Like [`benchmark`], also returning each per-pixel outcome in technique,
/// then pixel, order.
pub fn benchmark_detailed(
    techniques: &[Technique],
    pixels: &[PixelSpectrum],
    library: &SpectralLibrary,
    target: &TargetGroup,
    k: usize,
) -> Result<(EvalReport, Vec<PixelOutcome>)> {
    if techniques.is_empty() || pixels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    let mut rows = Vec::with_capacity(techniques.len());
    let mut outcomes = Vec::with_capacity(techniques.len() * pixels.len());
    for technique in techniques {
        let start = Instant::now();
        let prepared = technique.prepare(library);
        // setup cost is shared evenly by the pixels
        let setup = start.elapsed().as_secs_f64() / pixels.len() as f64;
        let results: Vec<_> = pixels
            .iter()
            .map(|p| {
                prepared.solve_timed(library, p).map(|s| {
                    let runtime = s.runtime() + setup;
                    s.with_runtime(runtime)
                })
            })
            .collect();
        let solved: Vec<&AbundanceSolution> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        rows.push(aggregate(technique, &solved, results.len() - solved.len(), target, k)?);
        outcomes.extend(results.into_iter().enumerate().map(|(pixel, result)| PixelOutcome {
            pixel,
            technique: technique.name().to_string(),
            result: result.map_err(|e| e.to_string()),
        }));
    }
    let report = EvalReport { k, target: target.label().to_string(), rows };
    Ok((report, outcomes))
}

fn aggregate(
    technique: &Technique,
    solved: &[&AbundanceSolution],
    failures: usize,
    target: &TargetGroup,
    k: usize,
) -> Result<EvalRow> {
    summarize(
        technique.name(),
        technique.units(),
        solved.iter().map(|s| (s.coefficients(), s.rmse(), s.runtime())),
        failures,
        target,
        k,
    )
}

/// Builds a report row from stored fits, each given as (coefficients,
/// rmse, runtime in seconds).
pub fn summarize<'a>(
    technique: impl Into<String>,
    units: RmseUnits,
    fits: impl IntoIterator<Item = (&'a Coefficients, f64, f64)>,
    failures: usize,
    target: &TargetGroup,
    k: usize,
) -> Result<EvalRow> {
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    let (mut rmse_sum, mut runtime_sum) = (0.0, 0.0);
    let mut models = Vec::new();
    for (coefficients, rmse, runtime) in fits {
        rmse_sum += rmse;
        runtime_sum += runtime;
        let entries = coefficients.iter().filter(|(_, &a)| a > 0.0).map(|(&i, &a)| (i, a)).collect();
        models.push(RankedModel::new(entries, target.clone())?);
    }
    let n = models.len();
    let mean = |sum: f64| (n > 0).then(|| sum / n as f64);
    let (detection_pct, map_at_k) = if models.is_empty() {
        (None, None)
    } else {
        (Some(detection_percentage(&models)?), Some(mean_average_precision(&models, k)?))
    };
    Ok(EvalRow {
        technique: technique.into(),
        mean_rmse: mean(rmse_sum),
        rmse_units: units,
        mean_runtime_s: mean(runtime_sum),
        detection_pct,
        map_at_k,
        failures,
    })
}
