//! Nonnegative LASSO with k-fold cross-validation over the penalty.
//!
//! The objective is
//!
//! ```text
//! (1/M) ||y - S a||^2 + lambda * ||a||_1,   a >= 0
//! ```
//!
//! with `M` the number of bands being fitted. Keeping the `1/M` factor
//! means `lambda` is on the scale of a mean squared error, so the default
//! search grid `0.001..=0.1` is meaningful for reflectance data.
//!
//! Nonnegative fits with a well-conditioned Gram matrix `G = S^T S` are
//! computed exactly by following the solution path in the penalty: the
//! active coefficients are piecewise affine in `lambda`, with breakpoints
//! where a column enters or leaves the model. One path per fold yields the
//! held-out error at every grid penalty, and the Gram matrices depend only
//! on the library, so [`LassoCvPlan`] computes them once for many pixels.
//! Cyclic coordinate descent handles the signed variant and Gram matrices
//! too ill-conditioned to trust; [`lasso_sweep_objectives`] exposes its
//! per-sweep objective.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::active_set::box_lsq;
use crate::abundance::{AbundanceSolution, RmseUnits, SolverConfig};
use crate::error::{Error, Result};
use crate::spectra::{PixelSpectrum, SpectralLibrary};

/// Penalty and cross-validation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoConfig {
    /// Penalty weight for a fixed-penalty fit.
    pub lambda: f64,
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    /// Number of folds; bands are the cross-validation observations.
    pub folds: usize,
    /// Seed for the band shuffle that precedes fold assignment.
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda: 0.001,
            grid_start: 0.001,
            grid_stop: 0.1,
            grid_step: 0.001,
            folds: 5,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::InvalidConfig("grid_step must be positive".into()));
        }
        if !(self.grid_start >= 0.0 && self.grid_start <= self.grid_stop) {
            return Err(Error::InvalidConfig(format!(
                "grid must satisfy 0 <= start <= stop, got [{}, {}]",
                self.grid_start, self.grid_stop
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be at least 2".into()));
        }
        Ok(())
    }

    /// The penalty grid `start, start + step, ..., <= stop`, ascending.
    pub fn grid(&self) -> Vec<f64> {
        let count = ((self.grid_stop - self.grid_start) / self.grid_step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.grid_start + i as f64 * self.grid_step).collect()
    }
}

/// `S^T S` and whether it is safely positive definite.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    matrix: DMatrix<f64>,
    /// Cholesky pivots within [`MAX_PIVOT_RATIO`] of each other, so
    /// `cond(G) <= 1e12`.
    definite: bool,
}

/// Largest ratio between Cholesky pivots accepted for the exact solvers.
const MAX_PIVOT_RATIO: f64 = 1e6;

impl Gram {
    pub(crate) fn new(design: &DMatrix<f64>) -> Self {
        let matrix = design.tr_mul(design);
        let definite = Cholesky::new(matrix.clone()).is_some_and(|c| {
            let pivots = c.l_dirty().diagonal();
            let (lo, hi) = (pivots.min(), pivots.max());
            lo > 0.0 && hi <= MAX_PIVOT_RATIO * lo
        });
        Gram { matrix, definite }
    }
}

/// Normal-equation form of a least squares problem: `S^T S`, `S^T y` and
/// the band count.
#[derive(Debug, Clone)]
pub(crate) struct GramProblem<'a> {
    gram: &'a Gram,
    xty: DVector<f64>,
    bands: usize,
}

impl<'a> GramProblem<'a> {
    pub(crate) fn new(gram: &'a Gram, design: &DMatrix<f64>, target: &DVector<f64>) -> Self {
        GramProblem { gram, xty: design.tr_mul(target), bands: design.nrows() }
    }

    /// Penalty in the unscaled form `(1/2) a^T G a - c^T a + t ||a||_1`.
    fn threshold(&self, lambda: f64) -> f64 {
        lambda * self.bands as f64 / 2.0
    }
}

/// A stretch of the nonnegative LASSO path over which the active set is
/// fixed: for `lower <= t <= upper` the active coefficients are
/// `u - t v`, every other coefficient is zero.
#[derive(Debug, Clone)]
struct Segment {
    upper: f64,
    lower: f64,
    active: Vec<usize>,
    u: DVector<f64>,
    v: DVector<f64>,
}

impl Segment {
    fn write(&self, t: f64, coeffs: &mut [f64]) {
        coeffs.fill(0.0);
        for (k, &i) in self.active.iter().enumerate() {
            coeffs[i] = (self.u[k] - t * self.v[k]).max(0.0);
        }
    }
}

/// Lower Cholesky factor of the active Gram block, grown a column at a
/// time and rebuilt when a column leaves.
struct ActiveFactor {
    /// Row-major `n x n` storage; row `r` holds `r + 1` entries.
    l: Vec<f64>,
    n: usize,
    k: usize,
}

impl ActiveFactor {
    fn new(n: usize) -> Self {
        ActiveFactor { l: vec![0.0; n * n], n, k: 0 }
    }

    /// Appends column `active[k]`; `None` if the block stops being
    /// positive definite.
    fn push(&mut self, gram: &DMatrix<f64>, active: &[usize]) -> Option<()> {
        let (n, k) = (self.n, self.k);
        let j = active[k];
        let mut diag = gram[(j, j)];
        for r in 0..k {
            let mut s = gram[(active[r], j)];
            for q in 0..r {
                s -= self.l[r * n + q] * self.l[k * n + q];
            }
            let x = s / self.l[r * n + r];
            self.l[k * n + r] = x;
            diag -= x * x;
        }
        if !(diag > 0.0) {
            return None;
        }
        self.l[k * n + k] = diag.sqrt();
        self.k += 1;
        Some(())
    }

    fn rebuild(&mut self, gram: &DMatrix<f64>, active: &[usize]) -> Option<()> {
        self.k = 0;
        (0..active.len()).try_for_each(|_| self.push(gram, active))
    }

    /// Solves `(L L^T) x = b` in place.
    fn solve(&self, b: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        for r in 0..k {
            let s: f64 = (0..r).map(|q| self.l[r * n + q] * b[q]).sum();
            b[r] = (b[r] - s) / self.l[r * n + r];
        }
        for r in (0..k).rev() {
            let s: f64 = (r + 1..k).map(|q| self.l[q * n + r] * b[q]).sum();
            b[r] = (b[r] - s) / self.l[r * n + r];
        }
    }
}

/// Traces the solution of `min (1/2) a^T G a - c^T a + t 1^T a, a >= 0`
/// from the largest `t` with a nonzero solution down to `t_min`.
///
/// Along the path each active coefficient satisfies `(c - G a)_i = t`
/// and each inactive one `(c - G a)_j <= t`, so between events the active
/// coefficients are affine in `t`. An event is an inactive column whose
/// correlation reaches `t` or an active coefficient reaching zero. Segments
/// come out in descending `t`; an empty path means the solution is zero
/// for every `t >= t_min`. Returns `None` if an active Gram block fails to
/// factor or more than `max_events` events occur.
fn nonneg_path(gram: &DMatrix<f64>, c: &DVector<f64>, t_min: f64, max_events: usize) -> Option<Vec<Segment>> {
    let n = c.len();
    let mut path = Vec::new();
    let Some((first, mut t)) = c.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)) else {
        return Some(path);
    };
    if !(t > t_min) {
        return Some(path);
    }
    let mut active = vec![first];
    let mut is_active = vec![false; n];
    is_active[first] = true;
    let mut factor = ActiveFactor::new(n);
    factor.push(gram, &active)?;
    let mut just_dropped = None;
    // correlations c - G a at the current t
    let mut corr = c.clone();
    let mut w = DVector::zeros(n);

    for _ in 0..=max_events {
        let k = active.len();
        let mut u: Vec<f64> = active.iter().map(|&i| c[i]).collect();
        let mut v = vec![1.0; k];
        factor.solve(&mut u);
        factor.solve(&mut v);

        // d corr / dt along this segment
        w.fill(0.0);
        for (r, &i) in active.iter().enumerate() {
            w.axpy(v[r], &gram.column(i), 1.0);
        }

        enum Event {
            Enter(usize),
            Drop(usize),
        }
        let mut next = t_min;
        let mut event = None;
        for j in 0..n {
            if is_active[j] || just_dropped == Some(j) || w[j] >= 1.0 {
                continue;
            }
            let hit = ((corr[j] - t * w[j]) / (1.0 - w[j])).min(t);
            if hit > next {
                next = hit;
                event = Some(Event::Enter(j));
            }
        }
        for r in 0..k {
            if v[r] < 0.0 {
                let hit = (u[r] / v[r]).min(t);
                if hit > next {
                    next = hit;
                    event = Some(Event::Drop(r));
                }
            }
        }

        corr.axpy(next - t, &w, 1.0);
        path.push(Segment {
            upper: t,
            lower: next,
            active: active.clone(),
            u: DVector::from_vec(u),
            v: DVector::from_vec(v),
        });
        match event {
            None => return Some(path),
            Some(Event::Enter(j)) => {
                active.push(j);
                is_active[j] = true;
                just_dropped = None;
                factor.push(gram, &active)?;
            }
            Some(Event::Drop(r)) => {
                let i = active.remove(r);
                is_active[i] = false;
                just_dropped = Some(i);
                factor.rebuild(gram, &active)?;
            }
        }
        t = next;
    }
    None
}

/// Index of the segment of a descending path covering `t`; `None` when `t`
/// is at or above the start of the path, where the solution is zero.
fn segment_at(path: &[Segment], t: f64) -> Option<usize> {
    if path.first().is_none_or(|s| t >= s.upper) {
        return None;
    }
    Some(path.iter().position(|s| t >= s.lower).unwrap_or(path.len() - 1))
}

/// Minimizes the penalized objective in place. Nonnegative problems with a
/// definite Gram matrix are solved exactly along the homotopy path;
/// otherwise coordinate descent runs from the given coefficients.
pub(crate) fn solve_penalized(
    problem: &GramProblem,
    lambda: f64,
    config: &SolverConfig,
    coeffs: &mut [f64],
) -> Result<()> {
    if config.nonneg && problem.gram.definite {
        let t = problem.threshold(lambda);
        if let Some(path) = nonneg_path(&problem.gram.matrix, &problem.xty, t, config.max_iter) {
            match segment_at(&path, t) {
                Some(at) => path[at].write(t, coeffs),
                None => coeffs.fill(0.0),
            }
            return Ok(());
        }
        return solve_by_factor(problem, t, config, coeffs);
    }
    coordinate_descent(problem, lambda, config, coeffs, None).map(|_| ())
}

/// Exact fallback when the path fails: with `G = L L^T` the objective is,
/// up to a constant, `(1/2) ||L^{-1} (c - t 1) - L^T a||^2`, an NNLS
/// problem.
fn solve_by_factor(problem: &GramProblem, t: f64, config: &SolverConfig, coeffs: &mut [f64]) -> Result<()> {
    let l = Cholesky::new(problem.gram.matrix.clone()).expect("definite Gram matrix factors").unpack();
    let rhs = problem.xty.map(|v| v - t);
    let target = l.solve_lower_triangular(&rhs).expect("factor has a nonzero diagonal");
    let all: Vec<usize> = (0..coeffs.len()).collect();
    let exact = box_lsq(&l.transpose(), &target, &all, None, config.max_iter)?;
    coeffs.copy_from_slice(&exact.coeffs);
    Ok(())
}

/// Runs coordinate descent in place from the given starting coefficients.
/// Returns the number of sweeps. When `trace` is given, the iterate after
/// every sweep is appended to it.
pub(crate) fn coordinate_descent(
    problem: &GramProblem,
    lambda: f64,
    config: &SolverConfig,
    coeffs: &mut [f64],
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<usize> {
    let n = coeffs.len();
    let gram = &problem.gram.matrix;
    let threshold = problem.threshold(lambda);
    let a = DVector::from_column_slice(coeffs);
    let mut q = &problem.xty - gram * &a;

    let mut sweep = |indices: &mut dyn Iterator<Item = usize>, coeffs: &mut [f64]| -> f64 {
        let mut max_change = 0.0f64;
        for i in indices {
            let gii = gram[(i, i)];
            let old = coeffs[i];
            let new = if gii > 0.0 {
                let rho = q[i] + gii * old;
                if config.nonneg {
                    (rho - threshold).max(0.0) / gii
                } else {
                    rho.signum() * (rho.abs() - threshold).max(0.0) / gii
                }
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                q.axpy(-delta, &gram.column(i), 1.0);
                coeffs[i] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    };

    let mut sweeps = 0;
    let mut record = |coeffs: &[f64], sweeps: &mut usize| -> Result<()> {
        *sweeps += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(coeffs.to_vec());
        }
        if *sweeps > config.max_iter {
            return Err(Error::MaxIterationsExceeded { iterations: config.max_iter });
        }
        Ok(())
    };

    loop {
        let change = sweep(&mut (0..n), coeffs);
        record(coeffs, &mut sweeps)?;
        if change < config.tol {
            return Ok(sweeps);
        }
        // polish the current support before the next full pass
        loop {
            let active: Vec<usize> = (0..n).filter(|&i| coeffs[i] != 0.0).collect();
            if active.is_empty() {
                break;
            }
            let change = sweep(&mut active.into_iter(), coeffs);
            record(coeffs, &mut sweeps)?;
            if change < config.tol {
                break;
            }
        }
    }
}

pub(crate) fn lasso_dense(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let gram = Gram::new(design);
    let problem = GramProblem::new(&gram, design, target);
    let mut coeffs = vec![0.0; design.ncols()];
    solve_penalized(&problem, lambda, config, &mut coeffs)?;
    Ok(coeffs)
}

/// Nonnegative LASSO fit at a fixed penalty with default solver settings.
pub fn lasso_solve(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    lambda: f64,
) -> Result<AbundanceSolution> {
    lasso_solve_with(library, pixel, lambda, &SolverConfig::default())
}

pub fn lasso_solve_with(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    lambda: f64,
    config: &SolverConfig,
) -> Result<AbundanceSolution> {
    config.validate()?;
    check_lambda(lambda)?;
    library.check_pixel(pixel)?;
    let start = Instant::now();
    let y = pixel.to_vector();
    let coeffs = lasso_dense(library.matrix(), &y, lambda, config)?;
    Ok(AbundanceSolution::from_dense(
        library.matrix(),
        &y,
        &coeffs,
        None,
        RmseUnits::Reflectance,
        config.nonneg,
    )
    .with_runtime(start.elapsed().as_secs_f64()))
}

/// The LASSO objective of `coeffs` (dense, length `N`) for a pixel.
pub fn lasso_objective(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    coeffs: &[f64],
    lambda: f64,
) -> Result<f64> {
    library.check_pixel(pixel)?;
    if coeffs.len() != library.len() {
        return Err(Error::DimensionMismatch { expected: library.len(), found: coeffs.len() });
    }
    Ok(objective(library.matrix(), &pixel.to_vector(), coeffs, lambda))
}

/// Evaluated from the residual rather than the Gram expansion, which loses
/// digits to cancellation near the optimum.
fn objective(design: &DMatrix<f64>, target: &DVector<f64>, coeffs: &[f64], lambda: f64) -> f64 {
    let residual = target - design * DVector::from_column_slice(coeffs);
    residual.norm_squared() / design.nrows() as f64 + lambda * coeffs.iter().map(|v| v.abs()).sum::<f64>()
}

/// Objective values after each coordinate-descent sweep of a cold-start
/// fit.
pub fn lasso_sweep_objectives(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    lambda: f64,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    library.check_pixel(pixel)?;
    let gram = Gram::new(library.matrix());
    let problem = GramProblem::new(&gram, library.matrix(), &pixel.to_vector());
    let mut coeffs = vec![0.0; library.len()];
    let mut trace = vec![coeffs.clone()];
    coordinate_descent(&problem, lambda, config, &mut coeffs, Some(&mut trace))?;
    let target = pixel.to_vector();
    Ok(trace.iter().map(|a| objective(library.matrix(), &target, a, lambda)).collect())
}

/// Smallest penalty at which the nonnegative LASSO solution is empty:
/// `max_i (2/M) s_i^T y`.
pub fn lambda_max(library: &SpectralLibrary, pixel: &PixelSpectrum) -> Result<f64> {
    library.check_pixel(pixel)?;
    let xty = library.matrix().tr_mul(&pixel.to_vector());
    Ok(xty.iter().copied().fold(0.0, f64::max) * 2.0 / library.bands() as f64)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("lambda must be finite and nonnegative, got {lambda}")))
    }
}

/// Mean held-out squared error for one penalty value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvPoint {
    pub lambda: f64,
    pub error: f64,
}

/// Band folds: a seeded shuffle of band indices cut into `folds`
/// contiguous chunks whose sizes differ by at most one.
pub(crate) fn band_folds(bands: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..bands).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = bands / folds;
    let extra = bands % folds;
    let mut out = Vec::with_capacity(folds);
    let mut at = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[at..at + len].to_vec());
        at += len;
    }
    out
}

/// One cross-validation fold: the held-out rows of the design and the
/// Gram matrix of the remaining rows.
#[derive(Debug, Clone)]
struct Fold {
    held_out: Vec<usize>,
    held_design: DMatrix<f64>,
    train_bands: usize,
    gram: Gram,
}

/// Design-only work for cross-validated fits, shared by every target
/// fitted against the same design and configuration.
#[derive(Debug, Clone)]
pub(crate) struct CvDesign {
    design: DMatrix<f64>,
    config: LassoConfig,
    grid: Vec<f64>,
    gram: Gram,
    folds: Vec<Fold>,
}

impl CvDesign {
    pub(crate) fn new(design: DMatrix<f64>, config: &LassoConfig) -> Result<Self> {
        config.validate()?;
        let bands = design.nrows();
        if bands < config.folds {
            return Err(Error::TooFewBands { bands, folds: config.folds });
        }
        let folds = band_folds(bands, config.folds, config.seed)
            .into_iter()
            .map(|held_out| {
                let mut is_held = vec![false; bands];
                held_out.iter().for_each(|&b| is_held[b] = true);
                let train: Vec<usize> = (0..bands).filter(|&b| !is_held[b]).collect();
                Fold {
                    held_design: design.select_rows(&held_out),
                    gram: Gram::new(&design.select_rows(&train)),
                    train_bands: train.len(),
                    held_out,
                }
            })
            .collect();
        Ok(CvDesign { gram: Gram::new(&design), grid: config.grid(), config: config.clone(), design, folds })
    }

    /// Cross-validation curve over the grid, in ascending penalty order.
    pub(crate) fn curve(&self, target: &DVector<f64>) -> Result<Vec<CvPoint>> {
        self.curve_from(target, &self.design.tr_mul(target))
    }

    /// As [`CvDesign::curve`], given `S^T y` for the full design.
    fn curve_from(&self, target: &DVector<f64>, xty: &DVector<f64>) -> Result<Vec<CvPoint>> {
        let mut totals = vec![0.0; self.grid.len()];
        for fold in &self.folds {
            let test_y =
                DVector::from_iterator(fold.held_out.len(), fold.held_out.iter().map(|&b| target[b]));
            // training products by removing the held-out rows
            let problem = GramProblem {
                gram: &fold.gram,
                xty: xty - fold.held_design.tr_mul(&test_y),
                bands: fold.train_bands,
            };
            let errors = self.fold_errors(fold, &problem, &test_y)?;
            for (total, e) in totals.iter_mut().zip(errors) {
                *total += e;
            }
        }
        let k = self.folds.len() as f64;
        Ok(self
            .grid
            .iter()
            .zip(totals)
            .map(|(&lambda, total)| CvPoint { lambda, error: total / k })
            .collect())
    }

    /// Mean squared held-out error at every grid penalty for one fold.
    fn fold_errors(&self, fold: &Fold, problem: &GramProblem, test_y: &DVector<f64>) -> Result<Vec<f64>> {
        let held = test_y.len() as f64;
        let solver = &self.config.solver;
        if solver.nonneg && fold.gram.definite {
            let t_min = problem.threshold(self.grid[0]);
            if let Some(path) = nonneg_path(&fold.gram.matrix, &problem.xty, t_min, solver.max_iter) {
                // predictions are affine in t within a segment: p = pu - t pv
                let mut cached: Option<(usize, DVector<f64>, DVector<f64>)> = None;
                let mut errors = Vec::with_capacity(self.grid.len());
                for &lambda in &self.grid {
                    let t = problem.threshold(lambda);
                    let Some(at) = segment_at(&path, t) else {
                        errors.push(test_y.norm_squared() / held);
                        continue;
                    };
                    if cached.as_ref().is_none_or(|(c, _, _)| *c != at) {
                        let segment = &path[at];
                        let cols = fold.held_design.select_columns(&segment.active);
                        cached = Some((at, &cols * &segment.u, &cols * &segment.v));
                    }
                    let (_, pu, pv) = cached.as_ref().expect("just cached");
                    let sse: f64 = (0..test_y.len()).map(|b| (test_y[b] - pu[b] + t * pv[b]).powi(2)).sum();
                    errors.push(sse / held);
                }
                return Ok(errors);
            }
        }
        // path from the largest penalty down, warm-starting each fit
        let mut coeffs = vec![0.0; self.design.ncols()];
        let mut errors = vec![0.0; self.grid.len()];
        for (gi, &lambda) in self.grid.iter().enumerate().rev() {
            solve_penalized(problem, lambda, solver, &mut coeffs)?;
            let pred = &fold.held_design * DVector::from_column_slice(&coeffs);
            errors[gi] = (test_y - pred).norm_squared() / held;
        }
        Ok(errors)
    }

    /// Chooses the penalty and refits on all bands.
    pub(crate) fn fit(&self, target: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
        let problem = GramProblem::new(&self.gram, &self.design, target);
        let lambda = best_lambda(&self.curve_from(target, &problem.xty)?);
        let mut coeffs = vec![0.0; self.design.ncols()];
        solve_penalized(&problem, lambda, &self.config.solver, &mut coeffs)?;
        Ok((lambda, coeffs))
    }
}

/// Picks the penalty with the smallest error; ties go to the larger
/// penalty.
pub(crate) fn best_lambda(curve: &[CvPoint]) -> f64 {
    let mut best = curve[curve.len() - 1];
    for p in curve.iter().rev() {
        if p.error < best.error {
            best = *p;
        }
    }
    best.lambda
}

pub(crate) fn lasso_cv_dense(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    config: &LassoConfig,
) -> Result<(f64, Vec<f64>)> {
    CvDesign::new(design.clone(), config)?.fit(target)
}

/// Library-only work of [`lasso_cv`] (Gram matrices and fold splits),
/// computed once and reused for every pixel unmixed against the library.
/// Fits are identical to calling [`lasso_cv`] per pixel.
#[derive(Debug, Clone)]
pub struct LassoCvPlan<'a> {
    library: &'a SpectralLibrary,
    core: CvDesign,
}

impl<'a> LassoCvPlan<'a> {
    pub fn new(library: &'a SpectralLibrary, config: &LassoConfig) -> Result<Self> {
        Ok(LassoCvPlan { library, core: CvDesign::new(library.matrix().clone(), config)? })
    }

    pub fn config(&self) -> &LassoConfig {
        &self.core.config
    }

    /// Chooses the penalty for one pixel and refits on all bands.
    pub fn fit(&self, pixel: &PixelSpectrum) -> Result<(f64, AbundanceSolution)> {
        self.library.check_pixel(pixel)?;
        let start = Instant::now();
        let y = pixel.to_vector();
        let (lambda, coeffs) = self.core.fit(&y)?;
        let solution = AbundanceSolution::from_dense(
            self.library.matrix(),
            &y,
            &coeffs,
            None,
            RmseUnits::Reflectance,
            self.core.config.solver.nonneg,
        )
        .with_runtime(start.elapsed().as_secs_f64());
        Ok((lambda, solution))
    }

    /// The cross-validation curve for one pixel, ascending in penalty.
    pub fn curve(&self, pixel: &PixelSpectrum) -> Result<Vec<CvPoint>> {
        self.library.check_pixel(pixel)?;
        self.core.curve(&pixel.to_vector())
    }
}

/// Chooses the penalty by k-fold cross-validation over spectral bands, then
/// refits on all bands. Returns the chosen penalty and the final solution.
pub fn lasso_cv(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &LassoConfig,
) -> Result<(f64, AbundanceSolution)> {
    library.check_pixel(pixel)?;
    let start = Instant::now();
    let (lambda, solution) = LassoCvPlan::new(library, config)?.fit(pixel)?;
    Ok((lambda, solution.with_runtime(start.elapsed().as_secs_f64())))
}

/// The full cross-validation curve, ascending in penalty.
pub fn lasso_cv_curve(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &LassoConfig,
) -> Result<Vec<CvPoint>> {
    LassoCvPlan::new(library, config)?.curve(pixel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::nnls_solve;

    fn identity_lib() -> SpectralLibrary {
        SpectralLibrary::unlabeled(DMatrix::identity(2, 2)).unwrap()
    }

    /// Brute-force minimizer of a 2-D objective over a fine grid followed by
    /// local refinement.
    fn grid_argmin(f: impl Fn(f64, f64) -> f64, hi: f64) -> (f64, f64) {
        let mut best = (0.0, 0.0, f64::INFINITY);
        let mut step = hi / 200.0;
        let (mut lo0, mut lo1, mut span) = (0.0, 0.0, hi);
        for _ in 0..6 {
            let n = (span / step).round() as usize;
            for i in 0..=n {
                for j in 0..=n {
                    let (a, b) = (lo0 + i as f64 * step, lo1 + j as f64 * step);
                    let v = f(a, b);
                    if v < best.2 {
                        best = (a, b, v);
                    }
                }
            }
            span = 4.0 * step;
            lo0 = (best.0 - 2.0 * step).max(0.0);
            lo1 = (best.1 - 2.0 * step).max(0.0);
            step /= 20.0;
        }
        (best.0, best.1)
    }

    #[test]
    fn identity_soft_threshold() {
        let lib = identity_lib();
        let y = lib.pixel(vec![0.3, 0.7]).unwrap();
        let sol = lasso_solve(&lib, &y, 0.1).unwrap();
        assert!((sol.abundance(0) - 0.2).abs() < 1e-12);
        assert!((sol.abundance(1) - 0.6).abs() < 1e-12);

        let objective = |a: f64, b: f64| ((0.3 - a).powi(2) + (0.7 - b).powi(2)) / 2.0 + 0.1 * (a + b);
        let (a, b) = grid_argmin(objective, 1.0);
        assert!((a - 0.2).abs() < 1e-6 && (b - 0.6).abs() < 1e-6);
    }

    #[test]
    fn zero_penalty_matches_nnls() {
        let s =
            DMatrix::from_column_slice(4, 3, &[0.2, 0.4, 0.5, 0.1, 0.6, 0.1, 0.3, 0.2, 0.1, 0.1, 0.7, 0.4]);
        let lib = SpectralLibrary::unlabeled(s).unwrap();
        let y = lib.pixel(vec![0.5, 0.3, 0.2, 0.9]).unwrap();
        let nnls = nnls_solve(&lib, &y).unwrap();
        let cd = lasso_solve(&lib, &y, 0.0).unwrap();
        for i in 0..3 {
            assert!((nnls.abundance(i) - cd.abundance(i)).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_model_above_lambda_max() {
        let s = DMatrix::from_column_slice(3, 2, &[0.2, 0.4, 0.5, 0.6, 0.1, 0.3]);
        let lib = SpectralLibrary::unlabeled(s.clone()).unwrap();
        let y = lib.pixel(vec![0.3, 0.3, 0.4]).unwrap();
        let lmax = lambda_max(&lib, &y).unwrap();
        // subgradient oracle: a = 0 is optimal iff (2/M) s_i^T y <= lambda for all i
        let oracle = (0..2).map(|i| 2.0 / 3.0 * s.column(i).dot(&y.to_vector())).fold(0.0, f64::max);
        assert!((lmax - oracle).abs() < 1e-15);
        assert!(lasso_solve(&lib, &y, lmax).unwrap().coefficients().is_empty());
        assert!(lasso_solve(&lib, &y, 10.0 * lmax).unwrap().coefficients().is_empty());
        assert!(!lasso_solve(&lib, &y, 0.9 * lmax).unwrap().coefficients().is_empty());
    }

    #[test]
    fn signed_variant_allows_negative() {
        let s = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let lib = SpectralLibrary::unlabeled(s).unwrap();
        let y = lib.pixel(vec![0.0, 1.0]).unwrap();
        let cfg = SolverConfig { nonneg: false, ..Default::default() };
        let sol = lasso_solve_with(&lib, &y, 0.0, &cfg).unwrap();
        assert!((sol.abundance(1) + 1.0).abs() < 1e-6);
        assert!(!sol.is_constrained());
    }

    #[test]
    fn grid_defaults() {
        let g = LassoConfig::default().grid();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 0.001);
        assert!((g[99] - 0.1).abs() < 1e-15);
        let single = LassoConfig { grid_start: 0.05, grid_stop: 0.05, ..Default::default() };
        assert_eq!(single.grid(), vec![0.05]);
    }

    #[test]
    fn folds_partition_bands() {
        let folds = band_folds(13, 5, 42);
        assert_eq!(folds.len(), 5);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2, 2]);
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..13).collect::<Vec<_>>());
        assert_eq!(folds, band_folds(13, 5, 42));
        assert_ne!(folds, band_folds(13, 5, 43));
    }

    #[test]
    fn tie_goes_to_larger_lambda() {
        let curve = [
            CvPoint { lambda: 0.01, error: 0.5 },
            CvPoint { lambda: 0.02, error: 0.25 },
            CvPoint { lambda: 0.03, error: 0.25 },
            CvPoint { lambda: 0.04, error: 0.75 },
        ];
        assert_eq!(best_lambda(&curve), 0.03);
    }

    #[test]
    fn single_point_grid_equals_fixed_fit() {
        let s = DMatrix::from_fn(12, 3, |r, c| ((r * 7 + c * 3) % 5) as f64 / 5.0 + 0.1);
        let lib = SpectralLibrary::unlabeled(s).unwrap();
        let y = lib.pixel((0..12).map(|r| 0.1 + (r % 3) as f64 * 0.2).collect()).unwrap();
        let cfg = LassoConfig { grid_start: 0.004, grid_stop: 0.004, ..Default::default() };
        let (lambda, cv) = lasso_cv(&lib, &y, &cfg).unwrap();
        let fixed = lasso_solve(&lib, &y, 0.004).unwrap();
        assert_eq!(lambda, 0.004);
        assert_eq!(cv.coefficients(), fixed.coefficients());
    }

    #[test]
    fn too_few_bands() {
        let lib = identity_lib();
        let y = lib.pixel(vec![0.3, 0.7]).unwrap();
        assert!(matches!(
            lasso_cv(&lib, &y, &LassoConfig::default()),
            Err(Error::TooFewBands { bands: 2, folds: 5 })
        ));
    }

    #[test]
    fn invalid_configs() {
        let bad = LassoConfig { folds: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LassoConfig { grid_start: 0.2, ..Default::default() };
        assert!(bad.validate().is_err());
        let lib = identity_lib();
        let y = lib.pixel(vec![0.3, 0.7]).unwrap();
        assert!(lasso_solve(&lib, &y, -1.0).is_err());
    }

    fn random_problem(seed: u64, bands: usize, spectra: usize) -> (DMatrix<f64>, DVector<f64>) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = DMatrix::from_fn(bands, spectra, |_, _| rng.random_range(0.0..1.0));
        let y = DVector::from_fn(bands, |_, _| rng.random_range(0.0..2.0));
        (s, y)
    }

    #[test]
    fn path_matches_factored_nnls() {
        let config = SolverConfig::default();
        for seed in 0..40 {
            let (s, y) = random_problem(seed, 30, 12);
            let gram = Gram::new(&s);
            assert!(gram.definite);
            let problem = GramProblem::new(&gram, &s, &y);
            for lambda in [0.0, 0.001, 0.01, 0.05, 0.2] {
                let mut path = vec![0.0; 12];
                solve_penalized(&problem, lambda, &config, &mut path).unwrap();
                let mut exact = vec![0.0; 12];
                solve_by_factor(&problem, problem.threshold(lambda), &config, &mut exact).unwrap();
                for (a, b) in path.iter().zip(&exact) {
                    assert!((a - b).abs() < 1e-8, "seed {seed} lambda {lambda}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn path_solutions_satisfy_kkt() {
        for seed in 0..40 {
            let (s, y) = random_problem(100 + seed, 25, 15);
            let gram = Gram::new(&s);
            let c = s.tr_mul(&y);
            let path = nonneg_path(&gram.matrix, &c, 0.05, 10_000).unwrap();
            for seg in &path {
                for t in [seg.upper, (seg.upper + seg.lower) / 2.0, seg.lower] {
                    let mut a = vec![0.0; 15];
                    seg.write(t, &mut a);
                    let corr = &c - &gram.matrix * DVector::from_column_slice(&a);
                    for i in 0..15 {
                        assert!(a[i] >= 0.0);
                        if a[i] > 0.0 {
                            assert!((corr[i] - t).abs() < 1e-8 * t.max(1.0));
                        } else {
                            assert!(corr[i] <= t + 1e-8 * t.max(1.0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cv_curve_matches_pointwise_fits() {
        let (s, y) = random_problem(7, 40, 8);
        let config =
            LassoConfig { grid_start: 0.002, grid_stop: 0.05, grid_step: 0.002, ..Default::default() };
        let curve = CvDesign::new(s.clone(), &config).unwrap().curve(&y).unwrap();
        let folds = band_folds(40, 5, 0);
        for point in &curve {
            let mut total = 0.0;
            for held in &folds {
                let train: Vec<usize> = (0..40).filter(|b| !held.contains(b)).collect();
                let train_y = DVector::from_iterator(train.len(), train.iter().map(|&b| y[b]));
                let a = lasso_dense(&s.select_rows(&train), &train_y, point.lambda, &config.solver).unwrap();
                let pred = s.select_rows(held) * DVector::from_vec(a);
                let test_y = DVector::from_iterator(held.len(), held.iter().map(|&b| y[b]));
                total += (test_y - pred).norm_squared() / held.len() as f64;
            }
            assert!((point.error - total / 5.0).abs() < 1e-12, "{point:?}");
        }
    }

    #[test]
    fn coordinate_descent_agrees_with_path() {
        let (s, y) = random_problem(3, 30, 6);
        let gram = Gram::new(&s);
        let problem = GramProblem::new(&gram, &s, &y);
        let config = SolverConfig { tol: 1e-13, max_iter: 1_000_000, ..Default::default() };
        let mut exact = vec![0.0; 6];
        solve_penalized(&problem, 0.01, &config, &mut exact).unwrap();
        let mut cd = vec![0.0; 6];
        coordinate_descent(&problem, 0.01, &config, &mut cd, None).unwrap();
        for (a, b) in exact.iter().zip(&cd) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn plan_reuse_matches_single_fits() {
        let (s, _) = random_problem(11, 30, 6);
        let lib = SpectralLibrary::unlabeled(s).unwrap();
        let config = LassoConfig::default();
        let plan = LassoCvPlan::new(&lib, &config).unwrap();
        for seed in 0..5 {
            let (_, y) = random_problem(50 + seed, 30, 6);
            let pixel = lib.pixel(y.iter().copied().collect()).unwrap();
            let (l1, a1) = plan.fit(&pixel).unwrap();
            let (l2, a2) = lasso_cv(&lib, &pixel, &config).unwrap();
            assert_eq!(l1, l2);
            assert_eq!(a1.coefficients(), a2.coefficients());
        }
    }
}
