//! Cardinality-constrained least squares by branch and bound.
//!
//! Solves
//!
//! ```text
//! minimize    Z = sqrt( (1/M) * sum_j (y_j - sum_i a_i s_ij)^2 )
//! subject to  0 <= a_i <= B_i x_i,   x_i in {0, 1},   sum_i x_i <= P  (or >= P)
//! ```
//!
//! The search works on the sum of squared residuals, which has the same
//! minimizers as `Z`. Each node fixes some inclusion variables to 1 and some
//! to 0; its lower bound is the box-constrained least squares fit over every
//! spectrum not fixed to 0, ignoring the cardinality limit. A node whose
//! relaxed fit already uses at most `P` spectra is solved exactly.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::abundance::{AbundanceSolution, RmseUnits};
use crate::error::{Error, Result};
use crate::solvers::active_set::box_lsq;
use crate::spectra::{PixelSpectrum, SpectralLibrary};

/// Abundance cap used when none is given. Caps above 1 leave room for
/// materials that appear brighter than their library spectrum.
pub const DEFAULT_ABUNDANCE_CAP: f64 = 5.0;

/// Model size used when none is given: room for a typical sparse-regression
/// support while still binding below the nonnegative least squares
/// support, which is usually larger on noisy pixels.
pub const DEFAULT_MODEL_SIZE: usize = 10;

/// Nodes whose bound is within this relative distance of the incumbent are
/// pruned.
const PRUNE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CardinalitySense {
    /// `sum x_i <= P`
    #[default]
    AtMost,
    /// `sum x_i >= P`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinlpConfig {
    /// Model size parameter `P`.
    pub p: usize,
    pub cardinality_sense: CardinalitySense,
    /// Per-spectrum caps `B_i`; `None` means [`DEFAULT_ABUNDANCE_CAP`] for
    /// every spectrum.
    pub abundance_caps: Option<Vec<f64>>,
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Relative optimality gap (on `Z`) at which the search may stop.
    pub gap_tol: f64,
}

impl Default for MinlpConfig {
    fn default() -> Self {
        MinlpConfig {
            p: DEFAULT_MODEL_SIZE,
            cardinality_sense: CardinalitySense::AtMost,
            abundance_caps: None,
            time_limit: 60.0,
            gap_tol: 0.0,
        }
    }
}

impl MinlpConfig {
    pub fn with_p(p: usize) -> Self {
        MinlpConfig { p, ..Default::default() }
    }

    fn validate(&self, spectra: usize) -> Result<Vec<f64>> {
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if self.p > spectra {
            return match self.cardinality_sense {
                CardinalitySense::AtLeast => Err(Error::Infeasible(format!(
                    "at least {} spectra requested from a library of {spectra}",
                    self.p
                ))),
                CardinalitySense::AtMost => {
                    Err(Error::InvalidConfig(format!("p = {} exceeds the library size {spectra}", self.p)))
                }
            };
        }
        if !(self.time_limit > 0.0) {
            return Err(Error::InvalidConfig("time_limit must be positive".into()));
        }
        if !(self.gap_tol >= 0.0) {
            return Err(Error::InvalidConfig("gap_tol must be nonnegative".into()));
        }
        let caps = match &self.abundance_caps {
            Some(caps) => {
                if caps.len() != spectra {
                    return Err(Error::DimensionMismatch { expected: spectra, found: caps.len() });
                }
                caps.clone()
            }
            None => vec![DEFAULT_ABUNDANCE_CAP; spectra],
        };
        if let Some(c) = caps.iter().find(|c| !(**c > 0.0)) {
            return Err(Error::InvalidConfig(format!("abundance caps must be positive, got {c}")));
        }
        Ok(caps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinlpResult {
    pub solution: AbundanceSolution,
    /// The RMSE objective `Z` of `solution`.
    pub objective: f64,
    pub proven_optimal: bool,
    pub nodes_explored: usize,
    /// Relative gap between `objective` and the best remaining lower bound.
    pub gap: f64,
    /// Spectra with `x_i = 1`. Equals the solution support except under
    /// `AtLeast`, where zero-abundance spectra may be included to meet `P`.
    pub included: Vec<usize>,
}

/// A node evaluated during the search, for auditing bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub fixed_in: Vec<usize>,
    pub excluded: Vec<usize>,
    /// Lower bound on the sum of squared residuals of any completion.
    pub bound_ssr: f64,
}

pub fn minlp_unmix(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &MinlpConfig,
) -> Result<MinlpResult> {
    solve(library, pixel, config, None)
}

/// Like [`minlp_unmix`], also returning every node bound computed.
pub fn minlp_unmix_audited(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &MinlpConfig,
) -> Result<(MinlpResult, Vec<NodeRecord>)> {
    let mut log = Vec::new();
    let result = solve(library, pixel, config, Some(&mut log))?;
    Ok((result, log))
}

struct Node {
    fixed_in: Vec<usize>,
    excluded: Vec<bool>,
    bound: f64,
    relaxed: Vec<f64>,
}

struct Search<'a> {
    design: &'a DMatrix<f64>,
    target: &'a DVector<f64>,
    caps: Vec<f64>,
    p: usize,
    inner_iter: usize,
    log: Option<&'a mut Vec<NodeRecord>>,
}

impl Search<'_> {
    /// Box-constrained least squares over `columns`; returns coefficients
    /// and SSR.
    fn fit(&self, columns: &[usize]) -> Result<(Vec<f64>, f64)> {
        let out = box_lsq(self.design, self.target, columns, Some(&self.caps), self.inner_iter)?;
        let mut r = self.target.clone();
        for &i in columns {
            if out.coeffs[i] != 0.0 {
                r.axpy(-out.coeffs[i], &self.design.column(i), 1.0);
            }
        }
        Ok((out.coeffs, r.norm_squared()))
    }

    fn relax(&mut self, fixed_in: Vec<usize>, excluded: Vec<bool>) -> Result<Node> {
        let allowed: Vec<usize> = (0..excluded.len()).filter(|&i| !excluded[i]).collect();
        let (relaxed, bound) = self.fit(&allowed)?;
        self.record(&fixed_in, &excluded, bound);
        Ok(Node { fixed_in, excluded, bound, relaxed })
    }

    fn record(&mut self, fixed_in: &[usize], excluded: &[bool], bound: f64) {
        if let Some(log) = self.log.as_deref_mut() {
            log.push(NodeRecord {
                fixed_in: fixed_in.to_vec(),
                excluded: (0..excluded.len()).filter(|&i| excluded[i]).collect(),
                bound_ssr: bound,
            });
        }
    }
}

struct Incumbent {
    coeffs: Vec<f64>,
    ssr: f64,
}

impl Incumbent {
    fn offer(&mut self, coeffs: &[f64], ssr: f64) {
        if ssr < self.ssr {
            self.ssr = ssr;
            self.coeffs = coeffs.to_vec();
        }
    }
}

fn support(coeffs: &[f64]) -> Vec<usize> {
    (0..coeffs.len()).filter(|&i| coeffs[i] > 0.0).collect()
}

fn solve(
    library: &SpectralLibrary,
    pixel: &PixelSpectrum,
    config: &MinlpConfig,
    log: Option<&mut Vec<NodeRecord>>,
) -> Result<MinlpResult> {
    library.check_pixel(pixel)?;
    let n = library.len();
    let caps = config.validate(n)?;
    let start = Instant::now();
    let deadline = Duration::from_secs_f64(config.time_limit);
    let target = pixel.to_vector();
    let mut search =
        Search { design: library.matrix(), target: &target, caps, p: config.p, inner_iter: 3 * n + 10, log };

    let root = search.relax(Vec::new(), vec![false; n])?;
    let mut nodes_explored = 1;

    if config.cardinality_sense == CardinalitySense::AtLeast {
        // Extra x_i = 1 with a_i = 0 is always feasible, so the relaxation is
        // the optimum.
        let mut included = support(&root.relaxed);
        for i in 0..n {
            if included.len() >= config.p {
                break;
            }
            if root.relaxed[i] <= 0.0 {
                included.push(i);
            }
        }
        included.sort_unstable();
        return Ok(finish(library, &target, &root.relaxed, included, true, 0.0, nodes_explored, start));
    }

    // warm start: keep the p largest relaxed abundances
    let mut ranked = support(&root.relaxed);
    ranked.sort_by(|&a, &b| root.relaxed[b].total_cmp(&root.relaxed[a]).then(a.cmp(&b)));
    ranked.truncate(config.p);
    let (coeffs, ssr) = search.fit(&ranked)?;
    let mut incumbent = Incumbent { coeffs, ssr };

    let shrink = (1.0 - config.gap_tol).max(0.0).powi(2);
    let threshold = |inc: f64| inc * shrink * (1.0 - PRUNE_RTOL);
    let mut gap_pruned_min = f64::INFINITY;
    let mut stack = vec![root];
    let mut timed_out = false;

    while let Some(node) = stack.pop() {
        if start.elapsed() >= deadline {
            stack.push(node);
            timed_out = true;
            break;
        }
        if node.bound >= threshold(incumbent.ssr) {
            if node.bound < incumbent.ssr {
                gap_pruned_min = gap_pruned_min.min(node.bound);
            }
            continue;
        }
        let relaxed_support = support(&node.relaxed);
        if relaxed_support.len() <= search.p {
            incumbent.offer(&node.relaxed, node.bound);
            continue;
        }

        // branch on the free spectrum with the largest relaxed abundance
        let is_fixed = |i: usize| node.fixed_in.contains(&i);
        let branch = relaxed_support
            .iter()
            .copied()
            .filter(|&i| !is_fixed(i))
            .max_by(|&a, &b| node.relaxed[a].total_cmp(&node.relaxed[b]).then(b.cmp(&a)))
            .expect("support larger than p has a free member");

        let mut excluded = node.excluded.clone();
        excluded[branch] = true;
        let out_child = search.relax(node.fixed_in.clone(), excluded)?;
        nodes_explored += 1;

        let mut fixed_in = node.fixed_in.clone();
        fixed_in.push(branch);
        let in_child = if fixed_in.len() == search.p {
            // every other spectrum is forced out: exact leaf
            let (coeffs, ssr) = search.fit(&fixed_in)?;
            let mut forced_out = vec![true; n];
            fixed_in.iter().for_each(|&i| forced_out[i] = false);
            search.record(&fixed_in, &forced_out, ssr);
            nodes_explored += 1;
            incumbent.offer(&coeffs, ssr);
            None
        } else {
            Some(Node { fixed_in, excluded: node.excluded, bound: node.bound, relaxed: node.relaxed })
        };

        // depth first; the child with the better bound is explored first
        match in_child {
            Some(in_child) if in_child.bound <= out_child.bound => {
                stack.push(out_child);
                stack.push(in_child);
            }
            Some(in_child) => {
                stack.push(in_child);
                stack.push(out_child);
            }
            None => stack.push(out_child),
        }
    }

    let bands = library.bands() as f64;
    let z = |ssr: f64| (ssr.max(0.0) / bands).sqrt();
    let lower = if timed_out {
        stack.iter().map(|n| n.bound).fold(incumbent.ssr, f64::min)
    } else {
        gap_pruned_min.min(incumbent.ssr)
    };
    let z_inc = z(incumbent.ssr);
    let gap = if z_inc > 0.0 { ((z_inc - z(lower)) / z_inc).max(0.0) } else { 0.0 };
    let proven = !timed_out && gap == 0.0;
    let included = support(&incumbent.coeffs);
    Ok(finish(
        library,
        &target,
        &incumbent.coeffs,
        included,
        proven,
        if proven { 0.0 } else { gap },
        nodes_explored,
        start,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    library: &SpectralLibrary,
    target: &DVector<f64>,
    coeffs: &[f64],
    included: Vec<usize>,
    proven_optimal: bool,
    gap: f64,
    nodes_explored: usize,
    start: Instant,
) -> MinlpResult {
    let solution =
        AbundanceSolution::from_dense(library.matrix(), target, coeffs, None, RmseUnits::Reflectance, true)
            .with_runtime(start.elapsed().as_secs_f64());
    MinlpResult { objective: solution.rmse(), solution, proven_optimal, nodes_explored, gap, included }
}
