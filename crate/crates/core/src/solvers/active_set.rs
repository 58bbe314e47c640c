//! Lawson–Hanson active-set least squares with optional upper bounds.
//!
//! Minimizes `||y - S a||^2` over the allowed columns subject to
//! `0 <= a_i <= u_i`. With no upper bounds this is the classic NNLS
//! algorithm; with bounds it is the bounded-variable extension where a
//! variable may also rest at its cap.

use nalgebra::{DMatrix, DVector};

use super::lsq::lstsq_columns;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// Output of [`box_lsq`]: dense coefficients over all columns of the design
/// (zero outside the allowed set).
#[derive(Debug, Clone)]
pub(crate) struct BoxLsq {
    pub coeffs: Vec<f64>,
}

/// Gradient threshold used for KKT termination, relative to
/// `max_i ||s_i|| * ||y||`.
const KKT_RTOL: f64 = 1e-12;

pub(crate) fn box_lsq(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    allowed: &[usize],
    upper: Option<&[f64]>,
    max_iter: usize,
) -> Result<BoxLsq> {
    let n = design.ncols();
    let mut coeffs = vec![0.0; n];
    let cap = |i: usize| upper.map_or(f64::INFINITY, |u| u[i]);

    let col_scale = allowed.iter().map(|&i| design.column(i).norm()).fold(0.0f64, f64::max);
    let kkt_tol = KKT_RTOL * col_scale * target.norm();
    if kkt_tol == 0.0 {
        // zero target or all-zero columns: a = 0 is optimal
        return Ok(BoxLsq { coeffs });
    }

    let mut state = vec![Bound::Lower; n];
    let mut blocked = vec![false; n];
    let mut iterations = 0;

    loop {
        let residual = residual_of(design, target, &coeffs);
        let mut entering: Option<(usize, f64)> = None;
        for &i in allowed {
            if state[i] == Bound::Free || blocked[i] {
                continue;
            }
            let w = design.column(i).dot(&residual);
            let violation = match state[i] {
                Bound::Lower if w > kkt_tol => w,
                Bound::Upper if w < -kkt_tol => -w,
                _ => continue,
            };
            if entering.is_none_or(|(_, best)| violation > best) {
                entering = Some((i, violation));
            }
        }
        let Some((j, _)) = entering else { break };

        iterations += 1;
        if iterations > max_iter {
            return Err(Error::MaxIterationsExceeded { iterations: max_iter });
        }

        let came_from = state[j];
        state[j] = Bound::Free;
        let mut first = true;
        loop {
            let free: Vec<usize> = allowed.iter().copied().filter(|&i| state[i] == Bound::Free).collect();
            let mut rhs = target.clone();
            for &i in allowed {
                if state[i] == Bound::Upper {
                    rhs.axpy(-coeffs[i], &design.column(i), 1.0);
                }
            }
            let z = match lstsq_columns(design, &free, &rhs) {
                Some(z) => z,
                None if first => {
                    // the entering column is dependent on the free set
                    state[j] = came_from;
                    blocked[j] = true;
                    break;
                }
                None => unreachable!("dropping columns cannot create rank deficiency"),
            };
            if first {
                let pos = free.iter().position(|&i| i == j).unwrap();
                let wrong_side = match came_from {
                    Bound::Lower => z[pos] <= 0.0,
                    _ => z[pos] >= cap(j),
                };
                if wrong_side {
                    // rounding put the entering variable back on its bound
                    state[j] = came_from;
                    blocked[j] = true;
                    break;
                }
                first = false;
            }

            let feasible = free.iter().zip(z.iter()).all(|(&i, &zi)| zi > 0.0 && zi < cap(i));
            if feasible {
                for (&i, &zi) in free.iter().zip(z.iter()) {
                    coeffs[i] = zi;
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }

            // step toward z until the first free variable reaches a bound
            let mut alpha = f64::INFINITY;
            let mut hit = None;
            for (&i, &zi) in free.iter().zip(z.iter()) {
                let ai = coeffs[i];
                let (step, bound) = if zi <= 0.0 {
                    (ai / (ai - zi), Bound::Lower)
                } else if zi >= cap(i) {
                    ((cap(i) - ai) / (zi - ai), Bound::Upper)
                } else {
                    continue;
                };
                if step < alpha {
                    alpha = step;
                    hit = Some((i, bound));
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (&i, &zi) in free.iter().zip(z.iter()) {
                coeffs[i] += alpha * (zi - coeffs[i]);
            }
            if let Some((i, bound)) = hit {
                state[i] = bound;
            }
            for &i in &free {
                let ci = cap(i);
                if state[i] == Bound::Lower || coeffs[i] <= 0.0 {
                    state[i] = Bound::Lower;
                    coeffs[i] = 0.0;
                } else if state[i] == Bound::Upper || coeffs[i] >= ci {
                    state[i] = Bound::Upper;
                    coeffs[i] = ci;
                }
            }
        }
    }

    Ok(BoxLsq { coeffs })
}

fn residual_of(design: &DMatrix<f64>, target: &DVector<f64>, coeffs: &[f64]) -> DVector<f64> {
    let mut r = target.clone();
    for (i, &a) in coeffs.iter().enumerate() {
        if a != 0.0 {
            r.axpy(-a, &design.column(i), 1.0);
        }
    }
    r
}
