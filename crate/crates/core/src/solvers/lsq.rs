use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_kk|` below which a column is treated as
/// linearly dependent on the ones before it.
const RANK_RTOL: f64 = 1e-12;

/// Unconstrained least squares restricted to `columns` of `design`.
///
/// Solves via Householder QR of the `M x k` submatrix. Returns `None` when
/// the submatrix is numerically rank deficient or has more columns than
/// rows.
pub(crate) fn lstsq_columns(
    design: &DMatrix<f64>,
    columns: &[usize],
    rhs: &DVector<f64>,
) -> Option<DVector<f64>> {
    let k = columns.len();
    if k == 0 {
        return Some(DVector::zeros(0));
    }
    if k > design.nrows() {
        return None;
    }
    let sub = design.select_columns(columns);
    let scale = sub.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    let qr = sub.qr();
    let r = qr.r();
    if (0..k).any(|i| r[(i, i)].abs() <= RANK_RTOL * scale) {
        return None;
    }
    let qtb = qr.q().tr_mul(rhs);
    r.solve_upper_triangular(&qtb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_system() {
        let s = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 1.0]);
        let a = lstsq_columns(&s, &[0, 1], &y).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12 && (a[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_dependence() {
        let s = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(lstsq_columns(&s, &[0, 1], &y).is_none());
        assert!(lstsq_columns(&s, &[1], &y).is_some());
    }
}
