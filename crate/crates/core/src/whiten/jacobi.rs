//! Cyclic Jacobi eigendecomposition of a symmetric matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const OFF_DIAGONAL_RTOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order and the matching orthonormal
/// eigenvectors as columns. Each eigenvector is signed so that its
/// largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: matrix.ncols() });
    }
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= OFF_DIAGONAL_RTOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > OFF_DIAGONAL_RTOL * scale {
        return Err(Error::MaxIterationsExceeded { iterations: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = v.select_columns(&order);
    for mut col in vectors.column_iter_mut() {
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Applies the rotation `J^T A J` zeroing `a[p][q]`, and accumulates `V J`.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_matrix() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 2.0]));
        let e = symmetric_eigen(&m).unwrap();
        assert_eq!(e.values, vec![4.0, 2.0, 1.0]);
        assert_eq!(e.vectors.column(0).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigen(&m).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vectors[(0, 0)] - h).abs() < 1e-14 && (e.vectors[(1, 0)] - h).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn reconstructs_random_symmetric(entries in prop::collection::vec(-1.0f64..1.0, 36)) {
            let b = DMatrix::from_vec(6, 6, entries);
            let m = &b + b.transpose();
            let e = symmetric_eigen(&m).unwrap();
            let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
            let recon = &e.vectors * lambda * e.vectors.transpose();
            prop_assert!((recon - &m).amax() < 1e-10);
            let ortho = e.vectors.transpose() * &e.vectors - DMatrix::identity(6, 6);
            prop_assert!(ortho.amax() < 1e-8);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
