//! Least squares, nonnegative least squares and nonnegative LASSO.

pub(crate) mod active_set;
mod lasso;
mod least_squares;
pub(crate) mod lsq;

pub(crate) use lasso::lasso_cv_dense;
pub use lasso::{
    lambda_max, lasso_cv, lasso_cv_curve, lasso_objective, lasso_solve, lasso_solve_with,
    lasso_sweep_objectives, CvPoint, LassoConfig, LassoCvPlan,
};
pub use least_squares::{nnls_solve, nnls_solve_with, ols_solve, MAX_NORMAL_CONDITION};
