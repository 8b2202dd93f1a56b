//! Dense linear-algebra kernels sized for collocation problems: LU with a
//! condition estimate, orthogonal least squares, companion-matrix roots and
//! the exponential coefficient solve.

mod collocation;
mod lu;
mod matrix;
mod poly;
mod qr;

pub use collocation::{exp_collocation_solve, CollocationFit};
pub use lu::{lu_solve, LuFactors, PIVOT_RELATIVE_TOL};
pub use matrix::DenseMatrix;
pub use poly::{poly_roots, MonicPolynomial};
pub use qr::{min_norm_solve, qr_least_squares, Svd, RANK_RELATIVE_TOL};
