//! Orthogonal least-squares kernels: Householder QR for full-rank systems and
//! a one-sided Jacobi SVD for minimum-norm solutions of rank-deficient ones.

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Relative threshold on `|R_kk|` below which a column is declared dependent.
pub const RANK_RELATIVE_TOL: f64 = 1e-13;

/// Least-squares solution of `A x ≈ b` (`rows >= cols`) through Householder
/// QR on the column-equilibrated matrix.
///
/// Returns `x` and the residual 2-norm `‖A x − b‖₂`.
pub fn qr_least_squares(a: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::InvalidInput(format!(
            "rhs has length {}, matrix has {m} rows",
            b.len()
        )));
    }
    if m < n {
        return Err(Error::InvalidInput(format!(
            "least squares needs rows >= cols, got {m}x{n}"
        )));
    }
    let (mut r, scales) = a.equilibrate_columns();
    let mut qtb = b.to_vec();
    let mut diag_max: f64 = 0.0;

    for k in 0..n {
        let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::SingularMatrix {
                step: k,
                pivot: 0.0,
                threshold: RANK_RELATIVE_TOL * diag_max,
            });
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    r[(i, j)] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..m).map(|i| v[i - k] * qtb[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                qtb[i] -= f * v[i - k];
            }
        }
        let d = r[(k, k)].abs();
        diag_max = diag_max.max(d);
        if d <= RANK_RELATIVE_TOL * diag_max {
            return Err(Error::SingularMatrix {
                step: k,
                pivot: d,
                threshold: RANK_RELATIVE_TOL * diag_max,
            });
        }
    }

    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| r[(i, j)] * y[j]).sum();
        y[i] = (qtb[i] - s) / r[(i, i)];
    }
    let x: Vec<f64> = y.iter().zip(&scales).map(|(yi, s)| yi * s).collect();
    let ax = a.mul_vec(&x);
    let residual = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok((x, residual))
}

/// Thin singular value decomposition `A = U Σ Vᵀ` of an `m x n` matrix with
/// `m >= n`, computed by one-sided Jacobi rotations.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Columns are left singular vectors (`m x n`).
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    /// Columns are right singular vectors (`n x n`).
    pub v: DenseMatrix,
}

impl Svd {
    pub fn compute(a: &DenseMatrix) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if m < n {
            return Err(Error::InvalidInput(format!(
                "SVD needs rows >= cols, got {m}x{n}"
            )));
        }
        let mut u = a.clone();
        let mut v = DenseMatrix::identity(n);
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                    for i in 0..m {
                        alpha += u[(i, p)] * u[(i, p)];
                        beta += u[(i, q)] * u[(i, q)];
                        gamma += u[(i, p)] * u[(i, q)];
                    }
                    if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let (up, uq) = (u[(i, p)], u[(i, q)]);
                        u[(i, p)] = c * up - s * uq;
                        u[(i, q)] = s * up + c * uq;
                    }
                    for i in 0..n {
                        let (vp, vq) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = c * vp - s * vq;
                        v[(i, q)] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sigma = vec![0.0; n];
        for (j, s) in sigma.iter_mut().enumerate() {
            *s = (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt();
            if *s > 0.0 {
                for i in 0..m {
                    u[(i, j)] /= *s;
                }
            }
        }
        Ok(Self { u, sigma, v })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().cloned().fold(0.0, f64::max)
    }

    /// Numerical rank at relative threshold `rcond`.
    pub fn rank(&self, rcond: f64) -> usize {
        let cut = rcond * self.sigma_max();
        self.sigma.iter().filter(|&&s| s > cut).count()
    }

    /// `V Σ⁺ Uᵀ b`, discarding singular values below `rcond * σ_max`.
    pub fn pseudo_solve(&self, b: &[f64], rcond: f64) -> Vec<f64> {
        let (m, n) = (self.u.rows(), self.u.cols());
        let cut = rcond * self.sigma_max();
        let mut x = vec![0.0; n];
        for j in 0..n {
            let s = self.sigma[j];
            if s <= cut || s == 0.0 {
                continue;
            }
            let coef = (0..m).map(|i| self.u[(i, j)] * b[i]).sum::<f64>() / s;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.v[(i, j)];
            }
        }
        x
    }
}

/// Minimum-norm solution of a possibly rank-deficient system, computed on the
/// column-equilibrated matrix. Returns `x` and the numerical rank.
pub fn min_norm_solve(a: &DenseMatrix, b: &[f64], rcond: f64) -> Result<(Vec<f64>, usize)> {
    if b.len() != a.rows() {
        return Err(Error::InvalidInput(format!(
            "rhs has length {}, matrix has {} rows",
            b.len(),
            a.rows()
        )));
    }
    let (scaled, scales) = a.equilibrate_columns();
    let svd = Svd::compute(&scaled)?;
    let y = svd.pseudo_solve(b, rcond);
    let x = y.iter().zip(&scales).map(|(yi, s)| yi * s).collect();
    Ok((x, svd.rank(rcond)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system_is_solved_exactly() {
        let a = DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 3.0]]).unwrap();
        let (x, res) = qr_least_squares(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(res < 1e-14);
    }

    #[test]
    fn line_fit_residual() {
        // y = 1 + 2x with one outlier; normal equations solution computed by hand
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        let b = [1.0, 3.0, 5.0, 8.0];
        let (x, res) = qr_least_squares(&a, &b).unwrap();
        // AᵀA = [[4,6],[6,14]], Aᵀb = [17, 37] -> x = [0.8, 2.3]
        assert!((x[0] - 0.8).abs() < 1e-13 && (x[1] - 2.3).abs() < 1e-13);
        let expected: f64 = [0.2f64, -0.1, -0.4, 0.3].iter().map(|r| r * r).sum::<f64>().sqrt();
        assert!((res - expected).abs() < 1e-13);
    }

    #[test]
    fn dependent_columns_are_singular() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(
            qr_least_squares(&a, &[1.0, 2.0, 3.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn svd_reconstructs() {
        let a = DenseMatrix::from_rows(&[[3.0, 1.0, 0.5], [1.0, -2.0, 1.0], [0.0, 1.0, 4.0], [1.0, 1.0, 1.0]])
            .unwrap();
        let svd = Svd::compute(&a).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| svd.u[(i, k)] * svd.sigma[k] * svd.v[(j, k)]).sum();
                assert!((v - a[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn min_norm_on_rank_deficient() {
        // x + y = 2 twice: minimum-norm solution is (1, 1)
        let a = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let (x, rank) = min_norm_solve(&a, &[2.0, 2.0], 1e-12).unwrap();
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
