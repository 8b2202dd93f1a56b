//! LU factorization with partial pivoting and a 1-norm condition estimate.

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Pivots below `PIVOT_RELATIVE_TOL * max|A|` are treated as zero.
pub const PIVOT_RELATIVE_TOL: f64 = 1e-13;

/// Packed `PA = LU` factors: unit lower triangle below the diagonal, `U` on
/// and above it.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
    norm1: f64,
}

impl LuFactors {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        Self::factor_with_tolerance(a, PIVOT_RELATIVE_TOL)
    }

    pub fn factor_with_tolerance(a: &DenseMatrix, relative_tol: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidInput(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if a.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let n = a.rows();
        let threshold = relative_tol * a.norm_max();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(Error::SingularMatrix {
                    step: k,
                    pivot,
                    threshold,
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / d;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= l * lu[(k, j)];
                    }
                }
            }
        }

        Ok(Self {
            n,
            lu,
            perm,
            norm1: a.norm1(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let n = self.n;
        // Uᵀ w = b, then Lᵀ v = w, then x = Pᵀ v
        let mut w = b.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(j, i)] * w[j]).sum();
            w[i] = (w[i] - s) / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(j, i)] * w[j]).sum();
            w[i] -= s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Estimate of `‖A⁻¹‖₁` (Hager's method with Higham's refinements).
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 1 {
            return 1.0 / self.lu[(0, 0)].abs();
        }
        let norm1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();

        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        let mut prev_sign: Option<Vec<f64>> = None;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = norm1(&y);
            let sign: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            if prev_sign.as_ref() == Some(&sign) {
                break;
            }
            let z = self.solve_transpose(&sign);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, -1.0), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            x = vec![0.0; n];
            x[j] = 1.0;
            last_j = j;
            prev_sign = Some(sign);
        }

        // alternating probe guards against the estimator's known blind spots
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n - 1) as f64)
            })
            .collect();
        let alt_est = 2.0 * norm1(&self.solve(&alt)) / (3.0 * n as f64);
        est.max(alt_est)
    }

    /// 1-norm condition estimate `‖A‖₁ · est(‖A⁻¹‖₁)`.
    pub fn cond1_estimate(&self) -> f64 {
        self.norm1 * self.inverse_norm1_estimate()
    }
}

/// Solves `A x = b`, returning `x` and a 1-norm condition estimate of `A`.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    if b.len() != a.rows() {
        return Err(Error::InvalidInput(format!(
            "rhs has length {}, matrix has {} rows",
            b.len(),
            a.rows()
        )));
    }
    let f = LuFactors::factor(a)?;
    Ok((f.solve(b), f.cond1_estimate()))
}
