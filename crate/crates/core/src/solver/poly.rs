//! Monic polynomials and their roots via the companion matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `p(α) = α^N + a_{N-1} α^{N-1} + … + a_0`, leading coefficient implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonicPolynomial {
    low_coeffs: Vec<f64>,
}

impl MonicPolynomial {
    /// `low_coeffs[i]` is the coefficient of `α^i`.
    pub fn new(low_coeffs: Vec<f64>) -> Result<Self> {
        if low_coeffs.is_empty() {
            return Err(Error::InvalidInput("monic polynomial needs degree >= 1".into()));
        }
        if low_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("polynomial coefficients must be finite".into()));
        }
        Ok(Self { low_coeffs })
    }

    /// Builds `α^N − Σ_k x_k α^{N−k}` from the integral weights `x_1..x_N`,
    /// so `a_{N−k} = −x_k`.
    pub fn from_integral_weights(x: &[f64]) -> Result<Self> {
        let n = x.len();
        let mut low = vec![0.0; n];
        for (k, xk) in x.iter().enumerate() {
            low[n - 1 - k] = -xk;
        }
        Self::new(low)
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Result<Self> {
        // coefficients high-to-low of the running product
        let mut c = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (i, ci) in c.iter().enumerate() {
                next[i] += ci;
                next[i + 1] -= r * ci;
            }
            c = next;
        }
        let mut low: Vec<f64> = c[1..].to_vec();
        low.reverse();
        Self::new(low)
    }

    pub fn degree(&self) -> usize {
        self.low_coeffs.len()
    }

    pub fn low_coeffs(&self) -> &[f64] {
        &self.low_coeffs
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.low_coeffs.iter().rev().fold(1.0, |acc, a| acc * z + a)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.low_coeffs
            .iter()
            .rev()
            .fold(Complex64::new(1.0, 0.0), |acc, a| acc * z + a)
    }

    /// Value and derivative at `z` (Horner).
    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for a in self.low_coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    }

    /// `|p(z)| / (1 + |z|^N)`.
    pub fn relative_residual(&self, z: Complex64) -> f64 {
        self.eval_complex(z).norm() / (1.0 + z.norm().powi(self.degree() as i32))
    }

    /// Companion matrix in bottom-row form: ones on the superdiagonal and
    /// `[−a_0, …, −a_{N−1}]` in the last row. Row-major.
    pub fn companion(&self) -> Vec<Vec<f64>> {
        let n = self.degree();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n - 1 {
            c[i][i + 1] = 1.0;
        }
        for j in 0..n {
            c[n - 1][j] = -self.low_coeffs[j];
        }
        c
    }
}

/// All roots of `p`, sorted by (real part, imaginary part) ascending.
///
/// Eigenvalues of the balanced companion matrix via shifted Hessenberg QR,
/// followed by a guarded Newton polish on `p` itself. Every returned root
/// satisfies `p.relative_residual(root) <= tol`, otherwise the call fails
/// with `NonConvergence`.
pub fn poly_roots(p: &MonicPolynomial, tol: f64) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let budget = 100 * n;
    let roots = if n == 1 {
        vec![Complex64::new(-p.low_coeffs[0], 0.0)]
    } else if n == 2 {
        quadratic_roots(p.low_coeffs[1], p.low_coeffs[0])
    } else {
        // transpose of the bottom-row form is upper Hessenberg
        let companion = p.companion();
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in companion.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                h[j][i] = *v;
            }
        }
        balance(&mut h);
        hessenberg_eigenvalues(h, budget)?
    };

    let mut polished: Vec<Complex64> = roots.into_iter().map(|z| newton_polish(p, z)).collect();
    for z in &mut polished {
        // real roots of a real polynomial come back with exactly zero imaginary part
        if z.im.abs() <= f64::EPSILON * z.re.abs() {
            z.im = 0.0;
        }
    }
    for z in &polished {
        if !(z.re.is_finite() && z.im.is_finite()) || p.relative_residual(*z) > tol {
            return Err(Error::NonConvergence { iterations: budget });
        }
    }
    polished.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(polished)
}

/// Roots of `z² + b z + c` without cancellation.
fn quadratic_roots(b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let q = if b == 0.0 { 0.5 * disc.sqrt() } else { q };
        if q == 0.0 {
            return vec![Complex64::new(0.0, 0.0); 2];
        }
        vec![Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        vec![Complex64::new(re, -im), Complex64::new(re, im)]
    }
}

fn newton_polish(p: &MonicPolynomial, z0: Complex64) -> Complex64 {
    let mut z = z0;
    let mut best = (p.eval_complex(z).norm(), z);
    for _ in 0..8 {
        let (v, dv) = p.eval_with_derivative(z);
        if dv.norm() == 0.0 || v.norm() == 0.0 {
            break;
        }
        let next = z - v / dv;
        // stay inside the root's neighbourhood so we never hop to a sibling
        if (next - z0).norm() > 1e-3 * (1.0 + z0.norm()) {
            break;
        }
        z = next;
        let r = p.eval_complex(z).norm();
        if r < best.0 {
            best = (r, z);
        } else {
            break;
        }
    }
    best.1
}

/// Diagonal similarity scaling by powers of two (Parlett–Reinsch).
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i][j] *= g;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.
fn hessenberg_eigenvalues(h: Vec<Vec<f64>>, budget: usize) -> Result<Vec<Complex64>> {
    let n = h.len();
    // 1-based copy keeps the index arithmetic of the classic formulation
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[i][j];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }

    let mut total = 0usize;
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            let mut l = 1;
            for ll in (2..=nn).rev() {
                let mut s = a[ll - 1][ll - 1].abs() + a[ll][ll].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[ll][ll - 1].abs() + s == s {
                    a[ll][ll - 1] = 0.0;
                    l = ll;
                    break;
                }
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }

            if its >= 60 || total >= budget {
                return Err(Error::NonConvergence { iterations: total });
            }
            if its > 0 && its.is_multiple_of(10) {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total += 1;

            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != nn - 1 { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }

    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real_parts(r: &[Complex64]) -> Vec<f64> {
        r.iter().map(|z| z.re).collect()
    }

    #[test]
    fn linear_root() {
        let p = MonicPolynomial::from_integral_weights(&[0.75]).unwrap();
        let r = poly_roots(&p, 1e-12).unwrap();
        assert_eq!(r, vec![Complex64::new(0.75, 0.0)]);
    }

    #[test]
    fn difference_of_squares() {
        // α² − 0·α − 1
        let p = MonicPolynomial::from_integral_weights(&[0.0, 1.0]).unwrap();
        let r = poly_roots(&p, 1e-12).unwrap();
        assert_eq!(real_parts(&r), vec![-1.0, 1.0]);
        assert!(r.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn quadratic_matches_formula() {
        let (x1, x2) = (0.3, 1.7);
        let p = MonicPolynomial::from_integral_weights(&[x1, x2]).unwrap();
        let r = poly_roots(&p, 1e-12).unwrap();
        let d = (x1 * x1 + 4.0 * x2).sqrt();
        assert!((r[0].re - (x1 - d) / 2.0).abs() < 1e-15);
        assert!((r[1].re - (x1 + d) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn complex_pair() {
        // α² + 1
        let p = MonicPolynomial::new(vec![1.0, 0.0]).unwrap();
        let r = poly_roots(&p, 1e-12).unwrap();
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn cubic_with_mixed_roots() {
        // (α − 2)(α² + 2α + 5): roots 2, −1 ± 2i
        let p = MonicPolynomial::new(vec![-10.0, 1.0, 0.0]).unwrap();
        let r = poly_roots(&p, 1e-12).unwrap();
        assert!((r[0] - Complex64::new(-1.0, -2.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(-1.0, 2.0)).norm() < 1e-12);
        assert!((r[2] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn from_roots_round_trip() {
        let roots = [-1.5, -0.2, 0.4, 1.1, 1.9];
        let p = MonicPolynomial::from_roots(&roots).unwrap();
        let r = poly_roots(&p, 1e-12).unwrap();
        for (z, want) in r.iter().zip(roots) {
            assert!((z.re - want).abs() < 1e-12, "{z} vs {want}");
            assert_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn companion_layout() {
        let p = MonicPolynomial::new(vec![1.0, 2.0, 3.0]).unwrap();
        let c = p.companion();
        assert_eq!(c[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(c[1], vec![0.0, 0.0, 1.0]);
        assert_eq!(c[2], vec![-1.0, -2.0, -3.0]);
    }

    #[test]
    fn zero_degree_rejected() {
        assert!(MonicPolynomial::new(vec![]).is_err());
    }
}
