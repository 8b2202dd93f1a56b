//! Conversions between dense samples, moments `m_k(t)` and iterated
//! integrals `J_k(t)`.
//!
//! Quadrature is composite Simpson on consecutive interval pairs. When the
//! target index is odd the trailing single interval is closed with the
//! parabola through the last three nodes, which keeps fourth-order accuracy
//! at every grid point. Both rules use the exact quadratic interpolant, so
//! nonuniform grids are handled without a separate code path.

use crate::error::{Error, Result};
use crate::model::ExpSumModel;
use crate::recovery::SampleRecord;

/// Relative tolerance for matching a requested time to a grid node.
const GRID_MATCH_TOL: f64 = 1e-12;

/// Samples of `f` on a strictly increasing grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSignal {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl DenseSignal {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "dense signal needs at least 3 points, got {}",
                grid.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidInput(format!("grid must start at 0, starts at {}", grid[0])));
        }
        for (i, w) in grid.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "grid not strictly increasing at index {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value at index {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `model` at `points` uniform nodes on `[0, t_max]`.
    pub fn from_model(model: &ExpSumModel, t_max: f64, points: usize) -> Result<Self> {
        if points < 3 || !(t_max > 0.0) {
            return Err(Error::InvalidInput(
                "need t_max > 0 and at least 3 points".into(),
            ));
        }
        let grid: Vec<f64> = (0..points)
            .map(|i| t_max * i as f64 / (points - 1) as f64)
            .collect();
        let values = grid.iter().map(|&t| model.evaluate(t)).collect::<Result<_>>()?;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Index of the node equal to `t`. Integration needs at least three
    /// nodes in `[0, t]`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let last = *self.grid.last().expect("nonempty grid");
        if !t.is_finite() || t < 0.0 || t > last * (1.0 + GRID_MATCH_TOL) {
            return Err(Error::OffGrid { t });
        }
        let i = self.grid.partition_point(|&g| g < t);
        let tol = GRID_MATCH_TOL * t.abs().max(1.0);
        let candidates = [i.checked_sub(1), Some(i)];
        candidates
            .into_iter()
            .flatten()
            .filter(|&j| j < self.grid.len())
            .find(|&j| (self.grid[j] - t).abs() <= tol)
            .ok_or(Error::OffGrid { t })
    }

    fn integration_end(&self, t: f64) -> Result<Option<usize>> {
        let n = self.index_of(t)?;
        if n == 0 {
            return Ok(None);
        }
        if n < 2 {
            return Err(Error::GridTooCoarse { t, points: n + 1 });
        }
        Ok(Some(n))
    }
}

/// `∫_{x0}^{x1} q` and `∫_{x0}^{x2} q` for the quadratic `q` through three nodes.
fn parabola_integrals(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let h0 = x[1] - x[0];
    let h1 = x[2] - x[1];
    let big = h0 + h1;
    let d1 = (y[1] - y[0]) / h0;
    let d2 = ((y[2] - y[1]) / h1 - d1) / big;
    let first = y[0] * h0 + d1 * h0 * h0 / 2.0 - d2 * h0 * h0 * h0 / 6.0;
    let both = y[0] * big + d1 * big * big / 2.0 + d2 * (big * big * big / 3.0 - h0 * big * big / 2.0);
    (first, both)
}

/// Cumulative integral from `grid[0]` to every node.
pub fn simpson_cumulative(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid.len();
    assert_eq!(n, values.len(), "grid/value length mismatch");
    let mut cum = vec![0.0; n];
    if n < 2 {
        return cum;
    }
    if n == 2 {
        cum[1] = 0.5 * (grid[1] - grid[0]) * (values[0] + values[1]);
        return cum;
    }
    let node = |i: usize| -> ([f64; 3], [f64; 3]) {
        (
            [grid[i], grid[i + 1], grid[i + 2]],
            [values[i], values[i + 1], values[i + 2]],
        )
    };
    // interval [0,1] from the first parabola
    let (x, y) = node(0);
    cum[1] = parabola_integrals(x, y).0;
    let mut i = 0;
    while i + 2 < n {
        let (x, y) = node(i);
        let (_, pair) = parabola_integrals(x, y);
        cum[i + 2] = cum[i] + pair;
        if i + 3 < n {
            // odd node i+3: close [i+2, i+3] with the parabola through i+1..i+3
            let (x, y) = node(i + 1);
            let (first, both) = parabola_integrals(x, y);
            cum[i + 3] = cum[i + 2] + (both - first);
        }
        i += 2;
    }
    cum
}

/// Moments `m_0..m_K` of `f` on `[0, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub t: f64,
    pub moments: Vec<f64>,
}

impl MomentTable {
    pub fn new(t: f64, moments: Vec<f64>) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidInput(format!("moment time must be >= 0, got {t}")));
        }
        if moments.is_empty() {
            return Err(Error::InvalidInput("moment table needs at least m_0".into()));
        }
        Ok(Self { t, moments })
    }

    /// Closed-form moments of a model.
    pub fn from_model(model: &ExpSumModel, t: f64, max_order: usize) -> Result<Self> {
        let moments = (0..=max_order)
            .map(|k| model.moment_exact(k, t))
            .collect::<Result<_>>()?;
        Self::new(t, moments)
    }

    /// `J_k(t) = 1/(k−1)! Σ_{j<k} (−1)^j C(k−1, j) m_j(t) t^{k−1−j}`, using
    /// `m_0..m_{k−1}`.
    pub fn integral(&self, k: usize) -> Result<f64> {
        integrals_from_moments(self, k)
    }
}

/// k-fold integral `J_k(t)` from the moments `m_0..m_{k−1}` on `[0, t]`.
pub fn integrals_from_moments(table: &MomentTable, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("integral depth must be >= 1".into()));
    }
    if table.moments.len() < k {
        return Err(Error::InsufficientMoments {
            required: k,
            got: table.moments.len(),
        });
    }
    let p = k - 1;
    let t = table.t;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 0..=p {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * table.moments[j] * t.powi((p - j) as i32);
        binom = binom * (p - j) as f64 / (j + 1) as f64;
    }
    let fact: f64 = (1..=p).map(|i| i as f64).product();
    Ok(sum / fact)
}

/// Moments `m_0..m_K` at grid time `t` by composite Simpson.
pub fn moments_from_signal(signal: &DenseSignal, t: f64, max_order: usize) -> Result<MomentTable> {
    let Some(n) = signal.integration_end(t)? else {
        return MomentTable::new(t, vec![0.0; max_order + 1]);
    };
    let grid = &signal.grid[..=n];
    let mut integrand: Vec<f64> = signal.values[..=n].to_vec();
    let mut moments = Vec::with_capacity(max_order + 1);
    for j in 0..=max_order {
        if j > 0 {
            for (v, g) in integrand.iter_mut().zip(grid) {
                *v *= g;
            }
        }
        moments.push(*simpson_cumulative(grid, &integrand).last().expect("n >= 2"));
    }
    MomentTable::new(signal.grid[n], moments)
}

/// `J_k(t)` by applying the cumulative rule `k` times. Independent of the
/// moment route; used to cross-check it.
pub fn iterated_quadrature_oracle(signal: &DenseSignal, k: usize, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("integral depth must be >= 1".into()));
    }
    let Some(n) = signal.integration_end(t)? else {
        return Ok(0.0);
    };
    let grid = &signal.grid[..=n];
    let mut current = signal.values[..=n].to_vec();
    for _ in 0..k {
        current = simpson_cumulative(grid, &current);
    }
    Ok(current[n])
}

/// Builds sample records at the given grid times with `J_1..J_depth`
/// derived from Simpson moments.
pub fn ingest_records(signal: &DenseSignal, times: &[f64], depth: usize) -> Result<Vec<SampleRecord>> {
    times
        .iter()
        .map(|&t| {
            let n = signal.index_of(t)?;
            let f_value = signal.values[n];
            let table = moments_from_signal(signal, t, depth.saturating_sub(1))?;
            let integrals = (1..=depth)
                .map(|k| integrals_from_moments(&table, k))
                .collect::<Result<Vec<_>>>()?;
            SampleRecord::new(signal.grid[n], f_value, integrals)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(points: usize, t_max: f64, f: impl Fn(f64) -> f64) -> DenseSignal {
        let grid: Vec<f64> = (0..points)
            .map(|i| t_max * i as f64 / (points - 1) as f64)
            .collect();
        let values = grid.iter().map(|&t| f(t)).collect();
        DenseSignal::new(grid, values).unwrap()
    }

    #[test]
    fn binomial_identity_small_orders() {
        let table = MomentTable::new(2.0, vec![3.0, 5.0, 7.0]).unwrap();
        assert_eq!(integrals_from_moments(&table, 1).unwrap(), 3.0);
        assert_eq!(integrals_from_moments(&table, 2).unwrap(), 3.0 * 2.0 - 5.0);
        assert_eq!(
            integrals_from_moments(&table, 3).unwrap(),
            (3.0 * 4.0 - 2.0 * 5.0 * 2.0 + 7.0) / 2.0
        );
        assert!(matches!(
            integrals_from_moments(&table, 4),
            Err(Error::InsufficientMoments { required: 4, got: 3 })
        ));
    }

    #[test]
    fn constant_signal_moment() {
        let s = uniform(11, 1.0, |_| 1.0);
        let m = moments_from_signal(&s, 1.0, 0).unwrap();
        assert!((m.moments[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_signal_first_moment() {
        let s = uniform(11, 1.0, |t| t);
        let m = moments_from_signal(&s, 1.0, 1).unwrap();
        assert!((m.moments[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn decaying_exponential_integral() {
        let s = uniform(1001, 1.0, |t| (-t).exp());
        let m = moments_from_signal(&s, 1.0, 0).unwrap();
        assert!((m.moments[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn oracle_double_integral_of_one() {
        let s = uniform(11, 1.0, |_| 1.0);
        assert!((iterated_quadrature_oracle(&s, 2, 1.0).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn oracle_double_integral_of_exp() {
        let s = uniform(2001, 1.0, f64::exp);
        let want = std::f64::consts::E - 2.0;
        assert!((iterated_quadrature_oracle(&s, 2, 1.0).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn empty_interval_is_zero() {
        let s = uniform(11, 1.0, f64::exp);
        for k in 1..5 {
            assert_eq!(iterated_quadrature_oracle(&s, k, 0.0).unwrap(), 0.0);
        }
        assert!(moments_from_signal(&s, 0.0, 3).unwrap().moments.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn odd_nodes_are_fourth_order() {
        // quadratic integrand: parabola closures integrate it exactly
        let s = uniform(8, 1.4, |t| 1.0 + t + t * t);
        let cum = simpson_cumulative(s.grid(), s.values());
        for (g, c) in s.grid().iter().zip(&cum) {
            let want = g + g * g / 2.0 + g * g * g / 3.0;
            assert!((c - want).abs() < 1e-14, "at {g}: {c} vs {want}");
        }
    }

    #[test]
    fn nonuniform_grid_quadratic_exact() {
        let grid = vec![0.0, 0.1, 0.35, 0.4, 0.9, 1.0, 1.7];
        let values = grid.iter().map(|t| 2.0 - 3.0 * t + t * t).collect();
        let s = DenseSignal::new(grid.clone(), values).unwrap();
        let cum = simpson_cumulative(s.grid(), s.values());
        for (g, c) in grid.iter().zip(&cum) {
            let want = 2.0 * g - 1.5 * g * g + g * g * g / 3.0;
            assert!((c - want).abs() < 1e-14);
        }
    }

    #[test]
    fn off_grid_and_coarse_errors() {
        let s = uniform(11, 1.0, f64::exp);
        assert!(matches!(moments_from_signal(&s, 0.55, 1), Err(Error::OffGrid { .. })));
        assert!(matches!(moments_from_signal(&s, 1.5, 1), Err(Error::OffGrid { .. })));
        assert!(matches!(
            iterated_quadrature_oracle(&s, 1, 0.1),
            Err(Error::GridTooCoarse { points: 2, .. })
        ));
    }

    #[test]
    fn invalid_signals() {
        assert!(DenseSignal::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(DenseSignal::new(vec![0.1, 0.2, 0.3], vec![1.0; 3]).is_err());
        assert!(DenseSignal::new(vec![0.0, 0.2, 0.2], vec![1.0; 3]).is_err());
        assert!(DenseSignal::new(vec![0.0, 0.2, 0.3], vec![1.0, f64::NAN, 1.0]).is_err());
    }
}
