//! Exponential-sum models `f(t) = c₀ + Σₙ cₙ e^{αₙ t}` and their closed-form
//! values, iterated integrals and moments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::json::{f64_17, opt_f64_17};

/// Largest `|α t|` accepted in an exponential.
pub const EXP_ARG_LIMIT: f64 = 700.0;

/// Number of grid points used by the generator's nonnegativity check.
pub const NONNEG_GRID_POINTS: usize = 10_000;

pub(crate) fn checked_exp(arg: f64) -> Result<f64> {
    if !arg.is_finite() || arg.abs() > EXP_ARG_LIMIT {
        return Err(Error::Range {
            arg,
            limit: EXP_ARG_LIMIT,
        });
    }
    Ok(arg.exp())
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `φ_k(z) = Σ_{m≥0} z^m / (m+k)!`, so that the k-fold integral of `e^{αs}`
/// over `[0, t]` is `t^k φ_k(αt)`.
///
/// Summed with positive terms only: directly for `z >= 0`, and for `z < 0`
/// through `φ_k(z) = e^z/(k−1)! Σ (−z)^m / (m! (m+k))`.
pub(crate) fn phi(k: usize, z: f64) -> f64 {
    debug_assert!(k >= 1);
    if z >= 0.0 {
        let mut term = 1.0 / factorial(k);
        let mut sum = term;
        for m in 1..10_000 {
            term *= z / (m + k) as f64;
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        let w = -z;
        let mut term = 1.0;
        let mut sum = 1.0 / k as f64;
        for m in 1..10_000 {
            term *= w / m as f64;
            let add = term / (m + k) as f64;
            sum += add;
            if add <= 1e-17 * sum {
                break;
            }
        }
        z.exp() * sum / factorial(k - 1)
    }
}

/// `∫₀¹ u^k e^{zu} du`, with positive-term series on both sides of zero.
pub(crate) fn unit_moment_kernel(k: usize, z: f64) -> f64 {
    if z >= 0.0 {
        // Σ z^m / (m! (m+k+1))
        let mut term = 1.0;
        let mut sum = 1.0 / (k + 1) as f64;
        for m in 1..10_000 {
            term *= z / m as f64;
            let add = term / (m + k + 1) as f64;
            sum += add;
            if add <= 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        // e^z k! Σ w^m / (m+k+1)!
        let w = -z;
        let mut term = 1.0 / factorial(k + 1);
        let mut sum = term;
        for m in 1..10_000 {
            term *= w / (m + k + 1) as f64;
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        z.exp() * factorial(k) * sum
    }
}

/// Double-double versions of the closed forms.
///
/// The product `αt` is formed exactly. Rounding it to `f64` first would cost
/// a relative error of about `|αt|` ulp in `e^{αt}`, several ulp over the
/// usual horizons, and recovery from exact data is sensitive to that.
pub(crate) mod dd {
    use twofloat::{consts::LN_2, TwoFloat};

    use super::{factorial, EXP_ARG_LIMIT};
    use crate::error::{Error, Result};

    const SQUARINGS: i32 = 8;

    /// `e^x` to roughly 1e-30 relative: `x = j ln 2 + r`, Taylor series for
    /// `e^{r/256}`, then eight squarings.
    pub fn exp(x: TwoFloat) -> TwoFloat {
        if x.hi() == 0.0 {
            return TwoFloat::from(1.0);
        }
        let j = (x.hi() / LN_2.hi()).round();
        let r = (x - LN_2 * j) * 2f64.powi(-SQUARINGS);
        let mut term = TwoFloat::from(1.0);
        let mut sum = term;
        for m in 1..=12 {
            term = term * r / m as f64;
            sum += term;
        }
        for _ in 0..SQUARINGS {
            sum = sum * sum;
        }
        // two steps keep the scale factors normal near the range limits
        let half = (j / 2.0).trunc();
        sum * 2f64.powi(half as i32) * 2f64.powi((j - half) as i32)
    }

    fn phi(k: usize, z: TwoFloat) -> TwoFloat {
        if z.hi() >= 0.0 {
            let mut term = TwoFloat::from(1.0) / factorial(k);
            let mut sum = term;
            for m in 1..10_000 {
                term = term * z / (m + k) as f64;
                sum += term;
                if term.hi() <= 1e-33 * sum.hi() {
                    break;
                }
            }
            sum
        } else {
            let w = -z;
            let mut term = TwoFloat::from(1.0);
            let mut sum = TwoFloat::from(1.0) / k as f64;
            for m in 1..10_000 {
                term = term * w / m as f64;
                let add = term / (m + k) as f64;
                sum += add;
                if add.hi() <= 1e-33 * sum.hi() {
                    break;
                }
            }
            exp(z) * sum / factorial(k - 1)
        }
    }

    /// k-fold integral over `[0, t]` of `e^{αs}`.
    pub fn unit_integral(alpha: f64, k: usize, t: f64) -> Result<TwoFloat> {
        let z = TwoFloat::new_mul(alpha, t);
        if !z.hi().is_finite() || z.hi().abs() > EXP_ARG_LIMIT {
            return Err(Error::Range {
                arg: z.hi(),
                limit: EXP_ARG_LIMIT,
            });
        }
        if k == 0 {
            return Ok(exp(z));
        }
        let mut tk = TwoFloat::from(1.0);
        for _ in 0..k {
            tk *= t;
        }
        Ok(tk * phi(k, z))
    }

    /// `c t^k / k!`.
    pub fn constant_integral(c: f64, k: usize, t: f64) -> TwoFloat {
        let mut v = TwoFloat::from(c);
        for i in 1..=k {
            v = v * t / i as f64;
        }
        v
    }
}

/// `e^{αt}` correctly rounded (up to a double-double tie), with the range check.
pub(crate) fn exp_product(alpha: f64, t: f64) -> Result<f64> {
    Ok(dd::unit_integral(alpha, 0, t)?.hi())
}

/// k-fold integral over `[0, t]` of `e^{αs}` (`k = 0` gives `e^{αt}`).
pub(crate) fn unit_integral(alpha: f64, k: usize, t: f64) -> Result<f64> {
    let z = alpha * t;
    if !z.is_finite() || z.abs() > EXP_ARG_LIMIT {
        return Err(Error::Range {
            arg: z,
            limit: EXP_ARG_LIMIT,
        });
    }
    if k == 0 {
        return Ok(z.exp());
    }
    Ok(t.powi(k as i32) * phi(k, z))
}

/// One exponential term `c e^{αt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(serialize_with = "f64_17")]
    pub c: f64,
    #[serde(serialize_with = "f64_17")]
    pub alpha: f64,
}

impl Term {
    pub fn new(c: f64, alpha: f64) -> Self {
        Self { c, alpha }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSumModel {
    terms: Vec<Term>,
    #[serde(default, serialize_with = "opt_f64_17")]
    constant: Option<f64>,
}

impl ExpSumModel {
    /// Validates: at least one term, finite values, nonzero and pairwise
    /// distinct rates.
    pub fn new(terms: Vec<Term>, constant: Option<f64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("model needs at least one exponential term".into()));
        }
        for (i, term) in terms.iter().enumerate() {
            if !term.c.is_finite() || !term.alpha.is_finite() {
                return Err(Error::InvalidInput(format!("term {i} is not finite")));
            }
            if term.alpha == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "term {i} has zero rate; use the constant term instead"
                )));
            }
            if terms[..i].iter().any(|o| o.alpha == term.alpha) {
                return Err(Error::InvalidInput(format!("rate {} appears twice", term.alpha)));
            }
        }
        if constant.is_some_and(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("constant term is not finite".into()));
        }
        Ok(Self { terms, constant })
    }

    /// Convenience constructor from parallel coefficient and rate lists.
    pub fn from_parts(coefficients: &[f64], rates: &[f64], constant: Option<f64>) -> Result<Self> {
        if coefficients.len() != rates.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients but {} rates",
                coefficients.len(),
                rates.len()
            )));
        }
        let terms = coefficients
            .iter()
            .zip(rates)
            .map(|(&c, &alpha)| Term { c, alpha })
            .collect();
        Self::new(terms, constant)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn rates(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.alpha).collect()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.c).collect()
    }

    /// Same model with terms ordered by ascending rate.
    pub fn sorted_by_rate(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        Self {
            terms,
            constant: self.constant,
        }
    }

    /// `c₀ + Σₙ cₙ e^{αₙ t}`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("time {t} is not finite")));
        }
        let mut sum = twofloat::TwoFloat::from(self.constant.unwrap_or(0.0));
        for term in &self.terms {
            sum += dd::unit_integral(term.alpha, 0, t)? * term.c;
        }
        Ok(sum.hi())
    }

    /// Plain double evaluation, for dense scans.
    fn evaluate_fast(&self, t: f64) -> Result<f64> {
        let mut sum = self.constant.unwrap_or(0.0);
        for term in &self.terms {
            sum += term.c * checked_exp(term.alpha * t)?;
        }
        Ok(sum)
    }

    /// The k-fold cumulative integral `J_k(t)` of `f` from 0, `k >= 1`.
    pub fn iterated_integral_exact(&self, k: usize, t: f64) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidInput(
                "iterated integral depth must be >= 1; use evaluate for f itself".into(),
            ));
        }
        check_time(t)?;
        let mut sum = dd::constant_integral(self.constant.unwrap_or(0.0), k, t);
        for term in &self.terms {
            sum += dd::unit_integral(term.alpha, k, t)? * term.c;
        }
        Ok(sum.hi())
    }

    /// `m_k(t) = ∫₀ᵗ s^k f(s) ds`.
    pub fn moment_exact(&self, k: usize, t: f64) -> Result<f64> {
        check_time(t)?;
        let tk1 = t.powi(k as i32 + 1);
        let mut sum = self.constant.map_or(0.0, |c| c * tk1 / (k + 1) as f64);
        for term in &self.terms {
            let z = term.alpha * t;
            checked_exp(z)?;
            sum += term.c * tk1 * unit_moment_kernel(k, z);
        }
        Ok(sum)
    }

    /// Model with an extra constant added (`f + s`).
    pub fn shifted(&self, s: f64) -> Self {
        Self {
            terms: self.terms.clone(),
            constant: Some(self.constant.unwrap_or(0.0) + s),
        }
    }

    /// Minimum of `f` over `points` uniform points on `[0, horizon]`.
    pub fn grid_minimum(&self, horizon: f64, points: usize) -> Result<f64> {
        let points = points.max(2);
        let mut min = f64::INFINITY;
        for i in 0..points {
            let t = horizon * i as f64 / (points - 1) as f64;
            min = min.min(self.evaluate_fast(t)?);
        }
        Ok(min)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidInput(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Recipe for seeded random models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_terms: usize,
    /// Rates are drawn from `[rate_min, rate_max]` minus `(−zero_exclusion, zero_exclusion)`.
    pub rate_min: f64,
    pub rate_max: f64,
    pub zero_exclusion: f64,
    pub min_rate_separation: f64,
    pub coeff_min: f64,
    pub coeff_max: f64,
    pub nonneg_required: bool,
    pub horizon: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_terms: 1,
            rate_min: -2.0,
            rate_max: 2.0,
            zero_exclusion: 0.05,
            min_rate_separation: 0.1,
            coeff_min: 0.1,
            coeff_max: 5.0,
            nonneg_required: false,
            horizon: 3.0,
            seed: 0,
            max_attempts: 1000,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("generator: {m}")));
        if self.n_terms == 0 {
            return bad("n_terms must be >= 1");
        }
        if !(self.zero_exclusion > 0.0) || !(self.min_rate_separation > 0.0) {
            return bad("zero_exclusion and min_rate_separation must be > 0");
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad("horizon must be > 0");
        }
        if !(self.rate_min < self.rate_max) || !(self.coeff_min <= self.coeff_max) {
            return bad("empty rate or coefficient range");
        }
        if self.rate_max.max(self.rate_min.abs()) * self.horizon > EXP_ARG_LIMIT {
            return bad("rate range times horizon exceeds the exponent limit");
        }
        let usable = (self.rate_max.min(-self.zero_exclusion) - self.rate_min).max(0.0)
            + (self.rate_max - self.rate_min.max(self.zero_exclusion)).max(0.0);
        if usable <= 0.0 {
            return bad("rate range lies entirely inside the zero exclusion");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be >= 1");
        }
        Ok(())
    }
}

/// Draws a model from `spec`. Deterministic in `spec.seed`; terms come back
/// sorted by rate.
pub fn generate(spec: &GeneratorSpec) -> Result<ExpSumModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut last_reason = String::new();
    for _ in 0..spec.max_attempts {
        let Some(rates) = draw_rates(spec, &mut rng) else {
            last_reason = "could not place rates with the requested separation".into();
            continue;
        };
        let terms: Vec<Term> = rates
            .into_iter()
            .map(|alpha| Term {
                c: rng.gen_range(spec.coeff_min..=spec.coeff_max),
                alpha,
            })
            .collect();
        let model = ExpSumModel::new(terms, None)?.sorted_by_rate();
        if spec.nonneg_required {
            let min = model.grid_minimum(spec.horizon, NONNEG_GRID_POINTS)?;
            if min < 0.0 {
                last_reason = format!("model minimum {min:e} on [0, {}] is negative", spec.horizon);
                continue;
            }
        }
        return Ok(model);
    }
    Err(Error::GeneratorExhausted {
        attempts: spec.max_attempts,
        reason: last_reason,
    })
}

fn draw_rates(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let mut rates: Vec<f64> = Vec::with_capacity(spec.n_terms);
    let mut draws = 0;
    while rates.len() < spec.n_terms {
        draws += 1;
        if draws > 10_000 {
            return None;
        }
        let a = rng.gen_range(spec.rate_min..=spec.rate_max);
        if a.abs() < spec.zero_exclusion {
            continue;
        }
        if rates.iter().all(|r| (r - a).abs() >= spec.min_rate_separation) {
            rates.push(a);
        }
    }
    Some(rates)
}
