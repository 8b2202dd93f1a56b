//! Parameter recovery from values and iterated integrals.
//!
//! Each record at time `t` contributes the row
//! `[J₁(t), …, J_m(t), 1, t, …, t^{p−1}]` with right-hand side `f(t)`. The
//! solution's first `m` entries `x₁..x_m` define the monic polynomial
//! `α^m − Σ_k x_k α^{m−k}` whose roots are the rates; the coefficients then
//! follow from a linear fit over every record. A Gauss–Newton pass over all
//! record data (values and integrals) finally polishes the algebraic answer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{checked_exp, dd, unit_integral, ExpSumModel, Term};
use crate::solver::{
    exp_collocation_solve, min_norm_solve, poly_roots, DenseMatrix, LuFactors, MonicPolynomial,
    Svd,
};

/// One sample: `f(t)` and the cumulative integrals `J₁(t)..J_d(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    t: f64,
    f_value: f64,
    integrals: Vec<f64>,
}

impl SampleRecord {
    pub fn new(t: f64, f_value: f64, integrals: Vec<f64>) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidInput(format!("record time must be finite and >= 0, got {t}")));
        }
        if !f_value.is_finite() || integrals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("record at t = {t} has non-finite data")));
        }
        if t == 0.0 && integrals.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidInput("integrals at t = 0 must all be 0".into()));
        }
        Ok(Self {
            t,
            f_value,
            integrals,
        })
    }

    /// Exact record of `model` at `t` carrying `J₁..J_depth`.
    pub fn from_model(model: &ExpSumModel, t: f64, depth: usize) -> Result<Self> {
        let integrals = (1..=depth)
            .map(|k| model.iterated_integral_exact(k, t))
            .collect::<Result<_>>()?;
        Self::new(t, model.evaluate(t)?, integrals)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn f_value(&self) -> f64 {
        self.f_value
    }

    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    /// `J_k`, `k >= 1`.
    pub fn integral(&self, k: usize) -> f64 {
        self.integrals[k - 1]
    }

    pub fn depth(&self) -> usize {
        self.integrals.len()
    }

    /// Record of `f + s`: `f ← f + s`, `J_k ← J_k + s t^k / k!`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut term = s;
        let integrals = self
            .integrals
            .iter()
            .enumerate()
            .map(|(i, j)| {
                term *= self.t / (i + 1) as f64;
                j + term
            })
            .collect();
        Self {
            t: self.t,
            f_value: self.f_value + s,
            integrals,
        }
    }
}

/// Exact records of `model` at each time.
pub fn records_from_model(model: &ExpSumModel, times: &[f64], depth: usize) -> Result<Vec<SampleRecord>> {
    times
        .iter()
        .map(|&t| SampleRecord::from_model(model, t, depth))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pure exponential sum with `N` nonzero rates.
    Strict,
    /// Sign-indefinite data lifted by a known constant before recovery.
    Shifted,
    /// `N` terms counting a constant (zero-rate) term.
    WithConstant,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Shifted => "shifted",
            Mode::WithConstant => "with_constant",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Mode::Strict),
            "shifted" => Ok(Mode::Shifted),
            "with_constant" | "with-constant" => Ok(Mode::WithConstant),
            other => Err(Error::InvalidInput(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryProblem {
    n_terms: usize,
    records: Vec<SampleRecord>,
    mode: Mode,
    shift_value: Option<f64>,
}

impl RecoveryProblem {
    /// `n_terms` counts exponential terms in strict and shifted mode, and all
    /// terms including the constant in with-constant mode.
    pub fn new(
        n_terms: usize,
        records: Vec<SampleRecord>,
        mode: Mode,
        shift_value: Option<f64>,
    ) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::InvalidInput("n_terms must be >= 1".into()));
        }
        if mode == Mode::WithConstant && n_terms < 2 {
            return Err(Error::InvalidInput(
                "with_constant needs n_terms >= 2: a lone constant has no rates to recover".into(),
            ));
        }
        match (mode, shift_value) {
            (Mode::Shifted, None) => {
                return Err(Error::InvalidInput("shifted mode needs a shift value".into()))
            }
            (Mode::Shifted, Some(s)) if !s.is_finite() => {
                return Err(Error::InvalidInput("shift value must be finite".into()))
            }
            (Mode::Strict | Mode::WithConstant, Some(_)) => {
                return Err(Error::InvalidInput(format!("mode {mode} takes no shift value")))
            }
            _ => {}
        }
        let problem = Self {
            n_terms,
            records,
            mode,
            shift_value,
        };
        let required = problem.required_records();
        if problem.records.len() < required {
            return Err(Error::InsufficientRecords {
                required,
                got: problem.records.len(),
            });
        }
        for w in problem.records.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidInput(format!(
                    "record times must be distinct and ascending ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        let depth = problem.integral_depth();
        if let Some(r) = problem.records.iter().find(|r| r.depth() < depth) {
            return Err(Error::InvalidInput(format!(
                "record at t = {} carries {} integrals, need {depth}",
                r.t,
                r.depth()
            )));
        }
        Ok(problem)
    }

    pub fn strict(n_terms: usize, records: Vec<SampleRecord>) -> Result<Self> {
        Self::new(n_terms, records, Mode::Strict, None)
    }

    pub fn with_constant(n_terms: usize, records: Vec<SampleRecord>) -> Result<Self> {
        Self::new(n_terms, records, Mode::WithConstant, None)
    }

    pub fn shifted(n_terms: usize, records: Vec<SampleRecord>, shift: f64) -> Result<Self> {
        Self::new(n_terms, records, Mode::Shifted, Some(shift))
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn shift_value(&self) -> Option<f64> {
        self.shift_value
    }

    pub fn required_records(&self) -> usize {
        match self.mode {
            Mode::Strict => 2 * self.n_terms,
            Mode::Shifted => 2 * self.n_terms + 1,
            Mode::WithConstant => 2 * self.n_terms - 1,
        }
    }

    /// Integral depth every record must carry.
    pub fn integral_depth(&self) -> usize {
        match self.mode {
            Mode::Strict | Mode::Shifted => self.n_terms,
            Mode::WithConstant => self.n_terms - 1,
        }
    }

    /// Column layout `(integral columns, polynomial columns, constant term)`.
    fn layout(&self) -> Layout {
        match self.mode {
            Mode::Strict => Layout {
                integral_cols: self.n_terms,
                poly_cols: self.n_terms,
                constant: false,
            },
            Mode::WithConstant => Layout {
                integral_cols: self.n_terms - 1,
                poly_cols: self.n_terms,
                constant: true,
            },
            Mode::Shifted => Layout {
                integral_cols: self.n_terms,
                poly_cols: self.n_terms + 1,
                constant: true,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    integral_cols: usize,
    poly_cols: usize,
    constant: bool,
}

impl Layout {
    fn size(&self) -> usize {
        self.integral_cols + self.poly_cols
    }
}

/// Thresholds and switches for the recovery pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryOptions {
    /// Run the Gauss–Newton polish after the algebraic solve.
    pub polish: bool,
    pub polish_iterations: usize,
    /// Greedy conditioning-based row selection when more records than
    /// unknowns are available.
    pub reselect_rows: bool,
    /// Relative pivot threshold of the collocation LU.
    pub pivot_tolerance: f64,
    /// Lower threshold tried, with a warning, when `pivot_tolerance` trips.
    /// Exactly rank-deficient systems land near 1e-16 and still fail.
    pub rescue_pivot_tolerance: f64,
    /// Residual bound `|p(r)|/(1+|r|^N)` every root must meet.
    pub root_tolerance: f64,
    /// Roots with `|Im| <= imag_tolerance (1 + |Re|)` are projected to real.
    pub imag_tolerance: f64,
    /// Rates closer than this (absolute) are duplicates.
    pub duplicate_tolerance: f64,
    pub cond_warning: f64,
    /// Relative to `max |f|`.
    pub residual_warning: f64,
    pub near_zero_rate: f64,
    /// Spurious-coefficient threshold, relative to `max |c|`.
    pub zero_coefficient: f64,
    /// Relative singular-value cutoff for rank-deficient solves.
    pub rank_rcond: f64,
    /// Relative agreement required between overdetermined and independent fits.
    pub match_tolerance: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            polish: true,
            polish_iterations: 30,
            reselect_rows: false,
            pivot_tolerance: crate::solver::PIVOT_RELATIVE_TOL,
            rescue_pivot_tolerance: 1e-15,
            root_tolerance: 1e-8,
            imag_tolerance: 1e-8,
            duplicate_tolerance: 1e-8,
            cond_warning: 1e10,
            residual_warning: 1e-6,
            near_zero_rate: 1e-6,
            zero_coefficient: 1e-7,
            rank_rcond: 1e-12,
            match_tolerance: 1e-6,
        }
    }
}

/// The square collocation system and the record times of its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSystem {
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
    pub times: Vec<f64>,
    pub integral_columns: usize,
    pub poly_columns: usize,
}

fn collocation_row(record: &SampleRecord, layout: Layout) -> Vec<f64> {
    let mut row = Vec::with_capacity(layout.size());
    row.extend_from_slice(&record.integrals[..layout.integral_cols]);
    let mut p = 1.0;
    for _ in 0..layout.poly_cols {
        row.push(p);
        p *= record.t;
    }
    row
}

/// Rows chosen greedily by partial-pivoting elimination over all records.
fn greedy_selection(records: &[SampleRecord], layout: Layout) -> Vec<usize> {
    let rows: Vec<Vec<f64>> = records.iter().map(|r| collocation_row(r, layout)).collect();
    let full = DenseMatrix::from_rows(&rows).expect("uniform rows");
    let (mut work, _) = full.equilibrate_columns();
    let n = layout.size();
    let mut remaining: Vec<usize> = (0..records.len()).collect();
    let mut chosen = Vec::with_capacity(n);
    for k in 0..n {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, work[(i, k)].abs()))
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        let p = remaining.swap_remove(pos);
        let pivot = work[(p, k)];
        if pivot != 0.0 {
            for &i in &remaining {
                let l = work[(i, k)] / pivot;
                for j in k..n {
                    work[(i, j)] -= l * work[(p, j)];
                }
            }
        }
        chosen.push(p);
    }
    chosen.sort_unstable();
    chosen
}

fn assemble(problem: &RecoveryProblem, records: &[SampleRecord], reselect: bool) -> (CollocationSystem, Vec<usize>) {
    let layout = problem.layout();
    let n = layout.size();
    let selection: Vec<usize> = if reselect && records.len() > n {
        greedy_selection(records, layout)
    } else {
        (0..n).collect()
    };
    let rows: Vec<Vec<f64>> = selection
        .iter()
        .map(|&i| collocation_row(&records[i], layout))
        .collect();
    let system = CollocationSystem {
        matrix: DenseMatrix::from_rows(&rows).expect("uniform rows"),
        rhs: selection.iter().map(|&i| records[i].f_value).collect(),
        times: selection.iter().map(|&i| records[i].t).collect(),
        integral_columns: layout.integral_cols,
        poly_columns: layout.poly_cols,
    };
    (system, selection)
}

/// Square collocation system over the first records of `problem`. Shifted
/// problems are assembled from their shifted records.
pub fn assemble_system(problem: &RecoveryProblem) -> Result<(CollocationSystem, Vec<usize>)> {
    let records = effective_records(problem)?;
    Ok(assemble(problem, &records, false))
}

fn effective_records(problem: &RecoveryProblem) -> Result<Vec<SampleRecord>> {
    match (problem.mode, problem.shift_value) {
        (Mode::Shifted, Some(s)) => {
            if let Some(r) = problem.records.iter().find(|r| r.f_value + s < 0.0) {
                return Err(Error::ShiftTooSmall {
                    shift: s,
                    t: r.t,
                    shifted: r.f_value + s,
                });
            }
            Ok(problem.records.iter().map(|r| r.shifted(s)).collect())
        }
        _ => Ok(problem.records.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolishReport {
    pub applied: bool,
    pub iterations: usize,
    /// Weighted sum of squared relative residuals before and after.
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Largest relative parameter change made by the polish.
    pub max_relative_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Final model, terms sorted by rate.
    pub model: ExpSumModel,
    /// Model straight from the polynomial roots and the coefficient fit.
    pub algebraic_model: ExpSumModel,
    pub x_vector: Vec<f64>,
    pub frobenius: MonicPolynomial,
    /// 1-norm condition estimate of the column-equilibrated system.
    pub cond_estimate: f64,
    /// `‖A x − b‖∞` of the collocation solve.
    pub collocation_residual: f64,
    /// `max_i |f_model(tᵢ) − f(tᵢ)|` over all records (unshifted).
    pub reconstruction_residual: f64,
    pub mode_used: Mode,
    /// Record indices forming the collocation rows.
    pub selection: Vec<usize>,
    pub shift: Option<f64>,
    /// Constant recovered from the shifted data, before subtracting the shift.
    pub constant_before_unshift: Option<f64>,
    pub polish: PolishReport,
    pub warnings: Vec<String>,
}

/// Dispatches on the problem's mode.
pub fn solve(problem: &RecoveryProblem, options: &RecoveryOptions) -> Result<RecoveryResult> {
    match problem.mode {
        Mode::Strict => recover(problem, options),
        Mode::WithConstant => recover_with_constant(problem, options),
        Mode::Shifted => recover_shifted(problem, options),
    }
}

/// Recovers an `N`-term exponential sum from at least `2N` records.
pub fn recover(problem: &RecoveryProblem, options: &RecoveryOptions) -> Result<RecoveryResult> {
    expect_mode(problem, Mode::Strict)?;
    run_pipeline(problem, &problem.records, options)
}

/// Recovers `c₀ + Σ_{n<N} cₙ e^{αₙ t}` (N terms counting the constant) from
/// at least `2N − 1` records carrying `J₁..J_{N−1}`.
pub fn recover_with_constant(problem: &RecoveryProblem, options: &RecoveryOptions) -> Result<RecoveryResult> {
    expect_mode(problem, Mode::WithConstant)?;
    run_pipeline(problem, &problem.records, options)
}

/// Recovers a possibly sign-indefinite `N`-term sum by lifting the data with
/// the known shift `s`, solving the `(N+1)`-term problem with a constant and
/// subtracting `s` again.
pub fn recover_shifted(problem: &RecoveryProblem, options: &RecoveryOptions) -> Result<RecoveryResult> {
    expect_mode(problem, Mode::Shifted)?;
    let s = problem.shift_value.expect("validated");
    let shifted = effective_records(problem)?;
    let mut result = run_pipeline(problem, &shifted, options)?;

    let lifted = result.model.constant().unwrap_or(0.0);
    let unshift = |m: &ExpSumModel| {
        ExpSumModel::new(m.terms().to_vec(), Some(m.constant().unwrap_or(0.0) - s))
    };
    result.model = unshift(&result.model)?;
    result.algebraic_model = unshift(&result.algebraic_model)?;
    result.shift = Some(s);
    result.constant_before_unshift = Some(lifted);
    result.reconstruction_residual = reconstruction_residual(&result.model, &problem.records)?;
    Ok(result)
}

fn expect_mode(problem: &RecoveryProblem, mode: Mode) -> Result<()> {
    if problem.mode != mode {
        return Err(Error::InvalidInput(format!(
            "problem is in {} mode, expected {mode}",
            problem.mode
        )));
    }
    Ok(())
}

fn reconstruction_residual(model: &ExpSumModel, records: &[SampleRecord]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for r in records {
        worst = worst.max((model.evaluate(r.t)? - r.f_value).abs());
    }
    Ok(worst)
}

/// Projects nearly real roots onto the real line, rejecting the rest.
fn real_rates(roots: &[num_complex::Complex64], options: &RecoveryOptions) -> Result<Vec<f64>> {
    if roots
        .iter()
        .any(|z| z.im.abs() > options.imag_tolerance * (1.0 + z.re.abs()))
    {
        return Err(Error::ComplexRates {
            roots: roots.iter().map(|z| (z.re, z.im)).collect(),
        });
    }
    let mut rates: Vec<f64> = roots.iter().map(|z| z.re).collect();
    rates.sort_by(f64::total_cmp);
    Ok(rates)
}

fn check_distinct(rates: &[f64], threshold: f64) -> Result<()> {
    for w in rates.windows(2) {
        if (w[1] - w[0]).abs() <= threshold {
            return Err(Error::DuplicateRates {
                first: w[0],
                second: w[1],
                threshold,
            });
        }
    }
    Ok(())
}

fn run_pipeline(
    problem: &RecoveryProblem,
    records: &[SampleRecord],
    options: &RecoveryOptions,
) -> Result<RecoveryResult> {
    let layout = problem.layout();
    let (system, selection) = assemble(problem, records, options.reselect_rows);

    let mut warnings = Vec::new();
    let (scaled, scales) = system.matrix.equilibrate_columns();
    let lu = match LuFactors::factor_with_tolerance(&scaled, options.pivot_tolerance) {
        Ok(lu) => lu,
        Err(Error::SingularMatrix { pivot, step, .. })
            if options.rescue_pivot_tolerance < options.pivot_tolerance =>
        {
            let lu = LuFactors::factor_with_tolerance(&scaled, options.rescue_pivot_tolerance)?;
            warnings.push(format!(
                "collocation pivot {pivot:.3e} at step {step} is below {:.0e} of the largest entry; \
                 solved anyway, accuracy rests on the refinement stage",
                options.pivot_tolerance
            ));
            lu
        }
        Err(e) => return Err(e),
    };
    let y = lu.solve(&system.rhs);
    let cond_estimate = lu.cond1_estimate();
    let x_vector: Vec<f64> = y.iter().zip(&scales).map(|(v, s)| v * s).collect();
    let collocation_residual = system
        .matrix
        .mul_vec(&x_vector)
        .iter()
        .zip(&system.rhs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let frobenius = MonicPolynomial::from_integral_weights(&x_vector[..layout.integral_cols])?;
    let roots = poly_roots(&frobenius, options.root_tolerance)?;
    let rates = real_rates(&roots, options)?;
    check_distinct(&rates, options.duplicate_tolerance)?;
    if let Some(zero) = rates.iter().find(|a| **a == 0.0) {
        return Err(Error::DuplicateRates {
            first: *zero,
            second: 0.0,
            threshold: options.duplicate_tolerance,
        });
    }

    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let values: Vec<f64> = records.iter().map(|r| r.f_value).collect();
    let fit = exp_collocation_solve(&rates, &times, &values, layout.constant)?;
    let algebraic_model = ExpSumModel::from_parts(&fit.coefficients, &rates, fit.constant)?;

    let depth = layout.integral_cols;
    let (model, polish) = if options.polish {
        polish_model(&algebraic_model, records, depth, options)
    } else {
        (
            algebraic_model.clone(),
            PolishReport {
                applied: false,
                iterations: 0,
                initial_cost: f64::NAN,
                final_cost: f64::NAN,
                max_relative_change: 0.0,
            },
        )
    };

    let reconstruction = reconstruction_residual(&model, records)?;
    let f_scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    if cond_estimate > options.cond_warning {
        warnings.push(format!(
            "ill-conditioned collocation system: condition estimate {cond_estimate:.3e} exceeds {:.1e}",
            options.cond_warning
        ));
    }
    if reconstruction > options.residual_warning * f_scale {
        warnings.push(format!(
            "reconstruction residual {reconstruction:.3e} exceeds {:.1e} of max |f|",
            options.residual_warning
        ));
    }
    if let Some(a) = model.rates().iter().find(|a| a.abs() < options.near_zero_rate) {
        warnings.push(format!(
            "recovered rate {a:.3e} is nearly zero; the data may contain a constant term (try with_constant mode)"
        ));
    }
    if polish.applied && polish.max_relative_change > 1e-3 {
        warnings.push(format!(
            "polish moved parameters by {:.3e} relative; the algebraic stage was inaccurate",
            polish.max_relative_change
        ));
    }

    Ok(RecoveryResult {
        model,
        algebraic_model,
        x_vector,
        frobenius,
        cond_estimate,
        collocation_residual,
        reconstruction_residual: reconstruction,
        mode_used: problem.mode,
        selection,
        shift: None,
        constant_before_unshift: None,
        polish,
        warnings,
    })
}

/// Weighted data vector `[f, J₁..J_d]` per record.
struct PolishData {
    times: Vec<f64>,
    depth: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl PolishData {
    fn new(records: &[SampleRecord], depth: usize) -> Self {
        let per = depth + 1;
        let mut values = Vec::with_capacity(records.len() * per);
        for r in records {
            values.push(r.f_value);
            values.extend_from_slice(&r.integrals[..depth]);
        }
        // relative weights, floored per depth so zero data (t = 0) stay finite
        let mut floors = vec![0.0f64; per];
        for (i, v) in values.iter().enumerate() {
            floors[i % per] = floors[i % per].max(v.abs());
        }
        let weights = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let floor = (1e-12 * floors[i % per]).max(f64::MIN_POSITIVE);
                1.0 / v.abs().max(floor)
            })
            .collect();
        Self {
            times: records.iter().map(|r| r.t).collect(),
            depth,
            values,
            weights,
        }
    }
}

/// Parameters: `[c₁..c_n, α₁..α_n, (c₀)]`. Evaluated in double-double: the
/// residuals sit at the rounding level of the data.
fn residuals(params: &[f64], n: usize, constant: bool, data: &PolishData) -> Result<Vec<f64>> {
    let per = data.depth + 1;
    let mut out = Vec::with_capacity(data.values.len());
    let c0 = if constant { params[2 * n] } else { 0.0 };
    for (ti, &t) in data.times.iter().enumerate() {
        for k in 0..per {
            let mut v = dd::constant_integral(c0, k, t);
            for j in 0..n {
                v += dd::unit_integral(params[n + j], k, t)? * params[j];
            }
            let idx = ti * per + k;
            out.push((v - data.values[idx]).hi() * data.weights[idx]);
        }
    }
    Ok(out)
}

fn jacobian(params: &[f64], n: usize, constant: bool, data: &PolishData) -> Result<DenseMatrix> {
    let per = data.depth + 1;
    let cols = 2 * n + usize::from(constant);
    let mut jac = DenseMatrix::zeros(data.values.len(), cols);
    for (ti, &t) in data.times.iter().enumerate() {
        let mut unit = vec![vec![0.0; per + 1]; n];
        for (j, u) in unit.iter_mut().enumerate() {
            for (k, v) in u.iter_mut().enumerate() {
                *v = unit_integral(params[n + j], k, t)?;
            }
        }
        let mut poly = 1.0;
        for k in 0..per {
            if k > 0 {
                poly *= t / k as f64;
            }
            let row = ti * per + k;
            let w = data.weights[row];
            for j in 0..n {
                jac[(row, j)] = unit[j][k] * w;
                // d/dα of the k-fold integral of e^{αs} is t J_k − k J_{k+1}
                jac[(row, n + j)] = params[j] * (t * unit[j][k] - k as f64 * unit[j][k + 1]) * w;
            }
            if constant {
                jac[(row, 2 * n)] = poly * w;
            }
        }
    }
    Ok(jac)
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Gauss–Newton over all record data, keeping the lowest-cost iterate.
///
/// Undamped steps are taken even when they raise the cost: starting points
/// from the algebraic stage typically sit in a long curved valley where the
/// first full step overshoots before converging.
fn polish_model(
    start: &ExpSumModel,
    records: &[SampleRecord],
    depth: usize,
    options: &RecoveryOptions,
) -> (ExpSumModel, PolishReport) {
    let n = start.n_terms();
    let constant = start.constant().is_some();
    let data = PolishData::new(records, depth);
    let mut params: Vec<f64> = start.coefficients();
    params.extend(start.rates());
    if let Some(c0) = start.constant() {
        params.push(c0);
    }
    let initial = params.clone();

    let not_applied = |c: f64| PolishReport {
        applied: false,
        iterations: 0,
        initial_cost: c,
        final_cost: c,
        max_relative_change: 0.0,
    };
    let Ok(r0) = residuals(&params, n, constant, &data) else {
        return (start.clone(), not_applied(f64::NAN));
    };
    let initial_cost = cost(&r0);
    let mut best = (initial_cost, params.clone());
    let mut r = r0;
    let mut iterations = 0;

    for _ in 0..options.polish_iterations {
        let Ok(jac) = jacobian(&params, n, constant, &data) else {
            break;
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let Ok((step, _)) = min_norm_solve(&jac, &neg, 0.0) else {
            break;
        };
        iterations += 1;
        for (p, s) in params.iter_mut().zip(&step) {
            *p += s;
        }
        match residuals(&params, n, constant, &data) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => r = next,
            _ => break,
        }
        let c = cost(&r);
        if c < best.0 {
            best = (c, params.clone());
        }
        let tiny = step
            .iter()
            .zip(&params)
            .all(|(s, p)| s.abs() <= 4.0 * f64::EPSILON * p.abs());
        if tiny || c == 0.0 {
            break;
        }
    }

    let (final_cost, best_params) = best;
    let candidate = {
        let coeffs = &best_params[..n];
        let rates = &best_params[n..2 * n];
        let c0 = constant.then(|| best_params[2 * n]);
        let mut sorted = rates.to_vec();
        sorted.sort_by(f64::total_cmp);
        let distinct = check_distinct(&sorted, options.duplicate_tolerance).is_ok()
            && rates.iter().all(|a| *a != 0.0);
        distinct
            .then(|| ExpSumModel::from_parts(coeffs, rates, c0).ok())
            .flatten()
            .map(|m| m.sorted_by_rate())
    };
    let Some(model) = candidate else {
        return (start.clone(), not_applied(initial_cost));
    };
    let max_relative_change = best_params
        .iter()
        .zip(&initial)
        .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    (
        model,
        PolishReport {
            applied: true,
            iterations,
            initial_cost,
            final_cost,
            max_relative_change,
        },
    )
}

/// Outcome of recovering with more declared terms than the data contain.
#[derive(Debug, Clone, PartialEq)]
pub struct OverdeterminedReport {
    pub declared_terms: usize,
    /// Numerical rank of the collocation system.
    pub rank: usize,
    /// All terms of the declared-size fit, sorted by rate.
    pub terms: Vec<Term>,
    pub significant: Vec<Term>,
    pub spurious: Vec<Term>,
    /// `max |c_spurious| / max |c|`.
    pub spurious_ratio: f64,
    pub independent: Option<ExpSumModel>,
    /// Largest relative parameter gap between significant terms and the
    /// independent fit.
    pub max_relative_deviation: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Recovers at the declared size `r` of a strict problem whose data may come
/// from fewer terms, then checks that the surplus coefficients vanish and the
/// remaining terms agree with an independent fit at the reduced size.
///
/// The size-`r` system is rank-deficient when the data have fewer terms, so
/// it is solved in the minimum-norm sense. Surplus polynomial roots may be
/// complex; a pair `a ± ib` is mapped to the real rates `a ∓ |b|`, which is
/// harmless because only the coefficients of surplus terms are constrained.
pub fn verify_overdetermined(
    problem: &RecoveryProblem,
    expected_terms: Option<usize>,
    options: &RecoveryOptions,
) -> Result<OverdeterminedReport> {
    expect_mode(problem, Mode::Strict)?;
    let r = problem.n_terms;
    let records = &problem.records;
    let (system, _) = assemble(problem, records, false);
    let (x, rank) = min_norm_solve(&system.matrix, &system.rhs, options.rank_rcond)?;

    let frobenius = MonicPolynomial::from_integral_weights(&x[..r])?;
    let roots = poly_roots(&frobenius, options.root_tolerance)?;
    let mut rates = Vec::with_capacity(r);
    let mut notes = Vec::new();
    for z in &roots {
        if z.im.abs() <= options.imag_tolerance * (1.0 + z.re.abs()) {
            rates.push(z.re);
        } else if z.im > 0.0 {
            notes.push(format!("complex surplus root pair {:.6} ± {:.6}i mapped to real rates", z.re, z.im));
            rates.push(z.re - z.im);
            rates.push(z.re + z.im);
        }
    }
    rates.sort_by(f64::total_cmp);
    check_distinct(&rates, options.duplicate_tolerance)?;

    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let values: Vec<f64> = records.iter().map(|r| r.f_value).collect();
    let fit = exp_collocation_solve(&rates, &times, &values, false)?;
    let terms: Vec<Term> = fit
        .coefficients
        .iter()
        .zip(&rates)
        .map(|(&c, &alpha)| Term::new(c, alpha))
        .collect();
    let c_max = terms.iter().fold(0.0f64, |m, t| m.max(t.c.abs()));
    let threshold = options.zero_coefficient * c_max;
    let (significant, spurious): (Vec<Term>, Vec<Term>) =
        terms.iter().partition(|t| t.c.abs() > threshold);
    let spurious_ratio = spurious.iter().fold(0.0f64, |m, t| m.max(t.c.abs())) / c_max;

    let n_sig = significant.len();
    let mut pass = n_sig > 0;
    if let Some(n) = expected_terms {
        if n != n_sig {
            notes.push(format!("expected {n} significant terms, found {n_sig}"));
            pass = false;
        }
    }

    let mut independent = None;
    let mut max_relative_deviation = f64::NAN;
    if n_sig > 0 && records.len() >= 2 * n_sig {
        let reduced = RecoveryProblem::strict(n_sig, records.clone())?;
        let ind = recover(&reduced, options)?.model;
        max_relative_deviation = significant
            .iter()
            .zip(ind.terms())
            .map(|(a, b)| {
                let dc = (a.c - b.c).abs() / b.c.abs();
                let da = (a.alpha - b.alpha).abs() / b.alpha.abs();
                dc.max(da)
            })
            .fold(0.0, f64::max);
        if !(max_relative_deviation <= options.match_tolerance) {
            notes.push(format!(
                "significant terms deviate from the independent fit by {max_relative_deviation:.3e}"
            ));
            pass = false;
        }
        independent = Some(ind);
    } else {
        pass = false;
    }

    Ok(OverdeterminedReport {
        declared_terms: r,
        rank,
        terms,
        significant,
        spurious,
        spurious_ratio,
        independent,
        max_relative_deviation,
        pass,
        notes,
    })
}

/// Smallest singular value of the equilibrated collocation matrix relative
/// to the largest. Diagnostic only.
pub fn collocation_rcond(system: &CollocationSystem) -> Result<f64> {
    let (scaled, _) = system.matrix.equilibrate_columns();
    let svd = Svd::compute(&scaled)?;
    let min = svd.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(min / svd.sigma_max())
}

/// `f(t)` and `J₁..J_d` predicted by a model, for residual checks.
pub fn predicted_record(model: &ExpSumModel, t: f64, depth: usize) -> Result<SampleRecord> {
    checked_exp(0.0)?;
    SampleRecord::from_model(model, t, depth)
}
