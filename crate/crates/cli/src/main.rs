use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use expsum::calculus::{ingest_records, DenseSignal};
use expsum::io::{csv, json};
use expsum::recovery::{records_from_model, solve, verify_overdetermined, OverdeterminedReport};
use expsum::suite::{self, SuiteConfig};
use expsum::{generate, Error, ExpSumModel, GeneratorSpec, Mode, RecoveryOptions, RecoveryProblem, Result, SampleRecord};

/// Recover exponential sums from values and iterated integrals.
#[derive(Debug, Parser)]
#[command(name = "expsum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a seeded random model and write its exact records.
    Generate(GenerateArgs),
    /// Recover a model from records or an ingested dense signal.
    Recover(RecoverArgs),
    /// Check a model against records or a dense signal.
    Verify(VerifyArgs),
    /// Run the embedded property suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of exponential terms.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of uniformly spaced sample times in (0, t-max].
    #[arg(long, conflicts_with = "times")]
    points: Option<usize>,
    /// Explicit sample times, comma separated.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    t_max: f64,
    /// Integral depth of the records (default: n).
    #[arg(long)]
    depth: Option<usize>,
    /// Require f >= 0 on [0, t-max].
    #[arg(long)]
    nonneg: bool,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    rate_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    rate_max: f64,
    #[arg(long, default_value_t = 0.05)]
    zero_exclusion: f64,
    #[arg(long, default_value_t = 0.1)]
    min_separation: f64,
    #[arg(long, default_value_t = 0.1)]
    coeff_min: f64,
    #[arg(long, default_value_t = 5.0)]
    coeff_max: f64,
    /// Also write a dense `t,f` signal with this many grid points.
    #[arg(long)]
    dense_points: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    /// Records CSV with header t,f,J1..JN.
    #[arg(long, conflicts_with = "dense")]
    records: Option<PathBuf>,
    /// Dense t,f CSV; needs --ingest and sample times.
    #[arg(long)]
    dense: Option<PathBuf>,
    /// Build records from the dense signal by quadrature.
    #[arg(long, requires = "dense")]
    ingest: bool,
    /// Grid times to build records at, comma separated.
    #[arg(long, value_delimiter = ',', requires = "dense")]
    sample_times: Vec<f64>,
    /// Number of evenly spread grid times to build records at.
    #[arg(long, conflicts_with = "sample_times", requires = "dense")]
    sample_count: Option<usize>,
    /// Number of terms (with_constant: counting the constant). Inferred from
    /// the records header when omitted.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "strict")]
    mode: String,
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<f64>,
    #[command(flatten)]
    tuning: Tuning,
    /// Result JSON path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Tuning {
    /// JSON file with option overrides; flags win over the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    no_polish: bool,
    #[arg(long)]
    polish_iterations: Option<usize>,
    /// Greedy row selection when more records than unknowns are given.
    #[arg(long)]
    reselect: bool,
    #[arg(long)]
    pivot_tol: Option<f64>,
    #[arg(long)]
    root_tol: Option<f64>,
    #[arg(long)]
    imag_tol: Option<f64>,
    #[arg(long)]
    duplicate_tol: Option<f64>,
    #[arg(long)]
    cond_warning: Option<f64>,
    #[arg(long)]
    residual_warning: Option<f64>,
    #[arg(long)]
    zero_coefficient: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Model JSON or result JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, required_unless_present = "dense")]
    records: Option<PathBuf>,
    #[arg(long)]
    dense: Option<PathBuf>,
    /// Refit at this declared size and require the surplus terms to vanish.
    #[arg(long, requires = "records")]
    declared: Option<usize>,
    /// Relative tolerance of the reconstruction and held-out checks.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Relative tolerance between the model and the declared-size fit.
    #[arg(long, default_value_t = 1e-6)]
    match_tolerance: f64,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    /// Only N <= 3 and fewer cases.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Done,
    Checks(bool),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Generate(a) => cmd_generate(&a).map(|_| Outcome::Done),
        Command::Recover(a) => cmd_recover(&a).map(|_| Outcome::Done),
        Command::Verify(a) => cmd_verify(&a).map(Outcome::Checks),
        Command::Selftest(a) => Ok(Outcome::Checks(cmd_selftest(&a))),
    };
    match run {
        Ok(Outcome::Done) | Ok(Outcome::Checks(true)) => ExitCode::SUCCESS,
        Ok(Outcome::Checks(false)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let spec = GeneratorSpec {
        n_terms: a.n,
        rate_min: a.rate_min,
        rate_max: a.rate_max,
        zero_exclusion: a.zero_exclusion,
        min_rate_separation: a.min_separation,
        coeff_min: a.coeff_min,
        coeff_max: a.coeff_max,
        nonneg_required: a.nonneg,
        horizon: a.t_max,
        seed: a.seed,
        ..GeneratorSpec::default()
    };
    let times = match (a.points, a.times.is_empty()) {
        (Some(p), true) => {
            if p == 0 {
                return Err(invalid("--points must be >= 1"));
            }
            (1..=p).map(|i| a.t_max * i as f64 / p as f64).collect()
        }
        (None, false) => a.times.clone(),
        (None, true) => {
            let p = 2 * a.n;
            (1..=p).map(|i| a.t_max * i as f64 / p as f64).collect()
        }
        (Some(_), false) => unreachable!("clap rejects --points with --times"),
    };
    let model = generate(&spec)?;
    let records = records_from_model(&model, &times, a.depth.unwrap_or(a.n))?;

    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io(format!("{}: {e}", a.out_dir.display())))?;
    write_file(&a.out_dir.join("model.json"), &json::model_to_string(&model))?;
    csv::write_records(&a.out_dir.join("records.csv"), &records)?;
    if let Some(points) = a.dense_points {
        let signal = DenseSignal::from_model(&model, a.t_max, points)?;
        csv::write_dense(&a.out_dir.join("dense.csv"), &signal)?;
    }
    eprintln!(
        "wrote {} terms, {} records to {}",
        model.n_terms(),
        records.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn load_options(t: &Tuning) -> Result<RecoveryOptions> {
    let mut o = match &t.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        None => RecoveryOptions::default(),
    };
    if t.no_polish {
        o.polish = false;
    }
    if t.reselect {
        o.reselect_rows = true;
    }
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    if let Some(v) = t.polish_iterations {
        o.polish_iterations = v;
    }
    set(&mut o.pivot_tolerance, t.pivot_tol);
    set(&mut o.root_tolerance, t.root_tol);
    set(&mut o.imag_tolerance, t.imag_tol);
    set(&mut o.duplicate_tolerance, t.duplicate_tol);
    set(&mut o.cond_warning, t.cond_warning);
    set(&mut o.residual_warning, t.residual_warning);
    set(&mut o.zero_coefficient, t.zero_coefficient);
    for (name, v) in [
        ("pivot tolerance", o.pivot_tolerance),
        ("root tolerance", o.root_tolerance),
        ("imaginary tolerance", o.imag_tolerance),
        ("duplicate tolerance", o.duplicate_tolerance),
        ("zero-coefficient threshold", o.zero_coefficient),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    Ok(o)
}

/// Evenly spread grid times, excluding `t = 0`.
fn spread_grid_times(signal: &DenseSignal, count: usize) -> Result<Vec<f64>> {
    let last = signal.len() - 1;
    if count == 0 || count > last {
        return Err(invalid(format!(
            "--sample-count must be between 1 and {last} for this grid"
        )));
    }
    Ok((1..=count)
        .map(|i| signal.grid()[(i * last) / count])
        .collect())
}

fn load_records(a: &RecoverArgs, depth_needed: Option<usize>) -> Result<Vec<SampleRecord>> {
    match (&a.records, &a.dense) {
        (Some(path), None) => csv::read_records(path),
        (None, Some(path)) => {
            if !a.ingest {
                return Err(invalid("--dense needs --ingest"));
            }
            let depth = depth_needed.ok_or_else(|| invalid("--dense needs --n"))?;
            let signal = csv::read_dense(path)?;
            let times = match a.sample_count {
                Some(k) => spread_grid_times(&signal, k)?,
                None if a.sample_times.is_empty() => {
                    return Err(invalid("--ingest needs --sample-times or --sample-count"))
                }
                None => a.sample_times.clone(),
            };
            ingest_records(&signal, &times, depth)
        }
        (None, None) => Err(invalid("give --records or --dense")),
        (Some(_), Some(_)) => unreachable!("clap rejects --records with --dense"),
    }
}

fn cmd_recover(a: &RecoverArgs) -> Result<()> {
    let mode: Mode = a.mode.parse()?;
    let options = load_options(&a.tuning)?;
    if mode == Mode::Shifted && a.shift.is_none() {
        return Err(invalid("--mode shifted needs --shift"));
    }
    if mode != Mode::Shifted && a.shift.is_some() {
        return Err(invalid("--shift only applies to --mode shifted"));
    }
    let depth_for = |n: usize| match mode {
        Mode::WithConstant => n.saturating_sub(1),
        _ => n,
    };
    let records = load_records(a, a.n.map(depth_for))?;
    let n = match a.n {
        Some(n) => n,
        None => {
            let depth = records.iter().map(SampleRecord::depth).min().unwrap_or(0);
            match mode {
                Mode::WithConstant => depth + 1,
                _ => depth,
            }
        }
    };
    let problem = RecoveryProblem::new(n, records, mode, a.shift)?;

    let start = Instant::now();
    let result = solve(&problem, &options)?;
    let elapsed = start.elapsed().as_secs_f64();
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let doc = json::ResultDocument::from_result(&result, elapsed).to_json();
    match &a.out {
        Some(path) => write_file(path, &format!("{doc}\n")),
        None => {
            println!("{doc}");
            Ok(())
        }
    }
}

struct Check {
    name: String,
    pass: bool,
    measured: f64,
    tolerance: f64,
    note: String,
}

impl Check {
    fn print(&self) {
        println!(
            "[{}] {:<24} measured={:.3e} tol={:.1e}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            if self.note.is_empty() { String::new() } else { format!("  {}", self.note) }
        );
    }
}

/// Largest `|model − data| / max|data|` over f and every integral column.
fn record_residuals(model: &ExpSumModel, records: &[SampleRecord]) -> Result<(f64, String)> {
    let depth = records.iter().map(SampleRecord::depth).min().unwrap_or(0);
    let mut worst = (0.0f64, String::new());
    for col in 0..=depth {
        let data: Vec<f64> = records
            .iter()
            .map(|r| if col == 0 { r.f_value() } else { r.integral(col) })
            .collect();
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for (r, d) in records.iter().zip(&data) {
            let predicted = if col == 0 {
                model.evaluate(r.t())?
            } else {
                model.iterated_integral_exact(col, r.t())?
            };
            let rel = (predicted - d).abs() / scale;
            if !(rel <= worst.0) {
                let label = if col == 0 { "f".to_string() } else { format!("J{col}") };
                worst = (rel, format!("max residual {:.3e} in {label} at t = {}", (predicted - d).abs(), r.t()));
            }
        }
    }
    Ok(worst)
}

fn surplus_check(model: &ExpSumModel, report: &OverdeterminedReport, tol: f64) -> Check {
    let n = model.n_terms();
    let sorted = model.sorted_by_rate();
    let gap = if report.significant.len() == n {
        report
            .significant
            .iter()
            .zip(sorted.terms())
            .map(|(a, b)| ((a.c - b.c).abs() / b.c.abs()).max((a.alpha - b.alpha).abs() / b.alpha.abs()))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let pass = report.pass && gap <= tol;
    let mut note = format!(
        "declared {}, {} significant, spurious ratio {:.3e}",
        report.declared_terms,
        report.significant.len(),
        report.spurious_ratio
    );
    for extra in &report.notes {
        note.push_str("; ");
        note.push_str(extra);
    }
    Check {
        name: "surplus terms vanish".into(),
        pass,
        measured: gap,
        tolerance: tol,
        note,
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let model = json::read_model(&a.model)?;
    let mut options = load_options(&a.tuning)?;
    options.match_tolerance = a.match_tolerance;
    let mut checks = Vec::new();

    if let Some(path) = &a.records {
        let records = csv::read_records(path)?;
        let (worst, note) = record_residuals(&model, &records)?;
        checks.push(Check {
            name: "record reconstruction".into(),
            pass: worst <= a.tolerance,
            measured: worst,
            tolerance: a.tolerance,
            note,
        });
        if let Some(r) = a.declared {
            let problem = RecoveryProblem::strict(r, records)?;
            let report = verify_overdetermined(&problem, Some(model.n_terms()), &options)?;
            checks.push(surplus_check(&model, &report, a.match_tolerance));
        }
    }
    if let Some(path) = &a.dense {
        let signal = csv::read_dense(path)?;
        let scale = signal.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = (0.0f64, 0.0f64);
        for (t, f) in signal.grid().iter().zip(signal.values()) {
            let rel = (model.evaluate(*t)? - f).abs() / scale;
            if !(rel <= worst.0) {
                worst = (rel, *t);
            }
        }
        checks.push(Check {
            name: "held-out dense signal".into(),
            pass: worst.0 <= a.tolerance,
            measured: worst.0,
            tolerance: a.tolerance,
            note: format!("worst at t = {}", worst.1),
        });
    }

    for c in &checks {
        c.print();
    }
    let all = checks.iter().all(|c| c.pass);
    println!("{}", if all { "PASS" } else { "FAIL" });
    Ok(all)
}

fn cmd_selftest(a: &SelftestArgs) -> bool {
    let cfg = SuiteConfig {
        seed: a.seed,
        quick: a.quick,
    };
    let start = Instant::now();
    let reports = suite::run_all(&cfg);
    for r in &reports {
        println!("{r}");
    }
    let passed = reports.iter().filter(|r| r.pass()).count();
    println!(
        "{passed}/{} criteria passed in {:.2} s",
        reports.len(),
        start.elapsed().as_secs_f64()
    );
    passed == reports.len()
}
