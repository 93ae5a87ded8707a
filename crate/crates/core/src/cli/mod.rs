//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 divergence guard, 3 iteration
//! limit, 4 measured order off by more than 0.1, 5 too few asymptotic steps.

mod trace_file;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

pub use trace_file::{
    full_decimal, ConfigRecord, ProblemRecord, StepRecord, TraceFileError, TraceRecordFile,
    DELTA_DIGITS, SCHEMA_VERSION,
};

use crate::analysis::{error_constant_report, estimate_order, AnalysisError};
use crate::coeffs::{build_coefficients, build_polynomial, CoefficientSet, DomainError, OrderParameter, RootProblem};
use crate::engine::{
    iterate, newton_iterate, BigFloat, EngineError, IterationConfig, IterationTrace,
    TerminationReason,
};
use crate::exactpoly::{format_rational, parse_rational, Rational};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_MAX_ITERATIONS: i32 = 3;
pub const EXIT_ORDER_MISMATCH: i32 = 4;
pub const EXIT_INSUFFICIENT: i32 = 5;

/// Largest allowed `|measured order − (P+1)|` for `analyze` to succeed.
pub const ORDER_TOLERANCE: f64 = 0.1;
/// Iterates in table mode show at most this many significant digits.
pub const TABLE_DIGITS: u64 = 50;
/// Digits per line in `--digits-out` files.
pub const DIGITS_PER_LINE: usize = 80;

#[derive(Debug, Parser)]
#[command(name = "polyroot", version, about = "Arbitrary-precision M-th roots by fixed-point polynomial iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a^(1/M) to the requested number of digits
    Compute(ComputeArgs),
    /// Print the exact coefficients of the fixed-point polynomial
    Coeffs(CoeffsArgs),
    /// Measure convergence order and error constant of a trace
    Analyze(AnalyzeArgs),
    /// Compare iteration counts and timings across orders and Newton
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Radicand as `num/den`, an integer or a decimal
    #[arg(long, value_parser = parse_radicand, allow_hyphen_values = true)]
    a: Rational,
    /// Root index
    #[arg(long)]
    m: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ComputeFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoeffsFormat {
    Human,
    Json,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Order parameter; convergence order is P + 1
    #[arg(long)]
    p: u32,
    /// Target number of correct digits
    #[arg(long)]
    digits: u64,
    /// Seed (defaults to a double-precision estimate of the root)
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Stop once |x_n − x_(n−1)| < 10^(−E); defaults to --digits
    #[arg(long = "epsilon-exp")]
    epsilon_exp: Option<i64>,
    #[arg(long = "max-iters")]
    max_iters: Option<u32>,
    /// Run every step at full precision
    #[arg(long = "no-ramping")]
    no_ramping: bool,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Write a JSON trace record here
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the root as plain text, 80 digits per line, instead of printing it
    #[arg(long = "digits-out")]
    digits_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: ComputeFormat,
}

#[derive(Debug, Args)]
struct CoeffsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    p: u32,
    #[arg(long, value_enum, default_value = "human")]
    format: CoeffsFormat,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Trace record written by `compute --trace`
    #[arg(long, conflicts_with_all = ["a", "m", "p", "digits", "x0", "no_ramping"])]
    trace: Option<PathBuf>,
    #[arg(long, value_parser = parse_radicand, allow_hyphen_values = true, requires_all = ["m", "p", "digits"])]
    a: Option<Rational>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    digits: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long = "no-ramping")]
    no_ramping: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    digits: u64,
    /// Comma-separated order parameters, e.g. 1,3,7
    #[arg(long = "p-list", value_delimiter = ',', required = true, num_args = 1..)]
    p_list: Vec<u32>,
    /// Add a Newton row
    #[arg(long)]
    newton: bool,
    /// Runs per configuration; the fastest time is reported
    #[arg(long, default_value_t = 1)]
    repeat: u32,
}

fn parse_radicand(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    TraceFile(#[from] TraceFileError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("output failed: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(AnalysisError::InsufficientAsymptoticSteps { .. }) => EXIT_INSUFFICIENT,
            _ => EXIT_INVALID,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Regular output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INVALID
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Compute(args) => cmd_compute(&args, out),
        Command::Coeffs(args) => cmd_coeffs(&args, out),
        Command::Analyze(args) => cmd_analyze(&args, out),
        Command::Bench(args) => cmd_bench(&args, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

struct Run {
    problem: RootProblem,
    order: OrderParameter,
    config: IterationConfig,
}

fn prepare(args: &RunArgs) -> Result<Run, CliError> {
    let problem = RootProblem::new(args.problem.a.clone(), args.problem.m)?;
    let order = OrderParameter::new(args.p)?;
    if args.digits == 0 {
        return Err(CliError::Usage("--digits must be positive".into()));
    }
    let mut config = IterationConfig::new(args.digits).with_ramping(!args.no_ramping);
    if let Some(e) = args.epsilon_exp {
        config = config.with_epsilon_exponent(e);
    }
    if let Some(n) = args.max_iters {
        config = config.with_max_iterations(n);
    }
    if let Some(text) = &args.x0 {
        let seed = BigFloat::parse(text, config.working_bits())
            .map_err(|_| CliError::Usage(format!("invalid --x0 `{text}`")))?;
        config = config.with_seed(seed);
    }
    config.validate()?;
    Ok(Run {
        problem,
        order,
        config,
    })
}

fn exit_code_for(termination: TerminationReason) -> i32 {
    match termination {
        TerminationReason::EpsilonMet => EXIT_OK,
        TerminationReason::DivergenceGuard => EXIT_DIVERGED,
        TerminationReason::MaxIterations => EXIT_MAX_ITERATIONS,
    }
}

/// `floor(log10 |v|)`, or `None` for zero.
fn decimal_exponent(v: &BigFloat) -> Option<i64> {
    (!v.is_zero()).then(|| v.decimal_digits(1).1)
}

fn format_exponent(v: &BigFloat) -> String {
    decimal_exponent(v).map_or_else(|| "exact".to_string(), |e| e.to_string())
}

/// `x` as printed in step tables.
pub fn table_x(x: &BigFloat, digits: u64) -> String {
    x.to_significant(digits.min(TABLE_DIGITS) as usize)
}

fn write_table(
    out: &mut dyn Write,
    trace: &IterationTrace,
    cs: &CoefficientSet,
    config: &IterationConfig,
) -> std::io::Result<()> {
    let order = cs.order();
    writeln!(
        out,
        "{}, P = {} (order {}), {} digits",
        trace.problem,
        order.get(),
        order.convergence_order(),
        config.target_digits
    )?;
    writeln!(out, "F(x) = {}", build_polynomial(cs))?;
    for step in &trace.steps {
        let x = table_x(&step.x, config.target_digits);
        match &step.delta {
            None => writeln!(out, "step {:>3}  x = {x}", step.n)?,
            Some(d) => writeln!(
                out,
                "step {:>3}  x = {x}  |x_n - x_(n-1)| = {}  ({} bits)",
                step.n,
                d.to_scientific(DELTA_DIGITS),
                step.precision_bits
            )?,
        }
    }
    writeln!(
        out,
        "termination: {} after {} iterations",
        trace.termination,
        trace.iterations()
    )?;
    writeln!(out, "residual |x^M - a| = {}", trace.residual.to_scientific(3))
}

/// Root as plain text: integer part and point on the first line, then the
/// fraction wrapped at 80 digits per line.
pub fn digits_file_text(x: &BigFloat, digits: u64) -> String {
    let fixed = x.to_fixed(digits as usize);
    let (int, frac) = fixed.split_once('.').unwrap_or((&fixed, ""));
    let mut text = format!("{int}.");
    for (i, chunk) in frac.as_bytes().chunks(DIGITS_PER_LINE).enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(std::str::from_utf8(chunk).expect("ascii digits"));
    }
    text.push('\n');
    text
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| {
        TraceFileError::Write {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn cmd_compute(args: &ComputeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let run = prepare(&args.run)?;
    let cs = build_coefficients(&run.problem, run.order);
    let start = Instant::now();
    let trace = iterate(&run.problem, run.order, &run.config)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let record = TraceRecordFile::from_trace(&trace, run.order, &run.config, wall_time_ms);

    if let Some(path) = &args.trace {
        record.write(path)?;
    }
    match args.format {
        ComputeFormat::Json => writeln!(out, "{}", record.to_json())?,
        ComputeFormat::Table => {
            write_table(out, &trace, &cs, &run.config)?;
            writeln!(out, "wall time: {wall_time_ms:.1} ms")?;
        }
    }
    let fixed = trace.final_x().to_fixed(run.config.target_digits as usize);
    if !trace.converged {
        // an unconverged iterate is not a root; never write it as one
        if args.format == ComputeFormat::Table {
            writeln!(out, "last x = {fixed}")?;
        }
    } else if let Some(path) = &args.digits_out {
        write_file(path, &digits_file_text(trace.final_x(), run.config.target_digits))?;
        if args.format == ComputeFormat::Table {
            writeln!(out, "root written to {}", path.display())?;
        }
    } else if args.format == ComputeFormat::Table {
        writeln!(out, "root = {fixed}")?;
    }
    Ok(exit_code_for(trace.termination))
}

#[derive(Serialize)]
struct CoefficientJson {
    k: u32,
    exponent: u32,
    c: String,
}

#[derive(Serialize)]
struct CoeffsJson {
    a: String,
    #[serde(rename = "M")]
    m: u32,
    #[serde(rename = "P")]
    p: u32,
    prefactor: String,
    coefficients: Vec<CoefficientJson>,
    polynomial: String,
}

fn cmd_coeffs(args: &CoeffsArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cs = CoefficientSet::new(args.problem.a.clone(), args.problem.m, args.p)?;
    let polynomial = build_polynomial(&cs).to_string();
    match args.format {
        CoeffsFormat::Human => {
            writeln!(
                out,
                "{}, P = {} (order {})",
                cs.problem(),
                args.p,
                cs.order().convergence_order()
            )?;
            writeln!(out, "prefactor = {}", format_rational(cs.prefactor()))?;
            writeln!(out, "{:>3}  {:>8}  c_k", "k", "exponent")?;
            for (k, (c, e)) in cs.coefficients().iter().zip(cs.exponents()).enumerate() {
                writeln!(out, "{k:>3}  {e:>8}  {}", format_rational(c))?;
            }
            writeln!(out, "F(x) = {polynomial}")?;
        }
        CoeffsFormat::Json => {
            let json = CoeffsJson {
                a: format_rational(cs.problem().radicand()),
                m: args.problem.m,
                p: args.p,
                prefactor: format_rational(cs.prefactor()),
                coefficients: cs
                    .coefficients()
                    .iter()
                    .zip(cs.exponents())
                    .enumerate()
                    .map(|(k, (c, &exponent))| CoefficientJson {
                        k: k as u32,
                        exponent,
                        c: format_rational(c),
                    })
                    .collect(),
                polynomial,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&json).expect("serializable"))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (trace, cs, digits) = if let Some(path) = &args.trace {
        let record = TraceRecordFile::read(path)?;
        let trace = record.to_trace()?;
        let cs = build_coefficients(&trace.problem, record.order()?);
        (trace, cs, record.config.target_digits)
    } else {
        let (Some(a), Some(m), Some(p), Some(digits)) = (&args.a, args.m, args.p, args.digits) else {
            return Err(CliError::Usage(
                "analyze needs --trace or all of --a, --m, --p and --digits".into(),
            ));
        };
        let run = prepare(&RunArgs {
            problem: ProblemArgs { a: a.clone(), m },
            p,
            digits,
            x0: args.x0.clone(),
            epsilon_exp: None,
            max_iters: None,
            no_ramping: args.no_ramping,
        })?;
        let trace = iterate(&run.problem, run.order, &run.config)?;
        (trace, build_coefficients(&run.problem, run.order), digits)
    };

    writeln!(
        out,
        "{}, P = {}: {} iterations, {}",
        trace.problem,
        cs.order().get(),
        trace.iterations(),
        trace.termination
    )?;
    let estimate = estimate_order(&trace)?;
    writeln!(out, "{estimate}")?;
    let report = error_constant_report(&trace, &cs, digits)?;
    writeln!(out, "{report}")?;
    Ok(if estimate.deviation() <= ORDER_TOLERANCE {
        EXIT_OK
    } else {
        EXIT_ORDER_MISMATCH
    })
}

struct BenchRow {
    label: String,
    iterations: usize,
    wall_time_ms: f64,
    residual: BigFloat,
    termination: TerminationReason,
}

fn timed<F>(repeat: u32, mut f: F) -> Result<(IterationTrace, f64), CliError>
where
    F: FnMut() -> Result<IterationTrace, EngineError>,
{
    let mut best: Option<(IterationTrace, f64)> = None;
    for _ in 0..repeat.max(1) {
        let start = Instant::now();
        let trace = f()?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        if best.as_ref().is_none_or(|(_, b)| ms < *b) {
            best = Some((trace, ms));
        }
    }
    Ok(best.expect("at least one run"))
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let problem = RootProblem::new(args.problem.a.clone(), args.problem.m)?;
    if args.digits == 0 {
        return Err(CliError::Usage("--digits must be positive".into()));
    }
    let orders = args
        .p_list
        .iter()
        .map(|&p| OrderParameter::new(p))
        .collect::<Result<Vec<_>, _>>()?;
    let config = IterationConfig::new(args.digits);

    let mut rows = Vec::new();
    for order in orders {
        let (trace, ms) = timed(args.repeat, || iterate(&problem, order, &config))?;
        rows.push(BenchRow {
            label: format!("P={}", order.get()),
            iterations: trace.iterations(),
            wall_time_ms: ms,
            residual: trace.residual,
            termination: trace.termination,
        });
    }
    if args.newton {
        let (trace, ms) = timed(args.repeat, || newton_iterate(&problem, &config))?;
        rows.push(BenchRow {
            label: "newton".into(),
            iterations: trace.iterations(),
            wall_time_ms: ms,
            residual: trace.residual,
            termination: trace.termination,
        });
    }

    writeln!(out, "{problem}, {} digits", args.digits)?;
    writeln!(
        out,
        "{:<8} {:>10} {:>14} {:>13}  termination",
        "method", "iterations", "wall_time_ms", "residual_exp"
    )?;
    for row in &rows {
        writeln!(
            out,
            "{:<8} {:>10} {:>14.3} {:>13}  {}",
            row.label,
            row.iterations,
            row.wall_time_ms,
            format_exponent(&row.residual),
            row.termination
        )?;
    }
    let worst = rows
        .iter()
        .map(|r| exit_code_for(r.termination))
        .max()
        .unwrap_or(EXIT_OK);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("polyroot").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn digits_file_wraps_at_eighty() {
        let x = BigFloat::parse("1.41421356237309504880168872420969807856967187537694807317667973799", 1000)
            .unwrap();
        let text = digits_file_text(&x, 170);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("1.4142135623"));
        assert_eq!(lines[0].len(), 2 + 80);
        assert_eq!(lines[1].len(), 80);
        assert_eq!(lines[2].len(), 10);
    }

    #[test]
    fn table_x_caps_digits() {
        let x = BigFloat::parse("2.154434690031883721759293566519350495259", 400).unwrap();
        assert_eq!(table_x(&x, 10), "2.154434690");
        assert_eq!(table_x(&x, 1000).len(), 51);
    }

    #[test]
    fn help_and_usage_errors() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("compute"));
        let (code, _, err) = run_capture(&["compute", "--a", "2"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(!err.is_empty());
        let (code, _, _) = run_capture(&["frobnicate"]);
        assert_eq!(code, EXIT_INVALID);
    }

    #[test]
    fn domain_errors_exit_one() {
        for args in [
            ["compute", "--a", "-2", "--m", "2", "--p", "1", "--digits", "10"],
            ["compute", "--a", "0", "--m", "2", "--p", "1", "--digits", "10"],
            ["compute", "--a", "2", "--m", "0", "--p", "1", "--digits", "10"],
            ["compute", "--a", "2", "--m", "2", "--p", "0", "--digits", "10"],
            ["compute", "--a", "2", "--m", "2", "--p", "1", "--digits", "0"],
        ] {
            let (code, _, err) = run_capture(&args);
            assert_eq!(code, EXIT_INVALID, "{args:?}: {err}");
        }
    }
}
