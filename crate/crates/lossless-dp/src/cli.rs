//! Command-line surface: ledger releases, thresholded histogram runs,
//! factorized workload releases, privacy accounting, the statistical
//! batteries, and the variance-comparison experiment.
//!
//! Exit codes: 0 on success, 1 when the statistical suite rejects, 2 for
//! usage errors (bad flags, unreadable or malformed inputs, invalid
//! parameter values). The seed is taken from `--seed`, then the
//! `LOSSLESS_DP_SEED` environment variable, then 0; identical seed and
//! configuration produce byte-identical output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::account::{
    gaussian_sigma, multiple_release_budget, poisson_epsilon, poisson_epsilon_unit,
    zcdp_compose, Sensitivities,
};
use crate::error::{Error, Result};
use crate::experiment::{compare_protocols, log_grid, write_csv, Mode};
use crate::factorization::{FactorizedLedger, FactorizedQuery};
use crate::hist::{EfficientHistogramRelease, Histogram, NaiveHistogramRelease};
use crate::ledger::Ledger;
use crate::noise::Mechanism;
use crate::rng::root;
use crate::suite::{run_suite, SuiteScale};

/// Seed fallback environment variable.
pub const SEED_ENV: &str = "LOSSLESS_DP_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "lossless-dp",
    version,
    about = "Release the same query at many privacy levels, paying only for the strongest"
)]
struct Cli {
    /// RNG seed (fallback: LOSSLESS_DP_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; each subcommand has a natural default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Append one release to a JSON ledger and print it.
    Release(ReleaseArgs),
    /// Run a multi-round thresholded release of a sparse histogram.
    Histogram(HistogramArgs),
    /// Answer a factorized workload at one or more privacy levels.
    FactRelease(FactReleaseArgs),
    /// Privacy accounting queries.
    Account(AccountArgs),
    /// Run the statistical invariant batteries; exits 1 on any failure.
    Suite(SuiteArgs),
    /// Compare repeated-release variance against independent fresh releases.
    Fig2(Fig2Args),
}

#[derive(Args, Debug)]
struct ReleaseArgs {
    /// Ledger file; created when missing if --mechanism is given.
    #[arg(long)]
    ledger: PathBuf,
    /// Privacy level of the new release.
    #[arg(long)]
    rho: f64,
    /// Noise family for a new ledger.
    #[arg(long)]
    mechanism: Option<String>,
    /// Sensitivity for a new ledger.
    #[arg(long, default_value_t = 1.0)]
    sensitivity: f64,
    /// Exact query value(s) for a new ledger, comma separated.
    #[arg(long, value_delimiter = ',')]
    secret: Vec<f64>,
    /// Budget cap for a new ledger ("infinity" allowed for gaussian).
    #[arg(long, default_value = "infinity")]
    rho_inf: String,
}

#[derive(Args, Debug)]
struct HistogramArgs {
    /// Histogram file: .json sparse document or .csv "index,count" rows.
    #[arg(long)]
    input: PathBuf,
    /// Dimension (required for CSV input; JSON carries its own).
    #[arg(long)]
    dimension: Option<usize>,
    /// Per-round budgets, strictly increasing, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<f64>,
    /// Per-round thresholds, comma separated, same length as budgets.
    #[arg(long, value_delimiter = ',', required = true)]
    thresholds: Vec<f64>,
    /// Sensitivity of the histogram counts.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Which release algorithm to run.
    #[arg(long, value_enum, default_value_t = HistAlgorithm::Efficient)]
    algorithm: HistAlgorithm,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum HistAlgorithm {
    Efficient,
    Naive,
}

#[derive(Args, Debug)]
struct FactReleaseArgs {
    /// JSON file {"L": [[...]], "R": [[...]]}, row-major.
    #[arg(long, conflicts_with_all = ["left", "right"])]
    matrices: Option<PathBuf>,
    /// CSV file holding the left factor (one row per line).
    #[arg(long, requires = "right")]
    left: Option<PathBuf>,
    /// CSV file holding the right factor.
    #[arg(long, requires = "left")]
    right: Option<PathBuf>,
    /// Data vector the workload is applied to, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    data: Vec<f64>,
    /// Privacy level(s) to answer at, comma separated, in request order.
    #[arg(long, value_delimiter = ',', required = true)]
    rho: Vec<f64>,
}

#[derive(Args, Debug)]
struct AccountArgs {
    #[command(subcommand)]
    query: AccountCommand,
}

#[derive(Subcommand, Debug)]
enum AccountCommand {
    /// Total budget of independent releases (the sum).
    Compose {
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<f64>,
    },
    /// Budget consumed by any subset of one ledger's releases (the max).
    Max {
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<f64>,
    },
    /// Gaussian noise standard deviation for a budget and sensitivity.
    Sigma {
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        sensitivity: f64,
    },
    /// Approximate-DP epsilon of Poisson-noised counts.
    PoissonEpsilon {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        d: u64,
        /// Use the unit-sensitivity simplified bound.
        #[arg(long)]
        unit: bool,
        #[arg(long, default_value_t = 1.0)]
        l1: f64,
        #[arg(long, default_value_t = 1.0)]
        l2: f64,
        #[arg(long, default_value_t = 1.0)]
        linf: f64,
    },
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Reduced sample sizes (10^4 instead of 10^5).
    #[arg(long)]
    quick: bool,
}

#[derive(Args, Debug)]
struct Fig2Args {
    /// Repetitions per grid point.
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    /// Log-spaced budget grid as lo:hi:n.
    #[arg(long, value_parser = parse_grid, default_value = "0.001:5:20")]
    grid_log: GridSpec,
    /// Sensitivity of the released value.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Restrict output to one mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Lossless,
    Independent,
}

/// A parsed log-spaced budget grid.
#[derive(Clone, Debug)]
struct GridSpec(Vec<f64>);

fn parse_grid(text: &str) -> std::result::Result<GridSpec, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{text}' must be lo:hi:n"));
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("bad grid lower bound: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("bad grid upper bound: {e}"))?;
    let n: usize = parts[2].parse().map_err(|e| format!("bad grid size: {e}"))?;
    log_grid(lo, hi, n).map(GridSpec).map_err(|e| e.to_string())
}

/// Parses flags, runs one subcommand, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // Keep --help/--version on stdout with exit 0; usage errors
            // print to stderr and exit 2 (clap's own convention).
            return err.exit_code_after_print();
        }
    };
    let seed = match resolve_seed(cli.seed) {
        Ok(seed) => seed,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    let mut sink = Vec::new();
    let code = match execute(&cli, seed, &mut sink) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    };
    if !sink.is_empty() {
        if let Err(err) = deliver(cli.out.as_deref(), &sink) {
            eprintln!("error: {err}");
            return 2;
        }
    }
    code
}

trait ClapErrorExt {
    fn exit_code_after_print(self) -> i32;
}

impl ClapErrorExt for clap::Error {
    fn exit_code_after_print(self) -> i32 {
        let code = if self.use_stderr() { 2 } else { 0 };
        let _ = self.print();
        code
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer, got '{text}'"))),
        Err(_) => Ok(0),
    }
}

fn deliver(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(bytes)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli, seed: u64, out: &mut Vec<u8>) -> Result<i32> {
    match &cli.command {
        Command::Release(args) => cmd_release(args, seed, cli.format, out),
        Command::Histogram(args) => cmd_histogram(args, seed, cli.format, out),
        Command::FactRelease(args) => cmd_fact_release(args, seed, cli.format, out),
        Command::Account(args) => cmd_account(args, cli.format, out),
        Command::Suite(args) => cmd_suite(args, seed, cli.format, out),
        Command::Fig2(args) => cmd_fig2(args, seed, cli.format, out),
    }
}

#[derive(Serialize)]
struct ReleaseDoc {
    rho: f64,
    value: Vec<f64>,
}

fn cmd_release(
    args: &ReleaseArgs,
    seed: u64,
    format: Option<Format>,
    out: &mut Vec<u8>,
) -> Result<i32> {
    let mut rng = root(seed);
    let mut ledger = if args.ledger.exists() {
        Ledger::load_file(&args.ledger)?
    } else {
        let mechanism = match &args.mechanism {
            Some(name) => Mechanism::from_name(name)?,
            None => {
                return Err(Error::invalid(format!(
                    "ledger file {} does not exist; pass --mechanism (and --secret) to create it",
                    args.ledger.display()
                )))
            }
        };
        if args.secret.is_empty() {
            return Err(Error::invalid("a new ledger needs at least one --secret value"));
        }
        match parse_rho_inf(&args.rho_inf)? {
            None => Ledger::new_unbounded(mechanism, args.sensitivity, args.secret.clone())?,
            Some(cap) => {
                Ledger::new_bounded(mechanism, args.sensitivity, cap, args.secret.clone(), &mut rng)?
            }
        }
    };
    let release = ledger.release(args.rho, &mut rng)?;
    ledger.save_file(&args.ledger, ledger.has_secret())?;
    match format.unwrap_or(Format::Json) {
        Format::Json => {
            let doc = ReleaseDoc { rho: release.rho, value: release.value.clone() };
            out.extend_from_slice(serde_json::to_string_pretty(&doc)?.as_bytes());
            out.push(b'\n');
        }
        Format::Csv => {
            out.extend_from_slice(b"rho,index,value\n");
            for (i, v) in release.value.iter().enumerate() {
                out.extend_from_slice(format!("{},{},{}\n", release.rho, i, v).as_bytes());
            }
        }
    }
    Ok(0)
}

fn parse_rho_inf(text: &str) -> Result<Option<f64>> {
    let trimmed = text.trim();
    if trimmed.eq_ignore_ascii_case("infinity") || trimmed.eq_ignore_ascii_case("inf") {
        return Ok(None);
    }
    let cap: f64 = trimmed
        .parse()
        .map_err(|_| Error::invalid(format!("budget cap '{text}' is not a number or 'infinity'")))?;
    Ok(Some(cap))
}

#[derive(Deserialize)]
struct SparseHistogramDoc {
    d: usize,
    #[serde(default)]
    counts: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct HistogramRunDoc {
    rounds: Vec<HistogramRoundDoc>,
    manifest: HistogramManifest,
}

#[derive(Serialize)]
struct HistogramRoundDoc {
    rho: f64,
    tau: f64,
    released: BTreeMap<usize, f64>,
}

#[derive(Serialize)]
struct HistogramManifest {
    algorithm: &'static str,
    dimension: usize,
    delta: f64,
    budgets: Vec<f64>,
    thresholds: Vec<f64>,
    seed: u64,
    gaussian_draws: u64,
}

fn load_histogram(path: &Path, dimension: Option<usize>) -> Result<Histogram> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    if is_json {
        let doc: SparseHistogramDoc = serde_json::from_str(&text)?;
        let entries = doc
            .counts
            .iter()
            .map(|(k, &v)| {
                let index: usize = k
                    .parse()
                    .map_err(|_| Error::invalid(format!("bucket key '{k}' is not an index")))?;
                Ok((index, v))
            })
            .collect::<Result<Vec<_>>>()?;
        return Histogram::new(doc.d, entries);
    }
    let dimension = dimension.ok_or_else(|| {
        Error::invalid("--dimension is required for CSV histogram input")
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("index,count")) {
            continue;
        }
        let (idx, cnt) = line.split_once(',').ok_or_else(|| {
            Error::invalid(format!("line {} is not 'index,count': '{line}'", lineno + 1))
        })?;
        let index: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad index '{idx}' on line {}", lineno + 1)))?;
        let count: f64 = cnt
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad count '{cnt}' on line {}", lineno + 1)))?;
        entries.push((index, count));
    }
    Histogram::new(dimension, entries)
}

fn cmd_histogram(
    args: &HistogramArgs,
    seed: u64,
    format: Option<Format>,
    out: &mut Vec<u8>,
) -> Result<i32> {
    if args.budgets.len() != args.thresholds.len() {
        return Err(Error::invalid(format!(
            "{} budgets but {} thresholds",
            args.budgets.len(),
            args.thresholds.len()
        )));
    }
    let histogram = load_histogram(&args.input, args.dimension)?;
    let dimension = histogram.dimension();
    let mut rng = root(seed);
    let mut rounds = Vec::with_capacity(args.budgets.len());
    let gaussian_draws;
    let algorithm;
    match args.algorithm {
        HistAlgorithm::Efficient => {
            algorithm = "efficient";
            let mut release = EfficientHistogramRelease::new(histogram, args.delta)?;
            for (&rho, &tau) in args.budgets.iter().zip(&args.thresholds) {
                let released = release.release(rho, tau, &mut rng)?;
                rounds.push(HistogramRoundDoc {
                    rho,
                    tau,
                    released: released.into_iter().collect(),
                });
            }
            gaussian_draws = release.gaussian_draws();
        }
        HistAlgorithm::Naive => {
            algorithm = "naive";
            let mut release = NaiveHistogramRelease::new(&histogram, args.delta)?;
            for (&rho, &tau) in args.budgets.iter().zip(&args.thresholds) {
                let dense = release.release(rho, tau, &mut rng)?;
                rounds.push(HistogramRoundDoc {
                    rho,
                    tau,
                    released: dense
                        .into_iter()
                        .enumerate()
                        .filter(|(_, v)| *v != 0.0)
                        .collect(),
                });
            }
            gaussian_draws = (dimension * args.budgets.len()) as u64;
        }
    }
    let doc = HistogramRunDoc {
        rounds,
        manifest: HistogramManifest {
            algorithm,
            dimension,
            delta: args.delta,
            budgets: args.budgets.clone(),
            thresholds: args.thresholds.clone(),
            seed,
            gaussian_draws,
        },
    };
    match format.unwrap_or(Format::Json) {
        Format::Json => {
            out.extend_from_slice(serde_json::to_string_pretty(&doc)?.as_bytes());
            out.push(b'\n');
        }
        Format::Csv => {
            out.extend_from_slice(b"round,rho,tau,index,value\n");
            for (r, round) in doc.rounds.iter().enumerate() {
                for (&index, &value) in &round.released {
                    out.extend_from_slice(
                        format!("{},{},{},{},{}\n", r + 1, round.rho, round.tau, index, value)
                            .as_bytes(),
                    );
                }
            }
        }
    }
    Ok(0)
}

#[derive(Deserialize)]
struct MatrixPairDoc {
    #[serde(rename = "L")]
    left: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    right: Vec<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::invalid(format!("{what} matrix is empty")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(format!("{what} matrix rows have uneven lengths")));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn load_matrix_csv(path: &Path, what: &str) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::invalid(format!(
                        "{what} matrix line {}: '{cell}' is not a number",
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    matrix_from_rows(&rows, what)
}

#[derive(Serialize)]
struct FactReleaseRunDoc {
    releases: Vec<ReleaseDoc>,
}

fn cmd_fact_release(
    args: &FactReleaseArgs,
    seed: u64,
    format: Option<Format>,
    out: &mut Vec<u8>,
) -> Result<i32> {
    let query = match (&args.matrices, &args.left, &args.right) {
        (Some(path), None, None) => {
            let text = std::fs::read_to_string(path)?;
            let doc: MatrixPairDoc = serde_json::from_str(&text)?;
            FactorizedQuery::new(
                matrix_from_rows(&doc.left, "left")?,
                matrix_from_rows(&doc.right, "right")?,
            )?
        }
        (None, Some(left), Some(right)) => FactorizedQuery::new(
            load_matrix_csv(left, "left")?,
            load_matrix_csv(right, "right")?,
        )?,
        _ => {
            return Err(Error::invalid(
                "pass either --matrices file.json or both --left and --right CSV files",
            ))
        }
    };
    let mut ledger = FactorizedLedger::new(query, &args.data)?;
    let mut rng = root(seed);
    let mut releases = Vec::with_capacity(args.rho.len());
    for &rho in &args.rho {
        let value = ledger.release(rho, &mut rng)?;
        releases.push(ReleaseDoc { rho, value });
    }
    match format.unwrap_or(Format::Csv) {
        Format::Json => {
            let doc = FactReleaseRunDoc { releases };
            out.extend_from_slice(serde_json::to_string_pretty(&doc)?.as_bytes());
            out.push(b'\n');
        }
        Format::Csv => {
            out.extend_from_slice(b"rho,index,value\n");
            for release in &releases {
                for (i, v) in release.value.iter().enumerate() {
                    out.extend_from_slice(format!("{},{},{}\n", release.rho, i, v).as_bytes());
                }
            }
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct AccountDoc {
    quantity: &'static str,
    value: f64,
}

fn cmd_account(args: &AccountArgs, format: Option<Format>, out: &mut Vec<u8>) -> Result<i32> {
    let (quantity, value) = match &args.query {
        AccountCommand::Compose { budgets } => ("compose", zcdp_compose(budgets)?),
        AccountCommand::Max { budgets } => ("max", multiple_release_budget(budgets)?),
        AccountCommand::Sigma { rho, sensitivity } => ("sigma", gaussian_sigma(*rho, *sensitivity)?),
        AccountCommand::PoissonEpsilon {
            lambda,
            delta,
            d,
            unit,
            l1,
            l2,
            linf,
        } => {
            let eps = if *unit {
                poisson_epsilon_unit(*lambda, *delta, *d)?
            } else {
                poisson_epsilon(*lambda, *delta, *d, Sensitivities { l1: *l1, l2: *l2, linf: *linf })?
            };
            ("poisson_epsilon", eps)
        }
    };
    match format.unwrap_or(Format::Csv) {
        Format::Json => {
            out.extend_from_slice(serde_json::to_string(&AccountDoc { quantity, value })?.as_bytes());
            out.push(b'\n');
        }
        Format::Csv => {
            out.extend_from_slice(b"quantity,value\n");
            out.extend_from_slice(format!("{quantity},{value}\n").as_bytes());
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct SuiteDoc<'a> {
    passed: bool,
    checks: &'a [crate::suite::CheckOutcome],
}

fn cmd_suite(args: &SuiteArgs, seed: u64, format: Option<Format>, out: &mut Vec<u8>) -> Result<i32> {
    let scale = if args.quick { SuiteScale::Quick } else { SuiteScale::Full };
    let report = run_suite(scale, seed);
    match format.unwrap_or(Format::Csv) {
        Format::Json => {
            let doc = SuiteDoc { passed: report.all_passed(), checks: &report.checks };
            out.extend_from_slice(serde_json::to_string_pretty(&doc)?.as_bytes());
            out.push(b'\n');
        }
        Format::Csv => {
            for check in &report.checks {
                let status = if check.passed { "PASS" } else { "FAIL" };
                out.extend_from_slice(
                    format!("{status} {} ({})\n", check.name, check.detail).as_bytes(),
                );
            }
            let status = if report.all_passed() { "PASS" } else { "FAIL" };
            out.extend_from_slice(
                format!("{status} {}/{} checks\n", report.checks.iter().filter(|c| c.passed).count(), report.checks.len())
                    .as_bytes(),
            );
        }
    }
    Ok(if report.all_passed() { 0 } else { 1 })
}

fn cmd_fig2(args: &Fig2Args, seed: u64, format: Option<Format>, out: &mut Vec<u8>) -> Result<i32> {
    let points = compare_protocols(&args.grid_log.0, args.delta, args.reps, seed)?;
    let points: Vec<_> = points
        .into_iter()
        .filter(|p| match args.mode {
            None => true,
            Some(ModeArg::Lossless) => p.mode == Mode::Lossless,
            Some(ModeArg::Independent) => p.mode == Mode::Independent,
        })
        .collect();
    match format.unwrap_or(Format::Csv) {
        Format::Csv => write_csv(&points, &mut *out)?,
        Format::Json => {
            out.extend_from_slice(serde_json::to_string_pretty(&points)?.as_bytes());
            out.push(b'\n');
        }
    }
    Ok(0)
}
