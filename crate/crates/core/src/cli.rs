//! The `otrank` command-line interface.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::engine::{CriticalValueCache, CriticalValueKey, RankTest, TestKind, TestResult};
use crate::error::{Error, Result};
use crate::grids::{build_grid, default_discretization_size, factorization_profile, optimal_factorization, Factorization, Grid, ReferenceKind};
use crate::io::{assignment_csv, ranks_csv, read_dataset_csv, read_text, scores_csv, write_atomic};
use crate::ranks::{extract_rank_sign, scored_sample, ScoreKind};
use crate::sim::{build_test, power_curve_with_progress, Calibration, Scenario, TwoSampleTest, Variant};
use crate::transport::empirical_map;

#[derive(Debug, Parser)]
#[command(name = "otrank", version, about = "Center-outward rank tests for the two-sample location problem")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Critical-value cache directory (default: $OTRANK_CACHE or ./.otrank-cache).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a reference grid and print it as JSON.
    Grid {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reference: ReferenceKind,
        /// Number of shells; searched by default for spherical grids.
        #[arg(long)]
        n_r: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map observations onto a grid and print the map, ranks or scores as CSV.
    Ranks {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "wilcoxon")]
        score: ScoreKind,
        #[arg(long, value_enum, default_value_t = Table::Map)]
        table: Table,
    },
    /// Compute (or load) Monte-Carlo critical values for a grid.
    Critvals {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "wilcoxon")]
        score: ScoreKind,
        #[arg(long)]
        n1: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 40_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a rank test on two samples and print the result as JSON.
    Test {
        #[arg(long)]
        data1: PathBuf,
        #[arg(long)]
        data2: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "wilcoxon")]
        score: ScoreKind,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 40_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Estimate rejection frequencies over a grid of shifts; CSV output.
    Simulate {
        #[arg(long)]
        scenario: ScenarioName,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Degrees of freedom of the spherical Student law.
        #[arg(long, default_value_t = 2.1)]
        df: f64,
        /// Comma-separated test identifiers.
        #[arg(long, default_value = "hotelling,wilcoxon-spherical,wilcoxon-cubic")]
        tests: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0:0.5:0.1")]
        shifts: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 40_000)]
        mc_reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal factorizations of n; CSV output.
    Table1 {
        #[arg(long, default_value = "2")]
        dims: String,
        #[arg(long, default_value = "50,100,200,300,400")]
        ns: String,
        #[arg(long, default_value = "spherical-uniform,gaussian-spherical")]
        references: String,
        /// Size of the reference discretization (default max(2000, 30 n)).
        #[arg(long)]
        m: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Table {
    Map,
    Ranks,
    Scores,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioName {
    GaussSpherical,
    GaussCorrelated,
    StudentSpherical,
    CauchyIndependent,
    CauchySpherical,
    Banana,
}

/// Runs the CLI and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Unsupported(_) | Error::Parse(_) | Error::Json(_) => 1,
        Error::Io(_) => 2,
        Error::Internal(_) => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    let cache = CriticalValueCache::resolve(cli.cache_dir.as_deref());
    match cli.command {
        Command::Grid { dim, n, reference, n_r, out } => cmd_grid(dim, n, reference, n_r, out.as_deref()),
        Command::Ranks { data, grid, score, table } => cmd_ranks(&data, &grid, score, table),
        Command::Critvals { grid, score, n1, alpha, reps, seed } => cmd_critvals(&cache, &grid, score, n1, alpha, reps, seed),
        Command::Test { data1, data2, grid, score, alpha, reps, seed } => {
            cmd_test(&cache, &data1, &data2, &grid, score, alpha, reps, seed)
        }
        Command::Simulate { scenario, dim, df, tests, n, reps, shifts, seed, alpha, mc_reps, out } => {
            let sc = scenario_for(scenario, dim, df)?;
            let cal = Calibration { alpha, mc_reps, seed };
            cmd_simulate(&cache, &sc, &tests, n, reps, &parse_shifts(&shifts)?, cal, out.as_deref())
        }
        Command::Table1 { dims, ns, references, m } => cmd_table1(&dims, &ns, &references, m),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn read_grid(path: &Path) -> Result<Grid> {
    Grid::from_json(&read_text(path)?)
}

fn cmd_grid(dim: usize, n: usize, reference: ReferenceKind, n_r: Option<usize>, out: Option<&Path>) -> Result<()> {
    let fact = match (reference.is_spherical(), n_r) {
        (false, Some(_)) => return Err(Error::InvalidArgument(format!("{reference} grids have no shells"))),
        (false, None) => None,
        (true, Some(n_r)) => Some(
            Factorization::with_shells(n, n_r)
                .ok_or_else(|| Error::InvalidArgument(format!("{n_r} shells do not give an admissible factorization of {n}")))?,
        ),
        (true, None) if dim >= 2 => {
            eprintln!("searching the factorization of n = {n}");
            Some(optimal_factorization(n, dim, reference)?)
        }
        (true, None) => None,
    };
    let grid = build_grid(dim, n, reference, fact)?;
    emit(&(grid.to_json()? + "\n"), out)
}

fn cmd_ranks(data: &Path, grid: &Path, score: ScoreKind, table: Table) -> Result<()> {
    let data = read_dataset_csv(data)?;
    let grid = read_grid(grid)?;
    check_size(data.len(), &grid)?;
    let map = empirical_map(&data, &grid)?;
    let text = match table {
        Table::Map => assignment_csv(&map),
        Table::Ranks => ranks_csv(&extract_rank_sign(&map)?),
        Table::Scores => scores_csv(&scored_sample(&map, score)?),
    };
    emit(&text, None)
}

fn check_size(total: usize, grid: &Grid) -> Result<()> {
    if total != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "the data hold {total} observations but the grid expects n = {}",
            grid.len()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CritvalsReport<'a> {
    key: &'a CriticalValueKey,
    alpha: f64,
    critical_value: f64,
}

fn cmd_critvals(cache: &CriticalValueCache, grid: &Path, score: ScoreKind, n1: usize, alpha: f64, reps: usize, seed: u64) -> Result<()> {
    let grid = read_grid(grid)?;
    let table = cache.get_or_compute(&grid, score, n1, alpha, reps, seed)?;
    let report = CritvalsReport { key: &table.key, alpha: table.alpha, critical_value: table.critical_value };
    emit(&(serde_json::to_string_pretty(&report)? + "\n"), None)
}

#[derive(Serialize)]
struct TestConfigEcho {
    n1: usize,
    n2: usize,
    alpha: f64,
    reference: ReferenceKind,
    score: ScoreKind,
    mc_reps: usize,
    seed: u64,
    grid_id: String,
}

#[derive(Serialize)]
struct TestReport {
    #[serde(flatten)]
    result: TestResult,
    config: TestConfigEcho,
}

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    cache: &CriticalValueCache,
    data1: &Path,
    data2: &Path,
    grid: &Path,
    score: ScoreKind,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<()> {
    let (x, y) = (read_dataset_csv(data1)?, read_dataset_csv(data2)?);
    let grid = read_grid(grid)?;
    check_size(x.len() + y.len(), &grid)?;
    if !score.compatible_with(grid.kind()) {
        return Err(Error::InvalidArgument(format!("{score} scores cannot be used with a {} grid", grid.kind())));
    }
    let table = cache.get_or_compute(&grid, score, x.len(), alpha, reps, seed)?;
    let config = TestConfigEcho {
        n1: x.len(),
        n2: y.len(),
        alpha,
        reference: grid.kind(),
        score,
        mc_reps: reps,
        seed,
        grid_id: grid.id(),
    };
    let result = RankTest::with_table(grid, score, table)?.run_pooled(&Dataset::pooled(&x, &y)?)?;
    emit(&(serde_json::to_string_pretty(&TestReport { result, config })? + "\n"), None)
}

fn scenario_for(name: ScenarioName, dim: usize, df: f64) -> Result<Scenario> {
    match name {
        ScenarioName::GaussSpherical => Scenario::gauss_spherical(dim),
        ScenarioName::GaussCorrelated => Scenario::gauss_correlated(dim),
        ScenarioName::StudentSpherical => Scenario::student_spherical(dim, df),
        ScenarioName::CauchyIndependent => Scenario::cauchy_independent(dim),
        ScenarioName::CauchySpherical => Scenario::cauchy_spherical(dim),
        ScenarioName::Banana => Scenario::new(Variant::Banana, dim),
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub(crate) fn parse_shifts(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse shifts `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let shifts: Vec<f64> = if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(num).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| round12(start + i as f64 * step)).collect()
    } else {
        text.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<_>>()?
    };
    if shifts.is_empty() || shifts.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(bad());
    }
    Ok(shifts)
}

fn list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::InvalidArgument(format!("invalid {what} `{s}`"))))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cache: &CriticalValueCache,
    sc: &Scenario,
    tests: &str,
    n: usize,
    reps: usize,
    shifts: &[f64],
    cal: Calibration,
    out: Option<&Path>,
) -> Result<()> {
    let kinds: Vec<TestKind> = list(tests, "test")?;
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no tests given".into()));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("total sample size must be even, got {n}")));
    }
    let built: Vec<Box<dyn TwoSampleTest>> = kinds
        .iter()
        .map(|&k| {
            eprintln!("calibrating {k}");
            build_test(k, sc.dim, n, n / 2, cal, Some(cache))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&dyn TwoSampleTest> = built.iter().map(|t| t.as_ref()).collect();
    let step = (reps / 20).max(1);
    let progress = |done: usize, total: usize| {
        if done.is_multiple_of(step) || done == total {
            eprintln!("replication {done}/{total}");
        }
    };
    let curve = power_curve_with_progress(sc, n, &refs, shifts, reps, cal.seed, &progress)?;
    emit(&curve.to_csv(), out)
}

fn cmd_table1(dims: &str, ns: &str, references: &str, m: Option<usize>) -> Result<()> {
    let dims: Vec<usize> = list(dims, "dimension")?;
    let ns: Vec<usize> = list(ns, "sample size")?;
    let refs: Vec<ReferenceKind> = list(references, "reference")?;
    if let Some(r) = refs.iter().find(|r| !r.is_spherical()) {
        return Err(Error::InvalidArgument(format!("{r} grids are not factorized")));
    }
    let mut out = String::from("d,n,reference,n_r,n_s,n_0,w2\n");
    for &d in &dims {
        if d < 2 {
            return Err(Error::InvalidArgument("factorization search needs dimension >= 2".into()));
        }
        for &reference in &refs {
            for &n in &ns {
                eprintln!("d = {d}, n = {n}, {reference}");
                let profile = factorization_profile(n, d, reference, m.unwrap_or_else(|| default_discretization_size(n)))?;
                let mut best = &profile[0];
                for entry in &profile[1..] {
                    if entry.1 < best.1 {
                        best = entry;
                    }
                }
                let (f, w) = best;
                out.push_str(&format!("{d},{n},{reference},{},{},{},{w}\n", f.n_r, f.n_s, f.n_0));
            }
        }
    }
    emit(&out, None)
}
