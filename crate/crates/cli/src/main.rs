mod spec;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use mismatchlab::graphcodes::{build_equality_code, build_identity_code, build_separation_code, BicliqueMode, MatchingMode};
use mismatchlab::instance::Instance;
use mismatchlab::montecarlo::{self, Checker, ChannelSpec, ExperimentReport, TargetSpec};
use mismatchlab::rates::rate_report;
use mismatchlab::{
    check_code, error_probability, extract_delta_approximation, zero_feasible_search, Answer, Error,
    SearchOptions, TargetKind,
};
use num_rational::Ratio;
use serde_json::json;

const DEFAULT_BUDGET: u64 = 1 << 24;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::BudgetExhausted { .. }) => 2,
            CliError::Core(_) | CliError::Usage(_) => 1,
            CliError::Io(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(Error::BudgetExhausted { .. }) => "budget_exhausted",
            CliError::Core(Error::Schema(_)) => "schema",
            CliError::Core(_) => "domain",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "mismatchlab", version, about = "Function computation over deterministic multiple-access channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a target and/or channel as an instance JSON file.
    Gen(GenArgs),
    /// Decide zero-error feasibility, or check a given code against --delta.
    Check(CheckArgs),
    /// Build an explicit code from a graph construction.
    Construct(ConstructArgs),
    /// Rate-region quantities as CSV.
    Rates(RatesArgs),
    /// Run a seeded experiment and write its report.
    Experiment(ExperimentArgs),
    /// Collect experiment reports into one CSV table.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long, default_value_t = 1)]
    uses: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pruned,
    Naive,
}

#[derive(clap::Args)]
struct CheckArgs {
    #[arg(long)]
    target: String,
    #[arg(long)]
    channel: String,
    #[arg(long, default_value_t = 1)]
    uses: u32,
    #[arg(long, value_enum, default_value = "pruned")]
    mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Code to check instead of searching.
    #[arg(long)]
    code: Option<String>,
    /// Error tolerance for --code, as p/q or a decimal.
    #[arg(long, default_value = "0")]
    delta: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Identity,
    Equality,
    Separation,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchingArg {
    Greedy,
    Exact,
}

#[derive(clap::Args)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    scheme: Scheme,
    #[arg(long)]
    channel: String,
    #[arg(long, default_value_t = 1)]
    uses: u32,
    /// Target, for the separation scheme.
    #[arg(long)]
    target: Option<String>,
    /// Messages per user, for the identity and equality schemes.
    #[arg(long = "U")]
    u: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, value_enum, default_value = "greedy")]
    matching: MatchingArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RatesArgs {
    #[arg(long)]
    channel: String,
    #[arg(long = "U")]
    u: u64,
    /// Target range size for the cut-set bound; defaults to U^2.
    #[arg(long = "W")]
    w: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    FeasibilityFraction,
    DistinctEntries,
    CouponCollector,
    BalancedFraction,
    ApproximationBound,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetKindArg {
    Identity,
    Equality,
    GreaterThan,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckerArg {
    Exact,
    Identity,
    Equality,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    name: ExperimentName,
    #[arg(long, value_enum, default_value = "identity")]
    target: TargetKindArg,
    #[arg(long, value_enum, default_value = "exact")]
    checker: CheckerArg,
    #[arg(long = "U", default_value_t = 2)]
    u: usize,
    #[arg(long = "W", default_value_t = 2)]
    w: usize,
    #[arg(long = "X", default_value_t = 4)]
    x: usize,
    #[arg(long = "Y", default_value_t = 16)]
    y: usize,
    /// Coupons to collect.
    #[arg(long = "N", default_value_t = 1)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    threshold: u64,
    /// Balance parameter as p/q or a decimal.
    #[arg(long, default_value = "1/3")]
    c: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    uses: u32,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Output directory for the report, CSV, index and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// Directory written by `experiment --out`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes `text` to `out`, or stdout. Returns the files written.
fn emit(out: Option<&Path>, text: &str) -> CliResult<Vec<PathBuf>> {
    match out {
        Some(p) => {
            write_file(p, text)?;
            Ok(vec![p.to_path_buf()])
        }
        None => {
            print!("{text}");
            Ok(Vec::new())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

struct Run {
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
    manifest: Option<PathBuf>,
    exit: u8,
}

impl Run {
    fn to(out: Option<&Path>, outputs: Vec<PathBuf>) -> Self {
        Run {
            outputs,
            seed: None,
            manifest: out.map(|p| {
                let mut name = p.as_os_str().to_owned();
                name.push(".manifest.json");
                PathBuf::from(name)
            }),
            exit: 0,
        }
    }
}

fn gen(a: &GenArgs) -> CliResult<Run> {
    if a.target.is_none() && a.channel.is_none() {
        return Err(CliError::Usage("gen needs --target and/or --channel".into()));
    }
    let inst = Instance {
        target: a.target.as_deref().map(spec::target).transpose()?,
        channel: a.channel.as_deref().map(|c| spec::channel(c, a.uses)).transpose()?,
        code: None,
    };
    let outputs = emit(a.out.as_deref(), &(inst.to_json() + "\n"))?;
    Ok(Run::to(a.out.as_deref(), outputs))
}

fn check(a: &CheckArgs) -> CliResult<Run> {
    let target = spec::target(&a.target)?;
    let g = spec::channel(&a.channel, a.uses)?;
    let delta = spec::ratio(&a.delta)?;
    let (text, exit) = match &a.code {
        Some(c) => {
            let code = spec::code(c)?;
            let ok = check_code(&target, &g, &code, delta)?;
            let p = error_probability(&target, &g, &code)?;
            let approx = extract_delta_approximation(&target, &g, &code)?;
            let v = json!({
                "within_delta": ok,
                "delta": delta.to_string(),
                "error_probability": p.to_string(),
                "approximation": approx,
            });
            (pretty(&v), 0)
        }
        None => {
            if delta != Ratio::from_integer(0) {
                return Err(CliError::Usage("--delta > 0 requires --code".into()));
            }
            let opts = match a.mode {
                ModeArg::Pruned => SearchOptions::pruned(a.budget),
                ModeArg::Naive => SearchOptions::naive(a.budget),
            };
            let verdict = zero_feasible_search(&target.normalized(), &g, opts)?;
            let exit = if verdict.feasible == Answer::Unknown { 2 } else { 0 };
            (pretty(&verdict), exit)
        }
    };
    let outputs = emit(a.out.as_deref(), &text)?;
    let mut run = Run::to(a.out.as_deref(), outputs);
    run.exit = exit;
    Ok(run)
}

fn construct(a: &ConstructArgs) -> CliResult<Run> {
    let g = spec::channel(&a.channel, a.uses)?;
    let need_u = || a.u.ok_or_else(|| CliError::Usage("this scheme needs --U".into()));
    let code = match a.scheme {
        Scheme::Identity => build_identity_code(&g, need_u()?, BicliqueMode::Exact, a.budget)?,
        Scheme::Equality => {
            let mode = match a.matching {
                MatchingArg::Greedy => MatchingMode::Greedy,
                MatchingArg::Exact => MatchingMode::Exact { budget: a.budget },
            };
            build_equality_code(&g, need_u()?, a.seed, mode)?
        }
        Scheme::Separation => {
            let t = a.target.as_deref().ok_or_else(|| CliError::Usage("separation needs --target".into()))?;
            build_separation_code(&spec::target(t)?, &g, BicliqueMode::Exact, a.budget)?
        }
    };
    let outputs = emit(a.out.as_deref(), &pretty(&code))?;
    let mut run = Run::to(a.out.as_deref(), outputs);
    run.seed = Some(a.seed);
    Ok(run)
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).map_err(|e| CliError::Io(e.to_string()))
}

fn rates(a: &RatesArgs) -> CliResult<Run> {
    let g = spec::channel(&a.channel, 1)?;
    let w = a.w.unwrap_or(a.u.saturating_mul(a.u));
    let r = rate_report(&g, a.u, w)?;
    let text = csv_text(
        &["channel", "U", "W", "n_min", "n_real", "h_star", "cutset_bound"],
        &[vec![
            a.channel.clone(),
            r.u.to_string(),
            r.w.to_string(),
            r.n_min.to_string(),
            r.n_real.to_string(),
            r.h_star.to_string(),
            r.cutset_bound.to_string(),
        ]],
    )?;
    let outputs = emit(a.out.as_deref(), &text)?;
    Ok(Run::to(a.out.as_deref(), outputs))
}

fn experiment_report(a: &ExperimentArgs) -> CliResult<ExperimentReport> {
    Ok(match a.name {
        ExperimentName::FeasibilityFraction => {
            let kind = match a.target {
                TargetKindArg::Identity => TargetKind::Identity,
                TargetKindArg::Equality => TargetKind::Equality,
                TargetKindArg::GreaterThan => TargetKind::GreaterThan,
                TargetKindArg::Random => TargetKind::Random,
            };
            let w = match kind {
                TargetKind::Identity => a.u * a.u,
                TargetKind::Random => a.w,
                _ => 2,
            };
            let checker = match a.checker {
                CheckerArg::Exact => Checker::Exact,
                CheckerArg::Identity => Checker::IdentityConstruction,
                CheckerArg::Equality => Checker::EqualityConstruction,
            };
            montecarlo::feasibility_fraction(
                TargetSpec { kind, u: a.u, w },
                ChannelSpec { x: a.x, y: a.y, uses: a.uses },
                checker,
                a.trials,
                a.seed,
                a.budget,
            )?
        }
        ExperimentName::DistinctEntries => montecarlo::distinct_entries_experiment(a.x, a.y, a.trials, a.seed)?,
        ExperimentName::CouponCollector => {
            montecarlo::coupon_collector_sim(a.y as u64, a.n, a.threshold, a.trials, a.seed)?
        }
        ExperimentName::BalancedFraction => {
            montecarlo::balanced_fraction_experiment(a.u, a.w, spec::ratio(&a.c)?, a.trials, a.seed)?
        }
        ExperimentName::ApproximationBound => {
            let b = montecarlo::approximation_bound(a.u as u64, a.w as u64, a.delta)?;
            let mut parameters = BTreeMap::new();
            parameters.insert("U".to_string(), a.u.to_string());
            parameters.insert("W".to_string(), a.w.to_string());
            parameters.insert("delta".to_string(), a.delta.to_string());
            let mut statistics = BTreeMap::new();
            statistics.insert("alpha".to_string(), b.alpha);
            statistics.insert("exponent".to_string(), b.exponent);
            let mut counters = BTreeMap::new();
            counters.insert("vacuous".to_string(), u64::from(b.vacuous));
            ExperimentReport {
                name: "approximation_bound".into(),
                parameters,
                trials: 0,
                successes: 0,
                failures: 0,
                unknown: 0,
                estimate: Ratio::from_integer(0),
                wilson_ci_95: montecarlo::wilson_interval(0, 0),
                analytic_bound: Some(b.bound),
                seed: a.seed,
                exhaustive: true,
                counters,
                statistics,
            }
        }
    })
}

fn experiment(a: &ExperimentArgs) -> CliResult<Run> {
    let report = experiment_report(a)?;
    let json = pretty(&report);
    let Some(dir) = a.out.as_deref() else {
        print!("{json}");
        return Ok(Run { outputs: Vec::new(), seed: Some(a.seed), manifest: None, exit: 0 });
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let json_path = dir.join(format!("{}.json", report.name));
    let csv_path = dir.join(format!("{}.csv", report.name));
    write_file(&json_path, &json)?;
    write_file(&csv_path, &csv_text(&ExperimentReport::CSV_HEADER, &[report.csv_record()])?)?;
    let index_path = dir.join("index.json");
    let mut index: Vec<String> = match std::fs::read_to_string(&index_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::Core(Error::Schema(e.to_string())))?,
        Err(_) => Vec::new(),
    };
    let entry = format!("{}.json", report.name);
    if !index.contains(&entry) {
        index.push(entry);
        index.sort();
    }
    write_file(&index_path, &pretty(&index))?;
    Ok(Run {
        outputs: vec![json_path, csv_path, index_path],
        seed: Some(a.seed),
        manifest: Some(dir.join("manifest.json")),
        exit: 0,
    })
}

fn report(a: &ReportArgs) -> CliResult<Run> {
    let index_path = a.input.join("index.json");
    let text = std::fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;
    let index: Vec<String> = serde_json::from_str(&text).map_err(|e| CliError::Core(Error::Schema(e.to_string())))?;
    let mut rows = Vec::new();
    for file in &index {
        let path = a.input.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let r: ExperimentReport =
            serde_json::from_str(&text).map_err(|e| CliError::Core(Error::Schema(format!("{file}: {e}"))))?;
        rows.push(r.csv_record());
    }
    let outputs = emit(a.out.as_deref(), &csv_text(&ExperimentReport::CSV_HEADER, &rows)?)?;
    Ok(Run::to(a.out.as_deref(), outputs))
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("MISMATCHLAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("MISMATCHLAB_THREADS must be a positive integer, got {v:?}")))?;
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn write_manifest(run: &Run, command: &str, started: Instant) -> CliResult<()> {
    let Some(path) = &run.manifest else { return Ok(()) };
    let manifest = json!({
        "tool": "mismatchlab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": std::env::args().skip(1).collect::<Vec<_>>(),
        "seed": run.seed,
        "threads": rayon::current_num_threads(),
        "wall_time_ms": started.elapsed().as_secs_f64() * 1e3,
        "outputs": run.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "exit_code": run.exit,
    });
    write_file(path, &pretty(&manifest))
}

fn execute(cli: &Cli) -> CliResult<u8> {
    configure_threads()?;
    let started = Instant::now();
    let (name, run) = match &cli.command {
        Command::Gen(a) => ("gen", gen(a)?),
        Command::Check(a) => ("check", check(a)?),
        Command::Construct(a) => ("construct", construct(a)?),
        Command::Rates(a) => ("rates", rates(a)?),
        Command::Experiment(a) => ("experiment", experiment(a)?),
        Command::Report(a) => ("report", report(a)?),
    };
    write_manifest(&run, name, started)?;
    Ok(run.exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", json!({ "error": err.kind(), "message": err.message() }));
            return ExitCode::from(err.exit_code());
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("{}", json!({ "error": err.kind(), "message": err.message() }));
            ExitCode::from(err.exit_code())
        }
    }
}
