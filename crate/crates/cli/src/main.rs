//! Command-line front end for the CoVaR estimators.
//!
//! Five subcommands cover the workflows. `estimate` runs one replication and
//! prints the point, the interval and the estimator's diagnostics. `table`
//! sweeps sample sizes over independent replications and emits a metrics
//! table; `rates` does the same and appends the fitted log-log RMSE slope.
//! `reference` computes a cached high sample-size truth for models without a
//! closed form, and `export-fixture` writes the embedded benchmark model as
//! a model document.
//!
//! Experiments are described by the same JSON documents the harness
//! serialises; `--config` loads one and every explicit flag overrides the
//! matching field. Exit codes separate the two failure families: 2 for
//! configuration problems (bad flags, unreadable files, incompatible
//! combinations), 3 when a well-formed run fails inside an estimator.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use covar_core::analytic::{LinearPortfolioSpec, NonlinearPortfolioSpec};
use covar_core::dgmodel::{
    appendix_h_fixture, load_model, model_to_string, save_model, SimplifiedDeltaGamma, TailSpec,
};
use covar_core::estimators::{is_scenario, root_weights_csv, EstimateReport};
use covar_core::harness::{
    emit_report, loglog_slope, reference_run, resolve_allocation, run_experiment, single_estimate,
    Allocation, EstimatorChoice, ExperimentSpec, ModelChoice, ReportFormat, ResolvedAllocation,
    DEFAULT_SECTIONS,
};
use covar_core::numerics::RngStream;
use covar_core::{Error, Result};

/// VaR level of the conditioning loss when neither config nor flag sets it.
const DEFAULT_ALPHA: f64 = 0.95;

/// CoVaR level of the conditioned loss.
const DEFAULT_BETA: f64 = 0.95;

/// Nominal confidence level of the reported intervals.
const DEFAULT_CI_LEVEL: f64 = 0.95;

/// Replications per sample size in `table` and `rates` runs.
const DEFAULT_REPLICATIONS: usize = 100;

/// Base seed; replication r always runs on stream (seed, r).
const DEFAULT_SEED: u64 = 2024;

/// Reference cache document, written next to `--out` or into the working
/// directory when everything goes to stdout.
const REFERENCE_CACHE: &str = "covar-reference-cache.json";

/// Monte-Carlo CoVaR estimation: single estimates, replicated experiment
/// tables, convergence rates and cached reference values.
#[derive(Parser)]
#[command(name = "covar", version)]
struct Cli {
    /// Worker threads for replicated runs (default: all cores).
    #[arg(long, global = true, value_name = "COUNT")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimate and print the point, interval and diagnostics.
    Estimate(EstimateArgs),
    /// Sweep sample sizes over replications and emit a metrics table.
    Table(TableArgs),
    /// Emit the metrics table plus the fitted log-log RMSE slope.
    Rates(TableArgs),
    /// Compute (and cache) a high sample-size IS reference value.
    Reference(ReferenceArgs),
    /// Write the embedded benchmark model as a model document.
    ExportFixture(ExportArgs),
}

/// Experiment description shared by the estimating subcommands. Every flag
/// overrides the matching field of `--config`; without a config the model is
/// required and the remaining fields fall back to the documented defaults.
#[derive(Args)]
struct SpecArgs {
    /// Experiment config document (JSON form of the full spec).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Model: linear, nonlinear, appendix-h-fixture, or a model file path.
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,

    /// Factor tail: normal or student-t (the latter takes --nu).
    #[arg(long, value_name = "TAIL")]
    tail: Option<String>,

    /// Degrees of freedom for the student-t tail.
    #[arg(long, value_name = "DF")]
    nu: Option<u32>,

    /// VaR level of the conditioning loss, in (0, 1).
    #[arg(long, value_name = "PROB")]
    alpha: Option<f64>,

    /// CoVaR level of the conditioned loss, in (0, 1).
    #[arg(long, value_name = "PROB")]
    beta: Option<f64>,

    /// Estimator: BE, IS, or QRE.
    #[arg(long, value_name = "NAME")]
    estimator: Option<String>,

    /// Batch count for an explicit BE layout (with --m).
    #[arg(long, value_name = "K")]
    k: Option<usize>,

    /// Batch size for an explicit BE layout (with --k).
    #[arg(long, value_name = "M")]
    m: Option<usize>,

    /// Stage-one size for an explicit IS split (with --n2).
    #[arg(long, value_name = "N1")]
    n1: Option<usize>,

    /// Stage-two size for an explicit IS split (with --n1).
    #[arg(long, value_name = "N2")]
    n2: Option<usize>,

    /// Section count for the IS sectioning interval.
    #[arg(long, value_name = "B")]
    b: Option<usize>,

    /// Replications per sample size.
    #[arg(long, value_name = "COUNT")]
    reps: Option<usize>,

    /// Base seed; replication r runs on stream (seed, r).
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Nominal confidence level of the intervals, in (0, 1).
    #[arg(long = "ci-level", value_name = "PROB")]
    ci_level: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    spec: SpecArgs,

    /// Total sample size of the run.
    #[arg(long, value_name = "N")]
    n: Option<usize>,

    /// Replication index selecting the random stream.
    #[arg(long, value_name = "R", default_value_t = 0)]
    rep: u64,

    /// For an IS run, also write the stage-two root weights as CSV.
    #[arg(long = "dump-weights", value_name = "FILE")]
    dump_weights: Option<PathBuf>,

    /// Write the summary here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    spec: SpecArgs,

    /// Sample sizes of the sweep; repeat the flag or separate with commas.
    #[arg(long = "n", value_name = "N", value_delimiter = ',')]
    n: Vec<usize>,

    /// Truth used for bias and coverage when no closed form exists.
    #[arg(long, value_name = "VALUE")]
    reference: Option<f64>,

    /// Derive the truth from a cached IS reference run of this size.
    #[arg(
        long = "reference-run",
        value_name = "N_REF",
        conflicts_with = "reference"
    )]
    reference_run: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct ReferenceArgs {
    /// Model: appendix-h-fixture or a model file path.
    #[arg(long, value_name = "MODEL")]
    model: String,

    /// Factor tail: normal or student-t (the latter takes --nu).
    #[arg(long, value_name = "TAIL", default_value = "normal")]
    tail: String,

    /// Degrees of freedom for the student-t tail.
    #[arg(long, value_name = "DF")]
    nu: Option<u32>,

    /// VaR level of the conditioning loss, in (0, 1).
    #[arg(long, value_name = "PROB", default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    /// CoVaR level of the conditioned loss, in (0, 1).
    #[arg(long, value_name = "PROB", default_value_t = DEFAULT_BETA)]
    beta: f64,

    /// Sample size of the reference run.
    #[arg(long, value_name = "N")]
    n: usize,

    /// Seed of the reference stream.
    #[arg(long, value_name = "SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Write the value here; the cache document lands next to it.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Write the model document here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Report format as a flag value, mirroring [`ReportFormat`].
#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|err| {
                Error::InvalidParameter(format!("cannot size the worker pool: {err}"))
            })?;
    }
    match &cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Table(args) => cmd_table(args, false),
        Command::Rates(args) => cmd_table(args, true),
        Command::Reference(args) => cmd_reference(args),
        Command::ExportFixture(args) => cmd_export(args),
    }
}

/// Exit status for an error: 2 when the inputs are at fault, 3 when a
/// well-formed run degenerates inside an estimator.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_)
        | Error::Io(_)
        | Error::Parse(_)
        | Error::NotPositiveDefinite { .. }
        | Error::CurvatureNotPositive { .. }
        | Error::InfeasibleCi { .. }
        | Error::MissingReference => 2,
        Error::EigenNoConvergence { .. }
        | Error::GenerationFailed { .. }
        | Error::DegenerateWeights { .. }
        | Error::InfiniteQuantile { .. }
        | Error::EmptyBand { .. }
        | Error::QreNoConvergence { .. } => 3,
    }
}

fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidParameter(message.into())
}

/// Maps the model literals; anything that is not a known name is read as a
/// path to a model document.
fn parse_model(text: &str) -> ModelChoice {
    match text {
        "linear" => ModelChoice::Linear(LinearPortfolioSpec::default()),
        "nonlinear" => ModelChoice::Nonlinear(NonlinearPortfolioSpec::default()),
        "appendix-h-fixture" => ModelChoice::AppendixHFixture,
        path => ModelChoice::DgFile(PathBuf::from(path)),
    }
}

fn parse_estimator(text: &str) -> Result<EstimatorChoice> {
    match text.to_ascii_uppercase().as_str() {
        "BE" => Ok(EstimatorChoice::Be),
        "IS" => Ok(EstimatorChoice::Is),
        "QRE" => Ok(EstimatorChoice::Qre),
        other => Err(invalid(format!(
            "unknown estimator {other:?}; use BE, IS or QRE"
        ))),
    }
}

/// Applies `--tail` and `--nu` on top of the current tail. `--tail` switches
/// the family, `--nu` re-parameterises it; a bare `--nu` is enough when the
/// config already selected student-t.
fn merge_tail(current: TailSpec, flag: Option<&String>, nu: Option<u32>) -> Result<TailSpec> {
    let want_student = match flag.map(String::as_str) {
        Some("normal") => false,
        Some("student-t") => true,
        Some(other) => {
            return Err(invalid(format!(
                "unknown tail {other:?}; use normal or student-t"
            )))
        }
        None => matches!(current, TailSpec::StudentT { .. }),
    };
    match (want_student, nu) {
        (false, None) => Ok(TailSpec::Normal),
        (false, Some(_)) => Err(invalid("--nu only applies to the student-t tail")),
        (true, Some(nu)) => Ok(TailSpec::StudentT { nu }),
        (true, None) => match current {
            TailSpec::StudentT { nu } => Ok(TailSpec::StudentT { nu }),
            TailSpec::Normal => Err(invalid("the student-t tail needs --nu")),
        },
    }
}

/// Replaces the allocation when any layout flag is present. The two layout
/// families are exclusive and each must be given whole, except that `--b`
/// falls back to the default section count.
fn merge_allocation(current: Allocation, args: &SpecArgs) -> Result<Allocation> {
    let batches = args.k.is_some() || args.m.is_some();
    let split = args.n1.is_some() || args.n2.is_some() || args.b.is_some();
    if batches && split {
        return Err(invalid("--k/--m and --n1/--n2/--b are mutually exclusive"));
    }
    if batches {
        match (args.k, args.m) {
            (Some(k), Some(m)) => Ok(Allocation::Batches { k, m }),
            _ => Err(invalid("an explicit batch layout needs both --k and --m")),
        }
    } else if split {
        match (args.n1, args.n2) {
            (Some(n1), Some(n2)) => Ok(Allocation::Split {
                n1,
                n2,
                b: args.b.unwrap_or(DEFAULT_SECTIONS),
            }),
            _ => Err(invalid("an explicit split needs --n1 and --n2")),
        }
    } else {
        Ok(current)
    }
}

/// Builds the validated experiment spec from the config document (if any),
/// the override flags and the sample sizes collected by the subcommand.
fn build_spec(args: &SpecArgs, sizes: &[usize]) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => serde_json::from_str::<ExperimentSpec>(&fs::read_to_string(path)?)?,
        None => ExperimentSpec {
            model: match &args.model {
                Some(text) => parse_model(text),
                None => return Err(invalid("--model is required without --config")),
            },
            tail: TailSpec::Normal,
            estimator: EstimatorChoice::Be,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            sample_sizes: Vec::new(),
            allocation: Allocation::Default,
            replications: DEFAULT_REPLICATIONS,
            seed: DEFAULT_SEED,
            ci_level: DEFAULT_CI_LEVEL,
        },
    };
    if let Some(text) = &args.model {
        spec.model = parse_model(text);
    }
    spec.tail = merge_tail(spec.tail, args.tail.as_ref(), args.nu)?;
    if let Some(text) = &args.estimator {
        spec.estimator = parse_estimator(text)?;
    }
    if let Some(alpha) = args.alpha {
        spec.alpha = alpha;
    }
    if let Some(beta) = args.beta {
        spec.beta = beta;
    }
    if !sizes.is_empty() {
        spec.sample_sizes = sizes.to_vec();
    }
    spec.allocation = merge_allocation(spec.allocation, args)?;
    if let Some(reps) = args.reps {
        spec.replications = reps;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(level) = args.ci_level {
        spec.ci_level = level;
    }
    if spec.sample_sizes.is_empty() {
        return Err(invalid("give at least one sample size with --n"));
    }
    spec.validate()?;
    Ok(spec)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Scientific notation with six significant digits, the report convention.
fn sci(value: f64) -> String {
    format!("{value:.5e}")
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let sizes: Vec<usize> = args.n.into_iter().collect();
    let spec = build_spec(&args.spec, &sizes)?;
    if spec.sample_sizes.len() > 1 {
        return Err(invalid("estimate runs at a single sample size"));
    }
    let n = spec.sample_sizes[0];
    let report = single_estimate(&spec, n, args.rep)?;
    if let Some(path) = &args.dump_weights {
        dump_weights(&spec, n, args.rep, &report, path)?;
    }
    let alloc = resolve_allocation(spec.allocation, spec.estimator, n)?;
    write_out(
        args.out.as_deref(),
        &render_estimate(&spec, n, args.rep, alloc, &report),
    )
}

/// Key-value lines for one estimate: the run coordinates, then the point and
/// interval, then the estimator's diagnostics in key order.
fn render_estimate(
    spec: &ExperimentSpec,
    n: usize,
    rep: u64,
    alloc: ResolvedAllocation,
    report: &EstimateReport,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "estimator {}", spec.estimator);
    let _ = writeln!(out, "n {n}");
    let _ = writeln!(out, "alloc {alloc}");
    let _ = writeln!(out, "seed {}", spec.seed);
    let _ = writeln!(out, "rep {rep}");
    let _ = writeln!(out, "point {}", sci(report.point));
    let _ = writeln!(out, "ci_low {}", sci(report.ci_low));
    let _ = writeln!(out, "ci_high {}", sci(report.ci_high));
    let _ = writeln!(out, "level {}", sci(report.level));
    for (key, value) in &report.diagnostics {
        let _ = writeln!(out, "{key} {}", sci(*value));
    }
    out
}

/// Replays the stage-two scenarios of an IS run at the fitted level and
/// writes their root weights as CSV. The replay uses the same stream plan as
/// the estimate, so the rows are exactly the scenarios behind the point.
fn dump_weights(
    spec: &ExperimentSpec,
    n: usize,
    rep: u64,
    report: &EstimateReport,
    path: &Path,
) -> Result<()> {
    let ResolvedAllocation::Split { n2, .. } =
        resolve_allocation(spec.allocation, spec.estimator, n)?
    else {
        return Err(invalid("--dump-weights applies to IS runs only"));
    };
    let model = match &spec.model {
        ModelChoice::DgFile(path) => load_model(path)?,
        ModelChoice::AppendixHFixture => appendix_h_fixture(),
        ModelChoice::Linear(_) | ModelChoice::Nonlinear(_) => {
            return Err(invalid("--dump-weights needs a delta-gamma model"))
        }
    };
    let v_hat = report
        .diagnostics
        .get("v_alpha_hat")
        .copied()
        .ok_or_else(|| invalid("the estimate reported no v_alpha_hat to replay"))?;
    let stage2 = RngStream::new(spec.seed, rep).substream(1);
    let mut rows = Vec::with_capacity(n2);
    for i in 0..n2 {
        let mut scenario = stage2.substream(i as u64);
        rows.push(is_scenario(&model, spec.tail, v_hat, &mut scenario)?);
    }
    let mut buf = Vec::new();
    root_weights_csv(&rows, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn cmd_table(args: &TableArgs, with_slope: bool) -> Result<()> {
    let spec = build_spec(&args.spec, &args.n)?;
    let reference = match (args.reference, args.reference_run) {
        (Some(value), _) => Some(value),
        (None, Some(n_ref)) => Some(reference_run(
            &spec.model,
            spec.tail,
            spec.alpha,
            spec.beta,
            n_ref,
            spec.seed,
            Some(&cache_path(args.out.as_deref())),
        )?),
        (None, None) => None,
    };
    let rows = run_experiment(&spec, reference)?;
    let doc = emit_report(&rows, args.format.into())?;
    write_out(args.out.as_deref(), &doc)?;
    if with_slope {
        println!("loglog_slope {}", sci(loglog_slope(&rows)?));
    }
    Ok(())
}

fn cmd_reference(args: &ReferenceArgs) -> Result<()> {
    let model = parse_model(&args.model);
    let tail = merge_tail(TailSpec::Normal, Some(&args.tail), args.nu)?;
    let cache = cache_path(args.out.as_deref());
    let value = reference_run(
        &model,
        tail,
        args.alpha,
        args.beta,
        args.n,
        args.seed,
        Some(&cache),
    )?;
    // Full precision: this value feeds later runs as the truth.
    write_out(args.out.as_deref(), &format!("{value}\n"))
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let model: SimplifiedDeltaGamma = appendix_h_fixture();
    match &args.out {
        Some(path) => save_model(&model, path),
        None => {
            print!("{}", model_to_string(&model));
            Ok(())
        }
    }
}

/// The cache sits next to the output artifact so related runs share it.
fn cache_path(out: Option<&Path>) -> PathBuf {
    match out.and_then(Path::parent) {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(REFERENCE_CACHE),
        _ => PathBuf::from(REFERENCE_CACHE),
    }
}
