//! Config-driven experiment harness.
//!
//! Runs replicated CoVaR estimates over a grid of sample sizes, reduces
//! them against a truth value to bias / SD / RMSE / coverage / width
//! tables, fits log-log convergence slopes and renders CSV or markdown
//! reports. Each replication owns an exclusive random stream keyed by its
//! index, so any subset of a run can be reproduced in isolation and the
//! metrics do not depend on how replications are scheduled. The harness
//! owns all file I/O; estimator modules never touch the filesystem.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    linear_covar, nonlinear_covar, qre_covar, sample_linear, sample_nonlinear,
    LinearPortfolioSpec, NonlinearPortfolioSpec,
};
use crate::dgmodel::{
    appendix_h_fixture, load_model, model_to_string, sample_losses, LossSample,
    SimplifiedDeltaGamma, TailSpec,
};
use crate::error::{Error, Result};
use crate::estimators::{
    batching_ci, batching_estimate, check_prob, is_estimate, BatchConfig, EstimateReport, IsConfig,
};
use crate::numerics::RngStream;

/// Sections used by the default two-stage split.
pub const DEFAULT_SECTIONS: usize = 10;

/// Bootstrap replicates behind every quantile-regression interval.
const QRE_BOOTSTRAP_REPS: usize = 200;

/// Loss model an experiment draws from.
///
/// The linear and nonlinear pairs carry their parameter sets and come with
/// closed-form truth. The delta-gamma variants have no closed form, so
/// experiments on them need a reference value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    /// Bivariate normal pair.
    Linear(LinearPortfolioSpec),
    /// Normal X entering Y through a quadratic exposure.
    Nonlinear(NonlinearPortfolioSpec),
    /// Simplified delta-gamma model loaded from a document.
    DgFile(PathBuf),
    /// The built-in 50-dimensional delta-gamma benchmark.
    AppendixHFixture,
}

impl ModelChoice {
    /// Whether this is a delta-gamma model (the IS estimator's domain).
    pub fn is_delta_gamma(&self) -> bool {
        matches!(self, ModelChoice::DgFile(_) | ModelChoice::AppendixHFixture)
    }
}

/// Estimator applied in each replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorChoice {
    /// Batching estimator with the distribution-free interval.
    #[serde(rename = "BE")]
    Be,
    /// Importance-sampling-inspired estimator with a sectioning interval.
    #[serde(rename = "IS")]
    Is,
    /// Quantile-regression baseline with a percentile bootstrap interval.
    #[serde(rename = "QRE")]
    Qre,
}

impl fmt::Display for EstimatorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorChoice::Be => "BE",
            EstimatorChoice::Is => "IS",
            EstimatorChoice::Qre => "QRE",
        })
    }
}

/// Sample allocation as written in a config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// Apply the estimator's default rule at each sample size.
    Default,
    /// Exactly `k` batches of `m` observations; requires `k * m == n`.
    Batches { k: usize, m: usize },
    /// Two-stage split with `b` sections; requires `n1 + n2 == n`.
    Split { n1: usize, n2: usize, b: usize },
}

/// Allocation with the default rules applied, as carried in report rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolvedAllocation {
    /// `k` batches of `m` observations.
    Batches { k: usize, m: usize },
    /// Stage sizes and section count of the two-stage split.
    Split { n1: usize, n2: usize, b: usize },
    /// The raw sample with no layout (quantile regression).
    Plain,
}

impl fmt::Display for ResolvedAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ResolvedAllocation::Batches { k, m } => write!(f, "k={k};m={m}"),
            ResolvedAllocation::Split { n1, n2, b } => write!(f, "n1={n1};n2={n2};b={b}"),
            ResolvedAllocation::Plain => f.write_str("plain"),
        }
    }
}

impl FromStr for ResolvedAllocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "plain" {
            return Ok(ResolvedAllocation::Plain);
        }
        let fields: BTreeMap<&str, usize> = s
            .split(';')
            .map(|part| {
                let (key, value) = part.split_once('=').ok_or_else(|| bad_alloc(s))?;
                let value = value.parse().map_err(|_| bad_alloc(s))?;
                Ok((key, value))
            })
            .collect::<Result<_>>()?;
        match (
            fields.get("k"),
            fields.get("m"),
            fields.get("n1"),
            fields.get("n2"),
            fields.get("b"),
        ) {
            (Some(&k), Some(&m), None, None, None) if fields.len() == 2 => {
                Ok(ResolvedAllocation::Batches { k, m })
            }
            (None, None, Some(&n1), Some(&n2), Some(&b)) if fields.len() == 3 => {
                Ok(ResolvedAllocation::Split { n1, n2, b })
            }
            _ => Err(bad_alloc(s)),
        }
    }
}

fn bad_alloc(s: &str) -> Error {
    Error::InvalidParameter(format!(
        "allocation label must be `k=..;m=..`, `n1=..;n2=..;b=..` or `plain`, got `{s}`"
    ))
}

/// Full description of a replicated experiment.
///
/// Serialises to a flat JSON document; the CLI reads these as config files
/// and lets flags override individual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelChoice,
    pub tail: TailSpec,
    pub estimator: EstimatorChoice,
    pub alpha: f64,
    pub beta: f64,
    pub sample_sizes: Vec<usize>,
    pub allocation: Allocation,
    pub replications: usize,
    pub seed: u64,
    pub ci_level: f64,
}

impl ExperimentSpec {
    /// Checks field ranges and the model / tail / estimator / allocation
    /// compatibility rules.
    ///
    /// # Errors
    ///
    /// Probabilities outside (0, 1), zero replications, an empty or
    /// incompatible size grid, heavy tails or the IS estimator on a model
    /// that is not delta-gamma, and invalid portfolio parameters.
    pub fn validate(&self) -> Result<()> {
        check_prob(self.alpha, "alpha")?;
        check_prob(self.beta, "beta")?;
        check_prob(self.ci_level, "ci_level")?;
        self.tail.validate()?;
        match &self.model {
            ModelChoice::Linear(spec) => spec.validate()?,
            ModelChoice::Nonlinear(spec) => spec.validate()?,
            ModelChoice::DgFile(_) | ModelChoice::AppendixHFixture => {}
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter(
                "replications must be at least 1".into(),
            ));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::InvalidParameter(
                "sample_sizes must not be empty".into(),
            ));
        }
        if !self.model.is_delta_gamma() {
            if self.estimator == EstimatorChoice::Is {
                return Err(Error::InvalidParameter(
                    "the IS estimator needs a delta-gamma model".into(),
                ));
            }
            if self.tail != TailSpec::Normal {
                return Err(Error::InvalidParameter(
                    "heavy-tailed factors apply to delta-gamma models only".into(),
                ));
            }
        }
        for &n in &self.sample_sizes {
            resolve_allocation(self.allocation, self.estimator, n)?;
        }
        Ok(())
    }
}

/// Metrics of one sample size over all replications.
///
/// `rmse` is defined through `rmse^2 = bias^2 + sd^2` with the sample SD
/// over replications ((R - 1) divisor), `cp` is the fraction of intervals
/// covering the truth, `width` the mean interval width and `wall_seconds`
/// the mean wall time of one full estimate (sampling plus estimation).
/// A batch count too small for the distribution-free interval leaves `cp`
/// and `width` as NaN while the point metrics stay available.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub n: usize,
    pub alloc: ResolvedAllocation,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub cp: f64,
    pub width: f64,
    pub wall_seconds: f64,
}

/// Applies the default allocation rules at sample size `n`.
///
/// Defaults: the batching layout takes `k = ceil(n^(2/3) / 2)` batches of
/// `m = floor(n / k)`; the two-stage split halves the sample with `n2`
/// rounded down to a multiple of `b = 10` sections and the remainder going
/// to the first stage; quantile regression takes the raw sample. Explicit
/// allocations must match the estimator family and account for exactly `n`
/// observations.
///
/// # Errors
///
/// A sample size too small for the rule, an explicit allocation that does
/// not sum to `n`, or an allocation shape foreign to the estimator.
pub fn resolve_allocation(
    alloc: Allocation,
    estimator: EstimatorChoice,
    n: usize,
) -> Result<ResolvedAllocation> {
    match (estimator, alloc) {
        (EstimatorChoice::Be, Allocation::Default) => {
            let k = ((n as f64).powf(2.0 / 3.0) / 2.0).ceil().max(2.0) as usize;
            let m = n / k;
            if m < 2 {
                return Err(Error::InvalidParameter(format!(
                    "sample size {n} is too small for the default batch layout"
                )));
            }
            Ok(ResolvedAllocation::Batches { k, m })
        }
        (EstimatorChoice::Be, Allocation::Batches { k, m }) => {
            BatchConfig::new(k, m)?;
            if k * m != n {
                return Err(Error::InvalidParameter(format!(
                    "batch layout {k} x {m} accounts for {} observations, not {n}",
                    k * m
                )));
            }
            Ok(ResolvedAllocation::Batches { k, m })
        }
        (EstimatorChoice::Is, Allocation::Default) => {
            let (n1, n2, b) = default_split(n)?;
            Ok(ResolvedAllocation::Split { n1, n2, b })
        }
        (EstimatorChoice::Is, Allocation::Split { n1, n2, b }) => {
            IsConfig::new(n1, n2, b)?;
            if n1 + n2 != n {
                return Err(Error::InvalidParameter(format!(
                    "split {n1} + {n2} accounts for {} observations, not {n}",
                    n1 + n2
                )));
            }
            Ok(ResolvedAllocation::Split { n1, n2, b })
        }
        (EstimatorChoice::Qre, Allocation::Default) => Ok(ResolvedAllocation::Plain),
        (EstimatorChoice::Qre, _) => Err(Error::InvalidParameter(
            "quantile regression takes the raw sample; use the default allocation".into(),
        )),
        (EstimatorChoice::Be, Allocation::Split { .. }) => Err(Error::InvalidParameter(
            "the batching estimator takes a k x m layout, not a two-stage split".into(),
        )),
        (EstimatorChoice::Is, Allocation::Batches { .. }) => Err(Error::InvalidParameter(
            "the IS estimator takes a two-stage split, not a batch layout".into(),
        )),
    }
}

/// Default two-stage split: halves rounded so `b` divides `n2`.
fn default_split(n: usize) -> Result<(usize, usize, usize)> {
    let b = DEFAULT_SECTIONS;
    let n2 = n / 2 / b * b;
    if n2 < b {
        return Err(Error::InvalidParameter(format!(
            "sample size {n} is too small for the default two-stage split"
        )));
    }
    Ok((n - n2, n2, b))
}

/// Model with its file indirection resolved.
enum LoadedModel {
    Linear(LinearPortfolioSpec),
    Nonlinear(NonlinearPortfolioSpec),
    Dg(SimplifiedDeltaGamma),
}

fn load_choice(choice: &ModelChoice) -> Result<LoadedModel> {
    match choice {
        ModelChoice::Linear(spec) => Ok(LoadedModel::Linear(*spec)),
        ModelChoice::Nonlinear(spec) => Ok(LoadedModel::Nonlinear(*spec)),
        ModelChoice::DgFile(path) => Ok(LoadedModel::Dg(load_model(path)?)),
        ModelChoice::AppendixHFixture => Ok(LoadedModel::Dg(appendix_h_fixture())),
    }
}

/// Truth precedence: a closed form when the model has one, otherwise the
/// caller-supplied reference (a cached high-n run upstream feeds in here).
fn resolve_truth(spec: &ExperimentSpec, reference: Option<f64>) -> Result<f64> {
    match &spec.model {
        ModelChoice::Linear(model) => linear_covar(model, spec.alpha, spec.beta),
        ModelChoice::Nonlinear(model) => {
            Ok(nonlinear_covar(model, spec.alpha, spec.beta)?.0)
        }
        ModelChoice::DgFile(_) | ModelChoice::AppendixHFixture => {
            reference.ok_or(Error::MissingReference)
        }
    }
}

fn draw_sample(
    model: &LoadedModel,
    tail: TailSpec,
    stream: &mut RngStream,
    n: usize,
) -> Result<LossSample> {
    match model {
        LoadedModel::Linear(spec) => sample_linear(spec, stream, n),
        LoadedModel::Nonlinear(spec) => sample_nonlinear(spec, stream, n),
        LoadedModel::Dg(model) => sample_losses(model, tail, stream, n),
    }
}

/// One full estimate for replication `rep`.
///
/// The replication stream is `RngStream::new(seed, rep)`; sampling draws
/// from its substream 0 and any second randomness source (bootstrap, IS
/// stage two) from substream 1, so estimators never share draws.
fn estimate_with(
    spec: &ExperimentSpec,
    model: &LoadedModel,
    alloc: ResolvedAllocation,
    n: usize,
    rep: u64,
) -> Result<EstimateReport> {
    let stream = RngStream::new(spec.seed, rep);
    match (spec.estimator, alloc) {
        (EstimatorChoice::Be, ResolvedAllocation::Batches { k, m }) => {
            let mut draw = stream.substream(0);
            let sample = draw_sample(model, spec.tail, &mut draw, k * m)?;
            let cfg = BatchConfig::new(k, m)?;
            let (point, yhats) = batching_estimate(&sample, &cfg, spec.alpha, spec.beta)?;
            // A batch count that cannot support the distribution-free
            // interval still yields a point estimate; the bounds degrade to
            // NaN and the metrics report no coverage instead of failing the
            // whole sweep.
            let (ci_low, ci_high) = match batching_ci(&yhats, spec.beta, 1.0 - spec.ci_level) {
                Ok(bounds) => bounds,
                Err(Error::InfeasibleCi { .. }) => (f64::NAN, f64::NAN),
                Err(other) => return Err(other),
            };
            let mut diagnostics = BTreeMap::new();
            diagnostics.insert("k".into(), k as f64);
            diagnostics.insert("m".into(), m as f64);
            Ok(EstimateReport {
                point,
                ci_low,
                ci_high,
                level: spec.ci_level,
                diagnostics,
            })
        }
        (EstimatorChoice::Is, ResolvedAllocation::Split { n1, n2, b }) => {
            let LoadedModel::Dg(model) = model else {
                return Err(Error::InvalidParameter(
                    "the IS estimator needs a delta-gamma model".into(),
                ));
            };
            let cfg = IsConfig::new(n1, n2, b)?;
            is_estimate(
                model,
                spec.tail,
                &cfg,
                spec.alpha,
                spec.beta,
                spec.ci_level,
                &stream,
            )
        }
        (EstimatorChoice::Qre, ResolvedAllocation::Plain) => {
            let mut draw = stream.substream(0);
            let sample = draw_sample(model, spec.tail, &mut draw, n)?;
            qre_covar(
                &sample,
                spec.alpha,
                spec.beta,
                QRE_BOOTSTRAP_REPS,
                spec.ci_level,
                &stream.substream(1),
            )
        }
        (estimator, alloc) => Err(Error::InvalidParameter(format!(
            "allocation {alloc} does not fit the {estimator} estimator"
        ))),
    }
}

/// One full estimate at sample size `n` for replication `rep`.
///
/// This is the unit the replicated tables aggregate; exposing it lets a
/// single run be reproduced, inspected (diagnostics included) or
/// distributed across processes without rerunning a whole experiment.
///
/// # Errors
///
/// Invalid specs, file problems and estimator degeneracies.
pub fn single_estimate(spec: &ExperimentSpec, n: usize, rep: u64) -> Result<EstimateReport> {
    spec.validate()?;
    let model = load_choice(&spec.model)?;
    let alloc = resolve_allocation(spec.allocation, spec.estimator, n)?;
    estimate_with(spec, &model, alloc, n, rep)
}

struct Replicate {
    point: f64,
    ci_low: f64,
    ci_high: f64,
    seconds: f64,
}

fn summarize(n: usize, alloc: ResolvedAllocation, truth: f64, reps: &[Replicate]) -> MetricsRow {
    let r = reps.len() as f64;
    let mean = reps.iter().map(|rep| rep.point).sum::<f64>() / r;
    let bias = mean - truth;
    let sd = if reps.len() > 1 {
        let ss = reps
            .iter()
            .map(|rep| (rep.point - mean) * (rep.point - mean))
            .sum::<f64>();
        (ss / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    // Interval feasibility depends only on the row's layout, so either
    // every replicate carries bounds or none does.
    let (cp, width) = if reps
        .iter()
        .all(|rep| rep.ci_low.is_finite() && rep.ci_high.is_finite())
    {
        let covered = reps
            .iter()
            .filter(|rep| rep.ci_low <= truth && truth <= rep.ci_high)
            .count();
        (
            covered as f64 / r,
            reps.iter().map(|rep| rep.ci_high - rep.ci_low).sum::<f64>() / r,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    MetricsRow {
        n,
        alloc,
        bias,
        sd,
        rmse: (bias * bias + sd * sd).sqrt(),
        cp,
        width,
        wall_seconds: reps.iter().map(|rep| rep.seconds).sum::<f64>() / r,
    }
}

fn run_size(
    spec: &ExperimentSpec,
    model: &LoadedModel,
    truth: f64,
    n: usize,
) -> Result<MetricsRow> {
    let alloc = resolve_allocation(spec.allocation, spec.estimator, n)?;
    let replicates = (0..spec.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let started = Instant::now();
            let report = estimate_with(spec, model, alloc, n, rep)?;
            Ok(Replicate {
                point: report.point,
                ci_low: report.ci_low,
                ci_high: report.ci_high,
                seconds: started.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(n, alloc, truth, &replicates))
}

/// Runs the replicated experiment and reduces it to one row per sample
/// size.
///
/// `reference` supplies the truth for delta-gamma models; models with a
/// closed form ignore it. Replication `rep` always runs on stream
/// `(seed, rep)`, so the rows are identical however many worker threads
/// execute them (wall seconds aside).
///
/// # Errors
///
/// Invalid specs, a delta-gamma model without a reference, and any
/// replication failure (first in replication order).
pub fn run_experiment(spec: &ExperimentSpec, reference: Option<f64>) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    let truth = resolve_truth(spec, reference)?;
    let model = load_choice(&spec.model)?;
    spec.sample_sizes
        .iter()
        .map(|&n| {
            let started = Instant::now();
            let row = run_size(spec, &model, truth, n)?;
            log::info!(
                "{} n={n} done: {} replications in {:.2}s",
                spec.estimator,
                spec.replications,
                started.elapsed().as_secs_f64()
            );
            Ok(row)
        })
        .collect()
}

/// Least-squares slope of `log(rmse)` against `log(n)`.
///
/// # Errors
///
/// Fewer than three rows, repeated sample sizes, or a nonpositive rmse
/// leave the slope undefined.
pub fn loglog_slope(rows: &[MetricsRow]) -> Result<f64> {
    if rows.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a convergence slope needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    let mut sizes: Vec<usize> = rows.iter().map(|row| row.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() != rows.len() {
        return Err(Error::InvalidParameter(
            "a convergence slope needs distinct sample sizes".into(),
        ));
    }
    for row in rows {
        if row.rmse.is_nan() || row.rmse <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rmse must be positive to take logs, got {:e} at n = {}",
                row.rmse, row.n
            )));
        }
    }
    let mean_x = rows.iter().map(|row| (row.n as f64).ln()).sum::<f64>() / rows.len() as f64;
    let mean_y = rows.iter().map(|row| row.rmse.ln()).sum::<f64>() / rows.len() as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for row in rows {
        let dx = (row.n as f64).ln() - mean_x;
        sxx += dx * dx;
        sxy += dx * (row.rmse.ln() - mean_y);
    }
    Ok(sxy / sxx)
}

/// Output format of [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

const CSV_HEADER: &str = "n,alloc,bias,sd,rmse,cp,width,seconds";

/// `1.23456e-3` style scientific notation with six significant digits.
fn sci(value: f64) -> String {
    format!("{value:.5e}")
}

/// Renders rows as a CSV or markdown document.
///
/// The CSV header is fixed as `n,alloc,bias,sd,rmse,cp,width,seconds` and
/// every number uses scientific notation with six significant digits, so
/// two reports of the same run compare byte-equal apart from the seconds
/// column. The markdown table mirrors the CSV columns.
///
/// # Errors
///
/// An empty row list.
pub fn emit_report(rows: &[MetricsRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter(
            "a report needs at least one row".into(),
        ));
    }
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for row in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    row.n,
                    row.alloc,
                    sci(row.bias),
                    sci(row.sd),
                    sci(row.rmse),
                    sci(row.cp),
                    sci(row.width),
                    sci(row.wall_seconds),
                );
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| n | alloc | bias | sd | rmse | cp | width | seconds |\n");
            out.push_str("|---:|:---|---:|---:|---:|---:|---:|---:|\n");
            for row in rows {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} | {} |",
                    row.n,
                    row.alloc,
                    sci(row.bias),
                    sci(row.sd),
                    sci(row.rmse),
                    sci(row.cp),
                    sci(row.width),
                    sci(row.wall_seconds),
                );
            }
        }
    }
    Ok(out)
}

/// Parses a CSV document produced by [`emit_report`].
///
/// # Errors
///
/// A missing or altered header, a row with the wrong field count, or an
/// unparseable field.
pub fn parse_report(doc: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = doc.lines();
    let header = lines.next().unwrap_or("");
    if header != CSV_HEADER {
        return Err(Error::InvalidParameter(format!(
            "report header must be `{CSV_HEADER}`, got `{header}`"
        )));
    }
    let mut rows = Vec::new();
    for (index, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::InvalidParameter(format!(
                "report row {} has {} fields, expected 8",
                index + 1,
                fields.len()
            )));
        }
        let number = |text: &str| -> Result<f64> {
            text.parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "report row {} holds a non-numeric field `{text}`",
                    index + 1
                ))
            })
        };
        rows.push(MetricsRow {
            n: fields[0].parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "report row {} holds a non-integer n `{}`",
                    index + 1,
                    fields[0]
                ))
            })?,
            alloc: fields[1].parse()?,
            bias: number(fields[2])?,
            sd: number(fields[3])?,
            rmse: number(fields[4])?,
            cp: number(fields[5])?,
            width: number(fields[6])?,
            wall_seconds: number(fields[7])?,
        });
    }
    Ok(rows)
}

/// FNV-1a over the model document, so cache keys follow model content.
fn model_hash(model: &SimplifiedDeltaGamma) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in model_to_string(model).bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn reference_key(
    model: &SimplifiedDeltaGamma,
    tail: TailSpec,
    alpha: f64,
    beta: f64,
    n_ref: usize,
    seed: u64,
) -> String {
    let tail_tag = match tail {
        TailSpec::Normal => "normal".to_string(),
        TailSpec::StudentT { nu } => format!("student-t-{nu}"),
    };
    format!(
        "{:016x}:{tail_tag}:alpha={alpha}:beta={beta}:n={n_ref}:seed={seed}",
        model_hash(model)
    )
}

fn read_cache(path: &Path) -> Result<BTreeMap<String, f64>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn write_cache(path: &Path, cache: &BTreeMap<String, f64>) -> Result<()> {
    let mut doc = serde_json::to_string_pretty(cache)?;
    doc.push('\n');
    Ok(std::fs::write(path, doc)?)
}

/// High-n IS estimate standing in for unavailable closed-form truth.
///
/// Runs the IS estimator once at the default split of `n_ref` on stream
/// `(seed, 0)`. With a cache path the result is stored in a JSON document
/// keyed by the model content hash, tail, levels, `n_ref` and seed;
/// a later call with the same key returns the stored value without
/// recomputation.
///
/// # Errors
///
/// A model that is not delta-gamma, estimator degeneracies, and cache I/O
/// failures.
pub fn reference_run(
    model: &ModelChoice,
    tail: TailSpec,
    alpha: f64,
    beta: f64,
    n_ref: usize,
    seed: u64,
    cache: Option<&Path>,
) -> Result<f64> {
    let LoadedModel::Dg(model) = load_choice(model)? else {
        return Err(Error::InvalidParameter(
            "reference runs use the IS estimator, which needs a delta-gamma model".into(),
        ));
    };
    tail.validate()?;
    let key = reference_key(&model, tail, alpha, beta, n_ref, seed);
    if let Some(path) = cache {
        if let Some(&hit) = read_cache(path)?.get(&key) {
            log::info!("reference cache hit: {key}");
            return Ok(hit);
        }
    }
    let (n1, n2, b) = default_split(n_ref)?;
    let cfg = IsConfig::new(n1, n2, b)?;
    let stream = RngStream::new(seed, 0);
    let report = is_estimate(&model, tail, &cfg, alpha, beta, 0.95, &stream)?;
    if let Some(path) = cache {
        let mut entries = read_cache(path)?;
        entries.insert(key, report.point);
        write_cache(path, &entries)?;
    }
    Ok(report.point)
}
