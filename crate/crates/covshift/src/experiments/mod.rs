//! Reproducible benchmark scenarios with machine-readable reports.
//!
//! Four scenarios are provided, each pairing a serializable configuration
//! with a runner and a post-hoc property check:
//!
//! * [`toy`] — 1-d polynomial regression under a mean/scale shift; compares
//!   the slopes fitted by plain least squares, importance-weighted least
//!   squares, and the robust residual-corrected objective.
//! * [`table1`] — mean estimation on shifted 10-d Gaussian pairs over a
//!   grid of (lasso penalty, sample sizes) cells; reports average MSE per
//!   estimator per cell against reference magnitudes.
//! * [`uci`] — binary classification on a biased subsample of a tabular
//!   dataset; compares test error across six (loss, fitting mode) cells.
//! * [`rates`] — error-versus-sample-size sweep for the three mean
//!   estimators, with a log-log slope fit and a bootstrap interval.
//!
//! Every scenario derives the seed of replication `i` within its group as
//! `base_seed + flat_index`, runs replications in parallel, and collects
//! records in index order — reports are byte-identical across thread
//! counts and across reruns, except for the wall-clock field.

pub mod rates;
pub mod table1;
pub mod toy;
pub mod uci;

pub use rates::{run_rate_sweep, RatesConfig};
pub use table1::{run_table1, Table1Config};
pub use toy::{run_toy_experiment, ToyConfig};
pub use uci::{run_uci_experiment, UciConfig};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimators::WeightDiagnostics;

/// Tagged union of the scenario configurations; the JSON form carries a
/// `"scenario"` field naming the variant, e.g. `{"scenario": "toy", ...}`.
///
/// Every field of every scenario has a default, so the minimal valid
/// config is just the scenario tag. Reports echo the fully resolved
/// configuration, never the sparse input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Toy(ToyConfig),
    Table1(Table1Config),
    Uci(UciConfig),
    Rates(RatesConfig),
}

impl ExperimentConfig {
    /// The scenario tag as it appears in configs and CLI subcommands.
    pub fn scenario(&self) -> &'static str {
        match self {
            ExperimentConfig::Toy(_) => "toy",
            ExperimentConfig::Table1(_) => "table1",
            ExperimentConfig::Uci(_) => "uci",
            ExperimentConfig::Rates(_) => "rates",
        }
    }

    /// Replace the scenario's base seed — the hook behind a CLI-level
    /// seed override.
    pub fn set_base_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Toy(c) => c.base_seed = seed,
            ExperimentConfig::Table1(c) => c.base_seed = seed,
            ExperimentConfig::Uci(c) => c.base_seed = seed,
            ExperimentConfig::Rates(c) => c.base_seed = seed,
        }
    }
}

/// One replication's output: which group (cell) it belongs to, the seed it
/// ran under, the metric values it produced, and optionally the estimation
/// target and the weight-solve diagnostics.
///
/// Metric slots may be `None` — a named output that this build does not
/// produce (kept so downstream consumers see a stable column set).
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationRecord {
    /// Cell name, e.g. `"n=200"` or `"lambda=0.1,n_tr=50,n_te=500"`.
    pub group: String,
    /// Replication index within the group, starting at 0.
    pub replication: usize,
    /// Seed the replication ran under.
    pub seed: u64,
    /// Ground-truth value the metrics estimate, when one exists.
    pub target: Option<f64>,
    /// Metric name → value; `None` marks a declared-but-unfilled slot.
    pub values: BTreeMap<String, Option<f64>>,
    /// Diagnostics of the weight solve, when the replication ran one.
    pub weights: Option<WeightDiagnostics>,
}

/// Per-(group, metric) aggregate over the records.
#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub group: String,
    pub metric: String,
    /// Number of records contributing a value.
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator; 0 when count < 2).
    pub sd: f64,
    /// Mean of (value − target)²; present only when every contributing
    /// record carries a target.
    pub mse: Option<f64>,
    /// Median of |value − target| under the same condition.
    pub median_abs_error: Option<f64>,
}

/// A full experiment run: the resolved configuration, every replication
/// record, the per-cell summaries, scenario-level analysis values, and the
/// elapsed time. Everything except `wall_clock_seconds` is a pure function
/// of the configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub config: ExperimentConfig,
    pub records: Vec<ReplicationRecord>,
    pub summaries: Vec<MetricSummary>,
    /// Scenario-specific derived quantities (median slopes, fitted error
    /// exponents, confidence bounds, ...).
    pub analysis: BTreeMap<String, f64>,
    pub wall_clock_seconds: f64,
}

/// Run the scenario a configuration describes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg {
        ExperimentConfig::Toy(c) => run_toy_experiment(c),
        ExperimentConfig::Table1(c) => run_table1(c),
        ExperimentConfig::Uci(c) => run_uci_experiment(c),
        ExperimentConfig::Rates(c) => run_rate_sweep(c),
    }
}

/// Evaluate the scenario's built-in sanity properties against a finished
/// report. Returns one message per violated property; empty means all
/// properties hold. The CLI surfaces these behind `--check`.
pub fn check_report(report: &ExperimentReport) -> Vec<String> {
    match &report.config {
        ExperimentConfig::Toy(c) => toy::check(c, report),
        ExperimentConfig::Table1(c) => table1::check(c, report),
        ExperimentConfig::Uci(c) => uci::check(c, report),
        ExperimentConfig::Rates(c) => rates::check(c, report),
    }
}

/// Aggregate records into per-(group, metric) summaries.
///
/// Groups appear in record order (first appearance); metrics are
/// alphabetical within a group. Metrics that are `None` in every record of
/// a group are skipped. MSE and median absolute error are filled only when
/// every contributing record of the group carries a target.
pub fn summarize_records(records: &[ReplicationRecord]) -> Vec<MetricSummary> {
    let mut group_order: Vec<&str> = Vec::new();
    for r in records {
        if !group_order.iter().any(|g| *g == r.group) {
            group_order.push(&r.group);
        }
    }
    let mut metric_names: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        for k in r.values.keys() {
            metric_names.insert(k);
        }
    }

    let mut out = Vec::new();
    for group in group_order {
        for metric in &metric_names {
            let mut values = Vec::new();
            let mut errors = Some(Vec::new());
            for r in records.iter().filter(|r| r.group == group) {
                let Some(Some(v)) = r.values.get(*metric) else {
                    continue;
                };
                values.push(*v);
                match (&mut errors, r.target) {
                    (Some(errs), Some(t)) => errs.push(*v - t),
                    _ => errors = None,
                }
            }
            if values.is_empty() {
                continue;
            }
            let (mean, sd) = mean_sd(&values);
            let (mse, median_abs_error) = match &errors {
                Some(errs) => {
                    let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
                    (
                        Some(errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64),
                        Some(median(&abs)),
                    )
                }
                None => (None, None),
            };
            out.push(MetricSummary {
                group: group.to_string(),
                metric: metric.to_string(),
                count: values.len(),
                mean,
                sd,
                mse,
                median_abs_error,
            });
        }
    }
    out
}

/// Mean summary of a finished group/metric cell, or `None` if absent.
pub(crate) fn summary_of<'a>(
    report: &'a ExperimentReport,
    group: &str,
    metric: &str,
) -> Option<&'a MetricSummary> {
    report
        .summaries
        .iter()
        .find(|s| s.group == group && s.metric == metric)
}

/// Assemble the report scaffolding shared by every scenario runner.
pub(crate) fn finish_report(
    config: ExperimentConfig,
    records: Vec<ReplicationRecord>,
    analysis: BTreeMap<String, f64>,
    started: Instant,
) -> ExperimentReport {
    let summaries = summarize_records(&records);
    ExperimentReport {
        scenario: config.scenario().to_string(),
        config,
        records,
        summaries,
        analysis,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Map `0..count` through `f` in parallel, collecting results in index
/// order — the deterministic replication runner behind every scenario.
pub(crate) fn run_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Mean and sample standard deviation (n − 1 denominator; sd is 0 when
/// fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Median with linear interpolation between the two central order
/// statistics. Values must be finite.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

/// Quantile of an ascending-sorted slice by linear interpolation on the
/// rank scale `q · (len − 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile level outside [0, 1]");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Least-squares slope of `ln y` on `ln x` — the error-decay exponent of a
/// `(sample size, error)` sequence. `y` values are clamped to the smallest
/// positive double so an exact zero cannot poison the fit.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2, "slope fit needs at least two points");
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.ln(), y.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    let sxy = logs
        .iter()
        .map(|p| (p.0 - mx) * (p.1 - my))
        .sum::<f64>();
    sxy / sxx
}

/// Percentile bootstrap interval for a statistic of `n` exchangeable
/// units.
///
/// Each of `draws` rounds resamples the index set `0..n` with replacement
/// and evaluates `stat` on it; the returned pair is the
/// `(1 − level)/2` and `1 − (1 − level)/2` quantiles of those draws.
/// Deterministic given `seed`.
pub fn bootstrap_ci<F>(
    n: usize,
    draws: usize,
    level: f64,
    seed: u64,
    stat: F,
) -> Result<(f64, f64)>
where
    F: Fn(&[usize]) -> f64,
{
    if n == 0 || draws == 0 {
        return Err(Error::InvalidParameter(
            "bootstrap needs at least one unit and one draw".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bootstrap level must lie in (0, 1), got {level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n];
    let mut stats = Vec::with_capacity(draws);
    for _ in 0..draws {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        stats.push(stat(&idx));
    }
    stats.sort_unstable_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((
        quantile_sorted(&stats, tail),
        quantile_sorted(&stats, 1.0 - tail),
    ))
}

/// Write records as tidy CSV: one row per replication, fixed leading
/// columns, one column per metric (alphabetical), then the weight
/// diagnostics when any record carries them. `None` slots are empty cells.
pub fn write_records_csv<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut metric_names: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        for k in r.values.keys() {
            metric_names.insert(k);
        }
    }
    let any_weights = records.iter().any(|r| r.weights.is_some());

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "group".to_string(),
        "replication".to_string(),
        "seed".to_string(),
        "target".to_string(),
    ];
    header.extend(metric_names.iter().map(|m| m.to_string()));
    if any_weights {
        for d in [
            "weights_l_hat",
            "weights_kkt_residual",
            "weights_mean_beta",
            "weights_min_beta",
            "weights_max_beta",
            "weights_iterations",
        ] {
            header.push(d.to_string());
        }
    }
    w.write_record(&header)?;

    let fmt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
    for r in records {
        let mut row = vec![
            r.group.clone(),
            r.replication.to_string(),
            r.seed.to_string(),
            fmt(r.target),
        ];
        for m in &metric_names {
            row.push(fmt(r.values.get(*m).copied().flatten()));
        }
        if any_weights {
            match &r.weights {
                Some(d) => {
                    row.push(format!("{}", d.l_hat));
                    row.push(format!("{}", d.kkt_residual));
                    row.push(format!("{}", d.mean_beta));
                    row.push(format!("{}", d.min_beta));
                    row.push(format!("{}", d.max_beta));
                    row.push(d.iterations.to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
