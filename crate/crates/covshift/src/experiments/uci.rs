//! Binary-classification benchmark on a biased subsample of a tabular
//! dataset.
//!
//! Each replication splits the loaded table into a training pool and a
//! test set by a configured proportion, thins the pool with the
//! center-biased keep rule of [`crate::datagen::biased_subsample`] (the
//! covariate-shift injection), solves importance weights, and fits six
//! classifiers: {squared, logistic} loss × {plug-in-only, weighted,
//! robust} mode. The reported metric per cell is the 0/1 test error
//! against the held-out labels.
//!
//! The table format is the one [`crate::datagen::load_uci_breast_cancer`]
//! reads; `data_path` must point at such a file (none is bundled).

use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use super::{
    finish_report, run_indexed, summary_of, ExperimentConfig, ExperimentReport,
    ReplicationRecord,
};
use crate::datagen::{biased_subsample, load_uci_breast_cancer};
use crate::erm::{
    fit_kmm_weighted_logistic, fit_kmm_weighted_ridge, fit_robust_least_squares,
    fit_robust_logistic, fit_unweighted_nr_erm, ErmFit, Loss,
};
use crate::error::{Error, Result};
use crate::estimators::{SplitPlan, WeightDiagnostics};
use crate::kernels::{Dataset, KernelSpec};
use crate::kmm::{kmm_weights, KmmConfig};
use crate::ridge::{fit_kernel_ridge, GammaSchedule};

/// Configuration of the classification benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UciConfig {
    /// Table to load; must be set (the default empty path is rejected).
    pub data_path: PathBuf,
    /// Training-pool fractions; each gets its own group of cells.
    pub proportions: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    /// Bias strength of the training-pool thinning; 0 keeps every row.
    pub sigma1: f64,
    /// Kernel of the classifiers and of the regression function ĝ.
    pub kernel: KernelSpec,
    /// Ridge penalty of the six classifier fits.
    pub lambda: f64,
    /// Ridge schedule for ĝ.
    pub gamma: GammaSchedule,
    /// Weight-solve configuration.
    pub kmm: KmmConfig,
    /// Fraction of the thinned pool given to the weight solve.
    pub rho: f64,
    /// Let both blocks be the full thinned pool instead of splitting.
    pub reuse_full: bool,
    /// Stationarity tolerance of the logistic descents.
    pub erm_tol: f64,
}

impl Default for UciConfig {
    fn default() -> Self {
        let kernel = KernelSpec::Gaussian {
            sigma: 0.5f64.sqrt(),
        };
        Self {
            data_path: PathBuf::new(),
            proportions: vec![0.3, 0.5, 0.7],
            replications: 10,
            base_seed: 1,
            sigma1: 0.01,
            kernel: kernel.clone(),
            lambda: 5.0,
            gamma: GammaSchedule::InverseNtr,
            kmm: KmmConfig::new(kernel),
            rho: 1.0,
            reuse_full: true,
            erm_tol: 1e-6,
        }
    }
}

impl UciConfig {
    fn validate(&self) -> Result<()> {
        if self.data_path.as_os_str().is_empty() {
            return Err(Error::InvalidParameter(
                "data_path must point at a table file".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter(
                "replications must be at least 1".into(),
            ));
        }
        if self.proportions.is_empty() {
            return Err(Error::InvalidParameter(
                "proportions must be nonempty".into(),
            ));
        }
        for &p in &self.proportions {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "proportions must lie strictly inside (0, 1), got {p}"
                )));
            }
        }
        if !(self.sigma1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma1 must be finite, got {}",
                self.sigma1
            )));
        }
        Ok(())
    }
}

/// 0/1 test error of a fitted classifier against the held-out labels.
fn test_error(fit: &ErmFit, test: &Dataset) -> Result<f64> {
    let predicted = fit.classify(test.x())?;
    let truth = test.labels_required("test-error report")?;
    let wrong = predicted
        .iter()
        .zip(truth.iter())
        .filter(|(p, t)| p != t)
        .count();
    Ok(wrong as f64 / test.n() as f64)
}

/// Run the classification benchmark.
pub fn run_uci_experiment(cfg: &UciConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    cfg.validate()?;
    let (full, load_report) = load_uci_breast_cancer(&cfg.data_path)?;
    let n_total = full.n();
    for &p in &cfg.proportions {
        let pool = (p * n_total as f64).floor() as usize;
        if pool == 0 || pool >= n_total {
            return Err(Error::InvalidParameter(format!(
                "proportion {p} leaves an empty pool or test set over {n_total} rows"
            )));
        }
    }
    let y_full = full.labels_required("classification benchmark")?.to_owned();

    let reps = cfg.replications;
    let records = run_indexed(cfg.proportions.len() * reps, |flat| {
        let (p_idx, rep) = (flat / reps, flat % reps);
        let proportion = cfg.proportions[p_idx];
        let seed = cfg.base_seed + flat as u64;
        // One master stream per replication hands dedicated seeds to the
        // split shuffle and the thinning draw, so adding a stage later
        // cannot silently shift the others.
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let split_seed = master.random::<u64>();
        let bias_seed = master.random::<u64>();

        let mut order: Vec<usize> = (0..n_total).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
        let pool_len = (proportion * n_total as f64).floor() as usize;
        let train_pool = full.rows(&order[..pool_len])?;
        let test_idx = &order[pool_len..];
        let x_te = full.x().select(Axis(0), test_idx);
        let y_te: Array1<f64> = test_idx.iter().map(|&i| y_full[i]).collect();
        let test = Dataset::test_with_held_out_labels(x_te, y_te)?;

        let train = biased_subsample(&train_pool, cfg.sigma1, bias_seed)?;
        let plan = SplitPlan::new(cfg.rho, train.n(), cfg.reuse_full)?;
        let kmm_block = train.rows(plan.kmm_indices())?;
        let nr_block = train.rows(plan.nr_indices())?;

        let weights = kmm_weights(&kmm_block, &test, &cfg.kmm)?;
        let gamma = cfg.gamma.gamma(nr_block.n(), test.n())?;
        let g_hat = fit_kernel_ridge(&nr_block, gamma, &cfg.kernel)?;

        let fits = [
            (
                "err_squared_robust",
                fit_robust_least_squares(
                    &kmm_block, &test, &weights, &g_hat, cfg.lambda, &cfg.kernel,
                )?,
            ),
            (
                "err_squared_kmm",
                fit_kmm_weighted_ridge(&kmm_block, &weights, cfg.lambda, &cfg.kernel, test.n())?,
            ),
            (
                "err_squared_unweighted",
                fit_unweighted_nr_erm(
                    &test, &g_hat, cfg.lambda, &cfg.kernel, Loss::Squared, cfg.erm_tol,
                )?,
            ),
            (
                "err_logistic_robust",
                fit_robust_logistic(
                    &kmm_block, &test, &weights, &g_hat, cfg.lambda, &cfg.kernel, cfg.erm_tol,
                )?,
            ),
            (
                "err_logistic_kmm",
                fit_kmm_weighted_logistic(
                    &kmm_block, &weights, cfg.lambda, &cfg.kernel, cfg.erm_tol,
                )?,
            ),
            (
                "err_logistic_unweighted",
                fit_unweighted_nr_erm(
                    &test, &g_hat, cfg.lambda, &cfg.kernel, Loss::Logistic, cfg.erm_tol,
                )?,
            ),
        ];
        let mut values = BTreeMap::new();
        for (name, fit) in &fits {
            values.insert(name.to_string(), Some(test_error(fit, &test)?));
        }
        Ok(ReplicationRecord {
            group: format!("proportion={proportion}"),
            replication: rep,
            seed,
            target: None,
            values,
            weights: Some(WeightDiagnostics::from(&weights)),
        })
    })?;

    let mut analysis = BTreeMap::new();
    analysis.insert("rows_total".to_string(), load_report.rows_kept as f64);
    analysis.insert(
        "rows_dropped_missing".to_string(),
        load_report.rows_dropped_missing as f64,
    );

    Ok(finish_report(
        ExperimentConfig::Uci(cfg.clone()),
        records,
        analysis,
        started,
    ))
}

/// Scenario properties: every recorded error lies in [0, 1]; per
/// (proportion, loss) cell the robust mode's mean error is at most 0.02
/// above the better of the other two modes; and with `sigma1 = 0` (no
/// injected shift) the weighted and plug-in modes agree within 0.03.
pub fn check(cfg: &UciConfig, report: &ExperimentReport) -> Vec<String> {
    let mut failures = Vec::new();
    for r in &report.records {
        for (metric, v) in &r.values {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(v) {
                    failures.push(format!(
                        "record {}/{}: {metric} = {v} escapes [0, 1]",
                        r.group, r.replication
                    ));
                }
            }
        }
    }
    for &p in &cfg.proportions {
        let group = format!("proportion={p}");
        for loss in ["squared", "logistic"] {
            let mean = |mode: &str| {
                summary_of(report, &group, &format!("err_{loss}_{mode}")).map(|s| s.mean)
            };
            let (Some(robust), Some(kmm), Some(unweighted)) =
                (mean("robust"), mean("kmm"), mean("unweighted"))
            else {
                failures.push(format!("cell {group}/{loss} lacks error summaries"));
                continue;
            };
            if robust > kmm.min(unweighted) + 0.02 {
                failures.push(format!(
                    "cell {group}/{loss}: robust error {robust:.4} exceeds \
                     min(kmm {kmm:.4}, unweighted {unweighted:.4}) + 0.02"
                ));
            }
            if cfg.sigma1 == 0.0 && (kmm - unweighted).abs() > 0.03 {
                failures.push(format!(
                    "cell {group}/{loss}: no-bias run but weighted {kmm:.4} and \
                     plug-in {unweighted:.4} errors differ by more than 0.03"
                ));
            }
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::synthetic_uci_csv;
    use std::io::Write;

    fn table_file(rows: usize, seed: u64) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(synthetic_uci_csv(rows, None, seed).as_bytes())
            .unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn reports_six_error_cells_per_replication() {
        let file = table_file(90, 3);
        let cfg = UciConfig {
            data_path: file.path().to_path_buf(),
            proportions: vec![0.5],
            replications: 2,
            erm_tol: 1e-5,
            ..UciConfig::default()
        };
        let report = run_uci_experiment(&cfg).unwrap();
        assert_eq!(report.scenario, "uci");
        assert_eq!(report.records.len(), 2);
        for r in &report.records {
            assert_eq!(r.group, "proportion=0.5");
            assert_eq!(r.values.len(), 6);
            for (metric, v) in &r.values {
                let v = v.unwrap();
                assert!((0.0..=1.0).contains(&v), "{metric} = {v}");
            }
            assert!(r.weights.is_some());
            assert!(r.target.is_none());
        }
        assert_eq!(report.analysis["rows_total"], 90.0);
        assert_eq!(report.analysis["rows_dropped_missing"], 0.0);
    }

    #[test]
    fn zero_bias_run_passes_the_agreement_checks() {
        let file = table_file(120, 11);
        let cfg = UciConfig {
            data_path: file.path().to_path_buf(),
            proportions: vec![0.6],
            replications: 3,
            sigma1: 0.0,
            erm_tol: 1e-5,
            ..UciConfig::default()
        };
        let report = run_uci_experiment(&cfg).unwrap();
        let failures = check(&cfg, &report);
        assert!(failures.is_empty(), "unexpected failures: {failures:?}");
    }

    #[test]
    fn missing_or_degenerate_configuration_is_rejected() {
        assert!(run_uci_experiment(&UciConfig::default()).is_err());

        let file = table_file(40, 5);
        let mut cfg = UciConfig {
            data_path: file.path().to_path_buf(),
            ..UciConfig::default()
        };
        cfg.proportions = vec![1.0];
        assert!(run_uci_experiment(&cfg).is_err());
        cfg.proportions = vec![0.5];
        cfg.replications = 0;
        assert!(run_uci_experiment(&cfg).is_err());
        cfg.replications = 1;
        cfg.sigma1 = f64::NAN;
        assert!(run_uci_experiment(&cfg).is_err());
    }
}
