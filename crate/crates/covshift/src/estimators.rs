//! Estimators of the deployment-time mean outcome under covariate shift.
//!
//! Three estimators share the stage. The weighted average
//! `v_kmm = (1/n_tr) Σ β̂_j y_j` leans entirely on matched importance
//! weights; the plug-in `v_nr = (1/n_te) Σ ĝ(x_i)` leans entirely on a
//! fitted regression function; and the combined
//!
//! ```text
//! v_r = (1/k) Σ_{j ∈ kmm rows} β̂_j (y_j − ĝ(x_j))  +  (1/n_te) Σ_i ĝ(x_i)
//! ```
//!
//! uses the regression as a control variate for the weighted average: the
//! first sum corrects the plug-in with reweighted residuals, so errors in ĝ
//! are damped by the weights and errors in β̂ are damped by small residuals.
//!
//! Both terms are exposed separately in [`EstimateReport`], and the
//! arithmetic is arranged so that two identities hold to the last bit:
//! `v_r = residual_term + plugin_term`, and `v_r = v_kmm` whenever
//! `ĝ ≡ 0` (same weights, same rows). All mean reductions on weighted
//! values route through one helper with a fixed summation order.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::datagen::GaussianSpec;
use crate::error::{Error, Result};
use crate::kernels::Dataset;
use crate::kmm::{kmm_weights, ImportanceWeights, KmmConfig};
use crate::ridge::{
    fit_kernel_ridge, fit_lasso_linear, GammaSchedule, Predictor,
};

/// Default training-split fraction handed to the importance-weighted block
/// when a caller asks for split mode without a preference.
pub const DEFAULT_RHO: f64 = 0.5;

/// How the training rows are shared between the weighted block and the
/// regression block.
///
/// In reuse mode (the practical default) both blocks see every training
/// row. In split mode the first `⌊rho·n_tr⌋` rows feed the weights and the
/// remainder feeds the regression, which makes the two ingredients
/// statistically independent — the arrangement the unbiasedness and
/// variance-reduction checks rely on.
#[derive(Debug, Clone, Serialize)]
pub struct SplitPlan {
    rho: f64,
    n_tr: usize,
    kmm_indices: Vec<usize>,
    nr_indices: Vec<usize>,
    reuse_full: bool,
}

impl SplitPlan {
    /// General constructor; see [`SplitPlan::reuse_full`] and
    /// [`SplitPlan::split`] for the two common cases.
    pub fn new(rho: f64, n_tr: usize, reuse_full: bool) -> Result<Self> {
        if !(rho.is_finite() && (0.0..=1.0).contains(&rho)) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1], got {rho}"
            )));
        }
        if n_tr == 0 {
            return Err(Error::InvalidParameter(
                "split plan needs at least one training row".into(),
            ));
        }
        if reuse_full {
            let all: Vec<usize> = (0..n_tr).collect();
            return Ok(Self {
                rho,
                n_tr,
                kmm_indices: all.clone(),
                nr_indices: all,
                reuse_full: true,
            });
        }
        let k = (rho * n_tr as f64).floor() as usize;
        if k == 0 {
            return Err(Error::InvalidParameter(format!(
                "rho = {rho} leaves the weighted block empty ({n_tr} rows)"
            )));
        }
        if k >= n_tr {
            return Err(Error::InvalidParameter(format!(
                "rho = {rho} leaves no rows for the regression block ({n_tr} rows)"
            )));
        }
        Ok(Self {
            rho,
            n_tr,
            kmm_indices: (0..k).collect(),
            nr_indices: (k..n_tr).collect(),
            reuse_full: false,
        })
    }

    /// Practical mode: both blocks use all training rows.
    pub fn reuse_full(n_tr: usize) -> Result<Self> {
        Self::new(1.0, n_tr, true)
    }

    /// Disjoint mode: first `⌊rho·n_tr⌋` rows to the weights, rest to the
    /// regression. Errors when either block would be empty.
    pub fn split(rho: f64, n_tr: usize) -> Result<Self> {
        Self::new(rho, n_tr, false)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Training-row count the plan was built for.
    pub fn n_tr(&self) -> usize {
        self.n_tr
    }

    /// Rows feeding the importance weights.
    pub fn kmm_indices(&self) -> &[usize] {
        &self.kmm_indices
    }

    /// Rows feeding the regression fit.
    pub fn nr_indices(&self) -> &[usize] {
        &self.nr_indices
    }

    pub fn is_reuse_full(&self) -> bool {
        self.reuse_full
    }

    fn check_matches(&self, train: &Dataset) -> Result<()> {
        if train.n() != self.n_tr {
            return Err(Error::DimensionMismatch(format!(
                "split plan was built for {} training rows, dataset has {}",
                self.n_tr,
                train.n()
            )));
        }
        Ok(())
    }
}

/// Scalar summary of an [`ImportanceWeights`] solve, embedded in reports.
#[derive(Debug, Clone, Serialize)]
pub struct WeightDiagnostics {
    pub l_hat: f64,
    pub kkt_residual: f64,
    pub mean_beta: f64,
    pub min_beta: f64,
    pub max_beta: f64,
    pub iterations: usize,
}

impl From<&ImportanceWeights> for WeightDiagnostics {
    fn from(w: &ImportanceWeights) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &b in &w.beta {
            lo = lo.min(b);
            hi = hi.max(b);
        }
        Self {
            l_hat: w.l_hat,
            kkt_residual: w.kkt_residual,
            mean_beta: w.mean_beta,
            min_beta: lo,
            max_beta: hi,
            iterations: w.iterations,
        }
    }
}

/// Everything one combined-estimate run produces.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    /// Weighted average of labels on the weighted block.
    pub v_kmm: f64,
    /// Mean regression prediction over the test rows.
    pub v_nr: f64,
    /// Combined estimate; equals `residual_term + plugin_term` exactly.
    pub v_r: f64,
    /// Weighted mean of `y − ĝ(x)` over the weighted block.
    pub residual_term: f64,
    /// Mean of `ĝ` over the test rows (identical to `v_nr`).
    pub plugin_term: f64,
    /// Diagnostics of the weight solve behind `v_kmm` and `residual_term`.
    pub weights: WeightDiagnostics,
    /// Ridge regularization actually used for ĝ, when the fit happened here.
    pub gamma: Option<f64>,
}

/// Weighted mean with a fixed left-to-right accumulation order; every
/// estimator's weighted reduction goes through here so that equal inputs
/// give bit-equal outputs.
pub(crate) fn weighted_mean(weights: ArrayView1<'_, f64>, values: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for (w, v) in weights.iter().zip(values.iter()) {
        acc += w * v;
    }
    acc / weights.len() as f64
}

/// Plain mean of `model`'s predictions on the test covariates.
fn prediction_mean<P: Predictor + ?Sized>(model: &P, test: &Dataset) -> Result<f64> {
    let preds = model.predict(test.x())?;
    Ok(preds.sum() / preds.len() as f64)
}

/// `(1/n) Σ β̂_j y_j` — note the divisor is the row count, not `Σ β̂`.
pub fn estimate_v_kmm(train: &Dataset, weights: &ImportanceWeights) -> Result<f64> {
    let y = train.labels_required("importance-weighted mean")?;
    if weights.beta.len() != train.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} training rows",
            weights.beta.len(),
            train.n()
        )));
    }
    Ok(weighted_mean(weights.beta.view(), y))
}

/// `(1/n_te) Σ ĝ(x_i)` over the test covariates.
pub fn estimate_v_nr<P: Predictor + ?Sized>(model: &P, test: &Dataset) -> Result<f64> {
    prediction_mean(model, test)
}

/// The two summands of the combined estimator, given weights for the
/// weighted block directly: `(residual_term, plugin_term)`.
///
/// Exposed separately so that oracle weights (for example the analytic
/// density ratio on synthetic data) can stand in for solved ones.
pub fn v_r_parts<P: Predictor + ?Sized>(
    kmm_train: &Dataset,
    test: &Dataset,
    beta: &Array1<f64>,
    g_hat: &P,
) -> Result<(f64, f64)> {
    let y = kmm_train.labels_required("residual reweighting")?;
    if beta.len() != kmm_train.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} weighted-block rows",
            beta.len(),
            kmm_train.n()
        )));
    }
    let g_tr = g_hat.predict(kmm_train.x())?;
    let residuals = &y.to_owned() - &g_tr;
    let residual_term = weighted_mean(beta.view(), residuals.view());
    let plugin_term = prediction_mean(g_hat, test)?;
    Ok((residual_term, plugin_term))
}

/// Combined estimate with an already-fitted regression function.
///
/// Solves the importance weights on the plan's weighted block against the
/// test sample, then assembles all three estimators. The caller is
/// responsible for having fitted `g_hat` on the plan's regression block
/// (or on independent data) when split-mode independence matters.
pub fn estimate_v_r<P: Predictor + ?Sized>(
    train: &Dataset,
    test: &Dataset,
    plan: &SplitPlan,
    cfg: &KmmConfig,
    g_hat: &P,
) -> Result<EstimateReport> {
    plan.check_matches(train)?;
    let kmm_train = train.rows(plan.kmm_indices())?;
    let weights = kmm_weights(&kmm_train, test, cfg)?;
    assemble_report(&kmm_train, test, &weights, g_hat, None)
}

/// Regression-function recipes [`estimate_v_r_auto`] can fit on the plan's
/// regression block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GHatSpec {
    /// Kernel ridge regression with a regularization schedule.
    KernelRidge {
        kernel: crate::kernels::KernelSpec,
        gamma: GammaSchedule,
    },
    /// L1-penalized linear model.
    LassoLinear { lambda: f64 },
}

/// Combined estimate that also fits ĝ: the regression block of `plan`
/// supplies the fitting data, so split-mode independence holds by
/// construction. Reports the resolved ridge `gamma` when one was used.
pub fn estimate_v_r_auto(
    train: &Dataset,
    test: &Dataset,
    plan: &SplitPlan,
    cfg: &KmmConfig,
    g_hat: &GHatSpec,
) -> Result<EstimateReport> {
    plan.check_matches(train)?;
    let nr_train = train.rows(plan.nr_indices())?;
    let kmm_train = train.rows(plan.kmm_indices())?;
    let weights = kmm_weights(&kmm_train, test, cfg)?;
    match g_hat {
        GHatSpec::KernelRidge { kernel, gamma } => {
            let g = gamma.gamma(nr_train.n(), test.n())?;
            let model = fit_kernel_ridge(&nr_train, g, kernel)?;
            assemble_report(&kmm_train, test, &weights, &model, Some(g))
        }
        GHatSpec::LassoLinear { lambda } => {
            let model = fit_lasso_linear(&nr_train, *lambda)?;
            assemble_report(&kmm_train, test, &weights, &model, None)
        }
    }
}

fn assemble_report<P: Predictor + ?Sized>(
    kmm_train: &Dataset,
    test: &Dataset,
    weights: &ImportanceWeights,
    g_hat: &P,
    gamma: Option<f64>,
) -> Result<EstimateReport> {
    let (residual_term, plugin_term) = v_r_parts(kmm_train, test, &weights.beta, g_hat)?;
    let v_kmm = estimate_v_kmm(kmm_train, weights)?;
    Ok(EstimateReport {
        v_kmm,
        v_nr: plugin_term,
        v_r: residual_term + plugin_term,
        residual_term,
        plugin_term,
        weights: WeightDiagnostics::from(weights),
        gamma,
    })
}

/// Analytic importance weight `dP_te/dP_tr` at one point of a Gaussian
/// pair; the closed-form stand-in for solved weights on synthetic data.
pub fn true_density_ratio(
    p_tr: &GaussianSpec,
    p_te: &GaussianSpec,
    x: ArrayView1<'_, f64>,
) -> Result<f64> {
    if p_tr.dim() != p_te.dim() || x.len() != p_tr.dim() {
        return Err(Error::DimensionMismatch(format!(
            "density ratio needs matching dimensions, got point {} vs {} and {}",
            x.len(),
            p_tr.dim(),
            p_te.dim()
        )));
    }
    Ok((p_te.log_pdf(x) - p_tr.log_pdf(x)).exp())
}

/// [`true_density_ratio`] applied to every row of a dataset.
pub fn true_density_ratios(
    p_tr: &GaussianSpec,
    p_te: &GaussianSpec,
    data: &Dataset,
) -> Result<Array1<f64>> {
    let x = data.x();
    let mut out = Array1::zeros(data.n());
    for (i, row) in x.rows().into_iter().enumerate() {
        out[i] = true_density_ratio(p_tr, p_te, row)?;
    }
    Ok(out)
}
