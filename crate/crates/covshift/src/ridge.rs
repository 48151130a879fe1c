//! Regression models that supply the plug-in regression function: kernel
//! ridge (the default) and an L1-regularized linear fit (the alternative),
//! plus the rules that pick the ridge penalty from sample sizes.
//!
//! Kernel ridge solves `(K + γI) α = y` by Cholesky with one refinement
//! step and predicts with `ĝ(x) = Σ_j α_j k(x_j, x)`. The fit is rejected
//! rather than returned when the solve residual exceeds `1e-8·‖y‖`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Dataset, KernelSpec};
use crate::linalg::cholesky_solve;

/// Anything that maps feature rows to real-valued predictions.
pub trait Predictor {
    /// One prediction per row of `x`.
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        (**self).predict(x)
    }
}

/// Adapter turning a row-wise closure into a [`Predictor`]; handy for
/// plugging an analytically known regression function into the estimators.
pub struct FnPredictor<F: Fn(ArrayView1<'_, f64>) -> f64>(pub F);

impl<F: Fn(ArrayView1<'_, f64>) -> f64> Predictor for FnPredictor<F> {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let out = Array1::from_iter(x.rows().into_iter().map(&self.0));
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("closure predictor output".into()));
        }
        Ok(out)
    }
}

/// Kernel ridge regression model: representer coefficients over the stored
/// training rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRidgeModel {
    /// Representer coefficients, one per anchor row.
    pub alpha: Array1<f64>,
    /// Training covariates the kernel sections sit on.
    pub anchors: Array2<f64>,
    /// Ridge penalty the model was fit with.
    pub gamma: f64,
    /// Kernel shared by fit and prediction.
    pub kernel: KernelSpec,
}

impl KernelRidgeModel {
    /// Squared Hilbert-space norm of the fitted function, `αᵀ K α`.
    pub fn hilbert_norm_sq(&self) -> f64 {
        let k = self
            .kernel
            .cross_gram_views(self.anchors.view(), self.anchors.view())
            .expect("anchors agree with themselves");
        self.alpha.dot(&k.dot(&self.alpha))
    }
}

impl Predictor for KernelRidgeModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.anchors.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "model anchors have {} feature(s), query rows have {}",
                self.anchors.ncols(),
                x.ncols()
            )));
        }
        let cross = self.kernel.cross_gram_views(x, self.anchors.view())?;
        Ok(cross.dot(&self.alpha))
    }
}

/// Fit kernel ridge: `α = (K + γI)^{-1} y` over the training rows.
pub fn fit_kernel_ridge(train: &Dataset, gamma: f64, kernel: &KernelSpec) -> Result<KernelRidgeModel> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge penalty must be positive and finite, got {gamma}"
        )));
    }
    let y = train.labels_required("kernel ridge fit")?;
    let k = kernel.gram(train);
    let mut a = k;
    for i in 0..a.nrows() {
        a[[i, i]] += gamma;
    }
    let alpha = cholesky_solve(a.view(), y)?;
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let resid = &a.dot(&alpha) - &y.to_owned();
    let resid_norm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    if resid_norm > 1e-8 * y_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence {
            iterations: 2,
            residual: resid_norm,
            tol: 1e-8 * y_norm,
        });
    }
    Ok(KernelRidgeModel {
        alpha,
        anchors: train.x().to_owned(),
        gamma,
        kernel: kernel.clone(),
    })
}

/// Rule mapping sample sizes to the ridge penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSchedule {
    /// `min(n_tr, n_te)^{-(θ+2)/(θ+1)}`; θ encodes assumed smoothness.
    ThetaOptimal { theta: f64 },
    /// `min(n_tr, n_te)^{-1}`.
    InverseN,
    /// `n_tr^{-1}`.
    InverseNtr,
    /// A constant, independent of sample sizes.
    Fixed { value: f64 },
}

impl GammaSchedule {
    /// Evaluate the rule at the given sample sizes.
    pub fn gamma(&self, n_tr: usize, n_te: usize) -> Result<f64> {
        if n_tr == 0 || n_te == 0 {
            return Err(Error::InvalidParameter(
                "sample sizes must be positive".into(),
            ));
        }
        let n = n_tr.min(n_te) as f64;
        match *self {
            GammaSchedule::ThetaOptimal { theta } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "theta must be positive and finite, got {theta}"
                    )));
                }
                Ok(n.powf(-(theta + 2.0) / (theta + 1.0)))
            }
            GammaSchedule::InverseN => Ok(1.0 / n),
            GammaSchedule::InverseNtr => Ok(1.0 / n_tr as f64),
            GammaSchedule::Fixed { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "fixed ridge penalty must be positive and finite, got {value}"
                    )));
                }
                Ok(value)
            }
        }
    }
}

/// Free-function form of [`GammaSchedule::gamma`].
pub fn schedule_gamma(s: &GammaSchedule, n_tr: usize, n_te: usize) -> Result<f64> {
    s.gamma(n_tr, n_te)
}

/// L1-regularized linear model with an unpenalized intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoLinearModel {
    /// Per-feature coefficients.
    pub weights: Array1<f64>,
    /// Unpenalized offset.
    pub intercept: f64,
    /// Penalty the model was fit with.
    pub lambda: f64,
}

impl Predictor for LassoLinearModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} coefficient(s), query rows have {} feature(s)",
                self.weights.len(),
                x.ncols()
            )));
        }
        Ok(x.dot(&self.weights) + self.intercept)
    }
}

const LASSO_STAT_TOL: f64 = 1e-6;
const LASSO_MAX_SWEEPS: usize = 100_000;

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Fit `minimize (1/m)‖y − Xw − b‖² + λ‖w‖₁` by cyclic coordinate descent
/// on centered data; the intercept absorbs the means and is not penalized.
pub fn fit_lasso_linear(train: &Dataset, lambda: f64) -> Result<LassoLinearModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lasso penalty must be nonnegative and finite, got {lambda}"
        )));
    }
    let y = train.labels_required("lasso fit")?;
    let x = train.x();
    let m = x.nrows();
    let p = x.ncols();
    let m_f = m as f64;

    let x_mean = x.mean_axis(ndarray::Axis(0)).expect("nonempty dataset");
    let y_mean = y.sum() / m_f;
    let xc = &x.to_owned() - &x_mean;
    let yc = &y.to_owned() - y_mean;

    // Per-coordinate curvature (1/m)·⟨x_j, x_j⟩; constant columns stay at 0.
    let col_sq: Vec<f64> = (0..p)
        .map(|j| xc.column(j).iter().map(|v| v * v).sum::<f64>() / m_f)
        .collect();

    let mut w = Array1::<f64>::zeros(p);
    let mut r = yc.clone();
    let mut stationary = false;
    for _ in 0..LASSO_MAX_SWEEPS {
        for j in 0..p {
            if col_sq[j] <= 1e-12 {
                continue;
            }
            let col = xc.column(j);
            let rho = col.dot(&r) / m_f + col_sq[j] * w[j];
            let w_new = soft_threshold(rho, lambda / 2.0) / col_sq[j];
            let delta = w_new - w[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &col);
                w[j] = w_new;
            }
        }
        // Subgradient stationarity of the full objective.
        stationary = (0..p).all(|j| {
            if col_sq[j] <= 1e-12 {
                return true;
            }
            let g = -2.0 * xc.column(j).dot(&r) / m_f;
            if w[j] > 0.0 {
                (g + lambda).abs() <= LASSO_STAT_TOL
            } else if w[j] < 0.0 {
                (g - lambda).abs() <= LASSO_STAT_TOL
            } else {
                g.abs() <= lambda + LASSO_STAT_TOL
            }
        });
        if stationary {
            break;
        }
    }
    if !stationary {
        return Err(Error::NoConvergence {
            iterations: LASSO_MAX_SWEEPS,
            residual: f64::NAN,
            tol: LASSO_STAT_TOL,
        });
    }
    let intercept = y_mean - w.dot(&x_mean);
    Ok(LassoLinearModel {
        weights: w,
        intercept,
        lambda,
    })
}
