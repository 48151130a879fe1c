//! Empirical risk minimization under covariate shift, over a kernel
//! expansion.
//!
//! Three training modes share one representer-style parameterization
//! `θ(x) = Σ_p α_p k(x_p, x)`:
//!
//! * **robust** — the residual-corrected risk: the importance-weighted block
//!   contributes `β·(loss − expected loss)` terms, the test block
//!   contributes expected-loss terms built from a plug-in regression ĝ. The
//!   expansion spans the weighted training rows *and* the test rows.
//! * **kmm_weighted** — the classical importance-weighted fit: every
//!   training loss term is scaled by its weight; the expansion spans the
//!   training rows only.
//! * **unweighted_nr** — the plug-in-only fit on the test rows: the robust
//!   objective with the weighted block dropped.
//!
//! Squared loss collapses to a linear system in every mode. For the robust
//! variant the expected squared loss contributes `(ĝ − θ)²` on the test
//! block and the weighted block is linear in `θ` (the quadratic parts of
//! `loss − expected loss` cancel), giving the non-symmetric normal
//! equations
//!
//! ```text
//! (W₃ K_tot + λ n_te I) α = (n_te / k) w₁ + w₂
//! ```
//!
//! with `w₁ = β(y − ĝ)` on the weighted block, `w₂ = ĝ` on the test block,
//! and `W₃` the test-block indicator. They are solved as printed, by LU
//! with partial pivoting — symmetrizing would change the estimator.
//!
//! Logistic loss models `P(Y = 1 | x) = 1/(1 + e^{θ(x)})` (note the sign:
//! larger scores mean class 0), under which `loss − expected loss` is again
//! linear in `θ` and the test block contributes the convex
//! `ĝ·θ + log(1 + e^{−θ})` per row, evaluated in overflow-safe form. The
//! optimizer is full-batch gradient descent with Armijo backtracking, so
//! the objective trace is non-increasing by construction.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Dataset, KernelSpec};
use crate::kmm::ImportanceWeights;
use crate::linalg::{cholesky_solve, lu_solve_refined};
use crate::ridge::Predictor;

/// Gradient-norm tolerance for the logistic solver.
pub const DEFAULT_ERM_TOL: f64 = 1e-6;
/// Iteration cap for the logistic solver.
pub const DEFAULT_ERM_MAX_ITER: usize = 100_000;
/// ĝ values are clamped to `[CLIP, 1 − CLIP]` wherever the logistic
/// objective consumes them, keeping logits finite.
const GHAT_CLIP: f64 = 1e-6;
/// Relative residual allowed on the closed-form (squared-loss) solves.
const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Loss family of an ERM fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Squared,
    Logistic,
}

/// Which risk is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErmMode {
    Robust,
    KmmWeighted,
    UnweightedNr,
}

/// Validated ERM configuration, the unit the CLI deserializes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErmProblem {
    pub loss: Loss,
    /// Ridge penalty λ on the squared Hilbert norm of θ.
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub mode: ErmMode,
}

impl ErmProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// A fitted ERM model: coefficients over the span points, plus the solve
/// diagnostics (`objective` at the solution and the gradient norm there).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErmFit {
    pub alpha_hat: Array1<f64>,
    span: Array2<f64>,
    pub loss: Loss,
    pub kernel: KernelSpec,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

impl ErmFit {
    /// Points carrying the kernel expansion.
    pub fn span(&self) -> ArrayView2<'_, f64> {
        self.span.view()
    }

    pub fn span_len(&self) -> usize {
        self.span.nrows()
    }

    /// Decision values `θ(x) = Σ_p α_p k(x_p, x)` at each query row. For
    /// squared loss these estimate the regression function; for logistic
    /// loss they are logits with `P(Y = 1 | x) = 1/(1 + e^{θ(x)})`.
    pub fn decision_values(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let cross = self.kernel.cross_gram_views(x, self.span.view())?;
        Ok(cross.dot(&self.alpha_hat))
    }

    /// Hard 0/1 labels: logistic classifies 1 exactly when the logit is
    /// ≤ 0; squared loss thresholds the estimated regression at 1/2.
    pub fn classify(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let v = self.decision_values(x)?;
        Ok(match self.loss {
            Loss::Squared => v.mapv(|f| if f >= 0.5 { 1.0 } else { 0.0 }),
            Loss::Logistic => v.mapv(|z| if z <= 0.0 { 1.0 } else { 0.0 }),
        })
    }
}

impl Predictor for ErmFit {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.decision_values(x)
    }
}

/// Decision values of a fit on a dataset's covariates.
pub fn predict_erm(fit: &ErmFit, data: &Dataset) -> Result<Array1<f64>> {
    fit.decision_values(data.x())
}

/// Map labels onto {0, 1}: values already in {0, 1} pass through, a
/// {−1, +1} coding is remapped, anything else is rejected.
pub fn normalize_binary_labels(y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let zero_one = y.iter().all(|&v| v == 0.0 || v == 1.0);
    if zero_one {
        return Ok(y.to_owned());
    }
    let pm_one = y.iter().all(|&v| v == -1.0 || v == 1.0);
    if pm_one {
        return Ok(y.mapv(|v| if v < 0.0 { 0.0 } else { 1.0 }));
    }
    Err(Error::InvalidParameter(
        "labels must be coded {0,1} or {-1,+1}".into(),
    ))
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

fn check_weights(weights: &ImportanceWeights, n: usize) -> Result<()> {
    if weights.beta.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} training rows",
            weights.beta.len(),
            n
        )));
    }
    Ok(())
}

/// Logistic fits demand exact {0,1} coding; remapping other schemes is the
/// caller's job via [`normalize_binary_labels`].
fn require_binary_labels(y: ArrayView1<'_, f64>) -> Result<()> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParameter(
            "logistic training labels must be coded {0,1}".into(),
        ));
    }
    Ok(())
}

/// Stack the weighted-block and test covariates into one span matrix.
fn stacked_span(train_kmm: &Dataset, test: &Dataset) -> Result<Array2<f64>> {
    if train_kmm.dim() != test.dim() {
        return Err(Error::DimensionMismatch(format!(
            "train has {} features, test has {}",
            train_kmm.dim(),
            test.dim()
        )));
    }
    Ok(ndarray::concatenate(Axis(0), &[train_kmm.x(), test.x()])
        .expect("equal widths checked"))
}

fn gram_of(kernel: &KernelSpec, points: &Array2<f64>) -> Result<Array2<f64>> {
    let holder = Dataset::train(points.clone(), None)?;
    Ok(kernel.gram(&holder))
}

fn l2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1/(1 + e^{−t})` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn clip_ghat(v: f64) -> f64 {
    v.clamp(GHAT_CLIP, 1.0 - GHAT_CLIP)
}

/// The squared-loss robust objective and its pieces; also implements the
/// unweighted variant (empty weighted block).
struct SquaredModel<'a> {
    k_tot: &'a Array2<f64>,
    /// β(y − ĝ) on the weighted block, 0 on the test block.
    w1: &'a Array1<f64>,
    /// ĝ on the test block, 0 on the weighted block.
    w2: &'a Array1<f64>,
    /// Weighted-block length (0 for the unweighted variant).
    k: usize,
    n_te: usize,
    lambda: f64,
}

impl SquaredModel<'_> {
    /// Objective exactly as the quadratic program states it:
    /// `−2 w₁ᵀK α / k + λ αᵀK α + (w₂ − Kα)ᵀ W₃ (w₂ − Kα) / n_te`.
    fn objective(&self, alpha: &Array1<f64>) -> f64 {
        let z = self.k_tot.dot(alpha);
        let n = z.len();
        let m = self.n_te as f64;
        let mut f = self.lambda * alpha.dot(&z);
        if self.k > 0 {
            f -= 2.0 * self.w1.dot(&z) / self.k as f64;
        }
        for i in (n - self.n_te)..n {
            let r = self.w2[i] - z[i];
            f += r * r / m;
        }
        f
    }

    /// `(2/n_te) K [ (W₃K + λ n_te I) α − w₂ − (n_te/k) w₁ ]`.
    fn gradient(&self, alpha: &Array1<f64>) -> Array1<f64> {
        let r = self.system_residual(alpha);
        self.k_tot.dot(&r) * (2.0 / self.n_te as f64)
    }

    /// `(W₃K + λ n_te I) α − rhs`, the inner bracket of the gradient.
    fn system_residual(&self, alpha: &Array1<f64>) -> Array1<f64> {
        let z = self.k_tot.dot(alpha);
        let n = z.len();
        let m = self.n_te as f64;
        let mut r = alpha * (self.lambda * m);
        for i in (n - self.n_te)..n {
            r[i] += z[i];
        }
        r -= &self.rhs();
        r
    }

    /// `(n_te/k) w₁ + w₂`.
    fn rhs(&self) -> Array1<f64> {
        if self.k > 0 {
            self.w1 * (self.n_te as f64 / self.k as f64) + self.w2
        } else {
            self.w2.clone()
        }
    }

    /// Assemble `W₃ K + λ n_te I` densely.
    fn system_matrix(&self) -> Array2<f64> {
        let n = self.k_tot.nrows();
        let mut a = Array2::<f64>::zeros((n, n));
        for i in (n - self.n_te)..n {
            a.row_mut(i).assign(&self.k_tot.row(i));
        }
        let ridge = self.lambda * self.n_te as f64;
        for d in 0..n {
            a[[d, d]] += ridge;
        }
        a
    }
}

/// Shared tail of every squared-loss fit: solve, verify the residual,
/// package.
fn finish_squared_fit(
    model: &SquaredModel<'_>,
    span: Array2<f64>,
    kernel: &KernelSpec,
    symmetric: bool,
) -> Result<ErmFit> {
    let a = model.system_matrix();
    let rhs = model.rhs();
    let alpha = if symmetric {
        cholesky_solve(a.view(), rhs.view())?
    } else {
        lu_solve_refined(a.view(), rhs.view())?
    };
    let resid = l2(&(&a.dot(&alpha) - &rhs));
    let scale = l2(&rhs).max(f64::MIN_POSITIVE);
    if !alpha.iter().all(|v| v.is_finite()) || resid > SOLVE_RESIDUAL_TOL * scale {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual: resid / scale,
            tol: SOLVE_RESIDUAL_TOL,
        });
    }
    Ok(ErmFit {
        objective: model.objective(&alpha),
        grad_norm: l2(&model.gradient(&alpha)),
        alpha_hat: alpha,
        span,
        loss: Loss::Squared,
        kernel: kernel.clone(),
        iterations: 1,
    })
}

/// A weighted logistic objective over the span logits `z = K_tot α`:
///
/// `f(α) = lin·z + λ αᵀ K_tot α + Σ_i sp_i · softplus(−z_i)`.
///
/// The robust risk (linear weighted block, softplus on the test block), the
/// plug-in-only risk (test block alone), and the importance-weighted
/// training risk (per-row `β y z + β softplus(−z)`) are all of this shape;
/// they differ only in how `lin` and `sp` are filled.
struct LogisticModel<'a> {
    k_tot: &'a Array2<f64>,
    /// Coefficient of the logit per span slot.
    lin: &'a Array1<f64>,
    /// Weight of `softplus(−z_i)` per span slot.
    sp: &'a Array1<f64>,
    lambda: f64,
}

impl LogisticModel<'_> {
    fn objective_given_z(&self, alpha: &Array1<f64>, z: &Array1<f64>) -> f64 {
        let mut f = self.lin.dot(z) + self.lambda * alpha.dot(z);
        for (w, zi) in self.sp.iter().zip(z.iter()) {
            if *w != 0.0 {
                f += w * softplus(-zi);
            }
        }
        f
    }

    #[cfg(test)]
    fn objective(&self, alpha: &Array1<f64>) -> f64 {
        self.objective_given_z(alpha, &self.k_tot.dot(alpha))
    }

    fn gradient_given_z(&self, alpha: &Array1<f64>, z: &Array1<f64>) -> Array1<f64> {
        let mut inner = self.lin + &(alpha * (2.0 * self.lambda));
        for i in 0..z.len() {
            let w = self.sp[i];
            if w != 0.0 {
                // d/dz [softplus(−z)] = −σ(−z): for a slot with lin = ĝ·sp
                // the combined derivative ĝ − σ(−z) vanishes exactly where
                // the model's P(Y=1) matches ĝ.
                inner[i] -= w * sigmoid(-z[i]);
            }
        }
        self.k_tot.dot(&inner)
    }

    #[cfg(test)]
    fn gradient(&self, alpha: &Array1<f64>) -> Array1<f64> {
        self.gradient_given_z(alpha, &self.k_tot.dot(alpha))
    }

    /// Gradient descent with Armijo backtracking (sufficient-decrease
    /// constant 1e−4, halving steps, doubling warm start). Returns the
    /// iterate, objective, gradient norm, iteration count, and the
    /// objective trace.
    fn minimize(&self, tol: f64, max_iter: usize) -> (Array1<f64>, f64, f64, usize, Vec<f64>) {
        let n = self.k_tot.nrows();
        let mut alpha = Array1::<f64>::zeros(n);
        let mut z = self.k_tot.dot(&alpha);
        let mut f = self.objective_given_z(&alpha, &z);
        let mut step = 1.0f64;
        let mut trace = vec![f];
        let mut grad_norm = f64::INFINITY;
        for it in 0..max_iter {
            let g = self.gradient_given_z(&alpha, &z);
            grad_norm = l2(&g);
            if grad_norm <= tol {
                return (alpha, f, grad_norm, it, trace);
            }
            let gg = grad_norm * grad_norm;
            let mut s = step;
            loop {
                let cand = &alpha - &(&g * s);
                let zc = self.k_tot.dot(&cand);
                let fc = self.objective_given_z(&cand, &zc);
                if fc.is_finite() && fc <= f - 1e-4 * s * gg {
                    alpha = cand;
                    z = zc;
                    f = fc;
                    step = (s * 2.0).min(1e12);
                    break;
                }
                s *= 0.5;
                if s < 1e-18 {
                    // No representable step achieves sufficient decrease;
                    // report where we stand.
                    return (alpha, f, grad_norm, it, trace);
                }
            }
            trace.push(f);
        }
        (alpha, f, grad_norm, max_iter, trace)
    }
}

fn finish_logistic_fit(
    model: &LogisticModel<'_>,
    span: Array2<f64>,
    kernel: &KernelSpec,
    tol: f64,
) -> Result<ErmFit> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    let (alpha, objective, grad_norm, iterations, _trace) =
        model.minimize(tol, DEFAULT_ERM_MAX_ITER);
    if grad_norm > tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: grad_norm,
            tol,
        });
    }
    Ok(ErmFit {
        alpha_hat: alpha,
        span,
        loss: Loss::Logistic,
        kernel: kernel.clone(),
        objective,
        grad_norm,
        iterations,
    })
}

/// Robust squared-loss fit: the closed-form solve of the residual-corrected
/// risk over the stacked span. `train_kmm` must be the weighted block the
/// `weights` were solved on; `g_hat` supplies the plug-in regression.
pub fn fit_robust_least_squares<P: Predictor + ?Sized>(
    train_kmm: &Dataset,
    test: &Dataset,
    weights: &ImportanceWeights,
    g_hat: &P,
    lambda: f64,
    kernel: &KernelSpec,
) -> Result<ErmFit> {
    validate_lambda(lambda)?;
    check_weights(weights, train_kmm.n())?;
    let y = train_kmm.labels_required("robust least-squares fit")?;
    let span = stacked_span(train_kmm, test)?;
    let k = train_kmm.n();
    let m = test.n();
    let n = k + m;

    let g_tr = g_hat.predict(train_kmm.x())?;
    let g_te = g_hat.predict(test.x())?;
    let mut w1 = Array1::<f64>::zeros(n);
    let mut w2 = Array1::<f64>::zeros(n);
    for j in 0..k {
        w1[j] = weights.beta[j] * (y[j] - g_tr[j]);
    }
    for i in 0..m {
        w2[k + i] = g_te[i];
    }

    let k_tot = gram_of(kernel, &span)?;
    let model = SquaredModel {
        k_tot: &k_tot,
        w1: &w1,
        w2: &w2,
        k,
        n_te: m,
        lambda,
    };
    finish_squared_fit(&model, span, kernel, false)
}

/// Robust logistic fit: gradient descent on the residual-corrected logistic
/// risk. Training labels must be coded {0, 1}; ĝ outputs are clamped away
/// from 0 and 1 wherever the objective uses them.
pub fn fit_robust_logistic<P: Predictor + ?Sized>(
    train_kmm: &Dataset,
    test: &Dataset,
    weights: &ImportanceWeights,
    g_hat: &P,
    lambda: f64,
    kernel: &KernelSpec,
    tol: f64,
) -> Result<ErmFit> {
    validate_lambda(lambda)?;
    check_weights(weights, train_kmm.n())?;
    let y = train_kmm.labels_required("robust logistic fit")?;
    require_binary_labels(y)?;
    let span = stacked_span(train_kmm, test)?;
    let k = train_kmm.n();
    let m = test.n();
    let n = k + m;

    let g_tr = g_hat.predict(train_kmm.x())?;
    let g_te = g_hat.predict(test.x())?;
    let mut lin = Array1::<f64>::zeros(n);
    let mut sp = Array1::<f64>::zeros(n);
    for j in 0..k {
        lin[j] = weights.beta[j] * (y[j] - clip_ghat(g_tr[j])) / k as f64;
    }
    for i in 0..m {
        lin[k + i] = clip_ghat(g_te[i]) / m as f64;
        sp[k + i] = 1.0 / m as f64;
    }

    let k_tot = gram_of(kernel, &span)?;
    let model = LogisticModel {
        k_tot: &k_tot,
        lin: &lin,
        sp: &sp,
        lambda,
    };
    finish_logistic_fit(&model, span, kernel, tol)
}

/// Importance-weighted kernel ridge: `(diag(β̂) K + λ n_te I) α = diag(β̂) y`,
/// the scaling-robust form of the weighted fit (zero weights zero out rows
/// instead of breaking invertibility). `n_te` enters the penalty scale,
/// matching how the robust objective weighs its ridge term.
pub fn fit_kmm_weighted_ridge(
    train: &Dataset,
    weights: &ImportanceWeights,
    lambda: f64,
    kernel: &KernelSpec,
    n_te: usize,
) -> Result<ErmFit> {
    validate_lambda(lambda)?;
    check_weights(weights, train.n())?;
    if n_te == 0 {
        return Err(Error::InvalidParameter(
            "test sample size must be positive".into(),
        ));
    }
    let y = train.labels_required("weighted ridge fit")?;
    let n = train.n();
    let k_gram = kernel.gram(train);

    let mut a = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let b = weights.beta[i];
        if b != 0.0 {
            a.row_mut(i).assign(&(&k_gram.row(i) * b));
        }
    }
    let ridge = lambda * n_te as f64;
    let mut rhs = Array1::<f64>::zeros(n);
    for i in 0..n {
        a[[i, i]] += ridge;
        rhs[i] = weights.beta[i] * y[i];
    }

    let alpha = lu_solve_refined(a.view(), rhs.view())?;
    let resid = l2(&(&a.dot(&alpha) - &rhs));
    let scale = l2(&rhs).max(f64::MIN_POSITIVE);
    if !alpha.iter().all(|v| v.is_finite()) || resid > SOLVE_RESIDUAL_TOL * scale {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual: resid / scale,
            tol: SOLVE_RESIDUAL_TOL,
        });
    }

    // Reported objective: Σ β (y − θ)² + λ n_te ‖θ‖²_H, whose stationary
    // point is exactly the system above.
    let z = k_gram.dot(&alpha);
    let objective = weights
        .beta
        .iter()
        .zip(y.iter())
        .zip(z.iter())
        .map(|((b, yi), zi)| b * (yi - zi) * (yi - zi))
        .sum::<f64>()
        + ridge * alpha.dot(&z);
    let grad_norm = l2(&(k_gram.dot(&(&a.dot(&alpha) - &rhs)) * 2.0));

    Ok(ErmFit {
        alpha_hat: alpha,
        span: train.x().to_owned(),
        loss: Loss::Squared,
        kernel: kernel.clone(),
        objective,
        grad_norm,
        iterations: 1,
    })
}

/// Importance-weighted penalized logistic fit, the classification
/// counterpart of [`fit_kmm_weighted_ridge`]:
///
/// `min_θ (1/n_tr) Σ_j β_j [y_j z_j + softplus(−z_j)] + λ ‖θ‖²_H`,
/// `z_j = θ(x_j)`,
///
/// solved by the same descent as the other logistic fits over the training
/// span. Labels must be coded {0,1}; rows with zero weight drop out of the
/// loss entirely.
pub fn fit_kmm_weighted_logistic(
    train: &Dataset,
    weights: &ImportanceWeights,
    lambda: f64,
    kernel: &KernelSpec,
    tol: f64,
) -> Result<ErmFit> {
    validate_lambda(lambda)?;
    check_weights(weights, train.n())?;
    let y = train.labels_required("weighted logistic fit")?;
    require_binary_labels(y)?;

    let n = train.n() as f64;
    let lin = Array1::from_shape_fn(train.n(), |j| weights.beta[j] * y[j] / n);
    let sp = weights.beta.mapv(|b| b / n);
    let span = train.x().to_owned();
    let k_tot = gram_of(kernel, &span)?;
    let model = LogisticModel {
        k_tot: &k_tot,
        lin: &lin,
        sp: &sp,
        lambda,
    };
    finish_logistic_fit(&model, span, kernel, tol)
}

/// Plug-in-only fit on the test rows: the robust objective with the
/// weighted block absent. Squared loss is a symmetric closed-form solve;
/// logistic runs the descent. `tol` applies to the logistic path.
pub fn fit_unweighted_nr_erm<P: Predictor + ?Sized>(
    test: &Dataset,
    g_hat: &P,
    lambda: f64,
    kernel: &KernelSpec,
    loss: Loss,
    tol: f64,
) -> Result<ErmFit> {
    validate_lambda(lambda)?;
    let m = test.n();
    let span = test.x().to_owned();
    let g_te = g_hat.predict(test.x())?;
    let k_tot = gram_of(kernel, &span)?;
    match loss {
        Loss::Squared => {
            let w1 = Array1::<f64>::zeros(m);
            let mut w2 = Array1::<f64>::zeros(m);
            w2.assign(&g_te);
            let model = SquaredModel {
                k_tot: &k_tot,
                w1: &w1,
                w2: &w2,
                k: 0,
                n_te: m,
                lambda,
            };
            // W₃ = I here, so the system is symmetric positive definite.
            finish_squared_fit(&model, span, kernel, true)
        }
        Loss::Logistic => {
            let mf = m as f64;
            let lin = g_te.mapv(|v| clip_ghat(v) / mf);
            let sp = Array1::<f64>::from_elem(m, 1.0 / mf);
            let model = LogisticModel {
                k_tot: &k_tot,
                lin: &lin,
                sp: &sp,
                lambda,
            };
            finish_logistic_fit(&model, span, kernel, tol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::FnPredictor;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn hand_weights(beta: Array1<f64>) -> ImportanceWeights {
        let mean_beta = beta.sum() / beta.len() as f64;
        ImportanceWeights {
            beta,
            l_hat: 0.0,
            kkt_residual: 0.0,
            mean_beta,
            iterations: 0,
        }
    }

    fn gauss1() -> KernelSpec {
        KernelSpec::Gaussian { sigma: 1.0 }
    }

    /// A small shifted instance with {0,1}-coded labels.
    fn binary_instance(seed: u64, k: usize, m: usize) -> (Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x_tr = Array2::from_shape_fn((k, 2), |_| rng.sample::<f64, _>(StandardNormal) + 0.4);
        let y_tr = Array1::from_shape_fn(k, |i| {
            let s = x_tr[[i, 0]] - 0.5 * x_tr[[i, 1]];
            if s + 0.3 * rng.sample::<f64, _>(StandardNormal) > 0.0 {
                1.0
            } else {
                0.0
            }
        });
        let x_te = Array2::from_shape_fn((m, 2), |_| rng.sample::<f64, _>(StandardNormal) - 0.2);
        (
            Dataset::train(x_tr, Some(y_tr)).unwrap(),
            Dataset::test(x_te).unwrap(),
        )
    }

    #[test]
    fn robust_squared_matches_a_hand_two_by_two() {
        // One weighted row at x=0, one test row at x=1, Gaussian kernel:
        // K = [[1, a], [a, 1]] with a = e^{-1}. β = 2, y = 1, ĝ ≡ 0.2,
        // λ = 1/2, so the system is [[0.5, 0], [a, 1.5]] α = [1.6, 0.2].
        let train = Dataset::train(array![[0.0]], Some(array![1.0])).unwrap();
        let test = Dataset::test(array![[1.0]]).unwrap();
        let w = hand_weights(array![2.0]);
        let g = FnPredictor(|_| 0.2);
        let fit =
            fit_robust_least_squares(&train, &test, &w, &g, 0.5, &gauss1()).unwrap();
        let a = (-1.0f64).exp();
        let alpha0 = 1.6 / 0.5;
        let alpha1 = (0.2 - a * alpha0) / 1.5;
        assert_relative_eq!(fit.alpha_hat[0], alpha0, epsilon = 1e-10);
        assert_relative_eq!(fit.alpha_hat[1], alpha1, epsilon = 1e-10);
        assert_eq!(fit.span_len(), 2);
        assert!(fit.grad_norm <= 1e-8, "grad norm {}", fit.grad_norm);
    }

    #[test]
    fn zero_weights_and_zero_ghat_give_the_zero_fit() {
        let (train, test) = binary_instance(1, 6, 5);
        let w = hand_weights(Array1::zeros(6));
        let zero = FnPredictor(|_| 0.0);
        let fit =
            fit_robust_least_squares(&train, &test, &w, &zero, 0.3, &gauss1()).unwrap();
        assert!(fit.alpha_hat.iter().all(|&v| v.abs() <= 1e-12));
        let preds = predict_erm(&fit, &test).unwrap();
        assert!(preds.iter().all(|&v| v.abs() <= 1e-12));
    }

    #[test]
    fn robust_squared_solution_is_stationary_and_locally_optimal() {
        let (train, test) = binary_instance(7, 10, 12);
        let w = hand_weights(Array1::from_elem(10, 1.3));
        let g = FnPredictor(|x: ndarray::ArrayView1<f64>| 0.5 + 0.1 * x[0]);
        let lambda = 0.2;
        let fit =
            fit_robust_least_squares(&train, &test, &w, &g, lambda, &gauss1()).unwrap();
        assert!(fit.grad_norm <= 1e-6, "grad norm {}", fit.grad_norm);

        // Rebuild the objective and probe 1000 random perturbations.
        let span = stacked_span(&train, &test).unwrap();
        let k_tot = gram_of(&gauss1(), &span).unwrap();
        let y = train.y().unwrap();
        let g_tr = g.predict(train.x()).unwrap();
        let g_te = g.predict(test.x()).unwrap();
        let n = 22;
        let mut w1 = Array1::<f64>::zeros(n);
        let mut w2 = Array1::<f64>::zeros(n);
        for j in 0..10 {
            w1[j] = 1.3 * (y[j] - g_tr[j]);
        }
        for i in 0..12 {
            w2[10 + i] = g_te[i];
        }
        let model = SquaredModel {
            k_tot: &k_tot,
            w1: &w1,
            w2: &w2,
            k: 10,
            n_te: 12,
            lambda,
        };
        let f_star = model.objective(&fit.alpha_hat);
        assert_relative_eq!(f_star, fit.objective, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let mut delta =
                Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
            let norm = l2(&delta);
            let radius = 0.1 * rng.random::<f64>();
            delta *= radius / norm;
            let f = model.objective(&(&fit.alpha_hat + &delta));
            assert!(
                f >= f_star - 1e-10,
                "perturbed objective {f} beats optimum {f_star}"
            );
        }
    }

    #[test]
    fn squared_gradient_matches_finite_differences() {
        let (train, test) = binary_instance(3, 6, 7);
        let span = stacked_span(&train, &test).unwrap();
        let k_tot = gram_of(&gauss1(), &span).unwrap();
        let n = 13;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut w1 = Array1::<f64>::zeros(n);
        let mut w2 = Array1::<f64>::zeros(n);
        for j in 0..6 {
            w1[j] = rng.sample::<f64, _>(StandardNormal);
        }
        for i in 6..13 {
            w2[i] = rng.random::<f64>();
        }
        let model = SquaredModel {
            k_tot: &k_tot,
            w1: &w1,
            w2: &w2,
            k: 6,
            n_te: 7,
            lambda: 0.15,
        };
        for _ in 0..20 {
            let alpha = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
            let grad = model.gradient(&alpha);
            let h = 1e-6;
            for idx in [0usize, 4, 9, 12] {
                let mut hi = alpha.clone();
                let mut lo = alpha.clone();
                hi[idx] += h;
                lo[idx] -= h;
                let fd = (model.objective(&hi) - model.objective(&lo)) / (2.0 * h);
                let denom = grad[idx].abs().max(1e-4);
                assert!(
                    (fd - grad[idx]).abs() / denom <= 1e-5,
                    "fd {fd} vs analytic {} at {idx}",
                    grad[idx]
                );
            }
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let (train, test) = binary_instance(5, 5, 6);
        let span = stacked_span(&train, &test).unwrap();
        let k_tot = gram_of(&gauss1(), &span).unwrap();
        let n = 11;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut lin = Array1::<f64>::zeros(n);
        let mut sp = Array1::<f64>::zeros(n);
        for j in 0..5 {
            lin[j] = rng.sample::<f64, _>(StandardNormal) / 5.0;
        }
        for i in 0..6 {
            lin[5 + i] = rng.random::<f64>().clamp(0.05, 0.95) / 6.0;
            sp[5 + i] = 1.0 / 6.0;
        }
        let model = LogisticModel {
            k_tot: &k_tot,
            lin: &lin,
            sp: &sp,
            lambda: 0.08,
        };
        for _ in 0..20 {
            let alpha = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
            let grad = model.gradient(&alpha);
            let h = 1e-6;
            for idx in [0usize, 3, 7, 10] {
                let mut hi = alpha.clone();
                let mut lo = alpha.clone();
                hi[idx] += h;
                lo[idx] -= h;
                let fd = (model.objective(&hi) - model.objective(&lo)) / (2.0 * h);
                let denom = grad[idx].abs().max(1e-4);
                assert!(
                    (fd - grad[idx]).abs() / denom <= 1e-5,
                    "fd {fd} vs analytic {} at {idx}",
                    grad[idx]
                );
            }
        }
    }

    #[test]
    fn both_objectives_pass_a_midpoint_convexity_probe() {
        let (train, test) = binary_instance(11, 6, 6);
        let span = stacked_span(&train, &test).unwrap();
        let k_tot = gram_of(&gauss1(), &span).unwrap();
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut lin = Array1::<f64>::zeros(n);
        let mut sp = Array1::<f64>::zeros(n);
        for j in 0..6 {
            lin[j] = rng.sample::<f64, _>(StandardNormal);
        }
        for i in 6..12 {
            lin[i] = rng.random::<f64>().clamp(0.05, 0.95) / 6.0;
            sp[i] = 1.0 / 6.0;
        }
        let logistic = LogisticModel {
            k_tot: &k_tot,
            lin: &lin,
            sp: &sp,
            lambda: 0.01,
        };
        let mut w1 = Array1::<f64>::zeros(n);
        for j in 0..6 {
            w1[j] = lin[j];
        }
        let mut w2 = Array1::<f64>::zeros(n);
        for i in 6..12 {
            w2[i] = rng.random::<f64>();
        }
        let squared = SquaredModel {
            k_tot: &k_tot,
            w1: &w1,
            w2: &w2,
            k: 6,
            n_te: 6,
            lambda: 0.01,
        };
        for _ in 0..200 {
            let a1 = Array1::from_shape_fn(n, |_| 2.0 * rng.sample::<f64, _>(StandardNormal));
            let a2 = Array1::from_shape_fn(n, |_| 2.0 * rng.sample::<f64, _>(StandardNormal));
            let mid = (&a1 + &a2) * 0.5;
            let lhs = logistic.objective(&mid);
            let rhs = 0.5 * (logistic.objective(&a1) + logistic.objective(&a2));
            assert!(lhs <= rhs + 1e-9, "logistic midpoint {lhs} vs {rhs}");
            let lhs = squared.objective(&mid);
            let rhs = 0.5 * (squared.objective(&a1) + squared.objective(&a2));
            assert!(lhs <= rhs + 1e-9, "squared midpoint {lhs} vs {rhs}");
        }
    }

    #[test]
    fn logistic_descent_is_monotone_and_meets_its_tolerance() {
        let (train, test) = binary_instance(19, 8, 10);
        let w = hand_weights(Array1::from_elem(8, 1.0));
        let g = FnPredictor(|x: ndarray::ArrayView1<f64>| 1.0 / (1.0 + (-x[0]).exp()));
        let fit = fit_robust_logistic(&train, &test, &w, &g, 0.05, &gauss1(), 1e-6).unwrap();
        assert!(fit.grad_norm <= 1e-6);
        assert_eq!(fit.span_len(), 18);

        // Rebuild the model to look at the trace.
        let span = stacked_span(&train, &test).unwrap();
        let k_tot = gram_of(&gauss1(), &span).unwrap();
        let y = train.y().unwrap();
        let g_tr = g.predict(train.x()).unwrap();
        let g_te = g.predict(test.x()).unwrap();
        let mut lin = Array1::<f64>::zeros(18);
        let mut sp = Array1::<f64>::zeros(18);
        for j in 0..8 {
            lin[j] = (y[j] - clip_ghat(g_tr[j])) / 8.0;
        }
        for i in 0..10 {
            lin[8 + i] = clip_ghat(g_te[i]) / 10.0;
            sp[8 + i] = 1.0 / 10.0;
        }
        let model = LogisticModel {
            k_tot: &k_tot,
            lin: &lin,
            sp: &sp,
            lambda: 0.05,
        };
        let (alpha, f, grad_norm, _, trace) = model.minimize(1e-6, DEFAULT_ERM_MAX_ITER);
        assert!(grad_norm <= 1e-6);
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15, "trace rose: {pair:?}");
        }
        // Independent descent run agrees with the packaged fit.
        assert_relative_eq!(f, fit.objective, epsilon = 1e-10);
        for (a, b) in alpha.iter().zip(fit.alpha_hat.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn symmetric_ghat_pins_test_logits_at_zero() {
        let (train, test) = binary_instance(29, 6, 9);
        let w = hand_weights(Array1::zeros(6));
        let half = FnPredictor(|_| 0.5);
        let fit =
            fit_robust_logistic(&train, &test, &w, &half, 1e3, &gauss1(), 1e-10).unwrap();
        let logits = predict_erm(&fit, &test).unwrap();
        for z in logits.iter() {
            assert!(z.abs() <= 1e-3, "logit {z} off symmetric optimum");
        }
    }

    #[test]
    fn huge_ridge_collapses_the_logistic_fit() {
        // Spread-out points keep the Gram near the identity, so descent is
        // not fighting conditioning, only the λ‖θ‖² term — which crushes
        // the fit toward zero. (The gradient tolerance must stay above the
        // Armijo floor ≈ √(4λ·ulp(f)) ≈ 2e−5 at this λ: once the next
        // objective decrease falls below one ulp, no step can be accepted.)
        let x_tr = array![[0.0], [10.0], [20.0], [30.0], [40.0], [50.0]];
        let y_tr = array![0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let train = Dataset::train(x_tr, Some(y_tr)).unwrap();
        let test = Dataset::test(array![[5.0], [15.0], [25.0], [35.0], [45.0], [55.0]]).unwrap();
        let w = hand_weights(Array1::from_elem(6, 1.0));
        let g = FnPredictor(|_| 0.3);
        let fit = fit_robust_logistic(&train, &test, &w, &g, 1e6, &gauss1(), 1e-4).unwrap();
        assert!(l2(&fit.alpha_hat) <= 1e-6, "alpha norm {}", l2(&fit.alpha_hat));
    }

    #[test]
    fn logistic_rejects_non_binary_labels() {
        let train = Dataset::train(array![[0.0], [1.0]], Some(array![0.0, 2.0])).unwrap();
        let test = Dataset::test(array![[0.5]]).unwrap();
        let w = hand_weights(array![1.0, 1.0]);
        let g = FnPredictor(|_| 0.5);
        assert!(matches!(
            fit_robust_logistic(&train, &test, &w, &g, 0.1, &gauss1(), 1e-6),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn weighted_ridge_reduces_to_plain_ridge_at_unit_weights() {
        let (train, _) = binary_instance(37, 12, 1);
        let w = hand_weights(Array1::from_elem(12, 1.0));
        let n_te = 5;
        let lambda = 0.07;
        let fit = fit_kmm_weighted_ridge(&train, &w, lambda, &gauss1(), n_te).unwrap();
        // β ≡ 1: (K + λ n_te I) α = y, i.e. kernel ridge with γ = λ n_te.
        let model =
            crate::ridge::fit_kernel_ridge(&train, lambda * n_te as f64, &gauss1()).unwrap();
        for (a, b) in fit.alpha_hat.iter().zip(model.alpha.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
        assert_eq!(fit.span_len(), 12);
    }

    #[test]
    fn weighted_ridge_hand_two_by_two_and_zero_weights() {
        // K = [[1, a], [a, 1]] with a = e^{-1}; β = [2, 1/2], y = [1, -1],
        // λ n_te = 1.2: [[3.2, 2a], [a/2, 1.7]] α = [2, -1/2].
        let train = Dataset::train(array![[0.0], [1.0]], Some(array![1.0, -1.0])).unwrap();
        let w = hand_weights(array![2.0, 0.5]);
        let fit = fit_kmm_weighted_ridge(&train, &w, 0.3, &gauss1(), 4).unwrap();
        let a = (-1.0f64).exp();
        let det = 3.2 * 1.7 - a * a;
        let alpha0 = (2.0 * 1.7 - (-0.5) * (2.0 * a)) / det;
        let alpha1 = (3.2 * (-0.5) - (0.5 * a) * 2.0) / det;
        assert_relative_eq!(fit.alpha_hat[0], alpha0, epsilon = 1e-10);
        assert_relative_eq!(fit.alpha_hat[1], alpha1, epsilon = 1e-10);

        let zero = hand_weights(array![0.0, 0.0]);
        let fit = fit_kmm_weighted_ridge(&train, &zero, 0.3, &gauss1(), 4).unwrap();
        assert!(fit.alpha_hat.iter().all(|&v| v.abs() <= 1e-14));
    }

    #[test]
    fn weighted_logistic_matches_a_scalar_oracle() {
        // One training point with k(x,x) = 1, β = 1, y = 1, λ = 0.3: the
        // objective is α + softplus(−α) + 0.3 α², stationary where
        // σ(α) + 0.6 α = 0. Bisect that scalar equation independently.
        let train = Dataset::train(array![[0.6]], Some(array![1.0])).unwrap();
        let w = hand_weights(array![1.0]);
        let fit = fit_kmm_weighted_logistic(&train, &w, 0.3, &gauss1(), 1e-10).unwrap();

        let h = |a: f64| sigmoid(a) + 0.6 * a;
        let (mut lo, mut hi) = (-10.0f64, 0.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_relative_eq!(fit.alpha_hat[0], 0.5 * (lo + hi), epsilon = 1e-8);

        // The packaged objective agrees with a by-hand evaluation.
        let a = fit.alpha_hat[0];
        assert_relative_eq!(
            fit.objective,
            a + softplus(-a) + 0.3 * a * a,
            epsilon = 1e-12
        );
    }

    #[test]
    fn weighted_logistic_zero_weight_rows_drop_out() {
        // β = [2, 0] over two points at an averaging divisor of 2 carries
        // the same risk as β = [1] over the first point alone, so the two
        // fits are the same function: the second span coefficient vanishes.
        let pair = Dataset::train(array![[0.0], [1.3]], Some(array![1.0, 0.0])).unwrap();
        let single = Dataset::train(array![[0.0]], Some(array![1.0])).unwrap();
        let fit2 =
            fit_kmm_weighted_logistic(&pair, &hand_weights(array![2.0, 0.0]), 0.2, &gauss1(), 1e-8)
                .unwrap();
        let fit1 =
            fit_kmm_weighted_logistic(&single, &hand_weights(array![1.0]), 0.2, &gauss1(), 1e-8)
                .unwrap();
        assert!(fit2.alpha_hat[1].abs() <= 1e-7, "dead row got weight");
        assert_relative_eq!(fit2.alpha_hat[0], fit1.alpha_hat[0], epsilon = 1e-6);
    }

    #[test]
    fn weighted_logistic_separates_what_it_can() {
        let x = array![[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]];
        let y = array![1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let train = Dataset::train(x, Some(y.clone())).unwrap();
        let w = hand_weights(Array1::from_elem(6, 1.0));
        let fit = fit_kmm_weighted_logistic(&train, &w, 1e-3, &gauss1(), 1e-8).unwrap();
        assert!(fit.grad_norm <= 1e-8);
        let classes = fit.classify(train.x()).unwrap();
        for (c, yi) in classes.iter().zip(y.iter()) {
            assert_eq!(c, yi);
        }
    }

    #[test]
    fn unweighted_squared_is_ridge_regression_of_ghat_values() {
        let (_, test) = binary_instance(43, 1, 9);
        let g = FnPredictor(|x: ndarray::ArrayView1<f64>| 0.4 + 0.2 * x[1]);
        let lambda = 0.05;
        let fit = fit_unweighted_nr_erm(&test, &g, lambda, &gauss1(), Loss::Squared, 1e-6)
            .unwrap();
        // Reference: kernel ridge of the ĝ values on the test points with
        // γ = λ n_te.
        let g_te = g.predict(test.x()).unwrap();
        let holder = Dataset::train(test.x().to_owned(), Some(g_te)).unwrap();
        let model =
            crate::ridge::fit_kernel_ridge(&holder, lambda * 9.0, &gauss1()).unwrap();
        for (a, b) in fit.alpha_hat.iter().zip(model.alpha.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }

        // Constant ĝ and vanishing ridge: the fit reproduces the constant.
        let c = FnPredictor(|_| 0.7);
        let fit = fit_unweighted_nr_erm(&test, &c, 1e-8, &gauss1(), Loss::Squared, 1e-6)
            .unwrap();
        let preds = predict_erm(&fit, &test).unwrap();
        for p in preds.iter() {
            assert_relative_eq!(*p, 0.7, epsilon = 1e-5);
        }
    }

    #[test]
    fn unweighted_logistic_with_symmetric_ghat_has_zero_logits() {
        let (_, test) = binary_instance(47, 1, 7);
        let half = FnPredictor(|_| 0.5);
        let fit = fit_unweighted_nr_erm(&test, &half, 10.0, &gauss1(), Loss::Logistic, 1e-10)
            .unwrap();
        let logits = predict_erm(&fit, &test).unwrap();
        for z in logits.iter() {
            assert!(z.abs() <= 1e-6, "logit {z}");
        }
    }

    #[test]
    fn prediction_and_classification_rules() {
        // Single span point with alpha = 1: decision value is the kernel
        // column k(x0, ·).
        let fit = ErmFit {
            alpha_hat: array![1.0],
            span: array![[0.0]],
            loss: Loss::Logistic,
            kernel: gauss1(),
            objective: 0.0,
            grad_norm: 0.0,
            iterations: 0,
        };
        let x = array![[0.0], [1.0]];
        let v = fit.decision_values(x.view()).unwrap();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(v[1], (-1.0f64).exp(), epsilon = 1e-14);
        // Logistic: positive logits mean class 0.
        let labels = fit.classify(x.view()).unwrap();
        assert_eq!(labels.to_vec(), vec![0.0, 0.0]);

        let zero = ErmFit {
            alpha_hat: array![0.0],
            span: array![[0.0]],
            loss: Loss::Squared,
            kernel: gauss1(),
            objective: 0.0,
            grad_norm: 0.0,
            iterations: 0,
        };
        let v = zero.decision_values(x.view()).unwrap();
        assert_eq!(v.to_vec(), vec![0.0, 0.0]);
        // Squared: threshold at 1/2, and a logit of exactly 0 is class 1
        // under the logistic rule.
        assert_eq!(zero.classify(x.view()).unwrap().to_vec(), vec![0.0, 0.0]);
        let logit_zero = ErmFit {
            alpha_hat: array![0.0],
            span: array![[0.0]],
            loss: Loss::Logistic,
            kernel: gauss1(),
            objective: 0.0,
            grad_norm: 0.0,
            iterations: 0,
        };
        assert_eq!(
            logit_zero.classify(x.view()).unwrap().to_vec(),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn label_normalization_rules() {
        let y = array![0.0, 1.0, 1.0];
        assert_eq!(normalize_binary_labels(y.view()).unwrap().to_vec(), y.to_vec());
        let pm = array![-1.0, 1.0, -1.0];
        assert_eq!(
            normalize_binary_labels(pm.view()).unwrap().to_vec(),
            vec![0.0, 1.0, 0.0]
        );
        let bad = array![0.0, 2.0];
        assert!(normalize_binary_labels(bad.view()).is_err());
    }

    #[test]
    fn parameter_validation_across_fits() {
        let (train, test) = binary_instance(53, 4, 4);
        let w = hand_weights(Array1::from_elem(4, 1.0));
        let g = FnPredictor(|_| 0.5);
        assert!(fit_robust_least_squares(&train, &test, &w, &g, 0.0, &gauss1()).is_err());
        assert!(fit_robust_least_squares(&train, &test, &w, &g, -1.0, &gauss1()).is_err());
        let short = hand_weights(Array1::from_elem(3, 1.0));
        assert!(fit_robust_least_squares(&train, &test, &short, &g, 0.1, &gauss1()).is_err());
        assert!(fit_kmm_weighted_ridge(&train, &w, 0.1, &gauss1(), 0).is_err());
        assert!(matches!(
            fit_robust_logistic(&train, &test, &w, &g, 0.1, &gauss1(), 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(fit_kmm_weighted_logistic(&train, &w, 0.0, &gauss1(), 1e-6).is_err());
        assert!(fit_kmm_weighted_logistic(&train, &short, 0.1, &gauss1(), 1e-6).is_err());
        let bad_labels =
            Dataset::train(array![[0.0], [1.0]], Some(array![1.0, 2.0])).unwrap();
        assert!(matches!(
            fit_kmm_weighted_logistic(
                &bad_labels,
                &hand_weights(Array1::from_elem(2, 1.0)),
                0.1,
                &gauss1(),
                1e-6
            ),
            Err(Error::InvalidParameter(_))
        ));
        let problem = ErmProblem {
            loss: Loss::Squared,
            lambda: 0.0,
            kernel: gauss1(),
            mode: ErmMode::Robust,
        };
        assert!(problem.validate().is_err());
    }

    #[test]
    fn problem_config_round_trips_through_json() {
        let problem = ErmProblem {
            loss: Loss::Logistic,
            lambda: 5.0,
            kernel: KernelSpec::Gaussian { sigma: 0.5 },
            mode: ErmMode::KmmWeighted,
        };
        let json = serde_json::to_string(&problem).unwrap();
        assert_eq!(
            json,
            r#"{"loss":"logistic","lambda":5.0,"kernel":{"family":"gaussian","sigma":0.5},"mode":"kmm_weighted"}"#
        );
        let back: ErmProblem = serde_json::from_str(&json).unwrap();
        assert!(back.validate().is_ok());
        assert!(matches!(back.mode, ErmMode::KmmWeighted));
        assert!(serde_json::from_str::<ErmProblem>(
            r#"{"loss":"logistic","lambda":5.0,"kernel":{"family":"gaussian","sigma":0.5},"mode":"kmm_weighted","extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn end_to_end_classification_error_is_a_probability() {
        // Full pipeline shape check: weighted fit on shifted binary data,
        // hard labels on held-out test points, error rate inside [0, 1].
        let (train, test) = binary_instance(61, 30, 40);
        let w = hand_weights(Array1::from_elem(30, 1.0));
        let g = FnPredictor(|x: ndarray::ArrayView1<f64>| {
            1.0 / (1.0 + (-(x[0] - 0.5 * x[1])).exp())
        });
        let fit = fit_robust_logistic(&train, &test, &w, &g, 0.1, &gauss1(), 1e-6).unwrap();
        let labels = fit.classify(test.x()).unwrap();
        let err = labels
            .iter()
            .map(|&l| if l == 1.0 { 0.0 } else { 1.0 })
            .sum::<f64>()
            / 40.0;
        assert!((0.0..=1.0).contains(&err));
        assert!(labels.iter().all(|&l| l == 0.0 || l == 1.0));
    }
}
