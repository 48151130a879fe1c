//! Kernel specifications, Gram assembly, and the dataset container.
//!
//! Two kernel families are provided:
//!
//! * `gaussian`: `k(x, x') = exp(-sigma * ||x - x'||)` — note the
//!   **non-squared** Euclidean distance in the exponent. This exponential
//!   form is bounded by 1, so its feature-norm bound is `R = 1`.
//! * `polynomial`: `k(x, x') = (offset + x . x')^degree`, default
//!   `degree = 3`, `offset = 1`. Its feature norm is data dependent;
//!   [`KernelSpec::feature_bound_on`] computes `max_i sqrt(k(x_i, x_i))`
//!   over a sample.
//!
//! Datasets are dense `f64` matrices with rows as observations plus an
//! optional label vector. The CSV layout used across the crate is: a header
//! row naming the feature columns `x1..xp` in order, optionally followed by
//! a final label column `y`; UTF-8; `.` as the decimal separator.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Default polynomial kernel degree.
pub const DEFAULT_POLY_DEGREE: u32 = 3;
/// Default polynomial kernel offset.
pub const DEFAULT_POLY_OFFSET: f64 = 1.0;

/// Which side of a covariate-shift problem a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Test,
}

/// A dense sample: one row per observation, one column per feature, plus an
/// optional label vector.
///
/// Labels on a [`Role::Test`] dataset are allowed only through
/// [`Dataset::test_with_held_out_labels`]; they are meant for final error
/// reporting and are never consumed by fitting routines.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Option<Array1<f64>>,
    role: Role,
    held_out_labels: bool,
}

impl Dataset {
    /// Training sample, optionally labeled.
    pub fn train(x: Array2<f64>, y: Option<Array1<f64>>) -> Result<Self> {
        Self::build(x, y, Role::Train, false)
    }

    /// Unlabeled test sample.
    pub fn test(x: Array2<f64>) -> Result<Self> {
        Self::build(x, None, Role::Test, false)
    }

    /// Test sample whose labels are kept only for final error reporting.
    pub fn test_with_held_out_labels(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        Self::build(x, Some(y), Role::Test, true)
    }

    fn build(x: Array2<f64>, y: Option<Array1<f64>>, role: Role, held_out: bool) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameter(format!(
                "dataset must be nonempty, got {} rows x {} cols",
                x.nrows(),
                x.ncols()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dataset features".into()));
        }
        if let Some(y) = &y {
            if y.len() != x.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} rows",
                    y.len(),
                    x.nrows()
                )));
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("dataset labels".into()));
            }
        }
        Ok(Self {
            x,
            y,
            role,
            held_out_labels: held_out,
        })
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of feature columns.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Feature matrix view.
    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Label view, if present.
    pub fn y(&self) -> Option<ArrayView1<'_, f64>> {
        self.y.as_ref().map(|y| y.view())
    }

    /// Labels, or an error naming the operation that needed them.
    pub fn labels_required(&self, what: &str) -> Result<ArrayView1<'_, f64>> {
        self.y
            .as_ref()
            .map(|y| y.view())
            .ok_or_else(|| Error::MissingLabels(what.into()))
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Whether labels were attached as held-out-for-reporting.
    pub fn has_held_out_labels(&self) -> bool {
        self.held_out_labels
    }

    /// Row subset (same role and label policy), in the order of `idx`.
    pub fn rows(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidParameter(format!(
                "row index {bad} out of range for {} rows",
                self.n()
            )));
        }
        if idx.is_empty() {
            return Err(Error::EmptySelection("dataset row subset".into()));
        }
        let x = self.x.select(Axis(0), idx);
        let y = self.y.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect());
        Ok(Self {
            x,
            y,
            role: self.role,
            held_out_labels: self.held_out_labels,
        })
    }
}

/// Kernel family and parameters.
///
/// Serializes with a `family` tag, e.g. `{"family":"gaussian","sigma":1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `k(x, x') = exp(-sigma * ||x - x'||)` (non-squared distance).
    Gaussian { sigma: f64 },
    /// `k(x, x') = (offset + x . x')^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    /// Validated Gaussian-family kernel; `sigma > 0`.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian kernel needs sigma > 0, got {sigma}"
            )));
        }
        Ok(Self::Gaussian { sigma })
    }

    /// Validated polynomial kernel; `degree >= 1`, `offset >= 0`.
    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
        }
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "polynomial offset must be >= 0, got {offset}"
            )));
        }
        Ok(Self::Polynomial { degree, offset })
    }

    /// Polynomial kernel with the crate defaults (degree 3, offset 1).
    pub fn polynomial_default() -> Self {
        Self::Polynomial {
            degree: DEFAULT_POLY_DEGREE,
            offset: DEFAULT_POLY_OFFSET,
        }
    }

    /// Single kernel evaluation.
    pub fn eval(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match *self {
            Self::Gaussian { sigma } => {
                let mut sq = 0.0;
                for (&u, &v) in a.iter().zip(b.iter()) {
                    let d = u - v;
                    sq += d * d;
                }
                (-sigma * sq.sqrt()).exp()
            }
            Self::Polynomial { degree, offset } => {
                let mut dot = 0.0;
                for (&u, &v) in a.iter().zip(b.iter()) {
                    dot += u * v;
                }
                (offset + dot).powi(degree as i32)
            }
        }
    }

    /// Gram matrix `K[i][j] = k(x_i, x_j)` over the rows of `data`.
    ///
    /// Only the upper triangle is evaluated; the lower triangle is mirrored,
    /// so symmetry is exact by construction. Rows are filled in parallel;
    /// the result is bit-identical regardless of thread count.
    pub fn gram(&self, data: &Dataset) -> Array2<f64> {
        let x = data.x();
        let n = x.nrows();
        let mut flat = vec![0.0f64; n * n];
        flat.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let xi = x.row(i);
            for j in i..n {
                row[j] = self.eval(xi, x.row(j));
            }
        });
        let mut k = Array2::from_shape_vec((n, n), flat).expect("shape fixed above");
        for i in 1..n {
            for j in 0..i {
                k[[i, j]] = k[[j, i]];
            }
        }
        k
    }

    /// Cross-Gram matrix `K[i][j] = k(a_i, b_j)`, shape `(a.n(), b.n())`.
    pub fn cross_gram(&self, a: &Dataset, b: &Dataset) -> Result<Array2<f64>> {
        self.cross_gram_views(a.x(), b.x())
    }

    /// [`Self::cross_gram`] over raw row matrices.
    pub fn cross_gram_views(
        &self,
        xa: ArrayView2<'_, f64>,
        xb: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>> {
        if xa.ncols() != xb.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "cross_gram over {}-dim and {}-dim rows",
                xa.ncols(),
                xb.ncols()
            )));
        }
        let (na, nb) = (xa.nrows(), xb.nrows());
        let mut flat = vec![0.0f64; na * nb];
        flat.par_chunks_mut(nb).enumerate().for_each(|(i, row)| {
            let ai = xa.row(i);
            for j in 0..nb {
                row[j] = self.eval(ai, xb.row(j));
            }
        });
        Ok(Array2::from_shape_vec((na, nb), flat).expect("shape fixed above"))
    }

    /// Feature-norm bound `R` when it is a constant of the kernel
    /// (`Some(1.0)` for the Gaussian family, `None` for polynomial).
    pub fn feature_bound(&self) -> Option<f64> {
        match self {
            Self::Gaussian { .. } => Some(1.0),
            Self::Polynomial { .. } => None,
        }
    }

    /// Feature-norm bound over a sample: `max_i sqrt(k(x_i, x_i))`.
    pub fn feature_bound_on(&self, data: &Dataset) -> f64 {
        let x = data.x();
        (0..x.nrows())
            .map(|i| self.eval(x.row(i), x.row(i)).sqrt())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Read a dataset from the crate CSV layout (`x1..xp[,y]`, header row).
pub fn read_dataset_csv(path: &Path, role: Role) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.is_empty() {
        return Err(Error::Parse(format!("{}: empty header", path.display())));
    }
    let has_y = *cols.last().unwrap() == "y";
    let p = if has_y { cols.len() - 1 } else { cols.len() };
    if p == 0 {
        return Err(Error::Parse(format!(
            "{}: no feature columns before label column",
            path.display()
        )));
    }
    for (i, name) in cols.iter().take(p).enumerate() {
        let expected = format!("x{}", i + 1);
        if *name != expected {
            return Err(Error::Parse(format!(
                "{}: expected feature column '{expected}', found '{name}'",
                path.display()
            )));
        }
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols.len() {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                line + 2,
                rec.len(),
                cols.len()
            )));
        }
        for field in rec.iter().take(p) {
            xs.push(parse_f64(field, path, line + 2)?);
        }
        if has_y {
            ys.push(parse_f64(&rec[p], path, line + 2)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let x = Array2::from_shape_vec((n, p), xs).expect("counted above");
    let y = has_y.then(|| Array1::from_vec(ys));
    match (role, y) {
        (Role::Train, y) => Dataset::train(x, y),
        (Role::Test, None) => Dataset::test(x),
        (Role::Test, Some(y)) => Dataset::test_with_held_out_labels(x, y),
    }
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Parse(format!(
            "{}: line {line}: cannot parse '{field}' as a number",
            path.display()
        ))
    })
}

/// Write a dataset in the crate CSV layout (`x1..xp[,y]`, header row).
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let p = data.dim();
    let mut header: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    if data.y().is_some() {
        header.push("y".into());
    }
    wtr.write_record(&header)?;
    let x = data.x();
    for i in 0..data.n() {
        let mut rec: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(y) = data.y() {
            rec.push(format!("{}", y[i]));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
