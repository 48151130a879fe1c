//! Small dense linear-algebra helpers: Cholesky and partially-pivoted LU
//! solves. Problem sizes in this crate stay in the low thousands, and the
//! replication harness requires bit-reproducible results across thread
//! counts, so these are sequential implementations over contiguous row
//! slices — the inner loops vectorize, and the summation order is fixed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Dot product with four independent accumulators: SIMD-friendly without
/// depending on the compiler to reassociate, and a fixed summation order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in (4 * chunks)..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular Cholesky factor `L` with `L L^T = a`.
pub(crate) fn cholesky_factor(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        // Row j of L up to (excluding) the diagonal is already final.
        let (head, tail) = l.split_at_mut((j + 1) * n);
        let row_j = &mut head[j * n..];
        let diag = a[[j, j]] - dot(&row_j[..j], &row_j[..j]);
        if !(diag.is_finite() && diag > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "pivot {diag:.3e} at column {j}"
            )));
        }
        let d = diag.sqrt();
        row_j[j] = d;
        for (k, row_i) in tail.chunks_exact_mut(n).enumerate() {
            let i = j + 1 + k;
            row_i[j] = (a[[i, j]] - dot(&row_i[..j], &row_j[..j])) / d;
        }
    }
    Ok(Array2::from_shape_vec((n, n), l).expect("square shape"))
}

/// Solve `L L^T x = b` given the lower factor.
pub(crate) fn cholesky_solve_factored(l: &Array2<f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = l.nrows();
    let lf = l.as_slice().expect("factor is standard layout");
    let mut x = b.to_owned();
    let xs = x.as_slice_mut().expect("owned vector is contiguous");
    for i in 0..n {
        let row = &lf[i * n..i * n + i];
        xs[i] = (xs[i] - dot(row, &xs[..i])) / lf[i * n + i];
    }
    // Transposed solve, row-oriented: once x[i] is known, retire its
    // contribution L[i, k]·x[i] from every earlier equation k.
    for i in (0..n).rev() {
        xs[i] /= lf[i * n + i];
        let xi = xs[i];
        let row = &lf[i * n..i * n + i];
        for (k, lik) in row.iter().enumerate() {
            xs[k] -= lik * xi;
        }
    }
    x
}

/// Solve `a x = b` for symmetric positive definite `a` via Cholesky, with one
/// step of iterative refinement to tighten the residual.
pub(crate) fn cholesky_solve(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let l = cholesky_factor(a)?;
    let mut x = cholesky_solve_factored(&l, b);
    // One refinement pass: r = b - a x, x += solve(r).
    let r = &b.to_owned() - &a.dot(&x);
    let dx = cholesky_solve_factored(&l, r.view());
    x += &dx;
    Ok(x)
}

/// [`lu_solve`] with one iterative-refinement pass: solve, then solve again
/// on the residual and correct. Costs a second factorization, buys a
/// residual near machine precision on reasonably conditioned systems.
pub(crate) fn lu_solve_refined(
    a: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    let mut x = lu_solve(a, b)?;
    let r = &b.to_owned() - &a.dot(&x);
    let dx = lu_solve(a, r.view())?;
    x += &dx;
    Ok(x)
}

/// Solve a general square system `a x = b` by LU with partial pivoting.
pub(crate) fn lu_solve(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    debug_assert_eq!(n, b.len());
    let mut m: Vec<f64> = a.iter().copied().collect();
    let mut x = b.to_owned();
    let xs = x.as_slice_mut().expect("owned vector is contiguous");
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tiny = scale.max(1.0) * (n as f64) * f64::EPSILON;
    for col in 0..n {
        // Pivot: largest magnitude on or below the diagonal.
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in (col + 1)..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best.is_finite()) || best <= tiny {
            return Err(Error::Singular(format!(
                "pivot {best:.3e} at column {col}; if this is a weighted kernel system, \
                 increase the ridge penalty"
            )));
        }
        if piv != col {
            let (a_rows, b_rows) = m.split_at_mut(piv * n);
            a_rows[col * n..(col + 1) * n].swap_with_slice(&mut b_rows[..n]);
            xs.swap(col, piv);
        }
        let (top, bottom) = m.split_at_mut((col + 1) * n);
        let pivot_row = &top[col * n..];
        let d = pivot_row[col];
        let xc = xs[col];
        for (k, row) in bottom.chunks_exact_mut(n).enumerate() {
            let f = row[col] / d;
            if f == 0.0 {
                continue;
            }
            row[col] = 0.0;
            for (rv, pv) in row[col + 1..].iter_mut().zip(&pivot_row[col + 1..n]) {
                *rv -= f * pv;
            }
            xs[col + 1 + k] -= f * xc;
        }
    }
    for i in (0..n).rev() {
        let row = &m[i * n..(i + 1) * n];
        xs[i] = (xs[i] - dot(&row[i + 1..], &xs[i + 1..])) / row[i];
    }
    Ok(x)
}
