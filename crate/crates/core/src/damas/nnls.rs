//! Lawson-Hanson active-set non-negative least squares.
//!
//! This is an independent reference for the Gauss-Seidel solver: it shares
//! no code with it and solves `min ||A x - y||_2, x >= 0` directly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::DamasError;

/// Largest number of unknowns the oracle accepts.
pub const NNLS_MAX_UNKNOWNS: usize = 256;

/// Stationarity threshold on the projected gradient, relative to
/// `max |A^T y|`.
pub const NNLS_TOLERANCE: f64 = 1e-10;

/// Solves `min ||A x - y||` subject to `x >= 0` for a row-major
/// `rows x cols` matrix.
pub fn nnls_oracle(a: &[f64], rows: usize, cols: usize, y: &[f64]) -> Result<Vec<f64>, DamasError> {
    if cols > NNLS_MAX_UNKNOWNS {
        return Err(DamasError::TooLarge(cols, NNLS_MAX_UNKNOWNS));
    }
    if a.len() != rows * cols {
        return Err(DamasError::Dimension {
            expected: rows * cols,
            got: a.len(),
        });
    }
    if y.len() != rows {
        return Err(DamasError::Dimension {
            expected: rows,
            got: y.len(),
        });
    }
    let scale = gradient(a, rows, cols, y, &vec![0.0; cols])
        .iter()
        .fold(0.0, |m: f64, g| m.max(g.abs()));
    let tol = NNLS_TOLERANCE * scale.max(f64::MIN_POSITIVE);

    let mut x = vec![0.0; cols];
    let mut passive = vec![false; cols];
    let max_outer = 3 * cols + 10;
    for _ in 0..max_outer {
        // w = A^T (y - A x): the negative gradient
        let w = gradient(a, rows, cols, y, &x);
        let candidate = (0..cols)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(core::cmp::Ordering::Equal));
        let j = match candidate {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;
        loop {
            let set: Vec<usize> = (0..cols).filter(|&k| passive[k]).collect();
            let z = least_squares(a, rows, cols, y, &set);
            if z.iter().all(|v| *v > 0.0) {
                for (&k, &v) in set.iter().zip(&z) {
                    x[k] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&k, &v) in set.iter().zip(&z) {
                if v <= 0.0 {
                    let step = x[k] / (x[k] - v);
                    alpha = alpha.min(step);
                }
            }
            for (&k, &v) in set.iter().zip(&z) {
                x[k] += alpha * (v - x[k]);
            }
            for &k in &set {
                if x[k] <= tol * 1e-3 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    Ok(x)
}

fn gradient(a: &[f64], rows: usize, cols: usize, y: &[f64], x: &[f64]) -> Vec<f64> {
    let mut residual = y.to_vec();
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        residual[r] -= row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    }
    let mut w = vec![0.0; cols];
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        for (wj, aj) in w.iter_mut().zip(row) {
            *wj += aj * residual[r];
        }
    }
    w
}

/// Unconstrained least squares on the columns in `set`, via Householder QR.
fn least_squares(a: &[f64], rows: usize, cols: usize, y: &[f64], set: &[usize]) -> Vec<f64> {
    let k = set.len();
    // column-major copy of A restricted to `set`
    let mut q: Vec<f64> = Vec::with_capacity(rows * k);
    for &c in set {
        q.extend((0..rows).map(|r| a[r * cols + c]));
    }
    let mut b = y.to_vec();
    let steps = k.min(rows);
    for j in 0..steps {
        let col = &q[j * rows..(j + 1) * rows];
        let norm = col[j..].iter().map(|v| v * v).sum::<f64>();
        let norm = num_traits::Float::sqrt(norm);
        if norm == 0.0 {
            continue;
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j..k {
            let column = &mut q[c * rows + j..(c + 1) * rows];
            let dot: f64 = column.iter().zip(&v).map(|(p, t)| p * t).sum();
            let f = 2.0 * dot / vnorm2;
            column.iter_mut().zip(&v).for_each(|(p, t)| *p -= f * t);
        }
        let dot: f64 = b[j..].iter().zip(&v).map(|(p, t)| p * t).sum();
        let f = 2.0 * dot / vnorm2;
        b[j..].iter_mut().zip(&v).for_each(|(p, t)| *p -= f * t);
    }
    // back substitution on R (upper triangle of the transformed columns)
    let mut z = vec![0.0; k];
    for j in (0..steps).rev() {
        let mut s = b[j];
        for c in j + 1..steps {
            s -= q[c * rows + j] * z[c];
        }
        let d = q[j * rows + j];
        z[j] = if d.abs() > f64::EPSILON * 1e-3 { s / d } else { 0.0 };
    }
    z
}
