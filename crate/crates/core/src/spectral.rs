//! Spectral radius of small non-negative matrices by power iteration.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Spectral radius of the non-negative `n x n` row-major matrix `a`.
///
/// Power iteration from the all-ones vector with max-norm normalization. If
/// the estimate fails to settle (periodic matrices oscillate between `±ρ`),
/// the iteration is repeated on `A + dI` with `d` the largest row sum. For
/// non-negative `A` the Perron root is real and dominant, so
/// `ρ(A + dI) = ρ(A) + d` and every other eigenvalue moves strictly inside.
pub fn spectral_radius(a: &[f64], n: usize, tol: f64, max_iter: usize) -> Result<f64> {
    if a.len() != n * n {
        return Err(Error::Domain(format!("matrix has {} entries, expected {}", a.len(), n * n)));
    }
    if let Some(idx) = a.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!("matrix entry {idx} = {} is not a finite non-negative number", a[idx])));
    }
    if n == 0 {
        return Ok(0.0);
    }
    match power_iterate(a, n, 0.0, tol, max_iter) {
        Ok(rho) => Ok(rho),
        Err(_) => {
            let shift = a.chunks(n).map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
            let rho = power_iterate(a, n, shift, tol, max_iter)?;
            Ok((rho - shift).max(0.0))
        }
    }
}

fn power_iterate(a: &[f64], n: usize, shift: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut estimate = f64::NAN;
    let mut settled = 0;
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        for (i, row) in a.chunks(n).enumerate() {
            y[i] = row.iter().zip(&x).map(|(aij, xj)| aij * xj).sum::<f64>() + shift * x[i];
        }
        let next = y.iter().fold(0.0, |acc: f64, v| acc.max(*v));
        if next == 0.0 {
            // A^k 1 = 0 for some k: nilpotent
            return Ok(0.0);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / next;
        }
        change = (next - estimate).abs();
        estimate = next;
        // two consecutive small steps guard against a momentary stall
        if change <= tol * estimate.max(1.0) {
            settled += 1;
            if settled == 2 {
                return Ok(estimate);
            }
        } else {
            settled = 0;
        }
    }
    Err(Error::NonConvergence {
        solver: "spectral_radius",
        iterations: max_iter,
        residual: change,
        last: x,
    })
}
