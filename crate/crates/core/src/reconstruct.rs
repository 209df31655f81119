//! Intensities as functionals of past counts.
//!
//! `f_d(λ; n₁,…,n_d) = f_{d−1}(f(λ, n_d); n₁,…,n_{d−1})` applies `f` `d` times, oldest count
//! first. Since `f` is `κ₁`-Lipschitz in `λ`, `|λ_t − f_d(0; N_{t−1},…,N_{t−d})| ≤ κ₁^d λ_{t−d}`
//! holds on every path.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::IntensitySpec;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReconstructionResult<F = f64> {
    pub depth: usize,
    /// `f_d(lambda_init; n₁,…,n_d)`.
    pub value: F,
    /// `κ₁^d·|λ_{t−d} − lambda_init|` when `λ_{t−d}` is supplied, else `κ₁^d·mean_bound`
    /// (a bound in expectation for `lambda_init = 0`).
    pub error_bound: F,
}

/// `f_d(lambda_init; recent_counts)` with `recent_counts` ordered most recent first.
pub fn fd_reconstruct<F: Real>(
    spec: &IntensitySpec<F>,
    recent_counts: &[u64],
    lambda_init: F,
    lambda_past: Option<F>,
) -> Result<ReconstructionResult<F>> {
    if recent_counts.is_empty() {
        return Err(Error::domain("reconstruction needs at least one count"));
    }
    if !(lambda_init >= F::zero()) || !lambda_init.is_finite() {
        return Err(Error::domain("lambda_init must be non-negative"));
    }
    let depth = recent_counts.len();
    let value = fd_value(spec, recent_counts.iter().rev().copied(), lambda_init);
    let decay = spec.kappa1().powi(depth as i32);
    let error_bound = match lambda_past {
        Some(past) => decay * (past - lambda_init).abs(),
        None => decay * spec.mean_bound(),
    };
    Ok(ReconstructionResult {
        depth,
        value,
        error_bound,
    })
}

#[inline]
fn fd_value<F: Real>(
    spec: &IntensitySpec<F>,
    oldest_first: impl Iterator<Item = u64>,
    lambda_init: F,
) -> F {
    oldest_first.fold(lambda_init, |lambda, n| spec.apply(lambda, n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub depth: usize,
    pub max_abs_error: f64,
    /// `max_t κ₁^d λ_{t−d}` over the reconstructed steps.
    pub bound: f64,
    /// Steps with `|λ_t − f_d(0;·)| > κ₁^d λ_{t−d}` beyond the accumulation tolerance.
    pub violations: usize,
    pub steps: usize,
}

/// Reconstruct every `λ_t` with `t ≥ d` from its `d` predecessors' counts, for each depth.
pub fn reconstruction_sweep<F: Real>(
    spec: &IntensitySpec<F>,
    counts: &[u64],
    intensities: &[F],
    depths: &[usize],
) -> Result<Vec<SweepRow>> {
    if counts.len() != intensities.len() {
        return Err(Error::domain("count and intensity paths differ in length"));
    }
    let max_depth = depths.iter().copied().max().unwrap_or(0);
    if depths.contains(&0) {
        return Err(Error::domain("depths must be at least 1"));
    }
    if counts.len() <= max_depth {
        return Err(Error::domain(format!(
            "trajectory of length {} is too short for depth {max_depth}",
            counts.len()
        )));
    }
    let tol = F::tol();
    let rows = depths
        .par_iter()
        .map(|&d| {
            let decay = spec.kappa1().powi(d as i32);
            let mut row = SweepRow {
                depth: d,
                max_abs_error: 0.0,
                bound: 0.0,
                violations: 0,
                steps: 0,
            };
            for t in d..counts.len() {
                let value = fd_value(spec, counts[t - d..t].iter().copied(), F::zero());
                let err = (intensities[t] - value).abs();
                let local = decay * intensities[t - d];
                if err > local + tol {
                    row.violations += 1;
                }
                row.max_abs_error = row.max_abs_error.max(err.to_f64_lossy());
                row.bound = row.bound.max(local.to_f64_lossy());
                row.steps += 1;
            }
            row
        })
        .collect();
    Ok(rows)
}
