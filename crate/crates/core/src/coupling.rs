//! Coupled Poisson draws and coupled chains.
//!
//! Two Poisson variables with rates `λ₁ ≤ λ₂` are coupled additively:
//! `X₁ ~ Poisson(λ₁)` and `X₂ = X₁ + Z` with independent `Z ~ Poisson(λ₂ − λ₁)`.
//! Then `E|X₁ − X₂| = λ₂ − λ₁` and `P(X₁ ≠ X₂) = 1 − e^{−(λ₂−λ₁)}`. Running two chains
//! with this coupling at every step contracts `E|λ'_t − λ''_t|` at rate `κ` and makes the
//! count paths coalesce, which is what bounds the β-mixing coefficients.

use rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, IntensitySpec};
use crate::rng::{bits_to_unit, replicate_seed, UniformStream};
use crate::scalar::Real;
use crate::simulate::{poisson_inv, simulate, unit, Trajectory, DEFAULT_BURN_IN};

pub const DEFAULT_TAIL: usize = 50;
pub const DEFAULT_POOL_SIZE: usize = 100_000;

/// Draw `(X₁, X₂)` with `X₁ ~ Poisson(lambda_a)`, `X₂ ~ Poisson(lambda_b)` and
/// `|X₁ − X₂| ~ Poisson(|lambda_a − lambda_b|)`. Consumes exactly two uniforms.
pub fn couple_poisson<F: Real, R: RngCore + ?Sized>(
    lambda_a: F,
    lambda_b: F,
    rng: &mut R,
) -> Result<(u64, u64)> {
    for l in [lambda_a, lambda_b] {
        if !(l >= F::zero()) || !l.is_finite() {
            return Err(Error::domain(format!(
                "Poisson rate must be finite and non-negative, got {l}"
            )));
        }
    }
    Ok(couple_inv(lambda_a, lambda_b, rng))
}

#[inline]
fn couple_inv<F: Real, R: RngCore + ?Sized>(lambda_a: F, lambda_b: F, rng: &mut R) -> (u64, u64) {
    let u_common = unit::<F>(bits_to_unit(rng.next_u64()));
    let u_excess = unit::<F>(bits_to_unit(rng.next_u64()));
    let common = poisson_inv(lambda_a.min(lambda_b), u_common);
    let excess = poisson_inv((lambda_a - lambda_b).abs(), u_excess);
    if lambda_a <= lambda_b {
        (common, common + excess)
    } else {
        (common + excess, common)
    }
}

/// Two synchronized chains. Index `i` of every vector is time step `t = i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupledPath<F = f64> {
    pub lambda_a: Vec<F>,
    pub lambda_b: Vec<F>,
    pub counts_a: Vec<u64>,
    pub counts_b: Vec<u64>,
    /// Step from which count agreement is tracked.
    pub switch_point: usize,
    /// First step `t ≥ switch_point` with differing counts.
    pub first_disagreement_after: Option<usize>,
}

impl<F: Real> CoupledPath<F> {
    pub fn len(&self) -> usize {
        self.counts_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts_a.is_empty()
    }

    /// `|λ'_t − λ''_t|` for `t = 1..=len`.
    pub fn lambda_gaps(&self) -> Vec<F> {
        self.lambda_a
            .iter()
            .zip(&self.lambda_b)
            .map(|(&a, &b)| (a - b).abs())
            .collect()
    }
}

/// Couple two chains started at `λ'₁ = lambda_a1`, `λ''₁ = lambda_b1` for `horizon` steps.
pub fn couple_chains<F: Real, R: RngCore + ?Sized>(
    spec: &IntensitySpec<F>,
    lambda_a1: F,
    lambda_b1: F,
    horizon: usize,
    rng: &mut R,
) -> Result<CoupledPath<F>> {
    couple_chains_from(spec, lambda_a1, lambda_b1, horizon, horizon, rng)
}

/// As [`couple_chains`], tracking count disagreement from step `switch_point` on.
///
/// The additive coupling already keeps coalesced counts together with the required
/// probability, so the construction does not change at the switch point.
pub fn couple_chains_from<F: Real, R: RngCore + ?Sized>(
    spec: &IntensitySpec<F>,
    lambda_a1: F,
    lambda_b1: F,
    horizon: usize,
    switch_point: usize,
    rng: &mut R,
) -> Result<CoupledPath<F>> {
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    if switch_point == 0 || switch_point > horizon {
        return Err(Error::domain("switch_point must lie in 1..=horizon"));
    }
    for l in [lambda_a1, lambda_b1] {
        if !(l >= F::zero()) || !l.is_finite() {
            return Err(Error::domain("starting intensities must be non-negative"));
        }
    }
    let mut path = CoupledPath {
        lambda_a: Vec::with_capacity(horizon),
        lambda_b: Vec::with_capacity(horizon),
        counts_a: Vec::with_capacity(horizon),
        counts_b: Vec::with_capacity(horizon),
        switch_point,
        first_disagreement_after: None,
    };
    let (mut la, mut lb) = (lambda_a1, lambda_b1);
    for t in 1..=horizon {
        if t > 1 {
            la = spec.apply(la, path.counts_a[t - 2]);
            lb = spec.apply(lb, path.counts_b[t - 2]);
        }
        let (xa, xb) = couple_inv(la, lb, rng);
        if t >= switch_point && xa != xb && path.first_disagreement_after.is_none() {
            path.first_disagreement_after = Some(t);
        }
        path.lambda_a.push(la);
        path.lambda_b.push(lb);
        path.counts_a.push(xa);
        path.counts_b.push(xb);
    }
    Ok(path)
}

/// `2·mean_lambda·κ^{n−1}/(1−κ₁)`, the bound on `β(n)`.
pub fn beta_bound<F: Real>(spec: &IntensitySpec<F>, mean_lambda: F, n: usize) -> Result<F> {
    if n == 0 {
        return Err(Error::domain("lag n must be at least 1"));
    }
    if !(mean_lambda >= F::zero()) {
        return Err(Error::domain("mean intensity must be non-negative"));
    }
    let decay = spec.kappa().powi((n - 1) as i32);
    Ok(F::lit(2.0) * mean_lambda * decay / (F::one() - spec.kappa1()))
}

/// Empirical stationary intensities: one long trajectory after the default burn-in.
pub fn stationary_pool<F: Real>(spec: &IntensitySpec<F>, size: usize, seed: u64) -> Result<Vec<F>> {
    Ok(simulate(spec, spec.mean_bound(), size, DEFAULT_BURN_IN, seed)?.intensities)
}

/// Outcome of [`coalescence_experiment`] at one lag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coalescence {
    pub n: usize,
    pub tail: usize,
    pub replicates: usize,
    /// Fraction of replicates whose counts disagree somewhere in steps `n..=n+tail`.
    pub estimate: f64,
    pub se: f64,
    /// `2·Eλ̂·κ^{n−1}/(1−κ₁)` with `Eλ̂` the pool mean.
    pub bound: f64,
    /// `κ₁^tail · bound`, the neglected mass beyond the tail window.
    pub trunc_err: f64,
    pub pool_mean: f64,
}

/// Estimate the non-coalescence probability of the coupled chains at lag `n`.
///
/// Each replicate draws `λ'₁, λ''₁` uniformly with replacement from `pool`, couples the
/// chains up to step `n + tail`, and records whether the counts disagree at any step
/// in `n..=n+tail`. Replicate `i` uses stream `(replicate_seed(seed, i), 0)`.
pub fn coalescence_experiment<F: Real>(
    spec: &IntensitySpec<F>,
    pool: &[F],
    n: usize,
    tail: usize,
    replicates: usize,
    seed: u64,
) -> Result<Coalescence> {
    if replicates == 0 {
        return Err(Error::domain("replicates must be at least 1"));
    }
    if n == 0 {
        return Err(Error::domain("lag n must be at least 1"));
    }
    if pool.is_empty() {
        return Err(Error::domain("stationary pool is empty"));
    }
    let disagreements: Vec<bool> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let mut rng = UniformStream::new(replicate_seed(seed, i), 0);
            let pick = |u: f64| pool[((u * pool.len() as f64) as usize).min(pool.len() - 1)];
            let la = pick(rng.next_uniform());
            let lb = pick(rng.next_uniform());
            let path = couple_chains_from(spec, la, lb, n + tail, n, &mut rng)?;
            Ok(path.first_disagreement_after.is_some())
        })
        .collect::<Result<_>>()?;

    let hits = disagreements.iter().filter(|&&d| d).count();
    let estimate = hits as f64 / replicates as f64;
    let pool_mean = pool.iter().map(|l| l.to_f64_lossy()).sum::<f64>() / pool.len() as f64;
    let spec64 = to_f64_spec(spec)?;
    let bound = beta_bound(&spec64, pool_mean, n)?;
    Ok(Coalescence {
        n,
        tail,
        replicates,
        estimate,
        se: (estimate * (1.0 - estimate) / replicates as f64).sqrt(),
        bound,
        trunc_err: spec64.kappa1().powi(tail as i32) * bound,
        pool_mean,
    })
}

fn to_f64_spec<F: Real>(spec: &IntensitySpec<F>) -> Result<IntensitySpec<f64>> {
    let params: Vec<f64> = spec.params().iter().map(|p| p.to_f64_lossy()).collect();
    let family = Family::from_params(spec.kind(), &params)?;
    IntensitySpec::with_declared_kappas(
        family,
        spec.kappa1().to_f64_lossy(),
        spec.kappa2().to_f64_lossy(),
    )
}

/// Outcome of reconstructing each `(N_{t−1}, λ_{t−1})` from `λ_t` alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub steps_checked: usize,
    pub max_lambda_error: f64,
    pub count_mismatches: usize,
}

impl RecoveryReport {
    pub fn exact(&self, lambda_tol: f64) -> bool {
        self.count_mismatches == 0 && self.max_lambda_error <= lambda_tol
    }
}

/// Recover `(N_{t−1}, λ_{t−1})` from `λ_t = g(λ_{t−1}) + N_{t−1}/2` for the fractional family:
/// `N_{t−1} = ⌊2λ_t⌋` and `λ_{t−1} = g⁻¹(frac(2λ_t)/2)`.
pub fn recover_previous<F: Real>(spec: &IntensitySpec<F>, lambda_t: F) -> Result<(u64, F)> {
    let Family::Fractional(p) = *spec.family() else {
        return Err(Error::domain(
            "past recovery requires the fractional family",
        ));
    };
    if !(lambda_t >= F::zero()) || !lambda_t.is_finite() {
        return Err(Error::domain("intensity must be non-negative"));
    }
    let twice = lambda_t * F::lit(2.0);
    let whole = twice.floor();
    let g = (twice - whole) / F::lit(2.0);
    let r = (g - p.c1) / p.s;
    Ok((whole.to_u64().unwrap_or(u64::MAX), r / (F::one() - r)))
}

/// Check that every step of a fractional-family trajectory reveals its predecessor exactly.
pub fn past_recovery_check<F: Real>(
    spec: &IntensitySpec<F>,
    trajectory: &Trajectory<F>,
) -> Result<RecoveryReport> {
    if !matches!(spec.family(), Family::Fractional(_)) {
        return Err(Error::domain(
            "past recovery requires the fractional family",
        ));
    }
    let mut report = RecoveryReport {
        steps_checked: 0,
        max_lambda_error: 0.0,
        count_mismatches: 0,
    };
    for t in 1..trajectory.len() {
        let (count, lambda) = recover_previous(spec, trajectory.intensities[t])?;
        report.steps_checked += 1;
        if count != trajectory.counts[t - 1] {
            report.count_mismatches += 1;
        }
        let err = (lambda - trajectory.intensities[t - 1])
            .abs()
            .to_f64_lossy();
        if !(err <= report.max_lambda_error) {
            report.max_lambda_error = err;
        }
    }
    Ok(report)
}
