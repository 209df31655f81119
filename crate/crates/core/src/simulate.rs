//! Trajectories of the bivariate chain `(N_t, λ_t)`.
//!
//! `N_t | past ~ Poisson(λ_t)` and `λ_t = f(λ_{t−1}, N_{t−1})`. Counts are drawn by
//! inverse-CDF sampling from a counter-based uniform stream, so a trajectory is a
//! deterministic function of `(spec, seed, burn_in, lambda_start, n)`.

use crate::error::{Error, Result};
use crate::model::IntensitySpec;
use crate::rng::UniformStream;
use crate::scalar::Real;

pub const DEFAULT_BURN_IN: usize = 500;

/// Smallest `k` with `P(Poisson(λ) ≤ k) ≥ u`.
pub fn poisson_quantile<F: Real>(lambda: F, u: F) -> Result<u64> {
    if !(lambda >= F::zero()) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "Poisson rate must be finite and non-negative, got {lambda}"
        )));
    }
    if !(u >= F::zero() && u < F::one()) {
        return Err(Error::domain(format!("u must lie in [0, 1), got {u}")));
    }
    Ok(poisson_inv(lambda, u))
}

/// [`poisson_quantile`] without argument checks.
pub(crate) fn poisson_inv<F: Real>(lambda: F, u: F) -> u64 {
    if lambda <= F::zero() {
        return 0;
    }
    let p0 = (-lambda).exp();
    if p0 >= F::min_positive_value() {
        let mut k = 0u64;
        let mut p = p0;
        let mut cdf = p0;
        while cdf < u {
            k += 1;
            let kf = F::from_count(k);
            p = p * lambda / kf;
            let next = cdf + p;
            // past the mode with no further progress: u exceeds the representable CDF
            if next == cdf && kf > lambda {
                break;
            }
            cdf = next;
        }
        k
    } else {
        // e^{-λ} underflows: carry the pmf in log space until it becomes representable
        let ln_lambda = lambda.ln();
        let mut k = 0u64;
        let mut log_p = -lambda;
        let mut cdf = F::zero();
        loop {
            let p = log_p.exp();
            let next = cdf + p;
            if next >= u {
                return k;
            }
            if next == cdf && F::from_count(k) > lambda {
                return k;
            }
            cdf = next;
            k += 1;
            log_p = log_p + ln_lambda - F::from_count(k).ln();
        }
    }
}

/// Convert a 53-bit uniform to `F` while keeping it strictly below one.
#[inline]
pub(crate) fn unit<F: Real>(u: f64) -> F {
    let v = F::lit(u);
    if v < F::one() {
        v
    } else {
        F::one() - F::epsilon() / F::lit(2.0)
    }
}

/// One transition `(N, λ) ↦ (N', λ')` with `λ' = f(λ, N)` and `N' = F⁻¹_{λ'}(u)`.
pub fn step<F: Real>(spec: &IntensitySpec<F>, state: (u64, F), u: F) -> Result<(u64, F)> {
    let (count, lambda) = state;
    let next_lambda = spec.eval(lambda, count)?;
    let next_count = poisson_quantile(next_lambda, u)?;
    Ok((next_count, next_lambda))
}

/// Paired count and intensity paths with the inputs that generated them.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<F = f64> {
    pub counts: Vec<u64>,
    pub intensities: Vec<F>,
    pub spec: IntensitySpec<F>,
    pub seed: u64,
    pub burn_in: usize,
    pub lambda_start: F,
}

impl<F: Real> Trajectory<F> {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn mean_intensity(&self) -> F {
        let sum = self.intensities.iter().fold(F::zero(), |acc, &l| acc + l);
        sum / F::from_usize(self.len()).unwrap()
    }

    /// Positions where `λ_t ≠ f(λ_{t−1}, N_{t−1})` bit-for-bit.
    pub fn recursion_violations(&self) -> Vec<usize> {
        (1..self.len())
            .filter(|&t| {
                self.spec.apply(self.intensities[t - 1], self.counts[t - 1]) != self.intensities[t]
            })
            .collect()
    }
}

/// Run `burn_in + n` steps from `λ₁ = lambda_start` and keep the last `n`.
///
/// Draw `t` (0-based, counting burn-in) uses uniform `t` of stream `(seed, 0)`.
pub fn simulate<F: Real>(
    spec: &IntensitySpec<F>,
    lambda_start: F,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Trajectory<F>> {
    if n == 0 {
        return Err(Error::domain("trajectory length n must be at least 1"));
    }
    if !(lambda_start >= F::zero()) || !lambda_start.is_finite() {
        return Err(Error::domain(
            "lambda_start must be finite and non-negative",
        ));
    }
    let mut stream = UniformStream::new(seed, 0);
    let mut counts = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    let mut lambda = lambda_start;
    let mut count = 0u64;
    for t in 0..burn_in + n {
        if t > 0 {
            lambda = spec.apply(lambda, count);
        }
        count = poisson_inv(lambda, unit::<F>(stream.next_uniform()));
        if t >= burn_in {
            counts.push(count);
            intensities.push(lambda);
        }
    }
    Ok(Trajectory {
        counts,
        intensities,
        spec: *spec,
        seed,
        burn_in,
        lambda_start,
    })
}

/// [`simulate`] with the default burn-in, started at `mean_bound(spec)`.
pub fn simulate_stationary<F: Real>(
    spec: &IntensitySpec<F>,
    n: usize,
    seed: u64,
) -> Result<Trajectory<F>> {
    simulate(spec, spec.mean_bound(), n, DEFAULT_BURN_IN, seed)
}
