//! Conditional maximum-likelihood estimation of intensity-family parameters.
//!
//! The conditional log-likelihood given `λ̃₁` is `Σ_{t≥2} [N_t log λ̃_t(θ) − λ̃_t(θ)]` (the
//! `log N_t!` terms are dropped), with `λ̃_t(θ) = f_θ(λ̃_{t−1}, N_{t−1})`. It is minimized
//! (negated) by a projected Nelder–Mead search over the contraction region
//! `{θ ≥ 1e−8, κ₁(θ) + κ₂(θ) ≤ 1 − 1e−6}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, FamilyKind, IntensitySpec};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::scalar::Real;

pub const PARAM_FLOOR: f64 = 1e-8;
pub const KAPPA_CAP: f64 = 1.0 - 1e-6;
pub const LOG_GUARD: f64 = 1e-10;
/// Objective value reported for parameters outside the contraction region.
pub const PENALTY: f64 = 1e100;
pub const MIN_FIT_LENGTH: usize = 50;

/// `λ̃₁ = lambda_start`, `λ̃_t = f(λ̃_{t−1}, N_{t−1})`.
pub fn filtered_intensities<F: Real>(
    spec: &IntensitySpec<F>,
    counts: &[u64],
    lambda_start: F,
) -> Result<Vec<F>> {
    if counts.is_empty() {
        return Err(Error::domain("count series is empty"));
    }
    if !(lambda_start >= F::zero()) || !lambda_start.is_finite() {
        return Err(Error::domain("lambda_start must be non-negative"));
    }
    let mut out = Vec::with_capacity(counts.len());
    let mut lambda = lambda_start;
    out.push(lambda);
    for &n in &counts[..counts.len() - 1] {
        lambda = spec.apply(lambda, n);
        out.push(lambda);
    }
    Ok(out)
}

pub fn sample_mean(counts: &[u64]) -> f64 {
    counts.iter().sum::<u64>() as f64 / counts.len().max(1) as f64
}

/// Indices of the parameters that make up `κ = κ₁ + κ₂` (all enter linearly).
fn kappa_indices(kind: FamilyKind) -> &'static [usize] {
    match kind {
        FamilyKind::Linear => &[1, 2],
        FamilyKind::ExpAr => &[1, 2, 3],
        // κ₂ = 1/2 is fixed; c₁ + s < 1/2 is the binding constraint
        FamilyKind::Fractional => &[0, 1],
    }
}

fn kappa_budget(kind: FamilyKind) -> f64 {
    match kind {
        FamilyKind::Fractional => KAPPA_CAP - 0.5,
        _ => KAPPA_CAP,
    }
}

/// Whether `theta` lies in the estimation region.
pub fn in_region(kind: FamilyKind, theta: &[f64]) -> bool {
    theta.len() == kind.dim()
        && theta.iter().all(|&v| v.is_finite() && v >= PARAM_FLOOR)
        && kappa_indices(kind).iter().map(|&i| theta[i]).sum::<f64>() <= kappa_budget(kind)
}

/// Clamp to the parameter floor, then rescale the contraction parameters onto the cap.
pub fn project(kind: FamilyKind, theta: &mut [f64]) {
    for v in theta.iter_mut() {
        if !(*v >= PARAM_FLOOR) {
            *v = PARAM_FLOOR;
        }
    }
    let idx = kappa_indices(kind);
    let sum: f64 = idx.iter().map(|&i| theta[i]).sum();
    let budget = kappa_budget(kind);
    if sum > budget {
        let scale = budget / sum;
        for &i in idx {
            theta[i] = (theta[i] * scale).max(PARAM_FLOOR);
        }
        // scaling can overshoot the cap by an ulp
        let &top = idx
            .iter()
            .max_by(|&&a, &&b| theta[a].total_cmp(&theta[b]))
            .unwrap();
        while idx.iter().map(|&i| theta[i]).sum::<f64>() > budget {
            theta[top] -= budget * f64::EPSILON;
        }
    }
}

/// Negative conditional log-likelihood `Σ_{t≥2} [λ̃_t − N_t log λ̃_t]`.
///
/// Parameters outside the region yield [`PENALTY`].
pub fn neg_log_likelihood(
    kind: FamilyKind,
    theta: &[f64],
    counts: &[u64],
    lambda_start: f64,
) -> f64 {
    if !in_region(kind, theta) {
        return PENALTY;
    }
    match Family::from_params(kind, theta).and_then(IntensitySpec::new) {
        Ok(spec) => nll_spec(&spec, counts, lambda_start),
        Err(_) => PENALTY,
    }
}

fn nll_spec(spec: &IntensitySpec<f64>, counts: &[u64], lambda_start: f64) -> f64 {
    let mut lambda = lambda_start;
    let mut total = 0.0;
    for w in counts.windows(2) {
        lambda = spec.apply(lambda, w[0]);
        let n = w[1];
        total += lambda;
        if n > 0 {
            total -= n as f64 * lambda.max(LOG_GUARD).ln();
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub max_iter: usize,
    pub diameter_tol: f64,
    /// `λ̃₁`; defaults to the sample mean of the counts.
    pub lambda_start: Option<f64>,
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            diameter_tol: 1e-8,
            lambda_start: None,
            restarts: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub family: FamilyKind,
    pub theta_hat: Vec<f64>,
    pub neg_loglik: f64,
    pub initial_neg_loglik: f64,
    /// Simplex diameter fell below the tolerance within the iteration cap.
    pub converged: bool,
    pub iterations: usize,
    pub n: usize,
    pub lambda_start: f64,
    /// All counts were zero; the estimate is the region's boundary point.
    pub degenerate_data: bool,
}

impl EstimationResult {
    pub fn spec(&self) -> Result<IntensitySpec<f64>> {
        IntensitySpec::from_params(self.family, &self.theta_hat)
    }
}

/// A starting point inside the region whose stationary mean matches the sample mean.
pub fn default_theta_init(kind: FamilyKind, counts: &[u64]) -> Vec<f64> {
    let m = sample_mean(counts).max(0.1);
    match kind {
        FamilyKind::Linear => vec![0.4 * m, 0.3, 0.3],
        FamilyKind::ExpAr => vec![0.4 * m, 0.2, 0.3, 0.1, 0.5],
        FamilyKind::Fractional => vec![0.2, 0.1],
    }
}

/// Conditional MLE of `kind`'s parameters from `counts`.
pub fn fit_cmle(
    kind: FamilyKind,
    counts: &[u64],
    theta_init: Option<&[f64]>,
    options: &FitOptions,
) -> Result<EstimationResult> {
    if counts.len() < MIN_FIT_LENGTH {
        return Err(Error::domain(format!(
            "need at least {MIN_FIT_LENGTH} counts to fit, got {}",
            counts.len()
        )));
    }
    let theta0 = match theta_init {
        Some(t) => t.to_vec(),
        None => default_theta_init(kind, counts),
    };
    if !in_region(kind, &theta0) {
        return Err(Error::domain(format!(
            "theta_init {theta0:?} lies outside the contraction region"
        )));
    }
    let lambda_start = options.lambda_start.unwrap_or_else(|| sample_mean(counts));
    if !(lambda_start >= 0.0) || !lambda_start.is_finite() {
        return Err(Error::domain("lambda_start must be non-negative"));
    }
    let objective = |theta: &[f64]| neg_log_likelihood(kind, theta, counts, lambda_start);
    let initial = objective(&theta0);

    if counts.iter().all(|&n| n == 0) {
        let mut boundary = vec![PARAM_FLOOR; kind.dim()];
        project(kind, &mut boundary);
        let value = objective(&boundary);
        return Ok(EstimationResult {
            family: kind,
            theta_hat: boundary,
            neg_loglik: value,
            initial_neg_loglik: initial,
            converged: true,
            iterations: 0,
            n: counts.len(),
            lambda_start,
            degenerate_data: true,
        });
    }

    let nm = NelderMeadOptions {
        max_iter: options.max_iter,
        diameter_tol: options.diameter_tol,
        restarts: options.restarts,
        ..NelderMeadOptions::default()
    };
    let min = nelder_mead(objective, &theta0, |t| project(kind, t), &nm);
    let (theta_hat, neg_loglik) = if min.fx <= initial {
        (min.x, min.fx)
    } else {
        (theta0, initial)
    };
    Ok(EstimationResult {
        family: kind,
        theta_hat,
        neg_loglik,
        initial_neg_loglik: initial,
        converged: min.converged,
        iterations: min.iterations,
        n: counts.len(),
        lambda_start,
        degenerate_data: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate;

    fn linear() -> IntensitySpec {
        IntensitySpec::<f64>::linear(1.0, 0.3, 0.4).unwrap()
    }

    #[test]
    fn filter_example() {
        let f = filtered_intensities(&linear(), &[2, 0, 3], 2.0).unwrap();
        assert_eq!(f.len(), 3);
        assert!(
            (f[1] - 2.4).abs() < 1e-12 && (f[2] - 1.72).abs() < 1e-12,
            "{f:?}"
        );
        assert!(filtered_intensities(&linear(), &[], 1.0).is_err());
    }

    #[test]
    fn filter_recovers_truth_and_forgets_start() {
        let spec = linear();
        let tr = simulate(&spec, 3.0, 300, 50, 17).unwrap();
        let exact = filtered_intensities(&spec, &tr.counts, tr.intensities[0]).unwrap();
        assert_eq!(exact, tr.intensities);
        let off = filtered_intensities(&spec, &tr.counts, tr.intensities[0] + 7.0).unwrap();
        for (t, (o, l)) in off.iter().zip(&tr.intensities).enumerate() {
            let bound = 0.3f64.powi(t as i32) * 7.0;
            assert!((o - l).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn nll_closed_form_for_constant_intensity() {
        let zeros = vec![0u64; 60];
        let v = neg_log_likelihood(FamilyKind::Linear, &[0.7, 1e-8, 1e-8], &zeros, 0.7);
        // λ̃ stays at 0.7 + O(1e-8)
        assert!((v - 59.0 * 0.7).abs() < 1e-5, "{v}");
        assert_eq!(
            neg_log_likelihood(FamilyKind::Linear, &[1.0, 0.6, 0.5], &zeros, 1.0),
            PENALTY
        );
        assert_eq!(
            neg_log_likelihood(FamilyKind::Linear, &[0.0, 0.3, 0.3], &zeros, 1.0),
            PENALTY
        );
    }

    #[test]
    fn intercept_only_minimizer_is_the_mean() {
        // with θ₁ = θ₂ at the floor, λ̃ ≈ θ₀ and the minimizer is mean(N₂..N_n)
        let counts: Vec<u64> = (0..200).map(|i| (i * 7 % 5) as u64).collect();
        let target = counts[1..].iter().sum::<u64>() as f64 / 199.0;
        let grid_best = (1..4000)
            .map(|i| i as f64 * 1e-3)
            .min_by(|a, b| {
                let fa = neg_log_likelihood(FamilyKind::Linear, &[*a, 1e-8, 1e-8], &counts, *a);
                let fb = neg_log_likelihood(FamilyKind::Linear, &[*b, 1e-8, 1e-8], &counts, *b);
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert!((grid_best - target).abs() < 2e-3, "{grid_best} vs {target}");
    }

    #[test]
    fn truth_beats_distant_parameters() {
        let tr = simulate(&linear(), 3.3, 20_000, 500, 3).unwrap();
        let m = sample_mean(&tr.counts);
        let at_truth = neg_log_likelihood(FamilyKind::Linear, &[1.0, 0.3, 0.4], &tr.counts, m);
        let far = neg_log_likelihood(FamilyKind::Linear, &[2.0, 0.1, 0.3], &tr.counts, m);
        assert!(at_truth < far);
    }

    #[test]
    fn projection() {
        let mut t = vec![-1.0, 0.8, 0.6];
        project(FamilyKind::Linear, &mut t);
        assert_eq!(t[0], PARAM_FLOOR);
        assert!((t[1] + t[2] - KAPPA_CAP).abs() < 1e-12);
        assert!(in_region(FamilyKind::Linear, &t));
        let mut f = vec![0.3, 0.3];
        project(FamilyKind::Fractional, &mut f);
        assert!(in_region(FamilyKind::Fractional, &f));
        assert!(IntensitySpec::from_params(FamilyKind::Fractional, &f).is_ok());
    }

    #[test]
    fn fit_linear_recovers_parameters() {
        let tr = simulate(&linear(), 3.3, 5000, 500, 99).unwrap();
        let fit = fit_cmle(FamilyKind::Linear, &tr.counts, None, &FitOptions::default()).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!(fit.neg_loglik <= fit.initial_neg_loglik);
        for (est, truth) in fit.theta_hat.iter().zip([1.0, 0.3, 0.4]) {
            assert!((est - truth).abs() < 0.15, "{fit:?}");
        }
        assert!(in_region(FamilyKind::Linear, &fit.theta_hat));
    }

    #[test]
    fn fit_from_truth_descends() {
        let tr = simulate(&linear(), 3.3, 2000, 500, 5).unwrap();
        let fit = fit_cmle(
            FamilyKind::Linear,
            &tr.counts,
            Some(&[1.0, 0.3, 0.4]),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.neg_loglik <= fit.initial_neg_loglik);
    }

    #[test]
    fn fit_other_families() {
        let ex = IntensitySpec::<f64>::expar(0.5, 0.3, 0.4, 0.2, 0.5).unwrap();
        let tr = simulate(&ex, 2.0, 3000, 500, 1).unwrap();
        let fit = fit_cmle(FamilyKind::ExpAr, &tr.counts, None, &FitOptions::default()).unwrap();
        assert!(in_region(FamilyKind::ExpAr, &fit.theta_hat));
        assert!(fit.neg_loglik <= fit.initial_neg_loglik);

        let fr = IntensitySpec::<f64>::fractional(0.25, 0.2).unwrap();
        let tr = simulate(&fr, 0.5, 3000, 500, 1).unwrap();
        let fit = fit_cmle(
            FamilyKind::Fractional,
            &tr.counts,
            None,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.spec().is_ok());
        assert!((fit.theta_hat[0] - 0.25).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn degenerate_and_short_data() {
        let zeros = vec![0u64; 100];
        let fit = fit_cmle(FamilyKind::Linear, &zeros, None, &FitOptions::default()).unwrap();
        assert!(fit.degenerate_data && fit.converged);
        assert!(fit.theta_hat.iter().all(|&v| v == PARAM_FLOOR));
        assert!(fit_cmle(FamilyKind::Linear, &[1; 10], None, &FitOptions::default()).is_err());
        assert!(fit_cmle(
            FamilyKind::Linear,
            &[1; 100],
            Some(&[1.0, 0.6, 0.5]),
            &FitOptions::default()
        )
        .is_err());
    }
}
