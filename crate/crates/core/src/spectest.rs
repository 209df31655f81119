//! Dispersion-based specification test for the intensity function.
//!
//! Under a correctly specified intensity, `(N_t − λ_t)² − N_t` has conditional mean zero,
//! so `T = n^{−1/2} Σ_t {(N_t − λ_t)² − N_t}` is asymptotically `N(0, 2Eλ₁²)`. The test
//! standardizes `T` by `((2/n) Σ λ_t²)^{1/2}` and rejects when the result exceeds
//! `u_α = Φ⁻¹(1 − α)`. The intensities are
//!
//! * the true ones (oracle mode, validation only),
//! * filtered with a fully specified `f₀` (simple hypothesis), or
//! * filtered with `f_θ̂` after a conditional-ML fit (composite hypothesis).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{filtered_intensities, fit_cmle, sample_mean, FitOptions, MIN_FIT_LENGTH};
use crate::model::{FamilyKind, IntensitySpec};
use crate::scalar::Real;
use crate::stats::critical_value;

/// `n^{−1/2} Σ_t {(N_t − λ_t)² − N_t}`.
pub fn t_stat<F: Real>(counts: &[u64], intensities: &[F]) -> Result<F> {
    if counts.len() != intensities.len() {
        return Err(Error::domain(format!(
            "counts ({}) and intensities ({}) differ in length",
            counts.len(),
            intensities.len()
        )));
    }
    if counts.is_empty() {
        return Err(Error::domain("empty series"));
    }
    let sum = counts
        .iter()
        .zip(intensities)
        .fold(F::zero(), |acc, (&n, &l)| {
            let n = F::from_count(n);
            acc + (n - l) * (n - l) - n
        });
    Ok(sum / F::from_usize(counts.len()).unwrap().sqrt())
}

/// `(2/n) Σ_t λ_t²`.
pub fn variance_estimate<F: Real>(intensities: &[F]) -> F {
    let sq = intensities.iter().fold(F::zero(), |acc, &l| acc + l * l);
    F::lit(2.0) * sq / F::from_usize(intensities.len().max(1)).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    Oracle,
    Simple,
    Composite,
}

/// Null hypothesis for [`run_test`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum Hypothesis {
    /// `f = f₀` for a fully specified `f₀`.
    Simple { model: IntensitySpec<f64> },
    /// `f ∈ {f_θ}` for a parametric family.
    Composite { family: FamilyKind },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub n: usize,
    pub statistic: f64,
    pub variance_estimate: f64,
    pub standardized: f64,
    /// `Φ⁻¹(1−α)`; `null` in JSON when `α = 0`.
    pub u_alpha: Option<f64>,
    pub alpha: f64,
    pub reject: bool,
    pub mode: TestMode,
    /// Starting intensity of the filter; absent in oracle mode.
    pub lambda_start: Option<f64>,
    /// Intensity map used for filtering (simple: `f₀`, composite: `f_θ̂`).
    pub model: Option<IntensitySpec<f64>>,
    /// Composite mode only.
    pub converged: Option<bool>,
}

impl TestReport {
    /// Recompute the decision from the report's own fields.
    pub fn decision_consistent(&self) -> bool {
        let u = self.u_alpha.unwrap_or(f64::INFINITY);
        self.reject == (self.standardized > u)
    }
}

fn assemble(mode: TestMode, counts: &[u64], intensities: &[f64], alpha: f64) -> Result<TestReport> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let statistic = t_stat(counts, intensities)?;
    let var = variance_estimate(intensities);
    if !(var > 0.0) {
        return Err(Error::Undecidable);
    }
    let standardized = statistic / var.sqrt();
    let u = critical_value(alpha)?;
    Ok(TestReport {
        n: counts.len(),
        statistic,
        variance_estimate: var,
        standardized,
        u_alpha: u.is_finite().then_some(u),
        alpha,
        reject: standardized > u,
        mode,
        lambda_start: None,
        model: None,
        converged: None,
    })
}

/// Test with the true intensities supplied (the `T_{n,0}` statistic).
pub fn oracle_test(counts: &[u64], intensities: &[f64], alpha: f64) -> Result<TestReport> {
    assemble(TestMode::Oracle, counts, intensities, alpha)
}

/// Test `hypothesis` from the counts alone. `lambda_start` defaults to the sample mean.
pub fn run_test(
    counts: &[u64],
    hypothesis: &Hypothesis,
    alpha: f64,
    lambda_start: Option<f64>,
    fit_options: &FitOptions,
) -> Result<TestReport> {
    if counts.len() < MIN_FIT_LENGTH {
        return Err(Error::domain(format!(
            "need at least {MIN_FIT_LENGTH} counts to test, got {}",
            counts.len()
        )));
    }
    let start = lambda_start.unwrap_or_else(|| sample_mean(counts));
    let (mode, model, converged) = match hypothesis {
        Hypothesis::Simple { model } => (TestMode::Simple, *model, None),
        Hypothesis::Composite { family } => {
            let opts = FitOptions {
                lambda_start: Some(start),
                ..*fit_options
            };
            let fit = fit_cmle(*family, counts, None, &opts)?;
            let model = fit.spec()?;
            if !(model.f00() > 0.0) {
                return Err(Error::domain(
                    "composite test requires f_theta(0,0) > 0 at the fitted parameter",
                ));
            }
            (TestMode::Composite, model, Some(fit.converged))
        }
    };
    let lambdas = filtered_intensities(&model, counts, start)?;
    let mut report = assemble(mode, counts, &lambdas, alpha)?;
    report.lambda_start = Some(start);
    report.model = Some(model);
    report.converged = converged;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate;

    #[test]
    fn statistic_examples() {
        assert_eq!(t_stat(&[3], &[3.0]).unwrap(), -3.0);
        assert_eq!(t_stat(&[2, 0, 3, 1], &[2.0, 1.0, 2.0, 1.0]).unwrap(), -2.0);
        assert!(t_stat(&[1, 2], &[1.0]).is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance_estimate(&[2.0, 1.0, 2.0, 1.0]), 5.0);
        assert_eq!(variance_estimate(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn oracle_report_arithmetic() {
        let r = oracle_test(&[2, 0, 3, 1], &[2.0, 1.0, 2.0, 1.0], 0.05).unwrap();
        assert_eq!(r.statistic, -2.0);
        assert_eq!(r.variance_estimate, 5.0);
        assert!((r.standardized - (-2.0 / 5f64.sqrt())).abs() < 1e-15);
        assert!((r.standardized * r.variance_estimate.sqrt() - r.statistic).abs() < 1e-12);
        assert!(!r.reject && r.decision_consistent());
        assert_eq!(r.mode, TestMode::Oracle);
    }

    #[test]
    fn zero_intensities_are_undecidable() {
        assert!(matches!(
            oracle_test(&[0, 0], &[0.0, 0.0], 0.05),
            Err(Error::Undecidable)
        ));
        let spec = IntensitySpec::<f64>::linear(0.0, 0.5, 0.4).unwrap();
        let h = Hypothesis::Simple { model: spec };
        let zeros = vec![0u64; 60];
        assert!(matches!(
            run_test(&zeros, &h, 0.05, Some(0.0), &FitOptions::default()),
            Err(Error::Undecidable)
        ));
    }

    #[test]
    fn level_zero_never_rejects() {
        let r = oracle_test(&[9, 9, 9], &[1.0, 1.0, 1.0], 0.0).unwrap();
        assert!(r.standardized > 10.0);
        assert!(!r.reject);
        assert_eq!(r.u_alpha, None);
        assert!(r.decision_consistent());
    }

    #[test]
    fn simple_and_composite_modes() {
        let truth = IntensitySpec::<f64>::linear(1.0, 0.3, 0.4).unwrap();
        let tr = simulate(&truth, 3.3, 3000, 500, 31).unwrap();
        let simple = run_test(
            &tr.counts,
            &Hypothesis::Simple { model: truth },
            0.05,
            None,
            &FitOptions::default(),
        )
        .unwrap();
        assert_eq!(simple.mode, TestMode::Simple);
        assert!(simple.decision_consistent());

        let comp = run_test(
            &tr.counts,
            &Hypothesis::Composite {
                family: FamilyKind::Linear,
            },
            0.05,
            None,
            &FitOptions::default(),
        )
        .unwrap();
        assert_eq!(comp.mode, TestMode::Composite);
        assert!(comp.model.is_some() && comp.converged.is_some());
        assert!(comp.decision_consistent());

        let wrong = IntensitySpec::<f64>::linear(1.0, 0.3, 0.1).unwrap();
        let r = run_test(
            &tr.counts,
            &Hypothesis::Simple { model: wrong },
            0.05,
            None,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(r.reject);
    }

    #[test]
    fn hypothesis_json() {
        let h: Hypothesis =
            serde_json::from_str(r#"{"mode":"composite","family":"linear"}"#).unwrap();
        assert_eq!(
            h,
            Hypothesis::Composite {
                family: FamilyKind::Linear
            }
        );
        let s: Hypothesis = serde_json::from_str(
            r#"{"mode":"simple","model":{"family":"linear","params":{"theta0":1,"theta1":0.3,"theta2":0.4}}}"#,
        )
        .unwrap();
        assert!(matches!(s, Hypothesis::Simple { .. }));
        assert!(serde_json::from_str::<Hypothesis>(
            r#"{"mode":"composite","family":"linear","x":1}"#
        )
        .is_err());
    }
}
