//! Replication studies: test size, normality of the standardized statistic, mixing decay,
//! moment bounds and estimator accuracy.
//!
//! Replicate `i` of a study with master seed `s` simulates from seed
//! `replicate_seed(s, i)` (see [`crate::rng::SEED_RULE`]). Replicates run on the rayon
//! pool of the caller and are folded in index order, so a summary depends only on its
//! configuration, never on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{
    coalescence_experiment, stationary_pool, Coalescence, DEFAULT_POOL_SIZE, DEFAULT_TAIL,
};
use crate::error::{Error, Result};
use crate::estimate::{filtered_intensities, fit_cmle, sample_mean, FitOptions};
use crate::model::IntensitySpec;
use crate::rng::{replicate_seed, SEED_RULE};
use crate::simulate::{simulate, Trajectory, DEFAULT_BURN_IN};
use crate::spectest::{oracle_test, run_test, Hypothesis, TestMode};
use crate::stats;

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_tail() -> usize {
    DEFAULT_TAIL
}

fn default_pool_size() -> usize {
    DEFAULT_POOL_SIZE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeConfig {
    /// Data-generating model.
    pub model: IntensitySpec,
    pub n: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Null to test; defaults to the composite null over `model`'s family. A null that
    /// excludes `model` turns the rejection rate into power.
    #[serde(default)]
    pub hypothesis: Option<Hypothesis>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalityConfig {
    pub model: IntensitySpec,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub mode: TestMode,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    pub model: IntensitySpec,
    pub n_values: Vec<usize>,
    #[serde(default = "default_tail")]
    pub tail: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    pub model: IntensitySpec,
    pub n: usize,
    pub seed: u64,
    pub kappa_bar: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub model: IntensitySpec,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub fit: FitOptions,
}

/// A study configuration document, tagged by `"study"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "lowercase")]
pub enum StudyConfig {
    Size(SizeConfig),
    Normality(NormalityConfig),
    Mixing(MixingConfig),
    Moment(MomentConfig),
    Estimation(EstimationConfig),
}

impl StudyConfig {
    pub fn seed(&self) -> u64 {
        match self {
            StudyConfig::Size(c) => c.seed,
            StudyConfig::Normality(c) => c.seed,
            StudyConfig::Mixing(c) => c.seed,
            StudyConfig::Moment(c) => c.seed,
            StudyConfig::Estimation(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            StudyConfig::Size(c) => c.seed = seed,
            StudyConfig::Normality(c) => c.seed = seed,
            StudyConfig::Mixing(c) => c.seed = seed,
            StudyConfig::Moment(c) => c.seed = seed,
            StudyConfig::Estimation(c) => c.seed = seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub median: f64,
    pub rejection_rate: Option<f64>,
    /// Binomial standard error `√(α(1−α)/R)` of the rejection rate under the null.
    pub rejection_se: Option<f64>,
    pub ks_distance: Option<f64>,
}

impl Aggregates {
    /// Aggregate per-replicate values; `alpha` is the nominal level when `rejections` is given.
    pub fn from_values(values: &[f64], rejections: Option<&[bool]>, alpha: f64, ks: bool) -> Self {
        let r = values.len().max(1) as f64;
        let variance = stats::variance(values);
        Aggregates {
            mean: stats::mean(values),
            variance,
            se_mean: (variance / r).sqrt(),
            median: stats::median(values),
            rejection_rate: rejections
                .map(|rej| rej.iter().filter(|&&x| x).count() as f64 / rej.len().max(1) as f64),
            rejection_se: rejections.map(|rej| (alpha * (1.0 - alpha) / rej.len() as f64).sqrt()),
            ks_distance: ks.then(|| stats::ks_distance_normal(values)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub rows: Vec<Coalescence>,
    /// Largest deviation of the estimates from their best non-increasing fit.
    pub antitonic_deviation: f64,
    /// Every estimate is at most `bound + 3·se`.
    pub bound_respected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean_lambda: f64,
    /// Batch-means standard error (100 batches).
    pub mean_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub mean_bound: f64,
    pub k0: f64,
    pub second_moment_bound: f64,
    pub mean_within_bound: bool,
    pub second_moment_within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub theta_true: Vec<f64>,
    pub theta_hats: Vec<Vec<f64>>,
    /// Per-component root mean squared error.
    pub rmse: Vec<f64>,
    /// Fraction of replicates whose every component lies within 0.15 of the truth.
    pub within_015: f64,
    pub converged: usize,
}

/// Result of a study: per-replicate values plus aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCSummary {
    pub config: StudyConfig,
    pub master_seed: u64,
    pub seed_rule: String,
    pub replicates: usize,
    /// Series length per replicate.
    pub n: usize,
    /// Standardized statistics (size, normality), `Σ(λ_t − λ̂_t)²` (estimation) or
    /// non-coalescence estimates per lag (mixing).
    pub values: Vec<f64>,
    pub rejections: Option<Vec<bool>>,
    pub aggregates: Aggregates,
    pub mixing: Option<MixingReport>,
    pub moments: Option<MomentReport>,
    pub estimation: Option<EstimationReport>,
}

fn replicate_path(
    spec: &IntensitySpec,
    n: usize,
    burn_in: usize,
    master: u64,
    index: usize,
) -> Result<Trajectory> {
    simulate(
        spec,
        spec.mean_bound(),
        n,
        burn_in,
        replicate_seed(master, index as u64),
    )
}

fn summary(config: StudyConfig, replicates: usize, n: usize, values: Vec<f64>) -> MCSummary {
    let aggregates = Aggregates::from_values(&values, None, 0.0, false);
    MCSummary {
        master_seed: config.seed(),
        config,
        seed_rule: SEED_RULE.to_string(),
        replicates,
        n,
        values,
        rejections: None,
        aggregates,
        mixing: None,
        moments: None,
        estimation: None,
    }
}

/// Rejection rate of the test over replicates simulated from `cfg.model`.
pub fn size_study(cfg: &SizeConfig) -> Result<MCSummary> {
    if cfg.replicates < 100 {
        return Err(Error::domain("size study needs at least 100 replicates"));
    }
    let hypothesis = cfg.hypothesis.clone().unwrap_or(Hypothesis::Composite {
        family: cfg.model.kind(),
    });
    let outcomes: Vec<(f64, bool)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let path = replicate_path(&cfg.model, cfg.n, cfg.burn_in, cfg.seed, i)?;
            let report = run_test(&path.counts, &hypothesis, cfg.alpha, None, &cfg.fit)?;
            Ok((report.standardized, report.reject))
        })
        .collect::<Result<_>>()?;
    let (values, rejections): (Vec<f64>, Vec<bool>) = outcomes.into_iter().unzip();
    let mut s = summary(
        StudyConfig::Size(cfg.clone()),
        cfg.replicates,
        cfg.n,
        values,
    );
    s.aggregates = Aggregates::from_values(&s.values, Some(&rejections), cfg.alpha, false);
    s.rejections = Some(rejections);
    Ok(s)
}

/// Distribution of the standardized statistic against `N(0, 1)`.
pub fn normality_study(cfg: &NormalityConfig) -> Result<MCSummary> {
    if cfg.replicates < 200 {
        return Err(Error::domain(
            "normality study needs at least 200 replicates",
        ));
    }
    let values: Vec<f64> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let path = replicate_path(&cfg.model, cfg.n, cfg.burn_in, cfg.seed, i)?;
            let report = match cfg.mode {
                TestMode::Oracle => oracle_test(&path.counts, &path.intensities, 0.05)?,
                TestMode::Simple => run_test(
                    &path.counts,
                    &Hypothesis::Simple { model: cfg.model },
                    0.05,
                    None,
                    &cfg.fit,
                )?,
                TestMode::Composite => run_test(
                    &path.counts,
                    &Hypothesis::Composite {
                        family: cfg.model.kind(),
                    },
                    0.05,
                    None,
                    &cfg.fit,
                )?,
            };
            Ok(report.standardized)
        })
        .collect::<Result<_>>()?;
    let mut s = summary(
        StudyConfig::Normality(cfg.clone()),
        cfg.replicates,
        cfg.n,
        values,
    );
    s.aggregates = Aggregates::from_values(&s.values, None, 0.0, true);
    Ok(s)
}

/// Coalescence frequency of the coupled chains against the β-mixing bound, per lag.
///
/// All lags share the replicate streams (common random numbers); the stationary pool is
/// simulated from `replicate_seed(seed, u64::MAX)`.
pub fn mixing_study(cfg: &MixingConfig) -> Result<MCSummary> {
    if cfg.replicates < 100 {
        return Err(Error::domain("mixing study needs at least 100 replicates"));
    }
    if cfg.n_values.is_empty() {
        return Err(Error::domain("n_values is empty"));
    }
    let pool = stationary_pool(
        &cfg.model,
        cfg.pool_size,
        replicate_seed(cfg.seed, u64::MAX),
    )?;
    let rows: Vec<Coalescence> = cfg
        .n_values
        .iter()
        .map(|&n| coalescence_experiment(&cfg.model, &pool, n, cfg.tail, cfg.replicates, cfg.seed))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
    let horizon = cfg.n_values.iter().max().unwrap() + cfg.tail;
    let mut s = summary(
        StudyConfig::Mixing(cfg.clone()),
        cfg.replicates,
        horizon,
        values,
    );
    s.mixing = Some(MixingReport {
        antitonic_deviation: stats::antitonic_deviation(&s.values),
        bound_respected: rows.iter().all(|r| r.estimate <= r.bound + 3.0 * r.se),
        rows,
    });
    Ok(s)
}

/// Long-run `Eλ` and `Eλ²` against the mean and second-moment bounds.
pub fn moment_study(cfg: &MomentConfig) -> Result<MCSummary> {
    if cfg.n < 10_000 {
        return Err(Error::domain("moment study needs n of at least 10^4"));
    }
    let bound2 = cfg.model.second_moment_bound(cfg.kappa_bar)?;
    let path = replicate_path(&cfg.model, cfg.n, cfg.burn_in, cfg.seed, 0)?;
    let squares: Vec<f64> = path.intensities.iter().map(|l| l * l).collect();
    let mean_lambda = stats::mean(&path.intensities);
    let mean_se = stats::batch_means_se(&path.intensities, 100);
    let second = stats::mean(&squares);
    let second_se = stats::batch_means_se(&squares, 100);
    let mean_bound = cfg.model.mean_bound();
    let mut s = summary(StudyConfig::Moment(cfg.clone()), 1, cfg.n, Vec::new());
    s.moments = Some(MomentReport {
        mean_lambda,
        mean_se,
        second_moment: second,
        second_moment_se: second_se,
        mean_bound,
        k0: bound2.k0,
        second_moment_bound: bound2.bound,
        mean_within_bound: mean_lambda <= mean_bound + 3.0 * mean_se,
        second_moment_within_bound: second <= bound2.bound + 3.0 * second_se,
    });
    Ok(s)
}

/// Accuracy of the conditional MLE and of the intensities it filters.
pub fn estimation_study(cfg: &EstimationConfig) -> Result<MCSummary> {
    if cfg.replicates == 0 {
        return Err(Error::domain("replicates must be at least 1"));
    }
    let kind = cfg.model.kind();
    let per_rep: Vec<(Vec<f64>, f64, bool)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let path = replicate_path(&cfg.model, cfg.n, cfg.burn_in, cfg.seed, i)?;
            let start = cfg
                .fit
                .lambda_start
                .unwrap_or_else(|| sample_mean(&path.counts));
            let opts = FitOptions {
                lambda_start: Some(start),
                ..cfg.fit
            };
            let fit = fit_cmle(kind, &path.counts, None, &opts)?;
            let filtered = filtered_intensities(&fit.spec()?, &path.counts, start)?;
            let gap: f64 = filtered
                .iter()
                .zip(&path.intensities)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok((fit.theta_hat, gap, fit.converged))
        })
        .collect::<Result<_>>()?;

    let truth = cfg.model.params();
    let r = per_rep.len() as f64;
    let rmse: Vec<f64> = (0..truth.len())
        .map(|j| {
            (per_rep
                .iter()
                .map(|(th, _, _)| (th[j] - truth[j]).powi(2))
                .sum::<f64>()
                / r)
                .sqrt()
        })
        .collect();
    let within = per_rep
        .iter()
        .filter(|(th, _, _)| th.iter().zip(&truth).all(|(a, b)| (a - b).abs() <= 0.15))
        .count() as f64
        / r;
    let converged = per_rep.iter().filter(|(_, _, c)| *c).count();
    let values: Vec<f64> = per_rep.iter().map(|(_, g, _)| *g).collect();
    let mut s = summary(
        StudyConfig::Estimation(cfg.clone()),
        cfg.replicates,
        cfg.n,
        values,
    );
    s.estimation = Some(EstimationReport {
        theta_true: truth,
        theta_hats: per_rep.into_iter().map(|(th, _, _)| th).collect(),
        rmse,
        within_015: within,
        converged,
    });
    Ok(s)
}

pub fn run_study(config: &StudyConfig) -> Result<MCSummary> {
    match config {
        StudyConfig::Size(c) => size_study(c),
        StudyConfig::Normality(c) => normality_study(c),
        StudyConfig::Mixing(c) => mixing_study(c),
        StudyConfig::Moment(c) => moment_study(c),
        StudyConfig::Estimation(c) => estimation_study(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> IntensitySpec {
        IntensitySpec::<f64>::linear(1.0, 0.3, 0.4).unwrap()
    }

    #[test]
    fn aggregates_recompute() {
        let cfg = NormalityConfig {
            model: linear(),
            n: 300,
            replicates: 200,
            seed: 5,
            mode: TestMode::Oracle,
            burn_in: 100,
            fit: FitOptions::default(),
        };
        let s = normality_study(&cfg).unwrap();
        let again = Aggregates::from_values(&s.values, None, 0.0, true);
        assert_eq!(s.aggregates, again);
        assert_eq!(s.values.len(), 200);
    }

    #[test]
    fn level_zero_size_study_never_rejects() {
        let cfg = SizeConfig {
            model: linear(),
            n: 200,
            replicates: 100,
            alpha: 0.0,
            seed: 1,
            hypothesis: None,
            burn_in: 100,
            fit: FitOptions::default(),
        };
        let s = size_study(&cfg).unwrap();
        assert_eq!(s.aggregates.rejection_rate, Some(0.0));
        assert_eq!(s.aggregates.rejection_se, Some(0.0));
    }

    #[test]
    fn rejection_se_halves_when_replicates_quadruple() {
        let a = Aggregates::from_values(&[0.0; 100], Some(&[false; 100]), 0.05, false);
        let b = Aggregates::from_values(&[0.0; 400], Some(&[false; 400]), 0.05, false);
        let (sa, sb) = (a.rejection_se.unwrap(), b.rejection_se.unwrap());
        assert!((sa / sb - 2.0).abs() < 1e-12);
        let c = Aggregates::from_values(&[0.0; 200], Some(&[false; 200]), 0.05, false);
        assert!((sa / c.rejection_se.unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn minimum_replicates() {
        let cfg = SizeConfig {
            model: linear(),
            n: 200,
            replicates: 50,
            alpha: 0.05,
            seed: 1,
            hypothesis: None,
            burn_in: 0,
            fit: FitOptions::default(),
        };
        assert!(size_study(&cfg).is_err());
    }

    #[test]
    fn moment_study_linear_and_expar() {
        let s = moment_study(&MomentConfig {
            model: linear(),
            n: 20_000,
            seed: 3,
            kappa_bar: 0.85,
            burn_in: 500,
        })
        .unwrap();
        let m = s.moments.unwrap();
        assert!(m.mean_within_bound && m.second_moment_within_bound, "{m:?}");
        assert!((m.mean_lambda - 10.0 / 3.0).abs() < 0.15);

        let ex = IntensitySpec::<f64>::expar(0.5, 0.3, 0.4, 0.2, 0.5).unwrap();
        let s = moment_study(&MomentConfig {
            model: ex,
            n: 20_000,
            seed: 3,
            kappa_bar: 0.95,
            burn_in: 500,
        })
        .unwrap();
        let m = s.moments.unwrap();
        assert!((m.mean_bound - 5.0).abs() < 1e-12);
        assert!(m.mean_lambda <= 5.0 && m.mean_within_bound);
    }

    #[test]
    fn mixing_rows() {
        let s = mixing_study(&MixingConfig {
            model: linear(),
            n_values: vec![2, 6, 12],
            tail: 20,
            replicates: 300,
            seed: 9,
            pool_size: 5_000,
        })
        .unwrap();
        let mix = s.mixing.unwrap();
        assert_eq!(mix.rows.len(), 3);
        assert!(mix.bound_respected);
        let max_se = mix.rows.iter().map(|r| r.se).fold(0.0, f64::max);
        assert!(mix.antitonic_deviation <= 3.0 * max_se + 1e-12);
    }

    #[test]
    fn config_json_is_strict_and_tagged() {
        let json = r#"{"study":"moment","model":{"family":"linear","params":{"theta0":1,"theta1":0.3,"theta2":0.4}},"n":10000,"seed":1,"kappa_bar":0.85}"#;
        let cfg: StudyConfig = serde_json::from_str(json).unwrap();
        assert!(matches!(cfg, StudyConfig::Moment(ref m) if m.burn_in == 500));
        let typo = json.replace("kappa_bar", "kapa_bar");
        assert!(serde_json::from_str::<StudyConfig>(&typo).is_err());
        let extra = json.replace("\"seed\":1", "\"seed\":1,\"bogus\":2");
        assert!(serde_json::from_str::<StudyConfig>(&extra).is_err());
    }
}
