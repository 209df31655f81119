//! Standard normal distribution and the summary statistics used by the studies.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// `Φ(x)` computed as `erfc(−x/√2)/2`, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Acklam's rational approximation to `Φ⁻¹(p)` (relative error about 1e−9).
#[allow(clippy::excessive_precision)]
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`: rational approximation plus one Newton step on `Φ`.
pub fn norm_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    let x = acklam(p);
    Ok(x - (norm_cdf(x) - p) / norm_pdf(x))
}

/// The upper `α`-quantile `u_α = Φ⁻¹(1 − α)`.
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    // Φ⁻¹(1−α) = −Φ⁻¹(α) keeps precision for small α
    Ok(-norm_inv(alpha)?)
}

/// `u_α` extended to `α = 0` by `+∞`, so a level-0 test never rejects.
pub fn critical_value(alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        Ok(f64::INFINITY)
    } else {
        normal_quantile(alpha)
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `sample` and `N(0, 1)`.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = norm_cdf(x);
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (`n − 1` denominator).
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard error of the mean of a dependent series by non-overlapping batch means.
pub fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let size = values.len() / batches.max(1);
    if size == 0 || batches < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = values.chunks_exact(size).take(batches).map(mean).collect();
    (variance(&means) / batches as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareGof {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of a count sample against a discrete law on `{0, 1, …}`.
///
/// Cells are pooled from the left until each holds an expected count of at least 5;
/// the final cell absorbs the whole upper tail.
pub fn chi_square_gof(sample: &[u64], pmf: impl Fn(u64) -> f64) -> Result<ChiSquareGof> {
    if sample.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let n = sample.len() as f64;
    let max = *sample.iter().max().unwrap();
    let mut freq = vec![0u64; max as usize + 1];
    for &x in sample {
        freq[x as usize] += 1;
    }

    // (observed, expected) per pooled cell
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp, mut cum) = (0.0, 0.0, 0.0);
    let mut k = 0u64;
    loop {
        let p = pmf(k);
        cum += p;
        obs += freq.get(k as usize).copied().unwrap_or(0) as f64;
        exp += n * p;
        let rest = n * (1.0 - cum);
        if exp >= 5.0 && rest >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
        if rest < 5.0 {
            // everything above k goes into one tail cell merged with the current one
            let tail_obs: u64 = freq.iter().skip(k as usize + 1).sum();
            let last = (obs + tail_obs as f64, exp + rest.max(0.0));
            match cells.last_mut() {
                Some(prev) if last.1 < 5.0 => {
                    prev.0 += last.0;
                    prev.1 += last.1;
                }
                _ => cells.push(last),
            }
            break;
        }
        k += 1;
    }
    if cells.len() < 2 {
        return Ok(ChiSquareGof {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        });
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok(ChiSquareGof {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// Poisson pmf via log-gamma, independent of the sampler's recurrence.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * lambda.ln() - lambda - statrs::function::gamma::ln_gamma(kf + 1.0)).exp()
}

/// Largest deviation of `values` from their best non-increasing (antitonic) fit.
pub fn antitonic_deviation(values: &[f64]) -> f64 {
    // pool-adjacent-violators on the reversed sequence gives the non-increasing fit
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values.iter().rev() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = (
                (m1 * w1 as f64 + m2 * w2 as f64) / (w1 + w2) as f64,
                w1 + w2,
            );
        }
    }
    let fit: Vec<f64> = blocks
        .iter()
        .flat_map(|&(m, w)| std::iter::repeat_n(m, w))
        .collect();
    values
        .iter()
        .rev()
        .zip(&fit)
        .map(|(v, f)| (v - f).abs())
        .fold(0.0, f64::max)
}
