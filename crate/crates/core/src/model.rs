//! Contractive intensity maps `f(λ, y)` and the closed-form bounds attached to them.
//!
//! Every family satisfies the Lipschitz condition
//! `|f(λ,y) − f(λ',y')| ≤ κ₁|λ−λ'| + κ₂|y−y'|` with `κ₁ + κ₂ < 1`, where the constants
//! are known analytically for each family:
//!
//! | family       | `f(λ, y)`                                  | κ₁     | κ₂  |
//! |--------------|--------------------------------------------|--------|-----|
//! | `linear`     | `θ₀ + θ₁λ + θ₂y`                            | θ₁     | θ₂  |
//! | `expar`      | `d + (a + c·exp(−γλ²))λ + by`               | a + c  | b   |
//! | `fractional` | `g(λ) + y/2`, `g(λ) = c₁ + s·λ/(1+λ)`       | s      | 1/2 |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearParams<F> {
    pub theta0: F,
    pub theta1: F,
    pub theta2: F,
}

/// Exponential autoregression with an added intercept `d` (`d = 0` is the intercept-free form).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpArParams<F> {
    pub d: F,
    pub a: F,
    pub b: F,
    pub c: F,
    pub gamma: F,
}

/// `f(λ, y) = g(λ) + y/2` whose past is exactly recoverable from the current intensity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionalParams<F> {
    pub c1: F,
    pub s: F,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "family",
    content = "params",
    rename_all = "lowercase",
    deny_unknown_fields
)]
pub enum Family<F> {
    Linear(LinearParams<F>),
    #[serde(rename = "expar")]
    ExpAr(ExpArParams<F>),
    Fractional(FractionalParams<F>),
}

/// Family tag without parameters, used where parameters are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Linear,
    #[serde(rename = "expar")]
    ExpAr,
    Fractional,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Linear => "linear",
            FamilyKind::ExpAr => "expar",
            FamilyKind::Fractional => "fractional",
        }
    }

    /// Parameter names in the order used by parameter vectors.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            FamilyKind::Linear => &["theta0", "theta1", "theta2"],
            FamilyKind::ExpAr => &["d", "a", "b", "c", "gamma"],
            FamilyKind::Fractional => &["c1", "s"],
        }
    }

    pub fn dim(self) -> usize {
        self.param_names().len()
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(FamilyKind::Linear),
            "expar" => Ok(FamilyKind::ExpAr),
            "fractional" => Ok(FamilyKind::Fractional),
            other => Err(Error::Input(format!(
                "unknown family {other:?} (expected linear, expar or fractional)"
            ))),
        }
    }
}

impl<F: Real> Family<F> {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Linear(_) => FamilyKind::Linear,
            Family::ExpAr(_) => FamilyKind::ExpAr,
            Family::Fractional(_) => FamilyKind::Fractional,
        }
    }

    /// Closed-form Lipschitz constants `(κ₁, κ₂)`.
    pub fn lipschitz(&self) -> (F, F) {
        match *self {
            Family::Linear(p) => (p.theta1, p.theta2),
            Family::ExpAr(p) => (p.a + p.c, p.b),
            Family::Fractional(p) => (p.s, F::lit(0.5)),
        }
    }

    /// Parameters as a flat vector in [`FamilyKind::param_names`] order.
    pub fn params(&self) -> Vec<F> {
        match *self {
            Family::Linear(p) => vec![p.theta0, p.theta1, p.theta2],
            Family::ExpAr(p) => vec![p.d, p.a, p.b, p.c, p.gamma],
            Family::Fractional(p) => vec![p.c1, p.s],
        }
    }

    pub fn from_params(kind: FamilyKind, theta: &[F]) -> Result<Self> {
        if theta.len() != kind.dim() {
            return Err(Error::domain(format!(
                "{} expects {} parameters, got {}",
                kind.name(),
                kind.dim(),
                theta.len()
            )));
        }
        Ok(match kind {
            FamilyKind::Linear => Family::Linear(LinearParams {
                theta0: theta[0],
                theta1: theta[1],
                theta2: theta[2],
            }),
            FamilyKind::ExpAr => Family::ExpAr(ExpArParams {
                d: theta[0],
                a: theta[1],
                b: theta[2],
                c: theta[3],
                gamma: theta[4],
            }),
            FamilyKind::Fractional => Family::Fractional(FractionalParams {
                c1: theta[0],
                s: theta[1],
            }),
        })
    }

    fn check_params(&self) -> Result<()> {
        let names = self.kind().param_names();
        for (name, v) in names.iter().zip(self.params()) {
            if !v.is_finite() || v < F::zero() {
                return Err(Error::domain(format!(
                    "parameter {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if let Family::Fractional(p) = *self {
            if p.c1 <= F::zero() {
                return Err(Error::domain("fractional family requires c1 > 0"));
            }
            if p.c1 + p.s >= F::lit(0.5) {
                return Err(Error::domain(format!(
                    "fractional family requires c1 + s < 1/2, got {}",
                    p.c1 + p.s
                )));
            }
        }
        Ok(())
    }
}

/// A parametric intensity map together with its declared contraction constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "Family<F>",
    try_from = "Family<F>",
    bound(
        serialize = "F: Real + Serialize",
        deserialize = "F: Real + Deserialize<'de>"
    )
)]
pub struct IntensitySpec<F = f64> {
    family: Family<F>,
    kappa1: F,
    kappa2: F,
}

impl<F: Real> From<IntensitySpec<F>> for Family<F> {
    fn from(spec: IntensitySpec<F>) -> Self {
        spec.family
    }
}

impl<F: Real> TryFrom<Family<F>> for IntensitySpec<F> {
    type Error = Error;

    fn try_from(family: Family<F>) -> Result<Self> {
        IntensitySpec::new(family)
    }
}

fn check_kappas<F: Real>(kappa1: F, kappa2: F) -> Result<()> {
    if !(kappa1 >= F::zero() && kappa2 >= F::zero()) {
        return Err(Error::domain("contraction constants must be non-negative"));
    }
    let sum = kappa1 + kappa2;
    if !(sum < F::one()) {
        return Err(Error::Contraction {
            kappa1: kappa1.to_f64_lossy(),
            kappa2: kappa2.to_f64_lossy(),
            sum: sum.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Report of [`IntensitySpec::validate_contraction`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidationReport<F = f64> {
    /// Largest `|Δf| / (κ₁|Δλ| + κ₂|Δy|)` over the checked pairs.
    pub worst_ratio: F,
    pub pairs_checked: u64,
    pub pass: bool,
}

/// `K₀` and the implied bound `K₀/(1−κ̄)` on the stationary second moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecondMomentBound<F = f64> {
    pub k0: F,
    /// Maximizer of the quadratic defining `K₀`.
    pub argmax: F,
    pub bound: F,
}

impl<F: Real> IntensitySpec<F> {
    /// Validate `family` and attach its closed-form contraction constants.
    pub fn new(family: Family<F>) -> Result<Self> {
        family.check_params()?;
        let (kappa1, kappa2) = family.lipschitz();
        check_kappas(kappa1, kappa2)?;
        Ok(Self {
            family,
            kappa1,
            kappa2,
        })
    }

    /// Attach caller-declared constants instead of the closed-form ones.
    ///
    /// The constants are not checked against `f`; use [`Self::validate_contraction`] for that.
    pub fn with_declared_kappas(family: Family<F>, kappa1: F, kappa2: F) -> Result<Self> {
        family.check_params()?;
        check_kappas(kappa1, kappa2)?;
        Ok(Self {
            family,
            kappa1,
            kappa2,
        })
    }

    pub fn linear(theta0: F, theta1: F, theta2: F) -> Result<Self> {
        Self::new(Family::Linear(LinearParams {
            theta0,
            theta1,
            theta2,
        }))
    }

    pub fn expar(d: F, a: F, b: F, c: F, gamma: F) -> Result<Self> {
        Self::new(Family::ExpAr(ExpArParams { d, a, b, c, gamma }))
    }

    pub fn fractional(c1: F, s: F) -> Result<Self> {
        Self::new(Family::Fractional(FractionalParams { c1, s }))
    }

    pub fn from_params(kind: FamilyKind, theta: &[F]) -> Result<Self> {
        Self::new(Family::from_params(kind, theta)?)
    }

    pub fn family(&self) -> &Family<F> {
        &self.family
    }

    pub fn kind(&self) -> FamilyKind {
        self.family.kind()
    }

    pub fn params(&self) -> Vec<F> {
        self.family.params()
    }

    pub fn kappa1(&self) -> F {
        self.kappa1
    }

    pub fn kappa2(&self) -> F {
        self.kappa2
    }

    /// `κ = κ₁ + κ₂`.
    pub fn kappa(&self) -> F {
        self.kappa1 + self.kappa2
    }

    /// `f(λ, y)` without argument checks.
    #[inline]
    pub fn apply(&self, lambda: F, y: u64) -> F {
        debug_assert!(lambda >= F::zero());
        let y = F::from_count(y);
        match self.family {
            Family::Linear(p) => p.theta0 + p.theta1 * lambda + p.theta2 * y,
            Family::ExpAr(p) => {
                p.d + (p.a + p.c * (-p.gamma * lambda * lambda).exp()) * lambda + p.b * y
            }
            Family::Fractional(p) => fractional_g(p, lambda) + y * F::lit(0.5),
        }
    }

    /// `f(λ, y)`; negative or non-finite `λ` is a domain error.
    pub fn eval(&self, lambda: F, y: u64) -> Result<F> {
        if !(lambda >= F::zero()) || !lambda.is_finite() {
            return Err(Error::domain(format!(
                "intensity must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(self.apply(lambda, y))
    }

    /// `f(0, 0)`.
    pub fn f00(&self) -> F {
        self.apply(F::zero(), 0)
    }

    /// Check the declared Lipschitz constants on a grid.
    ///
    /// The λ-grid has `grid_size` uniform points on `[0, lambda_max]`, crossed with
    /// `y ∈ {0, …, ⌈lambda_max⌉}`; every unordered pair of grid points is compared.
    pub fn validate_contraction(
        &self,
        grid_size: usize,
        lambda_max: F,
    ) -> Result<ValidationReport<F>> {
        if grid_size < 2 {
            return Err(Error::domain("grid_size must be at least 2"));
        }
        if !(lambda_max > F::zero()) || !lambda_max.is_finite() {
            return Err(Error::domain("lambda_max must be positive"));
        }
        let y_max = lambda_max.ceil().to_u64().unwrap_or(0);
        let step = lambda_max / F::from_usize(grid_size - 1).unwrap();
        let points: Vec<(F, u64, F)> = (0..grid_size)
            .flat_map(|i| {
                let lambda = F::from_usize(i).unwrap() * step;
                (0..=y_max).map(move |y| (lambda, y))
            })
            .map(|(lambda, y)| (lambda, y, self.apply(lambda, y)))
            .collect();

        let tol = F::tol();
        let mut worst = F::zero();
        let mut pairs = 0u64;
        let mut pass = true;
        for (i, &(l1, y1, f1)) in points.iter().enumerate() {
            for &(l2, y2, f2) in &points[i + 1..] {
                pairs += 1;
                let df = (f1 - f2).abs();
                let dy = F::from_count(y1.abs_diff(y2));
                let denom = self.kappa1 * (l1 - l2).abs() + self.kappa2 * dy;
                let ratio = if denom > F::zero() {
                    df / denom
                } else if df > tol {
                    F::infinity()
                } else {
                    F::zero()
                };
                if ratio > worst {
                    worst = ratio;
                }
                // rounding in f scales with its magnitude, not with the gap
                let slack = tol * F::one().max(f1.abs()).max(f2.abs());
                if df > denom + slack {
                    pass = false;
                }
            }
        }
        Ok(ValidationReport {
            worst_ratio: worst,
            pairs_checked: pairs,
            pass,
        })
    }

    /// Upper bound `f(0,0)/(1−κ)` on the stationary mean intensity.
    pub fn mean_bound(&self) -> F {
        self.f00() / (F::one() - self.kappa())
    }

    /// Bound on `E(λ_t | λ₁)`: `f(0,0)(1−κ^{t−1})/(1−κ) + κ^{t−1}λ₁`.
    pub fn conditional_mean_bound(&self, lambda1: F, t: u32) -> Result<F> {
        if t == 0 {
            return Err(Error::domain("time index t must be at least 1"));
        }
        if !(lambda1 >= F::zero()) {
            return Err(Error::domain("lambda1 must be non-negative"));
        }
        let kappa = self.kappa();
        let decay = kappa.powi((t - 1) as i32);
        Ok(self.f00() * (F::one() - decay) / (F::one() - kappa) + decay * lambda1)
    }

    /// `K₀ = max_{λ≥0} (f(0,0)+κλ)² + κ₂²λ − κ̄λ²` and the bound `K₀/(1−κ̄)` on `Eλ₁²`.
    ///
    /// Requires `κ < κ̄ < 1`.
    pub fn second_moment_bound(&self, kappa_bar: F) -> Result<SecondMomentBound<F>> {
        let kappa = self.kappa();
        if !(kappa_bar > kappa && kappa_bar < F::one()) {
            return Err(Error::domain(format!(
                "kappa_bar must lie in (kappa, 1) = ({kappa}, 1), got {kappa_bar}"
            )));
        }
        let f00 = self.f00();
        // q(λ) = f00² + bλ − aλ², a > 0 because κ̄ > κ ≥ κ²
        let a = kappa_bar - kappa * kappa;
        let b = F::lit(2.0) * f00 * kappa + self.kappa2 * self.kappa2;
        let argmax = (b / (F::lit(2.0) * a)).max(F::zero());
        let k0 = f00 * f00 + b * argmax - a * argmax * argmax;
        Ok(SecondMomentBound {
            k0,
            argmax,
            bound: k0 / (F::one() - kappa_bar),
        })
    }

    /// Inverse of the fractional family's `g` on `[c₁, c₁+s)`.
    pub fn fractional_g_inverse(&self, u: F) -> Result<F> {
        match self.family {
            Family::Fractional(p) => {
                if p.s <= F::zero() {
                    return Err(Error::domain("g is not invertible when s = 0"));
                }
                let r = (u - p.c1) / p.s;
                if !(r >= F::zero() && r < F::one()) {
                    return Err(Error::domain(format!("{u} is outside the range of g")));
                }
                Ok(r / (F::one() - r))
            }
            _ => Err(Error::domain("g is only defined for the fractional family")),
        }
    }
}

#[inline]
fn fractional_g<F: Real>(p: FractionalParams<F>, lambda: F) -> F {
    p.c1 + p.s * lambda / (F::one() + lambda)
}
