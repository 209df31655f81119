//! Scalar abstraction shared by the model, simulation and reconstruction code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the model code is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    fn from_count(k: u64) -> Self {
        Self::from_u64(k).expect("count representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute comparison tolerance: `1e-12`, widened to a few ulps for narrow types.
    fn tol() -> Self {
        let eps = Self::epsilon() * Self::lit(8.0);
        eps.max(Self::lit(1e-12))
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_per_width() {
        assert_eq!(f64::tol(), 1e-12);
        assert!(f32::tol() > 1e-7);
    }
}
