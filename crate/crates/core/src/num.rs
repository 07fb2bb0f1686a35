//! Scalar abstraction shared by the learners, detectors and metrics.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the models are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Widening conversion used for serialization and digests.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Gaussian cumulative distribution at `x` for mean `mu`, std-dev `sigma > 0`.
    fn normal_cdf(x: Self, mu: Self, sigma: Self) -> Self {
        let z = (x - mu).as_f64() / (sigma.as_f64() * std::f64::consts::SQRT_2);
        Self::lit(0.5 * (1.0 + libm::erf(z)))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the largest element; ties go to the lowest index. Empty or all-NaN input yields 0.
pub fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn sum<S: Scalar>(values: &[S]) -> S {
    values.iter().fold(S::zero(), |acc, v| acc + *v)
}
