use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point type the model and the scans are generic over.
///
/// Training runs in `f32`; gradient checks and the reference paths use `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    const NAME: &'static str;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

#[inline]
pub fn silu<F: Real>(x: F) -> F {
    x * sigmoid(x)
}

/// d/dx of `x * sigmoid(x)`.
#[inline]
pub fn silu_grad<F: Real>(x: F) -> F {
    let s = sigmoid(x);
    s * (F::one() + x * (F::one() - s))
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<F: Real>(x: F) -> F {
    if x > F::of(20.0) {
        x
    } else if x < F::of(-20.0) {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for positive `y`.
pub fn softplus_inv(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}
