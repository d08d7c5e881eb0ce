use std::ops::{Add, Div, Mul, Neg, Sub};

/// Real-valued type the model equations are written against.
///
/// Implemented by `f64` for plain evaluation and by [`Var`](super::Var) for
/// reverse-mode recording, so the simulator and the trainer share one
/// implementation of every equation.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;

    /// A constant living in the same context as `self`.
    fn lift(&self, c: f64) -> Self;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sigmoid(self) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// `c / self`
    fn recip_scaled(self, c: f64) -> Self {
        self.lift(c) / self
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Scalar for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }

    #[inline]
    fn lift(&self, c: f64) -> Self {
        c
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
}
