use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::Scalar;

/// Truncated first-order Taylor expansion `primal + tangent * eps`.
///
/// With `S = Var` the tangent itself is recorded on a tape, which is how the
/// trainer differentiates `d/dt` network outputs with respect to parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S = f64> {
    pub primal: S,
    pub tangent: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(primal: S, tangent: S) -> Self {
        Dual { primal, tangent }
    }

    /// A value with zero tangent.
    pub fn constant(primal: S) -> Self {
        Dual {
            primal,
            tangent: primal.lift(0.0),
        }
    }

    /// Multiplication by a tangent-free factor.
    #[inline]
    pub fn scale(self, k: S) -> Self {
        Dual {
            primal: self.primal * k,
            tangent: self.tangent * k,
        }
    }

    #[inline]
    pub fn shift(self, k: S) -> Self {
        Dual {
            primal: self.primal + k,
            tangent: self.tangent,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.primal.exp();
        Dual {
            primal: e,
            tangent: self.tangent * e,
        }
    }

    pub fn ln(self) -> Self {
        Dual {
            primal: self.primal.ln(),
            tangent: self.tangent / self.primal,
        }
    }

    pub fn sqrt(self) -> Self {
        let s = self.primal.sqrt();
        Dual {
            primal: s,
            tangent: self.tangent / (s * 2.0),
        }
    }

    #[inline]
    pub fn sigmoid(self) -> Self {
        let s = self.primal.sigmoid();
        // s' = s (1 - s)
        let ds = s - s.square();
        Dual {
            primal: s,
            tangent: self.tangent * ds,
        }
    }

    pub fn square(self) -> Self {
        Dual {
            primal: self.primal.square(),
            tangent: self.tangent * self.primal * 2.0,
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Dual {
            primal: self.primal + rhs.primal,
            tangent: self.tangent + rhs.tangent,
        }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Dual {
            primal: self.primal - rhs.primal,
            tangent: self.tangent - rhs.tangent,
        }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Dual {
            primal: self.primal * rhs.primal,
            tangent: self.primal * rhs.tangent + self.tangent * rhs.primal,
        }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.primal / rhs.primal;
        Dual {
            primal: q,
            tangent: (self.tangent - q * rhs.tangent) / rhs.primal,
        }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            primal: -self.primal,
            tangent: -self.tangent,
        }
    }
}
