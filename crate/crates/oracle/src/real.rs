//! Scalar abstraction so reference evaluators run in f64 or double-double.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::dd::DD;

pub trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn c(x: f64) -> Self;
    fn f(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn abs(self) -> Self;

    fn max(self, o: Self) -> Self {
        if self >= o {
            self
        } else {
            o
        }
    }

    fn min(self, o: Self) -> Self {
        if self <= o {
            self
        } else {
            o
        }
    }

    fn softplus(self) -> Self {
        let z = Self::c(0.0);
        self.max(z) + (-self.abs()).exp().ln_1p()
    }

    fn sigmoid(self) -> Self {
        Self::c(1.0) / (Self::c(1.0) + (-self).exp())
    }

    fn clip(self, lo: f64, hi: f64) -> Self {
        self.max(Self::c(lo)).min(Self::c(hi))
    }
}

impl Real for f64 {
    fn c(x: f64) -> Self {
        x
    }
    fn f(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl Real for DD {
    fn c(x: f64) -> Self {
        DD::new(x)
    }
    fn f(self) -> f64 {
        self.to_f64()
    }
    fn exp(self) -> Self {
        DD::exp(self)
    }
    fn ln(self) -> Self {
        DD::ln(self)
    }
    fn ln_1p(self) -> Self {
        DD::ln_1p(self)
    }
    fn sin(self) -> Self {
        DD::sin(self)
    }
    fn cos(self) -> Self {
        DD::cos(self)
    }
    fn tanh(self) -> Self {
        DD::tanh(self)
    }
    fn abs(self) -> Self {
        DD::abs(self)
    }
}
