//! Double-double arithmetic (about 106 bits of significand).
//!
//! Used to take finite differences whose roundoff is far below the f64
//! gradient under test.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DD {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

pub const PI: DD = DD {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};
pub const FRAC_PI_2: DD = DD {
    hi: std::f64::consts::FRAC_PI_2,
    lo: 6.123_233_995_736_766e-17,
};
pub const LN_2: DD = DD {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl DD {
    pub const ZERO: DD = DD { hi: 0.0, lo: 0.0 };
    pub const ONE: DD = DD { hi: 1.0, lo: 0.0 };

    pub const fn new(x: f64) -> DD {
        DD { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> DD {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> DD {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        DD { hi, lo }
    }

    pub fn sqr(self) -> DD {
        self * self
    }

    pub fn powi(self, n: u32) -> DD {
        let mut r = DD::ONE;
        for _ in 0..n {
            r = r * self;
        }
        r
    }

    pub fn sqrt(self) -> DD {
        if self.hi <= 0.0 {
            return DD::ZERO;
        }
        let y = DD::new(self.hi.sqrt());
        // One Newton step doubles the correct bits.
        y + (self - y * y) / (y.mul_f64(2.0))
    }

    pub fn exp(self) -> DD {
        if self.hi > 709.0 {
            return DD::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return DD::ZERO;
        }
        let k = (self.hi / LN_2.hi).round();
        let r = self - LN_2.mul_f64(k);
        let r = r.mul_f64(1.0 / 1024.0);
        // Taylor series of exp(r) − 1 for |r| < 4e-4.
        let mut term = r;
        let mut sum = r;
        for n in 2..=14 {
            term = (term * r) / DD::new(n as f64);
            sum = sum + term;
        }
        // (1 + s)² − 1 = 2s + s², applied ten times.
        for _ in 0..10 {
            sum = sum.mul_f64(2.0) + sum * sum;
        }
        let e = sum + DD::ONE;
        e.mul_f64(2f64.powi(k as i32))
    }

    pub fn ln(self) -> DD {
        let mut y = DD::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - DD::ONE;
        }
        y
    }

    /// ln(1 + x), accurate for small x.
    pub fn ln_1p(self) -> DD {
        if self.hi.abs() > 1e-3 {
            return (DD::ONE + self).ln();
        }
        // Series x − x²/2 + x³/3 − …
        let mut term = self;
        let mut sum = self;
        for n in 2..=30 {
            term = -(term * self);
            sum = sum + term / DD::new(n as f64);
        }
        sum
    }

    fn sin_cos_reduced(r: DD) -> (DD, DD) {
        let r2 = r * r;
        let mut s = r;
        let mut c = DD::ONE;
        let mut ts = r;
        let mut tc = DD::ONE;
        for k in 1..=14 {
            let k = k as f64;
            ts = -(ts * r2) / DD::new((2.0 * k) * (2.0 * k + 1.0));
            tc = -(tc * r2) / DD::new((2.0 * k - 1.0) * (2.0 * k));
            s = s + ts;
            c = c + tc;
        }
        (s, c)
    }

    pub fn sin_cos(self) -> (DD, DD) {
        let k = (self.hi / FRAC_PI_2.hi).round();
        let r = self - FRAC_PI_2.mul_f64(k);
        let (s, c) = DD::sin_cos_reduced(r);
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    pub fn sin(self) -> DD {
        self.sin_cos().0
    }

    pub fn cos(self) -> DD {
        self.sin_cos().1
    }

    pub fn tanh(self) -> DD {
        if self.hi.abs() > 40.0 {
            return DD::new(self.hi.signum());
        }
        let e = self.abs().mul_f64(2.0).exp();
        let t = (e - DD::ONE) / (e + DD::ONE);
        if self.hi < 0.0 {
            -t
        } else {
            t
        }
    }

    pub fn max(self, other: DD) -> DD {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: DD) -> DD {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl From<f64> for DD {
    fn from(x: f64) -> DD {
        DD::new(x)
    }
}

impl PartialOrd for DD {
    fn partial_cmp(&self, other: &DD) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, b: DD) -> DD {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DD { hi, lo }
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, b: DD) -> DD {
        self + (-b)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, b: DD) -> DD {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DD { hi, lo }
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, b: DD) -> DD {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD { hi, lo } + DD::new(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: DD, hi: f64, lo: f64, tol: f64) -> bool {
        let d = (a - DD { hi, lo }).to_f64().abs();
        d <= tol * hi.abs().max(1e-300)
    }

    // Reference values computed with 50-digit arithmetic and split into hi/lo.
    #[test]
    fn exp_of_one() {
        assert!(close(
            DD::ONE.exp(),
            std::f64::consts::E,
            1.445_646_891_729_250_2e-16,
            1e-30
        ));
    }

    #[test]
    fn ln_inverts_exp() {
        for x in [-3.7, -0.2, 0.001, 1.0, 5.5, 40.0] {
            let y = DD::new(x).exp().ln();
            assert!((y - DD::new(x)).to_f64().abs() < 1e-29 * x.abs().max(1.0), "{x}");
        }
    }

    #[test]
    fn pythagorean_identity() {
        for x in [-20.0, -3.0, -0.7, 0.0, 0.3, 1.57, 2.0, 9.0, 31.0] {
            let (s, c) = DD::new(x).sin_cos();
            let one = s * s + c * c;
            assert!((one - DD::ONE).to_f64().abs() < 1e-30, "{x}");
            assert!((s.to_f64() - x.sin()).abs() < 1e-15);
            assert!((c.to_f64() - x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn sin_of_pi_is_tiny() {
        // sin(fl(π)) equals the representation error of π.
        let s = DD::new(PI.hi).sin().to_f64();
        assert!((s - 1.224_646_799_147_353_2e-16).abs() < 1e-31);
    }

    #[test]
    fn tanh_matches_identity() {
        for x in [-5.0, -0.5, 1e-9, 0.25, 3.0] {
            let t = DD::new(x).tanh();
            // tanh(x) = 1 − 2/(e^{2x}+1)
            let e = DD::new(2.0 * x).exp();
            let alt = DD::ONE - DD::new(2.0) / (e + DD::ONE);
            assert!((t - alt).to_f64().abs() < 1e-30, "{x}");
            assert!((t.to_f64() - x.tanh()).abs() < 1e-16);
        }
    }

    #[test]
    fn division_roundtrip() {
        let a = DD::new(1.0) / DD::new(3.0);
        assert!((a.mul_f64(3.0) - DD::ONE).to_f64().abs() < 1e-31);
        let s = DD::new(2.0).sqrt();
        assert!((s * s - DD::new(2.0)).to_f64().abs() < 1e-30);
    }
}
