//! Double-double arithmetic (~106-bit significand) for the finite-difference
//! oracle. Values are unevaluated sums `hi + lo` with `|lo| ≤ ulp(hi)/2`.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

const TAYLOR_TERMS: usize = 40;

fn reciprocals() -> &'static [DoubleDouble; TAYLOR_TERMS] {
    static TABLE: OnceLock<[DoubleDouble; TAYLOR_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [DoubleDouble::ZERO; TAYLOR_TERMS];
        for (n, v) in t.iter_mut().enumerate().skip(1) {
            *v = DoubleDouble::ONE / DoubleDouble::from_f64(n as f64);
        }
        t
    })
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
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

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    fn norm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Exact sum of two doubles.
    #[inline]
    pub fn sum_f64(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Self { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Multiplication by `2^k`, exact barring under/overflow.
    fn ldexp(self, k: i32) -> Self {
        let mut r = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let s = 2f64.powi(step);
            r = Self {
                hi: r.hi * s,
                lo: r.lo * s,
            };
            k -= step;
        }
        r
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.5 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Self::from_f64(k)).ldexp(-10);
        // Taylor series of e^r − 1, |r| < 3.4e-4
        let inv = reciprocals();
        let mut term = r;
        let mut s = r;
        for &inv_n in &inv[2..TAYLOR_TERMS] {
            term = term * r * inv_n;
            s = s + term;
            if term.hi.abs() <= 1e-36 * s.hi.abs() {
                break;
            }
        }
        // (1 + s)² − 1 = s (s + 2), applied ten times
        for _ in 0..10 {
            s = s * (s + Self::from_f64(2.0));
        }
        (s + Self::ONE).ldexp(k as i32)
    }

    /// Natural logarithm by two Newton steps on `exp`.
    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive value");
        let mut y = Self::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Self::ONE;
        }
        y
    }

    pub fn tanh(self) -> Self {
        let t = (self.abs() * Self::from_f64(-2.0)).exp();
        let r = (Self::ONE - t) / (Self::ONE + t);
        if self.hi < 0.0 {
            -r
        } else {
            r
        }
    }

    pub fn sigmoid(self) -> Self {
        if self.hi >= 0.0 {
            Self::ONE / (Self::ONE + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::ONE + e)
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::norm(s, e + f)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::norm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * Self::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Self::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::from_f64(q3)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}
