//! Scalar abstraction shared by the solvers.
//!
//! Everything that has to run both in hardware double precision and in a
//! software float with a configurable significand is written against
//! [`Real`]. The two implementations are `f64` and [`Ext`].

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

/// Decimal digits carried by `f64`.
pub const F64_DIGITS: u32 = 15;

pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Converts `x` exactly, carrying (at least) `digits` decimal digits in
    /// subsequent arithmetic.
    fn from_f64(x: f64, digits: u32) -> Self;

    /// A constant with the same working precision as `self`.
    fn cast(&self, x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn sqrt(&self) -> Self;

    /// Natural logarithm, returned in double precision. Unlike
    /// `to_f64().ln()` this is finite for values below the `f64` range.
    fn ln(&self) -> f64;

    /// Unit roundoff of the working precision.
    fn epsilon(&self) -> f64;

    /// Working precision in decimal digits.
    fn digits(&self) -> u32;

    /// Decimal rendering with every carried digit; round-trips through
    /// [`Real::parse`] at the same precision.
    fn to_decimal(&self) -> String;

    fn parse(s: &str, digits: u32) -> Option<Self>;

    fn zero_like(&self) -> Self {
        self.cast(0.0)
    }

    fn one_like(&self) -> Self {
        self.cast(1.0)
    }

    fn is_zero(&self) -> bool {
        *self == self.zero_like()
    }

    fn abs(&self) -> Self {
        if *self < self.zero_like() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    fn powu(&self, mut n: u64) -> Self {
        let mut base = self.clone();
        let mut acc = self.one_like();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base.clone();
            }
            n >>= 1;
            if n > 0 {
                base = base.square();
            }
        }
        acc
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64, _digits: u32) -> Self {
        x
    }

    fn cast(&self, x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn ln(&self) -> f64 {
        f64::ln(*self)
    }

    fn epsilon(&self) -> f64 {
        f64::EPSILON
    }

    fn digits(&self) -> u32 {
        F64_DIGITS
    }

    fn to_decimal(&self) -> String {
        format_f64(*self)
    }

    fn parse(s: &str, _digits: u32) -> Option<Self> {
        s.trim().parse().ok()
    }
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

type Binary = FBig<HalfEven, 2>;

/// Software binary float with a runtime significand size.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Ext(Binary);

impl Ext {
    pub fn bits_for_digits(digits: u32) -> usize {
        // log2(10) = 3.3219...; eight guard bits
        (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as usize + 8
    }

    fn bits(&self) -> usize {
        self.0.precision()
    }

    fn wrap(&self, v: Binary) -> Ext {
        Ext(v)
    }
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ext({})", self.to_decimal())
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

macro_rules! ext_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr for Ext {
            type Output = Ext;
            fn $method(self, rhs: Ext) -> Ext {
                Ext(self.0 $op rhs.0)
            }
        }
    };
}

ext_binop!(Add, add, +);
ext_binop!(Sub, sub, -);
ext_binop!(Mul, mul, *);
ext_binop!(Div, div, /);

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext(-self.0)
    }
}

impl Real for Ext {
    fn from_f64(x: f64, digits: u32) -> Self {
        let bits = Ext::bits_for_digits(digits.max(F64_DIGITS));
        let v = Binary::try_from(x).expect("finite f64");
        Ext(v.with_precision(bits).value())
    }

    fn cast(&self, x: f64) -> Self {
        let v = Binary::try_from(x).expect("finite f64");
        self.wrap(v.with_precision(self.bits()).value())
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    fn sqrt(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        assert!(*self > self.zero_like(), "sqrt of negative value");
        Ext(self.0.sqrt())
    }

    fn ln(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        if *self < self.zero_like() {
            return f64::NAN;
        }
        self.0.ln().to_f64().value()
    }

    fn epsilon(&self) -> f64 {
        2f64.powi(1 - self.bits() as i32)
    }

    fn digits(&self) -> u32 {
        ((self.bits().saturating_sub(8)) as f64 / std::f64::consts::LOG2_10).floor() as u32
    }

    fn to_decimal(&self) -> String {
        let digits = self.digits().max(1) as usize;
        let dec = self.0.clone().with_base_and_precision::<10>(digits).value();
        format!("{dec}")
    }

    fn parse(s: &str, digits: u32) -> Option<Self> {
        let bits = Ext::bits_for_digits(digits.max(F64_DIGITS));
        let dec: dashu_float::DBig = s.trim().parse().ok()?;
        let prec_dec = (digits.max(F64_DIGITS) + 5) as usize;
        let dec = dec.with_precision(prec_dec).value();
        let bin = dec.with_base_and_precision::<2>(bits).value();
        Some(Ext(bin.with_rounding::<HalfEven>()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_formatting_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-81, 12.0, 3.330_190_676_6, 1e20, -7e-5] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_f64(1e-81), "1e-81");
        assert_eq!(format_f64(12.0), "12");
    }

    #[test]
    fn ext_carries_requested_digits() {
        let two = Ext::from_f64(2.0, 60);
        let r = two.sqrt();
        let back = r.clone() * r - two.clone();
        assert!(back.abs().to_f64() < 1e-58);
        assert!(two.epsilon() < 1e-59);
        assert!(two.digits() >= 60);
    }

    #[test]
    fn ext_reaches_below_f64_exponent_range_in_ln() {
        let g = Ext::from_f64(1e-3, 60);
        let tiny = g.powu(200);
        assert_eq!(tiny.to_f64(), 0.0);
        let expected = 200.0 * 1e-3f64.ln();
        assert!((tiny.ln() - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn ext_decimal_round_trip() {
        let x = Ext::from_f64(1.0, 60) / Ext::from_f64(3.0, 60);
        let s = x.to_decimal();
        assert!(s.starts_with("0.3333333333"), "{s}");
        let y = Ext::parse(&s, 60).unwrap();
        let diff = (x - y).abs();
        assert!(diff.to_f64() < 1e-58);
    }

    #[test]
    fn powu_matches_repeated_multiplication() {
        let g = 0.7f64;
        assert!((g.powu(27) - g.powi(27)).abs() < 1e-15);
        assert_eq!(g.powu(0), 1.0);
    }
}
