//! Exact rational numbers with overflow-checked arithmetic.
//!
//! Values are kept in lowest terms with a positive denominator. Every
//! arithmetic operation is checked: an overflow of the 128-bit carrier
//! panics instead of silently producing a wrong value.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational string")]
    Empty,
    #[error("invalid integer in rational string {0:?}")]
    InvalidInteger(String),
    #[error("zero denominator in rational string {0:?}")]
    ZeroDenominator(String),
}

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    /// Builds `num/den` in lowest terms. Panics when `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "rational with zero denominator");
        Rational(Ratio::new(num, den))
    }

    pub fn from_int(n: i64) -> Self {
        Rational(Ratio::from_integer(n as i128))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Best rational approximation of `x` with denominator at most `max_den`,
    /// taken from the continued-fraction convergents and semiconvergents.
    pub fn approximate(x: f64, max_den: u64) -> Option<Self> {
        if !x.is_finite() || max_den == 0 {
            return None;
        }
        let max_den = max_den as i128;
        let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
        let mut rest = x;
        for _ in 0..64 {
            let a = rest.floor();
            if a.abs() > 1e18 {
                break;
            }
            let a = a as i128;
            let q2 = a.checked_mul(q1)?.checked_add(q0)?;
            if q2 > max_den {
                let k = (max_den - q0) / q1;
                let (ps, qs) = (k * p1 + p0, k * q1 + q0);
                let semi = Rational::new(ps, qs);
                let conv = Rational::new(p1, q1);
                let better = if (semi.to_f64() - x).abs() < (conv.to_f64() - x).abs() {
                    semi
                } else {
                    conv
                };
                return Some(better);
            }
            let p2 = a.checked_mul(p1)?.checked_add(p0)?;
            p0 = p1;
            q0 = q1;
            p1 = p2;
            q1 = q2;
            let frac = rest - rest.floor();
            if frac.abs() < 1e-15 {
                break;
            }
            rest = 1.0 / frac;
        }
        if q1 == 0 {
            return None;
        }
        Some(Rational::new(p1, q1))
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::ZERO
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let parse_int = |part: &str| {
            part.trim()
                .parse::<i128>()
                .map_err(|_| ParseRationalError::InvalidInteger(s.to_string()))
        };
        match t.split_once('/') {
            None => Ok(Rational::new(parse_int(t)?, 1)),
            Some((p, q)) => {
                let num = parse_int(p)?;
                let den = parse_int(q)?;
                if den == 0 {
                    return Err(ParseRationalError::ZeroDenominator(s.to_string()));
                }
                Ok(Rational::new(num, den))
            }
        }
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(
            self.0
                .checked_add(&rhs.0)
                .expect("rational overflow in addition"),
        )
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        Rational(
            self.0
                .checked_sub(&rhs.0)
                .expect("rational overflow in subtraction"),
        )
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational(
            self.0
                .checked_mul(&rhs.0)
                .expect("rational overflow in multiplication"),
        )
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        assert!(!rhs.is_zero(), "rational division by zero");
        Rational(
            self.0
                .checked_div(&rhs.0)
                .expect("rational overflow in division"),
        )
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        *self = *self - rhs;
    }
}

impl MulAssign for Rational {
    fn mul_assign(&mut self, rhs: Rational) {
        *self = *self * rhs;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |a, b| a + b)
    }
}

/// Scalar field abstraction shared by the exact and floating-point paths.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
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
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(q: Rational) -> Self;
    fn to_f64(&self) -> f64;
    /// Absolute value as a float, used for residual norms.
    fn magnitude(&self) -> f64;
    fn absolute(&self) -> Self;
    /// Exact zero for rationals; below the algebraic tolerance for floats.
    fn is_negligible(&self) -> bool;
}

/// Absolute tolerance for algebraic identities on the floating-point path.
pub const TAU_ALG: f64 = 1e-10;

/// Relative tolerance for finite-difference checks.
pub const TAU_GEO: f64 = 1e-6;

impl Scalar for Rational {
    fn zero() -> Self {
        Rational::ZERO
    }
    fn one() -> Self {
        Rational::ONE
    }
    fn from_rational(q: Rational) -> Self {
        q
    }
    fn to_f64(&self) -> f64 {
        Rational::to_f64(self)
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64()
    }
    fn absolute(&self) -> Self {
        self.abs()
    }
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(q: Rational) -> Self {
        q.to_f64()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn absolute(&self) -> Self {
        self.abs()
    }
    fn is_negligible(&self) -> bool {
        self.abs() < TAU_ALG
    }
}

/// Maximum absolute component of a slice.
pub fn max_abs<T: Scalar>(values: &[T]) -> f64 {
    values.iter().map(|v| v.magnitude()).fold(0.0, f64::max)
}

/// Exact maximum absolute component of a rational slice.
pub fn max_abs_exact(values: &[Rational]) -> Rational {
    values
        .iter()
        .map(|v| v.abs())
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        .unwrap_or(Rational::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_terms_and_sign() {
        let q = Rational::new(6, -4);
        assert_eq!(q.numer(), -3);
        assert_eq!(q.denom(), 2);
        assert_eq!(q.to_string(), "-3/2");
    }

    #[test]
    fn parse_forms() {
        assert_eq!("7".parse::<Rational>().unwrap(), Rational::from_int(7));
        assert_eq!("-1/3".parse::<Rational>().unwrap(), Rational::new(-1, 3));
        assert_eq!("2/4".parse::<Rational>().unwrap(), Rational::new(1, 2));
        assert!(matches!(
            "1/0".parse::<Rational>(),
            Err(ParseRationalError::ZeroDenominator(_))
        ));
        assert!("x".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
    }

    #[test]
    fn approximate_recovers_small_fractions() {
        assert_eq!(
            Rational::approximate(-1.0 / 3.0 + 1e-14, 12),
            Some(Rational::new(-1, 3))
        );
        assert_eq!(Rational::approximate(0.5, 12), Some(Rational::new(1, 2)));
        assert_eq!(Rational::approximate(2.0, 12), Some(Rational::from_int(2)));
        assert_eq!(
            Rational::approximate(std::f64::consts::PI, 10),
            Some(Rational::new(22, 7))
        );
        assert_eq!(Rational::approximate(f64::NAN, 10), None);
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_panics() {
        let big = Rational::new(i128::MAX / 2, 1);
        let _ = big * big;
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small() -> impl Strategy<Value = Rational> {
            (-50i128..50, 1i128..20).prop_map(|(p, q)| Rational::new(p, q))
        }

        proptest! {
            #[test]
            fn display_parse_round_trip(q in small()) {
                prop_assert_eq!(q.to_string().parse::<Rational>().unwrap(), q);
            }

            #[test]
            fn field_axioms(a in small(), b in small(), c in small()) {
                prop_assert_eq!((a + b) * c, a * c + b * c);
                prop_assert_eq!(a - a, Rational::ZERO);
                if !b.is_zero() {
                    prop_assert_eq!(a / b * b, a);
                }
            }

            #[test]
            fn approximation_exact_for_representable(a in small()) {
                prop_assert_eq!(Rational::approximate(a.to_f64(), 20), Some(a));
            }
        }
    }
}
