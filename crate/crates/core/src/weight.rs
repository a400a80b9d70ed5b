//! Edge-weight arithmetic.
//!
//! Every construction is generic over [`Weight`]. Two implementations ship:
//! plain `f64`, compared with a `1e-9` relative tolerance, and [`Exact`], an
//! overflow-checked rational used by the oracles and the certification tests
//! where comparisons must be exact.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Sub};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};

use crate::error::{Error, Result};

/// Relative tolerance used by the binary64 mode.
pub const F64_REL_TOL: f64 = 1e-9;

pub trait Weight:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    /// True when comparisons are exact (no tolerance).
    const EXACT: bool;

    fn zero() -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Parse a decimal literal such as `3`, `2.1` or `-0.25e1`.
    fn parse_decimal(text: &str) -> Result<Self>;
    /// Nearest representable value. Exact mode rounds to a multiple of `1e-6`.
    fn from_f64_approx(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Smallest integer `k` with `k >= self`, for nonnegative values.
    fn ceil_to_usize(&self) -> usize;

    fn one() -> Self {
        Self::from_ratio(1, 1)
    }

    fn from_usize(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }

    /// Total order used for heaps and sorting. Weights are never NaN.
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }

    /// `self <= bound`, within the mode's tolerance.
    fn le_tol(&self, bound: &Self) -> bool;

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    /// `(numerator, denominator)` for exact weights.
    fn exact_parts(&self) -> Option<(i128, i128)> {
        None
    }

    fn sum_iter<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        iter.into_iter().fold(Self::zero(), |acc, w| acc + w)
    }
}

impl Weight for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn parse_decimal(text: &str) -> Result<Self> {
        let x: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("invalid number `{text}`")))?;
        if !x.is_finite() {
            return Err(Error::Parse(format!("non-finite number `{text}`")));
        }
        Ok(x)
    }

    fn from_f64_approx(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ceil_to_usize(&self) -> usize {
        self.ceil().max(0.0) as usize
    }

    fn le_tol(&self, bound: &Self) -> bool {
        *self <= *bound + F64_REL_TOL * bound.abs().max(1.0)
    }
}

/// Exact rational weight backed by `Ratio<i128>`.
///
/// All operations are checked; overflow panics instead of wrapping, so an
/// exact-mode result is either correct or absent.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(Ratio<i128>);

impl Exact {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        Exact(Ratio::new(num, den))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Ratio<i128> {
        self.0
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}", self.to_f64())
        }
    }
}

macro_rules! checked_op {
    ($tr:ident, $method:ident, $checked:ident, $name:literal) => {
        impl $tr for Exact {
            type Output = Exact;
            fn $method(self, rhs: Exact) -> Exact {
                Exact(
                    self.0
                        .$checked(&rhs.0)
                        .unwrap_or_else(|| panic!(concat!("exact arithmetic overflow in ", $name))),
                )
            }
        }
    };
}

checked_op!(Add, add, checked_add, "add");
checked_op!(Sub, sub, checked_sub, "sub");
checked_op!(Mul, mul, checked_mul, "mul");
checked_op!(Div, div, checked_div, "div");

impl Sum for Exact {
    fn sum<I: Iterator<Item = Exact>>(iter: I) -> Exact {
        iter.fold(Exact::zero(), |a, b| a + b)
    }
}

impl Weight for Exact {
    const EXACT: bool = true;

    fn zero() -> Self {
        Exact(Ratio::zero())
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Exact::new(num as i128, den as i128)
    }

    fn parse_decimal(text: &str) -> Result<Self> {
        parse_decimal_ratio(text.trim())
            .map(Exact)
            .ok_or_else(|| Error::Parse(format!("invalid number `{text}`")))
    }

    fn from_f64_approx(x: f64) -> Self {
        const GRID: f64 = 1e6;
        Exact::new((x * GRID).round() as i128, GRID as i128)
    }

    fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    fn ceil_to_usize(&self) -> usize {
        let c = self.0.ceil();
        if c.is_negative() {
            0
        } else {
            c.to_integer() as usize
        }
    }

    fn le_tol(&self, bound: &Self) -> bool {
        self <= bound
    }

    fn exact_parts(&self) -> Option<(i128, i128)> {
        Some((self.numer(), self.denom()))
    }
}

/// Exact decimal parse: optional sign, digits, optional fraction, optional exponent.
fn parse_decimal_ratio(s: &str) -> Option<Ratio<i128>> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match body.find('.') {
        Some(i) => (&body[..i], &body[i + 1..]),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let scale = exp - frac_part.len() as i32;
    let ten = 10i128;
    let mut den: i128 = 1;
    if scale >= 0 {
        num = num.checked_mul(ten.checked_pow(scale as u32)?)?;
    } else {
        den = ten.checked_pow((-scale) as u32)?;
    }
    if neg {
        num = -num;
    }
    let g = num.gcd(&den);
    Some(Ratio::new_raw(num / g, den / g))
}
