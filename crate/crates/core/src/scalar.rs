//! Numeric abstraction shared by the closed-form parts of the crate.
//!
//! Every formula in [`crate::estimator`], [`crate::controller`],
//! [`crate::safety`] and [`crate::capacity`] is written once against
//! [`Scalar`] and evaluated either in `f64` (the simulator) or in exact
//! rational arithmetic ([`Exact`]) for identity checks that must hold without
//! rounding.

use std::fmt::Debug;
use std::ops::Neg;

use num_rational::Ratio;
use num_traits::{Num, Zero};

/// Exact rational scalar. Decimal inputs with a handful of digits stay well
/// inside `i128` through every expression in this crate.
pub type Exact = Ratio<i128>;

pub trait Scalar: Copy + PartialOrd + Debug + Num + Neg<Output = Self> {
    fn from_int(n: i64) -> Self;

    fn is_finite_value(self) -> bool;

    fn to_f64(self) -> f64;

    /// Largest representable value below `self`; the identity where
    /// arithmetic is exact.
    fn step_down(self) -> Self;

    fn two() -> Self {
        Self::from_int(2)
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn is_finite_value(self) -> bool {
        self.is_finite()
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn step_down(self) -> Self {
        self.next_down()
    }
}

impl Scalar for Exact {
    fn from_int(n: i64) -> Self {
        Ratio::from_integer(i128::from(n))
    }

    fn is_finite_value(self) -> bool {
        true
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }

    fn step_down(self) -> Self {
        self
    }
}

pub fn min_of<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

pub fn max_of<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Clamps `x` into `[lo, hi]`; `lo <= hi` is the caller's responsibility.
pub fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    min_of(max_of(x, lo), hi)
}

/// Parses a plain decimal literal such as `"-0.05"` or `"15"` into an exact
/// rational. Exponent notation is not accepted.
pub fn parse_exact(s: &str) -> Option<Exact> {
    let s = s.trim();
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer
            .checked_mul(10)?
            .checked_add(i128::from(c as u8 - b'0'))?;
    }
    let denom = 10i128.checked_pow(u32::try_from(frac_part.len()).ok()?)?;
    let value = Ratio::new(numer, denom);
    Some(if negative && !value.is_zero() {
        -value
    } else {
        value
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_exact("0.05"), Some(Ratio::new(1, 20)));
        assert_eq!(parse_exact("-1.5"), Some(Ratio::new(-3, 2)));
        assert_eq!(parse_exact("15"), Some(Ratio::from_integer(15)));
        assert_eq!(parse_exact(".5"), Some(Ratio::new(1, 2)));
        assert_eq!(parse_exact("1e3"), None);
        assert_eq!(parse_exact(""), None);
        assert_eq!(parse_exact("-"), None);
    }

    #[test]
    fn half_is_exact_for_rationals() {
        assert_eq!(Exact::half() * Exact::two(), Exact::from_int(1));
        assert_eq!(f64::half(), 0.5);
    }

    #[test]
    fn clamp_orders() {
        assert_eq!(clamp(5.0, 0.0, 3.0), 3.0);
        assert_eq!(clamp(-1.0, 0.0, 3.0), 0.0);
        assert_eq!(clamp(1.0, 0.0, 3.0), 1.0);
    }
}
