use std::fmt;

use crate::scalar::{clamp, max_of, min_of, Scalar};

/// Closed interval `[lo, hi]` with `lo <= hi`.
///
/// Houses every set-valued position and speed in the crate: the non-negative
/// speed neighbourhoods, the actuation-time estimator boxes and the one-step
/// predictions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T = f64> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    /// Returns `None` when `lo > hi` or either end is NaN.
    pub fn new(lo: T, hi: T) -> Option<Self> {
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    pub fn singleton(value: T) -> Self {
        Interval {
            lo: value,
            hi: value,
        }
    }

    /// `[center - radius, center + radius]`; a negative radius is treated as zero.
    pub fn around(center: T, radius: T) -> Self {
        let r = max_of(radius, T::zero());
        Interval {
            lo: center - r,
            hi: center + r,
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn center(&self) -> T {
        (self.lo + self.hi) * T::half()
    }

    pub fn contains(&self, value: T) -> bool {
        self.lo <= value && value <= self.hi
    }

    /// Containment with an absolute slack on both ends.
    pub fn contains_within(&self, value: T, tol: T) -> bool {
        self.lo - tol <= value && value <= self.hi + tol
    }

    pub fn is_subset_of(&self, other: &Interval<T>) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval<T>) -> Option<Self> {
        Interval::new(max_of(self.lo, other.lo), min_of(self.hi, other.hi))
    }

    /// Intersects with `[floor, ceil]`. When the intersection is empty the
    /// result collapses onto the nearest point of `[floor, ceil]`, so the
    /// returned interval is never empty.
    pub fn clip(&self, floor: T, ceil: T) -> Self {
        let lo = max_of(self.lo, floor);
        let hi = min_of(self.hi, ceil);
        if lo <= hi {
            Interval { lo, hi }
        } else {
            Interval::singleton(clamp(self.center(), floor, ceil))
        }
    }

    /// Nearest point of the interval to `value`.
    pub fn clamp(&self, value: T) -> T {
        clamp(value, self.lo, self.hi)
    }

    /// Minkowski sum.
    pub fn add(&self, other: &Interval<T>) -> Self {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }

    pub fn shift(&self, offset: T) -> Self {
        Interval {
            lo: self.lo + offset,
            hi: self.hi + offset,
        }
    }

    /// Scales by a non-negative factor.
    pub fn scale(&self, factor: T) -> Self {
        debug_assert!(factor >= T::zero());
        Interval {
            lo: self.lo * factor,
            hi: self.hi * factor,
        }
    }
}

impl<T: fmt::Display> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}
