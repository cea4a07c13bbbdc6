//! Model parameters and the regime checks the control derivations rely on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Unvalidated parameter record, as read from a scenario file. SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord<T = f64> {
    /// Step length, s.
    pub delta: T,
    /// One-way communication latency, s.
    pub theta: T,
    /// Half-width of the speed-tracking uncertainty, m/s.
    pub epsilon: T,
    /// Acceleration / deceleration bound, m/s².
    pub a_max: T,
    /// Speed ceiling, m/s.
    pub v_max: T,
    /// Same-route time headway, s.
    pub h: T,
    /// Cross-route time headway, s.
    pub h_bar: T,
    /// Radius of the coordinated neighbourhood, m.
    pub big_l: T,
    /// Radius of the interference region around the conflict point, m.
    pub big_r: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("invalid parameter `{field}`: requires {constraint}")]
pub struct InvalidParam {
    pub field: &'static str,
    pub constraint: &'static str,
}

/// Validated parameters. Only obtainable through [`ModelParams::validate`],
/// so holders may assume every invariant below.
///
/// * `delta > 0`, `0 <= theta < delta`
/// * `0 <= epsilon <= a_max * delta`
/// * `a_max > 0`, `v_max > 0`, `h > 0`, `h_bar >= h`, `big_l > big_r > 0`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T = f64> {
    rec: ParamRecord<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn validate(raw: &ParamRecord<T>) -> Result<Self, InvalidParam> {
        let r = raw;
        let fields = [
            ("delta", r.delta),
            ("theta", r.theta),
            ("epsilon", r.epsilon),
            ("a_max", r.a_max),
            ("v_max", r.v_max),
            ("h", r.h),
            ("h_bar", r.h_bar),
            ("big_l", r.big_l),
            ("big_r", r.big_r),
        ];
        for (field, value) in fields {
            if !value.is_finite_value() {
                return Err(InvalidParam {
                    field,
                    constraint: "a finite value",
                });
            }
        }
        let zero = T::zero();
        let checks = [
            (r.delta > zero, "delta", "delta > 0"),
            (r.theta >= zero, "theta", "theta >= 0"),
            (r.theta < r.delta, "theta", "theta < delta"),
            (r.epsilon >= zero, "epsilon", "epsilon >= 0"),
            (r.a_max > zero, "a_max", "a_max > 0"),
            (
                r.epsilon <= r.a_max * r.delta,
                "epsilon",
                "epsilon <= a_max * delta",
            ),
            (r.v_max > zero, "v_max", "v_max > 0"),
            (r.h > zero, "h", "h > 0"),
            (r.h_bar >= r.h, "h_bar", "h_bar >= h"),
            (r.big_r > zero, "big_r", "big_r > 0"),
            (r.big_l > r.big_r, "big_l", "big_l > big_r"),
        ];
        for (ok, field, constraint) in checks {
            if !ok {
                return Err(InvalidParam { field, constraint });
            }
        }
        Ok(ModelParams { rec: *raw })
    }

    pub fn record(&self) -> &ParamRecord<T> {
        &self.rec
    }

    pub fn delta(&self) -> T {
        self.rec.delta
    }

    pub fn theta(&self) -> T {
        self.rec.theta
    }

    pub fn epsilon(&self) -> T {
        self.rec.epsilon
    }

    pub fn a_max(&self) -> T {
        self.rec.a_max
    }

    pub fn v_max(&self) -> T {
        self.rec.v_max
    }

    pub fn h(&self) -> T {
        self.rec.h
    }

    pub fn h_bar(&self) -> T {
        self.rec.h_bar
    }

    pub fn big_l(&self) -> T {
        self.rec.big_l
    }

    pub fn big_r(&self) -> T {
        self.rec.big_r
    }

    /// Largest speed change per step, `a_max * delta`.
    pub fn reach(&self) -> T {
        self.rec.a_max * self.rec.delta
    }

    /// Slack left in the per-step speed change once the tracking uncertainty
    /// is paid for on both sides: `h (a_max delta - epsilon) + (a_max - epsilon/delta) delta² / 2`.
    /// Non-negative for every validated parameter set.
    pub fn regulation_margin(&self) -> T {
        let r = &self.rec;
        r.h * (self.reach() - r.epsilon)
            + T::half() * (r.a_max - r.epsilon / r.delta) * r.delta * r.delta
    }

    /// Returns a copy with a subset of fields replaced, re-validated.
    pub fn with(&self, edit: impl FnOnce(&mut ParamRecord<T>)) -> Result<Self, InvalidParam> {
        let mut rec = self.rec;
        edit(&mut rec);
        ModelParams::validate(&rec)
    }
}

impl ParamRecord<f64> {
    /// Reference parameter set used throughout the docs and tests.
    pub const REFERENCE: ParamRecord<f64> = ParamRecord {
        delta: 0.1,
        theta: 0.02,
        epsilon: 0.05,
        a_max: 3.0,
        v_max: 15.0,
        h: 1.0,
        h_bar: 2.0,
        big_l: 300.0,
        big_r: 30.0,
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ParamRecord {
        ParamRecord::REFERENCE
    }

    #[test]
    fn reference_set_is_valid() {
        let p = ModelParams::validate(&reference()).unwrap();
        assert_eq!(p.delta(), 0.1);
        assert_eq!(p.big_r(), 30.0);
    }

    #[test]
    fn rejects_uncertainty_beyond_regulation() {
        let mut r = reference();
        r.epsilon = 0.5;
        let err = ModelParams::validate(&r).unwrap_err();
        assert_eq!(err.field, "epsilon");
        assert_eq!(err.constraint, "epsilon <= a_max * delta");
    }

    #[test]
    fn rejects_latency_equal_to_step() {
        let mut r = reference();
        r.theta = 0.1;
        let err = ModelParams::validate(&r).unwrap_err();
        assert_eq!(err.constraint, "theta < delta");
    }

    #[test]
    fn admits_boundary_cases() {
        let mut r = reference();
        r.theta = 0.0;
        r.epsilon = r.a_max * r.delta;
        let p = ModelParams::validate(&r).unwrap();
        assert!(p.regulation_margin() >= -1e-12);
    }

    #[test]
    fn reports_first_violation_in_field_order() {
        let mut r = reference();
        r.h = 0.0;
        r.big_r = -1.0;
        assert_eq!(ModelParams::validate(&r).unwrap_err().field, "h");
    }

    #[test]
    fn rejects_non_finite() {
        let mut r = reference();
        r.v_max = f64::INFINITY;
        let err = ModelParams::validate(&r).unwrap_err();
        assert_eq!(err.field, "v_max");
        r.v_max = f64::NAN;
        assert!(ModelParams::validate(&r).is_err());
    }

    #[test]
    fn cross_route_headway_may_not_undercut() {
        let mut r = reference();
        r.h_bar = 0.5;
        assert_eq!(ModelParams::validate(&r).unwrap_err().field, "h_bar");
        let mut r = reference();
        r.big_l = 20.0;
        assert_eq!(ModelParams::validate(&r).unwrap_err().field, "big_l");
    }

    #[test]
    fn validation_is_idempotent() {
        let p = ModelParams::validate(&reference()).unwrap();
        assert_eq!(ModelParams::validate(p.record()).unwrap(), p);
    }
}
