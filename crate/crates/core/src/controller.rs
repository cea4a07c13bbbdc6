//! Robust speed coordination along one route.
//!
//! For a follower `i` behind leader `i-1` the controller scores a candidate
//! target speed `u` by the worst-case surplus gap one step after actuation,
//!
//! ```text
//! λ(u) = min X̃_{i-1}(t+θ+1) - max X̃_i(t+θ+1) - h u
//! ```
//!
//! which is affine and strictly decreasing in `u` with slope `-(δ/2 + h)`.
//! The command is the smallest-λ input that keeps `λ >= 0` over the feasible
//! interval `[u(t-1) - a_max δ + ε, u(t-1) + a_max δ - ε] ∩ [0, v_max]`.

use serde::{Deserialize, Serialize};

use crate::estimator::{estimate_at_actuation, predict_next, DelayedObservation};
use crate::interval::Interval;
use crate::params::ModelParams;
use crate::safety::{condition3, condition3_cap};
use crate::scalar::{max_of, Scalar};

/// Observed quantities of one follower/leader pair at a tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSnapshot<T = f64> {
    pub x_hat_f: T,
    pub x_hat_l: T,
    pub v_hat_f: T,
    pub v_hat_l: T,
    pub u_prev_f: T,
    pub u_prev_l: T,
    /// Leader's command for the current tick.
    pub u_now_l: T,
}

impl<T: Scalar> PairSnapshot<T> {
    pub fn from_observations(
        follower: &DelayedObservation<T>,
        leader: &DelayedObservation<T>,
        u_now_l: T,
    ) -> Self {
        PairSnapshot {
            x_hat_f: follower.x_hat,
            x_hat_l: leader.x_hat,
            v_hat_f: follower.v_hat,
            v_hat_l: leader.v_hat,
            u_prev_f: follower.u_prev,
            u_prev_l: leader.u_prev,
            u_now_l,
        }
    }

    pub fn follower_observation(&self) -> DelayedObservation<T> {
        DelayedObservation {
            x_hat: self.x_hat_f,
            v_hat: self.v_hat_f,
            u_prev: self.u_prev_f,
            tick: 0,
        }
    }

    pub fn leader_observation(&self) -> DelayedObservation<T> {
        DelayedObservation {
            x_hat: self.x_hat_l,
            v_hat: self.v_hat_l,
            u_prev: self.u_prev_l,
            tick: 0,
        }
    }
}

/// Left-hand side of a certificate inequality together with its verdict.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionValue<T = f64> {
    pub value: T,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecisionCase {
    /// Front vehicle of its route: no leader to respect.
    Unconstrained,
    /// Root of `λ(u) = 0` inside the feasible interval.
    Explicit,
    /// `λ > 0` across the whole feasible interval; the top of it minimizes `λ`.
    ClampedArgmin,
    /// Lowered further to satisfy the inductive step certificate.
    Capped,
    /// No feasible input keeps `λ >= 0`.
    Infeasible,
}

impl DecisionCase {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionCase::Unconstrained => "unconstrained",
            DecisionCase::Explicit => "explicit",
            DecisionCase::ClampedArgmin => "clamped_argmin",
            DecisionCase::Capped => "capped",
            DecisionCase::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlDecision<T = f64> {
    pub case: DecisionCase,
    /// Commanded target; `None` when infeasible.
    pub u: Option<T>,
    /// `λ` at `u`, or at the braking fallback when infeasible. `None` for
    /// the front vehicle.
    pub lambda_at_u: Option<T>,
    /// Theorem-style existence condition as printed, `None` for the front vehicle.
    pub cond1: Option<ConditionValue<T>>,
    /// Theorem-style tightness condition as printed, `None` for the front vehicle.
    pub cond2: Option<ConditionValue<T>>,
    pub feasible: Interval<T>,
}

impl<T: Scalar> ControlDecision<T> {
    /// The command actually sent: `u`, or maximal braking when infeasible.
    pub fn applied(&self) -> T {
        self.u.unwrap_or(self.feasible.lo())
    }
}

/// How follower commands are chosen along a route.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandPolicy {
    /// The three-case law alone.
    #[default]
    Paper,
    /// The three-case law, then lowered (never below the feasible floor) so
    /// the step certificate `condition3` holds.
    CertificateCapped,
}

pub fn feasible_input_interval<T: Scalar>(u_prev: T, p: &ModelParams<T>) -> Interval<T> {
    Interval::around(u_prev, p.reach() - p.epsilon()).clip(T::zero(), p.v_max())
}

/// `λ` in expanded closed form.
pub fn lambda<T: Scalar>(snap: &PairSnapshot<T>, u_cand: T, p: &ModelParams<T>) -> T {
    let s = snap;
    let (delta, theta, eps, h) = (p.delta(), p.theta(), p.epsilon(), p.h());
    theta * (s.v_hat_l - s.v_hat_f + s.u_prev_l - s.u_prev_f)
        - T::two() * delta * eps
        - T::two() * theta * eps
        + s.x_hat_l
        - s.x_hat_f
        + T::half() * delta * (s.u_prev_l - s.u_prev_f + s.u_now_l - u_cand)
        - h * u_cand
}

/// `λ` computed from the estimator's predicted boxes instead of the closed
/// form. Agrees with [`lambda`] whenever no speed interval is cut at `0` or
/// `v_max`; otherwise it is the larger (less conservative) of the two.
pub fn lambda_oracle<T: Scalar>(snap: &PairSnapshot<T>, u_cand: T, p: &ModelParams<T>) -> T {
    let leader = predict_next(
        &estimate_at_actuation(&snap.leader_observation(), p),
        snap.u_now_l,
        p,
    );
    let follower = predict_next(
        &estimate_at_actuation(&snap.follower_observation(), p),
        u_cand,
        p,
    );
    leader.pos.lo() - follower.pos.hi() - p.h() * u_cand
}

fn condition_affine_part<T: Scalar>(s: &PairSnapshot<T>, p: &ModelParams<T>) -> T {
    let (delta, theta, h) = (p.delta(), p.theta(), p.h());
    s.x_hat_f - s.x_hat_l + theta * (s.v_hat_f - s.v_hat_l) + (theta + delta + h) * s.u_prev_f
        - (theta + T::half() * delta) * s.u_prev_l
        - T::half() * delta * s.u_now_l
}

/// One-step existence condition; holds when the value is `<= 0`.
pub fn condition1<T: Scalar>(snap: &PairSnapshot<T>, p: &ModelParams<T>) -> ConditionValue<T> {
    let (delta, theta, eps, a, h) = (p.delta(), p.theta(), p.epsilon(), p.a_max(), p.h());
    let three_halves = T::from_int(3) * T::half();
    let value =
        condition_affine_part(snap, p) + T::two() * eps * theta + three_halves * delta * eps
            - T::half() * a * delta * delta
            - h * a * delta
            + h * eps;
    ConditionValue {
        value,
        holds: value <= T::zero(),
    }
}

/// One-step tightness condition; holds when the value is `>= 0`.
pub fn condition2<T: Scalar>(snap: &PairSnapshot<T>, p: &ModelParams<T>) -> ConditionValue<T> {
    let (delta, theta, eps, a, h) = (p.delta(), p.theta(), p.epsilon(), p.a_max(), p.h());
    let value = condition_affine_part(snap, p)
        + T::two() * eps * theta
        + T::half() * delta * eps
        + T::half() * a * delta * delta
        + h * a * delta
        - h * eps;
    ConditionValue {
        value,
        holds: value >= T::zero(),
    }
}

/// Unclamped root of the affine `λ`.
pub fn explicit_law<T: Scalar>(snap: &PairSnapshot<T>, p: &ModelParams<T>) -> T {
    let s = snap;
    let (delta, theta, eps, h) = (p.delta(), p.theta(), p.epsilon(), p.h());
    let numer = theta * (s.v_hat_l - s.v_hat_f + s.u_prev_l - s.u_prev_f)
        - T::two() * delta * eps
        - T::two() * theta * eps
        + s.x_hat_l
        - s.x_hat_f
        + T::half() * delta * (s.u_prev_l - s.u_prev_f + s.u_now_l);
    numer / (T::half() * delta + h)
}

/// The three-case law for one follower.
///
/// The branch is chosen from `λ` at the two ends of the feasible interval,
/// which is what conditions 1 and 2 characterize: `λ(lo) < 0` means no safe
/// input exists, `λ(hi) > 0` means every feasible input leaves surplus and the
/// largest one is taken, otherwise the root lies inside and is used. The
/// printed condition values are reported alongside.
pub fn decide<T: Scalar>(snap: &PairSnapshot<T>, p: &ModelParams<T>) -> ControlDecision<T> {
    let feasible = feasible_input_interval(snap.u_prev_f, p);
    let cond1 = Some(condition1(snap, p));
    let cond2 = Some(condition2(snap, p));

    let lambda_lo = lambda(snap, feasible.lo(), p);
    if lambda_lo < T::zero() {
        return ControlDecision {
            case: DecisionCase::Infeasible,
            u: None,
            lambda_at_u: Some(lambda_lo),
            cond1,
            cond2,
            feasible,
        };
    }
    let lambda_hi = lambda(snap, feasible.hi(), p);
    if lambda_hi > T::zero() {
        return ControlDecision {
            case: DecisionCase::ClampedArgmin,
            u: Some(feasible.hi()),
            lambda_at_u: Some(lambda_hi),
            cond1,
            cond2,
            feasible,
        };
    }
    // the root is bracketed, so clamping only absorbs rounding
    let u = feasible.clamp(explicit_law(snap, p));
    ControlDecision {
        case: DecisionCase::Explicit,
        u: Some(u),
        lambda_at_u: Some(lambda(snap, u, p)),
        cond1,
        cond2,
        feasible,
    }
}

/// Front vehicle: top speed, or as close to it as one step allows.
pub fn free_decision<T: Scalar>(u_prev: T, p: &ModelParams<T>) -> ControlDecision<T> {
    let feasible = feasible_input_interval(u_prev, p);
    ControlDecision {
        case: DecisionCase::Unconstrained,
        u: Some(feasible.hi()),
        lambda_at_u: None,
        cond1: None,
        cond2: None,
        feasible,
    }
}

/// Coordinates one route, front vehicle first, with the plain three-case law.
pub fn coordinate_route<T: Scalar>(
    vehicles: &[DelayedObservation<T>],
    p: &ModelParams<T>,
) -> Vec<ControlDecision<T>> {
    coordinate_route_with(vehicles, p, CommandPolicy::Paper)
}

/// Coordinates one route, front vehicle first. Each follower sees its
/// leader's command for this tick, including the braking fallback when the
/// leader was infeasible.
pub fn coordinate_route_with<T: Scalar>(
    vehicles: &[DelayedObservation<T>],
    p: &ModelParams<T>,
    policy: CommandPolicy,
) -> Vec<ControlDecision<T>> {
    let mut out: Vec<ControlDecision<T>> = Vec::with_capacity(vehicles.len());
    for (i, obs) in vehicles.iter().enumerate() {
        let decision = if i == 0 {
            free_decision(obs.u_prev, p)
        } else {
            let u_now_l = out[i - 1].applied();
            let snap = PairSnapshot::from_observations(obs, &vehicles[i - 1], u_now_l);
            let mut d = decide(&snap, p);
            if policy == CommandPolicy::CertificateCapped {
                if let Some(u) = d.u {
                    let floor = d.feasible.lo();
                    let mut capped = max_of(condition3_cap(snap.u_prev_f, u_now_l, p), floor);
                    // rounding can leave the cap a hair above the boundary
                    while capped > floor && !condition3(capped, snap.u_prev_f, u_now_l, p).holds {
                        capped = max_of(capped.step_down(), floor);
                    }
                    if capped < u {
                        d.case = DecisionCase::Capped;
                        d.u = Some(capped);
                        d.lambda_at_u = Some(lambda(&snap, capped, p));
                    }
                }
            }
            d
        };
        out.push(decision);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamRecord;
    use crate::scalar::{parse_exact, Exact};

    fn d(s: &str) -> Exact {
        parse_exact(s).unwrap()
    }

    fn p0() -> ModelParams<Exact> {
        ModelParams::validate(&ParamRecord {
            delta: d("0.1"),
            theta: d("0.02"),
            epsilon: d("0.05"),
            a_max: d("3"),
            v_max: d("15"),
            h: d("1"),
            h_bar: d("2"),
            big_l: d("300"),
            big_r: d("30"),
        })
        .unwrap()
    }

    /// Leader at `x_l`, follower at 30 m, everything else at 10 m/s.
    fn gap_snapshot(x_l: &str) -> PairSnapshot<Exact> {
        PairSnapshot {
            x_hat_f: d("30"),
            x_hat_l: d(x_l),
            v_hat_f: d("10"),
            v_hat_l: d("10"),
            u_prev_f: d("10"),
            u_prev_l: d("10"),
            u_now_l: d("10"),
        }
    }

    fn unit_params() -> ModelParams<Exact> {
        ModelParams::validate(&ParamRecord {
            delta: d("1"),
            theta: d("0"),
            epsilon: d("0"),
            a_max: d("3"),
            v_max: d("15"),
            h: d("1"),
            h_bar: d("2"),
            big_l: d("300"),
            big_r: d("30"),
        })
        .unwrap()
    }

    fn standstill_snapshot() -> PairSnapshot<Exact> {
        PairSnapshot {
            x_hat_f: d("0"),
            x_hat_l: d("10"),
            v_hat_f: d("0"),
            v_hat_l: d("0"),
            u_prev_f: d("0"),
            u_prev_l: d("0"),
            u_now_l: d("0"),
        }
    }

    #[test]
    fn feasible_interval_examples() {
        let p = p0();
        assert_eq!(
            feasible_input_interval(d("10"), &p),
            Interval::new(d("9.75"), d("10.25")).unwrap()
        );
        let boundary = p.with(|r| r.epsilon = d("0.3")).unwrap();
        assert_eq!(
            feasible_input_interval(d("10"), &boundary),
            Interval::singleton(d("10"))
        );
        assert_eq!(
            feasible_input_interval(d("0.1"), &p),
            Interval::new(d("0"), d("0.35")).unwrap()
        );
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda(&gap_snapshot("50"), d("10"), &p0()), d("9.988"));
        assert_eq!(
            lambda(&standstill_snapshot(), d("2"), &unit_params()),
            d("7")
        );
        let s = gap_snapshot("50");
        let p = p0();
        assert_eq!(
            lambda(&s, d("10"), &p) - lambda(&s, d("11"), &p),
            p.delta() / d("2") + p.h()
        );
    }

    #[test]
    fn oracle_agrees_on_examples() {
        assert_eq!(
            lambda_oracle(&gap_snapshot("50"), d("10"), &p0()),
            d("9.988")
        );
        assert_eq!(
            lambda_oracle(&standstill_snapshot(), d("2"), &unit_params()),
            d("7")
        );
    }

    #[test]
    fn condition_examples() {
        let p = p0();
        let c1 = condition1(&gap_snapshot("50"), &p);
        assert_eq!(c1.value, d("-10.2555"));
        assert!(c1.holds);
        let c1 = condition1(&gap_snapshot("30"), &p);
        assert_eq!(c1.value, d("9.7445"));
        assert!(!c1.holds);

        let c2 = condition2(&gap_snapshot("50"), &p);
        assert_eq!(c2.value, d("-9.7305"));
        assert!(!c2.holds);
        let c2 = condition2(&gap_snapshot("30"), &p);
        assert_eq!(c2.value, d("10.2695"));
        assert!(c2.holds);
    }

    #[test]
    fn condition1_relaxes_with_stronger_brakes() {
        let p = p0().with(|r| r.epsilon = d("0")).unwrap();
        let s = gap_snapshot("30");
        let mut prev = condition1(&s, &p).value;
        for a in ["4", "8", "16", "64", "256"] {
            let q = p.with(|r| r.a_max = d(a)).unwrap();
            let v = condition1(&s, &q).value;
            assert!(v < prev);
            prev = v;
        }
        assert!(prev <= d("0"));
    }

    #[test]
    fn condition_gap_is_constant() {
        let p = p0();
        let expected = -p.delta() * p.epsilon()
            + p.a_max() * p.delta() * p.delta()
            + d("2") * p.h() * p.a_max() * p.delta()
            - d("2") * p.h() * p.epsilon();
        for x_l in ["30", "40.3", "50", "-12.125"] {
            let s = gap_snapshot(x_l);
            assert_eq!(
                condition2(&s, &p).value - condition1(&s, &p).value,
                expected
            );
        }
    }

    #[test]
    fn explicit_law_examples() {
        assert_eq!(
            explicit_law(&standstill_snapshot(), &unit_params()),
            d("10") / d("1.5")
        );
        let s = gap_snapshot("50");
        let p = p0();
        let u = explicit_law(&s, &p);
        assert_eq!(u, d("20.488") / d("1.05"));
        assert_eq!(lambda(&s, u, &p), d("0"));
    }

    #[test]
    fn decide_accelerates_into_large_gap() {
        let dec = decide(&gap_snapshot("50"), &p0());
        assert_eq!(dec.case, DecisionCase::ClampedArgmin);
        assert_eq!(dec.u, Some(d("10.25")));
        assert_eq!(dec.lambda_at_u, Some(d("9.7255")));
        assert!(dec.cond1.unwrap().holds);
        assert!(!dec.cond2.unwrap().holds);
    }

    #[test]
    fn decide_refuses_zero_gap() {
        let dec = decide(&gap_snapshot("30"), &p0());
        assert_eq!(dec.case, DecisionCase::Infeasible);
        assert_eq!(dec.u, None);
        assert_eq!(dec.applied(), d("9.75"));
        assert!(!dec.cond1.unwrap().holds);
    }

    #[test]
    fn decide_near_minimum_gap() {
        // 10.3 m: the root 10.788/1.05 lies above the feasible top 10.25
        let s = gap_snapshot("40.3");
        let p = p0();
        assert_eq!(condition1(&s, &p).value, d("-0.5555"));
        assert_eq!(condition2(&s, &p).value, d("-0.0305"));
        let dec = decide(&s, &p);
        assert_eq!(dec.case, DecisionCase::ClampedArgmin);
        assert_eq!(dec.u, Some(d("10.25")));
        assert_eq!(dec.lambda_at_u, Some(d("0.0255")));

        // 10 m: both conditions hold and the root 10.488/1.05 is feasible
        let s = gap_snapshot("40");
        assert!(condition1(&s, &p).holds && condition2(&s, &p).holds);
        let dec = decide(&s, &p);
        assert_eq!(dec.case, DecisionCase::Explicit);
        assert_eq!(dec.u, Some(d("10.488") / d("1.05")));
        assert_eq!(dec.lambda_at_u, Some(d("0")));
    }

    #[test]
    fn printed_condition1_band_is_infeasible() {
        // condition 1 holds at value -0.002, but lambda at the floor is -0.003
        let p = p0();
        let s = gap_snapshot("39.7465");
        let c1 = condition1(&s, &p);
        assert_eq!(c1.value, d("-0.002"));
        assert!(c1.holds);
        let lam_floor = lambda(&s, feasible_input_interval(s.u_prev_f, &p).lo(), &p);
        assert_eq!(lam_floor, -c1.value - p.delta() * p.epsilon());
        assert_eq!(decide(&s, &p).case, DecisionCase::Infeasible);
    }

    fn route_obs(x: &str, v: &str, u: &str) -> DelayedObservation<Exact> {
        DelayedObservation {
            x_hat: d(x),
            v_hat: d(v),
            u_prev: d(u),
            tick: 0,
        }
    }

    #[test]
    fn coordinate_single_vehicle() {
        let p = p0();
        let out = coordinate_route(&[route_obs("0", "15", "15")], &p);
        assert_eq!(out[0].u, Some(d("15")));
        assert_eq!(out[0].case, DecisionCase::Unconstrained);
        let out = coordinate_route(&[route_obs("0", "10", "10")], &p);
        assert_eq!(out[0].u, Some(d("10.25")));
    }

    #[test]
    fn coordinate_chains_leader_command() {
        let p = p0();
        let out = coordinate_route(
            &[route_obs("50", "10", "10"), route_obs("30", "10", "10")],
            &p,
        );
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].u, Some(d("10.25")));
        assert_eq!(out[1].case, DecisionCase::ClampedArgmin);
        assert_eq!(out[1].u, Some(d("10.25")));
    }

    #[test]
    fn infeasible_leader_passes_braking_downstream() {
        let p = p0();
        let vehicles = [
            route_obs("60", "10", "10"),
            route_obs("55", "10", "10"),
            route_obs("20", "10", "10"),
        ];
        let out = coordinate_route(&vehicles, &p);
        assert_eq!(out[1].case, DecisionCase::Infeasible);
        // third vehicle sees the braking command 9.75, not a missing value
        let snap = PairSnapshot::from_observations(&vehicles[2], &vehicles[1], d("9.75"));
        assert_eq!(out[2], decide(&snap, &p));
    }

    #[test]
    fn capped_policy_respects_step_certificate() {
        let p = p0();
        // slower leader, wide gap: the law alone would accelerate to 10.25
        let vehicles = [route_obs("50", "8", "8"), route_obs("30", "10", "10")];
        assert_eq!(coordinate_route(&vehicles, &p)[1].u, Some(d("10.25")));
        let out = coordinate_route_with(&vehicles, &p, CommandPolicy::CertificateCapped);
        assert_eq!(out[1].case, DecisionCase::Capped);
        let u = out[1].u.unwrap();
        assert!(u >= out[1].feasible.lo());
        let c3 = crate::safety::condition3(u, d("10"), out[0].applied(), &p);
        assert!(c3.holds);
        assert_eq!(c3.value, d("0"));
    }
}
