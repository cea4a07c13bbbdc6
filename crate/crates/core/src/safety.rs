//! Headway constraints on ground truth, the inductive step certificates and
//! trace auditing.

use std::fmt;

use crate::controller::{condition1, condition2, ConditionValue, PairSnapshot};
use crate::dynamics::{Route, VehicleRecord};
use crate::estimator::DelayedObservation;
use crate::params::ModelParams;
use crate::scalar::Scalar;
use crate::trace::TraceRow;

/// Absolute slack, in metres, below which a headway shortfall is treated as
/// rounding rather than a violation.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    SameRoute,
    CrossRoute,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::SameRoute => "same_route",
            ViolationKind::CrossRoute => "cross_route",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyViolation {
    pub tick: u64,
    /// (follower's route, leader's route)
    pub route_pair: (Route, Route),
    pub follower_id: u32,
    pub leader_id: u32,
    pub gap: f64,
    pub required: f64,
    pub kind: ViolationKind,
}

/// `x_lead - x_follow >= H v_follow`, with `H = h` on a shared route and
/// `H = h_bar` across routes inside the interference region. Cross-route
/// pairs outside the region always pass.
pub fn headway_ok<T: Scalar>(
    x_lead: T,
    x_follow: T,
    v_follow: T,
    same_route: bool,
    both_in_interference: bool,
    p: &ModelParams<T>,
) -> bool {
    let headway = if same_route {
        p.h()
    } else if both_in_interference {
        p.h_bar()
    } else {
        return true;
    };
    x_lead - x_follow >= headway * v_follow
}

fn step_affine_part<T: Scalar>(u_f_now: T, u_f_prev: T, u_l_now: T, p: &ModelParams<T>) -> T {
    let (delta, h) = (p.delta(), p.h());
    let three_halves = T::from_int(3) * T::half();
    (three_halves * delta + h) * u_f_now - (T::half() * delta + h) * u_f_prev - delta * u_l_now
}

/// Step certificate for the existence part; holds when `<= 0`.
pub fn condition3<T: Scalar>(
    u_f_now: T,
    u_f_prev: T,
    u_l_now: T,
    p: &ModelParams<T>,
) -> ConditionValue<T> {
    let value = step_affine_part(u_f_now, u_f_prev, u_l_now, p)
        + T::half() * p.delta() * (p.reach() + p.epsilon());
    ConditionValue {
        value,
        holds: value <= T::zero(),
    }
}

/// Step certificate for the tightness part; holds when `<= 0`.
pub fn condition4<T: Scalar>(
    u_f_now: T,
    u_f_prev: T,
    u_l_now: T,
    p: &ModelParams<T>,
) -> ConditionValue<T> {
    let (delta, theta, eps) = (p.delta(), p.theta(), p.epsilon());
    let three_halves = T::from_int(3) * T::half();
    let value = step_affine_part(u_f_now, u_f_prev, u_l_now, p)
        - T::from_int(4) * eps * theta
        - three_halves * eps * delta
        - T::half() * p.a_max() * delta * delta;
    ConditionValue {
        value,
        holds: value <= T::zero(),
    }
}

/// Largest follower command satisfying [`condition3`] for the given previous
/// command and leader command.
pub fn condition3_cap<T: Scalar>(u_f_prev: T, u_l_now: T, p: &ModelParams<T>) -> T {
    let (delta, h) = (p.delta(), p.h());
    let three_halves = T::from_int(3) * T::half();
    ((T::half() * delta + h) * u_f_prev + delta * u_l_now
        - T::half() * delta * (p.reach() + p.epsilon()))
        / (three_halves * delta + h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCertificate<T = f64> {
    /// Position of the follower in the platoon; its leader sits at `follower - 1`.
    pub follower: usize,
    /// Existence inequality on the initial snapshot (condition 1 form).
    pub part1a: ConditionValue<T>,
    /// Tightness inequality on the initial snapshot (condition 2 form).
    pub part2a: ConditionValue<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport<T = f64> {
    pub pairs: Vec<PairCertificate<T>>,
    /// Whether every issued follower command met condition 3; `None` until
    /// a trace has been checked.
    pub steps_condition3: Option<bool>,
    /// As `steps_condition3`, for condition 4.
    pub steps_condition4: Option<bool>,
}

impl<T: Scalar> CertificateReport<T> {
    pub fn existence(&self) -> bool {
        self.pairs.iter().all(|c| c.part1a.holds)
    }

    pub fn tightness(&self) -> bool {
        self.pairs.iter().all(|c| c.part2a.holds)
    }

    /// Initial existence passes and no checked step failed condition 3.
    pub fn overall(&self) -> bool {
        self.existence() && self.steps_condition3 != Some(false)
    }

    /// Folds the per-step condition flags of a trace into the report.
    pub fn record_steps(&mut self, rows: &[TraceRow]) {
        self.steps_condition3 = Some(rows.iter().all(|r| r.cond3 != Some(false)));
        self.steps_condition4 = Some(rows.iter().all(|r| r.cond4 != Some(false)));
    }
}

/// Evaluates the initial-state inequalities for every adjacent pair of a
/// front-to-back platoon. The leader's input is its initial input `u(0)`,
/// i.e. the `u_prev` of its observation.
pub fn certify_initial<T: Scalar>(
    platoon: &[DelayedObservation<T>],
    p: &ModelParams<T>,
) -> CertificateReport<T> {
    let pairs = platoon
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let snap = PairSnapshot::from_observations(&w[1], &w[0], w[0].u_prev);
            PairCertificate {
                follower: k + 1,
                part1a: condition1(&snap, p),
                part2a: condition2(&snap, p),
            }
        })
        .collect();
    CertificateReport {
        pairs,
        steps_condition3: None,
        steps_condition4: None,
    }
}

/// Every headway violation among `vehicles` at one tick. Vehicles of a route
/// must appear in platoon order, front first.
pub fn audit_tick(tick: u64, vehicles: &[VehicleRecord], p: &ModelParams) -> Vec<SafetyViolation> {
    let mut out = Vec::new();
    for route in Route::ALL {
        let lane: Vec<&VehicleRecord> = vehicles.iter().filter(|v| v.route == route).collect();
        for w in lane.windows(2) {
            let (lead, follow) = (w[0], w[1]);
            let required = p.h() * follow.v;
            let gap = lead.x - follow.x;
            if gap < required - AUDIT_TOL {
                out.push(SafetyViolation {
                    tick,
                    route_pair: (route, route),
                    follower_id: follow.id,
                    leader_id: lead.id,
                    gap,
                    required,
                    kind: ViolationKind::SameRoute,
                });
            }
        }
    }
    let inside = |v: &&VehicleRecord| v.x.abs() <= p.big_r();
    let one: Vec<&VehicleRecord> = vehicles
        .iter()
        .filter(|v| v.route == Route::One)
        .filter(inside)
        .collect();
    let two: Vec<&VehicleRecord> = vehicles
        .iter()
        .filter(|v| v.route == Route::Two)
        .filter(inside)
        .collect();
    for a in &one {
        for b in &two {
            let (lead, follow) = if a.x >= b.x { (a, b) } else { (b, a) };
            let required = p.h_bar() * follow.v;
            let gap = lead.x - follow.x;
            if gap < required - AUDIT_TOL {
                out.push(SafetyViolation {
                    tick,
                    route_pair: (follow.route, lead.route),
                    follower_id: follow.id,
                    leader_id: lead.id,
                    gap,
                    required,
                    kind: ViolationKind::CrossRoute,
                });
            }
        }
    }
    out
}

/// Audits ground truth at every tick. Rows of one tick must be contiguous and,
/// within a route, in platoon order (as [`crate::sim::run`] emits them).
pub fn audit_trace(rows: &[TraceRow], p: &ModelParams) -> Vec<SafetyViolation> {
    let mut out = Vec::new();
    for chunk in rows.chunk_by(|a, b| a.tick == b.tick) {
        let vehicles: Vec<VehicleRecord> = chunk.iter().map(TraceRow::vehicle_record).collect();
        out.extend(audit_tick(chunk[0].tick, &vehicles, p));
    }
    out
}
