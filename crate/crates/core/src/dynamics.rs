//! Ground-truth longitudinal kinematics.
//!
//! A vehicle tracks its commanded target speed. Per step the speed can move
//! by at most `a_max * delta`; the realized speed then lands anywhere in the
//! `epsilon`-neighbourhood of the attainable target, intersected with
//! `[0, v_max]`. Positions integrate the speed with the trapezoidal rule.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::params::ModelParams;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Route {
    One,
    Two,
}

impl Route {
    pub const ALL: [Route; 2] = [Route::One, Route::Two];

    pub fn number(self) -> u8 {
        match self {
            Route::One => 1,
            Route::Two => 2,
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.number() - 1)
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// One vehicle's true state at an actuation epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleRecord {
    pub id: u32,
    pub route: Route,
    /// Arrival order on its route.
    pub index: u32,
    /// Signed distance to the conflict point, m.
    pub x: f64,
    pub v: f64,
    /// Last commanded target speed.
    pub u_prev: f64,
}

/// How the simulator picks a speed inside the reachable set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Nominal tracking: the attainable target itself.
    #[default]
    Zero,
    /// Uniform draw from the scenario's seeded generator.
    Uniform,
    /// Followers at the top of their set, leaders at the bottom.
    AdversarialCompress,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Leader,
    Follower,
}

/// Center of the realized neighbourhood: the target when it is reachable in
/// one step, otherwise the reachable extreme in its direction.
pub fn clamp_target<T: Scalar>(v_prev: T, u: T, p: &ModelParams<T>) -> T {
    let reach = p.reach();
    if u < v_prev - reach {
        v_prev - reach
    } else if u > v_prev + reach {
        v_prev + reach
    } else {
        u
    }
}

/// The set of speeds the vehicle may realize one step after being commanded
/// `u` while at `v_prev`. Never empty.
pub fn speed_reachable_set<T: Scalar>(v_prev: T, u: T, p: &ModelParams<T>) -> Interval<T> {
    let c = clamp_target(v_prev, u, p);
    Interval::around(c, p.epsilon()).clip(T::zero(), p.v_max())
}

/// Trapezoidal position update over one step.
pub fn advance_position<T: Scalar>(x: T, v_now: T, v_next: T, p: &ModelParams<T>) -> T {
    x + p.delta() * T::half() * (v_now + v_next)
}

/// Picks the realized speed inside `reachable`. `nominal` is the attainable
/// target from [`clamp_target`]; [`NoiseModel::Zero`] returns it clamped into
/// the set, which is the set's center whenever the speed limits do not cut it.
pub fn realize_speed<R: Rng + ?Sized>(
    model: NoiseModel,
    nominal: f64,
    reachable: Interval<f64>,
    role: Role,
    rng: &mut R,
) -> f64 {
    match model {
        NoiseModel::Zero => reachable.clamp(nominal),
        NoiseModel::Uniform => {
            if reachable.width() > 0.0 {
                rng.random_range(reachable.lo()..=reachable.hi())
            } else {
                reachable.lo()
            }
        }
        NoiseModel::AdversarialCompress => match role {
            Role::Follower => reachable.hi(),
            Role::Leader => reachable.lo(),
        },
    }
}
