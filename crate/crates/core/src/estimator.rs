//! Set-valued state estimation under a one-way latency `theta`.
//!
//! The road-side unit receives, at tick `t`, the state the vehicle had `theta`
//! seconds earlier; its command lands `theta` seconds later. Between sample
//! and actuation the vehicle is converging on its previous command, so the
//! actuation-time state lies in
//!
//! ```text
//! X = [x̂ + θ(v̂ + u(t-1) - ε), x̂ + θ(v̂ + u(t-1) + ε)]
//! V = [u(t-1) - ε, u(t-1) + ε] ∩ [0, v̄]
//! ```
//!
//! and one step later, assuming the new command `u(t)` is reachable, in
//! `X + δ/2 (V + Ṽ)` with `Ṽ = [u(t) - ε, u(t) + ε] ∩ [0, v̄]`.

use crate::interval::Interval;
use crate::params::ModelParams;
use crate::scalar::Scalar;

/// A report that reached the road-side unit with latency `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayedObservation<T = f64> {
    pub x_hat: T,
    pub v_hat: T,
    /// Command issued on the previous tick.
    pub u_prev: T,
    pub tick: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateBox<T = f64> {
    pub pos: Interval<T>,
    pub spd: Interval<T>,
}

impl<T: Scalar> StateBox<T> {
    pub fn contains(&self, x: T, v: T) -> bool {
        self.pos.contains(x) && self.spd.contains(v)
    }

    pub fn contains_within(&self, x: T, v: T, tol: T) -> bool {
        self.pos.contains_within(x, tol) && self.spd.contains_within(v, tol)
    }
}

/// Bounds the state at the moment the current command takes effect.
pub fn estimate_at_actuation<T: Scalar>(
    obs: &DelayedObservation<T>,
    p: &ModelParams<T>,
) -> StateBox<T> {
    let center = obs.x_hat + p.theta() * (obs.v_hat + obs.u_prev);
    let pos = Interval::around(center, p.theta() * p.epsilon());
    let spd = Interval::around(obs.u_prev, p.epsilon()).clip(T::zero(), p.v_max());
    StateBox { pos, spd }
}

/// Propagates an actuation-time box one step under command `u_now`.
pub fn predict_next<T: Scalar>(state: &StateBox<T>, u_now: T, p: &ModelParams<T>) -> StateBox<T> {
    let spd_next = Interval::around(u_now, p.epsilon()).clip(T::zero(), p.v_max());
    let pos_next = state
        .pos
        .add(&state.spd.add(&spd_next).scale(p.delta() * T::half()));
    StateBox {
        pos: pos_next,
        spd: spd_next,
    }
}

/// Width of the one-step position prediction, `2 ε (θ + δ)`. An upper bound
/// on the measured width once speeds are cut at `0` or `v_max`.
pub fn prediction_width<T: Scalar>(p: &ModelParams<T>) -> T {
    T::two() * p.epsilon() * (p.theta() + p.delta())
}
