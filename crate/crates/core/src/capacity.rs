//! Worst-case crossing capacity under alternating cross-route discipline.
//!
//! A vehicle's one-step position prediction has width `2ε(θ + δ)`; at the
//! top speed that spans `D = 2ε(θ + δ) / v_max` seconds of the time axis.
//! Alternating crossings then clear the conflict point at least once every
//! `D + h` seconds.

use serde::{Deserialize, Serialize};

use crate::params::{InvalidParam, ModelParams};
use crate::scalar::Scalar;

/// Time-axis width of one prediction interval at top speed, s.
pub fn crossing_gap<T: Scalar>(p: &ModelParams<T>) -> T {
    T::two() * p.epsilon() * (p.theta() + p.delta()) / p.v_max()
}

/// `1 / (D + h)`, veh/s.
pub fn capacity_bound_generic<T: Scalar>(gap_d: T, h: T) -> T {
    T::one() / (gap_d + h)
}

/// `v_max / (2ε(θ + δ) + h v_max)`, veh/s.
pub fn capacity_bound<T: Scalar>(p: &ModelParams<T>) -> T {
    p.v_max() / (T::two() * p.epsilon() * (p.theta() + p.delta()) + p.h() * p.v_max())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityRow<T = f64> {
    pub theta: T,
    pub delta: T,
    pub epsilon: T,
    pub h: T,
    pub v_max: T,
    pub crossing_gap_d: T,
    pub bound_f: T,
}

impl<T: Scalar> CapacityRow<T> {
    pub fn from_params(p: &ModelParams<T>) -> Self {
        CapacityRow {
            theta: p.theta(),
            delta: p.delta(),
            epsilon: p.epsilon(),
            h: p.h(),
            v_max: p.v_max(),
            crossing_gap_d: crossing_gap(p),
            bound_f: capacity_bound(p),
        }
    }
}

/// Axis values for a sweep. A missing axis holds the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
}

/// One grid point: a tabulated bound, or the validation failure that kept
/// the point from being evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepRow {
    Valid(CapacityRow),
    Invalid {
        theta: f64,
        delta: f64,
        epsilon: f64,
        h: f64,
        v_max: f64,
        reason: InvalidParam,
    },
}

/// Evaluates the bound at every grid point, `theta` slowest and `h` fastest.
pub fn sweep(grid: &SweepGrid, base: &ModelParams) -> Vec<SweepRow> {
    let axis =
        |values: &Option<Vec<f64>>, fallback: f64| values.clone().unwrap_or_else(|| vec![fallback]);
    let thetas = axis(&grid.theta, base.theta());
    let deltas = axis(&grid.delta, base.delta());
    let epsilons = axis(&grid.epsilon, base.epsilon());
    let hs = axis(&grid.h, base.h());

    let mut rows = Vec::with_capacity(thetas.len() * deltas.len() * epsilons.len() * hs.len());
    for &theta in &thetas {
        for &delta in &deltas {
            for &epsilon in &epsilons {
                for &h in &hs {
                    let point = base.with(|r| {
                        r.theta = theta;
                        r.delta = delta;
                        r.epsilon = epsilon;
                        r.h = h;
                        // keep the cross-route headway admissible as h moves
                        if r.h_bar < h {
                            r.h_bar = h;
                        }
                    });
                    rows.push(match point {
                        Ok(p) => SweepRow::Valid(CapacityRow::from_params(&p)),
                        Err(reason) => SweepRow::Invalid {
                            theta,
                            delta,
                            epsilon,
                            h,
                            v_max: base.v_max(),
                            reason,
                        },
                    });
                }
            }
        }
    }
    rows
}
