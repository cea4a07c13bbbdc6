//! Records produced by a closed-loop run.

use crate::controller::{CommandPolicy, DecisionCase};
use crate::dynamics::{NoiseModel, Route, VehicleRecord};
use crate::params::ModelParams;

/// One vehicle at one tick. Truth is taken at the tick's actuation epoch,
/// the observation is the one the controller used at that tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    /// Actuation epoch, `tick * delta + theta`, s.
    pub time_s: f64,
    pub route: Route,
    pub vehicle_id: u32,
    pub x_true: f64,
    pub v_true: f64,
    pub x_obs: f64,
    pub v_obs: f64,
    /// Command issued on the previous tick.
    pub u_prev: f64,
    /// Command applied from this epoch on, including the braking fallback.
    pub u_cmd: f64,
    pub decision: DecisionCase,
    pub lambda: Option<f64>,
    pub cond1: Option<bool>,
    pub cond2: Option<bool>,
    pub cond3: Option<bool>,
    pub cond4: Option<bool>,
    /// This vehicle is the follower in some headway violation at this tick.
    pub violation: bool,
}

impl TraceRow {
    pub fn vehicle_record(&self) -> VehicleRecord {
        VehicleRecord {
            id: self.vehicle_id,
            route: self.route,
            index: 0,
            x: self.x_true,
            v: self.v_true,
            u_prev: self.u_prev,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimEvent {
    Spawned {
        tick: u64,
        route: Route,
        vehicle_id: u32,
    },
    /// A scheduled arrival could not enter without breaking headway; it is
    /// retried on later ticks. Logged once per arrival.
    Deferred {
        tick: u64,
        route: Route,
        scheduled_s: f64,
    },
    Retired {
        tick: u64,
        route: Route,
        vehicle_id: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub params: ModelParams,
    pub noise: NoiseModel,
    pub policy: CommandPolicy,
    pub seed: u64,
    pub horizon: u64,
    /// Ordered by tick, then route, then platoon position.
    pub rows: Vec<TraceRow>,
    pub events: Vec<SimEvent>,
}

impl SimTrace {
    pub fn infeasible_count(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.decision == DecisionCase::Infeasible)
            .count()
    }

    pub fn rows_of(&self, vehicle_id: u32) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.vehicle_id == vehicle_id)
    }
}
