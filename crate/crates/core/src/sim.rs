//! Closed-loop engine.
//!
//! Timing: the controller runs at `t δ`. It sees each vehicle as it was at
//! `t δ - θ` and its command takes effect at the actuation epoch
//! `a_t = t δ + θ`. Truth is advanced from epoch to epoch: the realized
//! speed lands in the reachable set of the applied command and the position
//! follows the trapezoidal rule, so between epochs the speed is linear and
//! the position quadratic in time. The observation used at tick `t` is this
//! profile sampled `2θ` before `a_t`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::capacity::SweepGrid;
use crate::controller::{
    coordinate_route_with, feasible_input_interval, CommandPolicy, ControlDecision,
};
use crate::dynamics::{
    advance_position, clamp_target, realize_speed, speed_reachable_set, NoiseModel, Role, Route,
    VehicleRecord,
};
use crate::estimator::{estimate_at_actuation, DelayedObservation};
use crate::params::{InvalidParam, ModelParams, ParamRecord};
use crate::safety::{audit_tick, condition3, condition4};
use crate::trace::{SimEvent, SimTrace, TraceRow};

/// Slack for containment checks on simulated floating-point traces.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialVehicle {
    pub x: f64,
    pub v: f64,
    pub u_prev: f64,
}

/// Periodic arrivals at the outer edge `x = -L`. Arrival `k` is scheduled
/// at `offset + k * period` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spawner {
    pub period: f64,
    pub entry_speed: f64,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteConfig {
    /// Front to back.
    #[serde(default)]
    pub vehicles: Vec<InitialVehicle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawner: Option<Spawner>,
}

fn default_horizon() -> u64 {
    500
}

/// Scenario file contents before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub policy: CommandPolicy,
    pub params: ParamRecord,
    #[serde(default)]
    pub route1: RouteConfig,
    #[serde(default)]
    pub route2: RouteConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Param(#[from] InvalidParam),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    /// Indexed by [`Route::index`].
    pub routes: [RouteConfig; 2],
    pub noise: NoiseModel,
    pub policy: CommandPolicy,
    pub horizon: u64,
    pub seed: u64,
    pub sweep: Option<SweepGrid>,
}

impl Scenario {
    pub fn from_config(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        let params = ModelParams::validate(&cfg.params)?;
        let sc = Scenario {
            params,
            routes: [cfg.route1, cfg.route2],
            noise: cfg.noise,
            policy: cfg.policy,
            horizon: cfg.horizon,
            seed: cfg.seed,
            sweep: cfg.sweep,
        };
        sc.check()?;
        Ok(sc)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Scenario::from_config(cfg)
    }

    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            horizon: self.horizon,
            seed: self.seed,
            noise: self.noise,
            policy: self.policy,
            params: *self.params.record(),
            route1: self.routes[0].clone(),
            route2: self.routes[1].clone(),
            sweep: self.sweep.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_config()).expect("scenario config is always representable")
    }

    fn check(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        let bad = |msg: String| Err(ConfigError::Scenario(msg));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        for route in Route::ALL {
            let rc = &self.routes[route.index()];
            for (k, veh) in rc.vehicles.iter().enumerate() {
                let at = format!("route{} vehicle {}", route, k + 1);
                if !(veh.x.is_finite() && veh.x.abs() <= p.big_l()) {
                    return bad(format!("{at}: x must lie in [-L, L]"));
                }
                if !(veh.v >= 0.0 && veh.v <= p.v_max()) {
                    return bad(format!("{at}: v must lie in [0, v_max]"));
                }
                if !(veh.u_prev >= 0.0 && veh.u_prev <= p.v_max()) {
                    return bad(format!("{at}: u_prev must lie in [0, v_max]"));
                }
                if (veh.v - veh.u_prev).abs() > p.epsilon() {
                    return bad(format!("{at}: v must be within epsilon of u_prev"));
                }
                if k > 0 && rc.vehicles[k - 1].x <= veh.x {
                    return bad(format!(
                        "{at}: platoon must be sorted front to back with positive gaps"
                    ));
                }
            }
            if let Some(sp) = rc.spawner {
                if !(sp.period.is_finite() && sp.period > 0.0) {
                    return bad(format!("route{route} spawner: period must be > 0"));
                }
                if !(sp.entry_speed > 0.0 && sp.entry_speed <= p.v_max()) {
                    return bad(format!(
                        "route{route} spawner: entry_speed must lie in (0, v_max]"
                    ));
                }
                if !(sp.offset.is_finite() && sp.offset >= 0.0) {
                    return bad(format!("route{route} spawner: offset must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// What the controller sees of each initial vehicle on its first tick: the
/// vehicle is taken to have cruised at its initial speed beforehand.
pub fn initial_observations(sc: &Scenario, route: Route) -> Vec<DelayedObservation> {
    let back = 2.0 * sc.params.theta();
    sc.routes[route.index()]
        .vehicles
        .iter()
        .map(|veh| DelayedObservation {
            x_hat: veh.x - back * veh.v,
            v_hat: veh.v,
            u_prev: veh.u_prev,
            tick: 0,
        })
        .collect()
}

#[derive(Clone, Debug)]
struct Live {
    id: u32,
    index: u32,
    x: f64,
    v: f64,
    u_prev: f64,
    /// States at the most recent epochs, oldest first; the last is `(x, v)`.
    history: Vec<(f64, f64)>,
}

impl Live {
    fn new(id: u32, index: u32, x: f64, v: f64, u_prev: f64) -> Self {
        Live {
            id,
            index,
            x,
            v,
            u_prev,
            history: vec![(x, v)],
        }
    }

    /// Truth `back` seconds before the current epoch. Before the vehicle's
    /// first recorded epoch it is taken to have cruised at its initial speed.
    fn sample_back(&self, back: f64, delta: f64) -> (f64, f64) {
        let mut back = back;
        let mut j = self.history.len() - 1;
        while j > 0 {
            if back <= delta {
                let (x0, v0) = self.history[j - 1];
                let (_, v1) = self.history[j];
                let s = delta - back;
                let dv = v1 - v0;
                return (
                    x0 + v0 * s + dv * s * s / (2.0 * delta),
                    v0 + dv * s / delta,
                );
            }
            back -= delta;
            j -= 1;
        }
        let (x0, v0) = self.history[0];
        (x0 - back * v0, v0)
    }

    fn step_to(&mut self, x: f64, v: f64, u: f64) {
        self.x = x;
        self.v = v;
        self.u_prev = u;
        self.history.push((x, v));
        if self.history.len() > 3 {
            self.history.remove(0);
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct SpawnState {
    next_k: u64,
    deferral_logged: bool,
}

/// Runs a scenario to its horizon. Deterministic for a fixed seed.
pub fn run(sc: &Scenario) -> SimTrace {
    let p = sc.params;
    let (delta, theta) = (p.delta(), p.theta());
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut next_id: u32 = 1;
    let mut next_index = [0u32; 2];
    let mut lanes: [Vec<Live>; 2] = [Vec::new(), Vec::new()];
    for route in Route::ALL {
        for veh in &sc.routes[route.index()].vehicles {
            let r = route.index();
            lanes[r].push(Live::new(next_id, next_index[r], veh.x, veh.v, veh.u_prev));
            next_id += 1;
            next_index[r] += 1;
        }
    }
    let mut spawn = [SpawnState::default(); 2];
    let mut rows = Vec::new();
    let mut events = Vec::new();

    for tick in 0..sc.horizon {
        let epoch = tick as f64 * delta + theta;

        for route in Route::ALL {
            let r = route.index();
            let Some(sp) = sc.routes[r].spawner else {
                continue;
            };
            let scheduled = sp.offset + spawn[r].next_k as f64 * sp.period;
            if scheduled > epoch + CHECK_TOL {
                continue;
            }
            let late = (epoch - scheduled).max(0.0);
            let x = if late < delta {
                -p.big_l() + sp.entry_speed * late
            } else {
                -p.big_l()
            };
            let clear = lanes[r]
                .last()
                .is_none_or(|rear| rear.x - x >= p.h() * sp.entry_speed);
            if clear {
                lanes[r].push(Live::new(
                    next_id,
                    next_index[r],
                    x,
                    sp.entry_speed,
                    sp.entry_speed,
                ));
                events.push(SimEvent::Spawned {
                    tick,
                    route,
                    vehicle_id: next_id,
                });
                next_id += 1;
                next_index[r] += 1;
                spawn[r] = SpawnState {
                    next_k: spawn[r].next_k + 1,
                    deferral_logged: false,
                };
            } else if !spawn[r].deferral_logged {
                events.push(SimEvent::Deferred {
                    tick,
                    route,
                    scheduled_s: scheduled,
                });
                spawn[r].deferral_logged = true;
            }
        }

        let tick_start = rows.len();
        let mut commands: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for route in Route::ALL {
            let lane = &lanes[route.index()];
            let obs: Vec<DelayedObservation> = lane
                .iter()
                .map(|veh| {
                    let (x_hat, v_hat) = veh.sample_back(2.0 * theta, delta);
                    DelayedObservation {
                        x_hat,
                        v_hat,
                        u_prev: veh.u_prev,
                        tick,
                    }
                })
                .collect();
            let decisions: Vec<ControlDecision> = coordinate_route_with(&obs, &p, sc.policy);
            let applied: Vec<f64> = decisions.iter().map(ControlDecision::applied).collect();
            for (i, (veh, dec)) in lane.iter().zip(&decisions).enumerate() {
                let (cond3, cond4) = if i > 0 {
                    (
                        Some(condition3(applied[i], veh.u_prev, applied[i - 1], &p).holds),
                        Some(condition4(applied[i], veh.u_prev, applied[i - 1], &p).holds),
                    )
                } else {
                    (None, None)
                };
                rows.push(TraceRow {
                    tick,
                    time_s: epoch,
                    route,
                    vehicle_id: veh.id,
                    x_true: veh.x,
                    v_true: veh.v,
                    x_obs: obs[i].x_hat,
                    v_obs: obs[i].v_hat,
                    u_prev: veh.u_prev,
                    u_cmd: applied[i],
                    decision: dec.case,
                    lambda: dec.lambda_at_u,
                    cond1: dec.cond1.map(|c| c.holds),
                    cond2: dec.cond2.map(|c| c.holds),
                    cond3,
                    cond4,
                    violation: false,
                });
            }
            commands[route.index()] = applied;
        }

        let records: Vec<VehicleRecord> = Route::ALL
            .iter()
            .flat_map(|&route| {
                lanes[route.index()].iter().map(move |veh| VehicleRecord {
                    id: veh.id,
                    route,
                    index: veh.index,
                    x: veh.x,
                    v: veh.v,
                    u_prev: veh.u_prev,
                })
            })
            .collect();
        for viol in audit_tick(tick, &records, &p) {
            for row in &mut rows[tick_start..] {
                if row.vehicle_id == viol.follower_id {
                    row.violation = true;
                }
            }
        }

        for route in Route::ALL {
            let r = route.index();
            for (i, veh) in lanes[r].iter_mut().enumerate() {
                let u = commands[r][i];
                let role = if i == 0 { Role::Leader } else { Role::Follower };
                let nominal = clamp_target(veh.v, u, &p);
                let reachable = speed_reachable_set(veh.v, u, &p);
                let v_next = realize_speed(sc.noise, nominal, reachable, role, &mut rng);
                let x_next = advance_position(veh.x, veh.v, v_next, &p);
                veh.step_to(x_next, v_next, u);
            }
            lanes[r].retain(|veh| {
                let keep = veh.x <= p.big_l();
                if !keep {
                    events.push(SimEvent::Retired {
                        tick: tick + 1,
                        route,
                        vehicle_id: veh.id,
                    });
                }
                keep
            });
        }
    }

    SimTrace {
        params: p,
        noise: sc.noise,
        policy: sc.policy,
        seed: sc.seed,
        horizon: sc.horizon,
        rows,
        events,
    }
}

/// Times at which vehicles pass the conflict point, interpolating position
/// linearly between consecutive rows of the same vehicle. Sorted.
pub fn crossing_times(trace: &SimTrace) -> Vec<f64> {
    let mut last: HashMap<u32, (f64, f64)> = HashMap::new();
    let mut out = Vec::new();
    for row in &trace.rows {
        if let Some(&(t0, x0)) = last.get(&row.vehicle_id) {
            if x0 < 0.0 && row.x_true >= 0.0 {
                out.push(t0 + (row.time_s - t0) * (-x0) / (row.x_true - x0));
            }
        }
        last.insert(row.vehicle_id, (row.time_s, row.x_true));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Conflict-point crossings per second over `[t0, t1)`. Zero for an empty window.
pub fn throughput(trace: &SimTrace, t0: f64, t1: f64) -> f64 {
    if t1 <= t0 {
        return 0.0;
    }
    let n = crossing_times(trace)
        .into_iter()
        .filter(|&t| t >= t0 && t < t1)
        .count();
    n as f64 / (t1 - t0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ContainmentReport {
    pub checked: usize,
    pub contained: usize,
}

impl ContainmentReport {
    pub fn all_contained(&self) -> bool {
        self.checked == self.contained
    }
}

/// Checks that every row's true state lies inside the actuation-time box the
/// estimator builds from that row's observation.
pub fn estimator_soundness(trace: &SimTrace) -> ContainmentReport {
    let mut rep = ContainmentReport::default();
    for row in &trace.rows {
        let obs = DelayedObservation {
            x_hat: row.x_obs,
            v_hat: row.v_obs,
            u_prev: row.u_prev,
            tick: row.tick,
        };
        let b = estimate_at_actuation(&obs, &trace.params);
        rep.checked += 1;
        if b.contains_within(row.x_true, row.v_true, CHECK_TOL) {
            rep.contained += 1;
        }
    }
    rep
}

/// Checks that every applied command lies in the feasible interval of the
/// vehicle's previous command.
pub fn command_feasibility(trace: &SimTrace) -> ContainmentReport {
    let mut rep = ContainmentReport::default();
    for row in &trace.rows {
        rep.checked += 1;
        if feasible_input_interval(row.u_prev, &trace.params).contains_within(row.u_cmd, CHECK_TOL)
        {
            rep.contained += 1;
        }
    }
    rep
}
