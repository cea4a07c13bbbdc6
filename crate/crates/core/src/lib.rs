//! Coordination of connected vehicles through a signal-free intersection
//! when observations and commands travel with a fixed latency.
//!
//! The road-side unit only knows each vehicle up to an interval. It bounds
//! where the vehicle will be one step after its next command lands, picks the
//! highest target speed that keeps the worst case outside the follower's
//! time-headway envelope, and reports when no such speed exists.

pub mod capacity;
pub mod cli;
pub mod controller;
pub mod dynamics;
pub mod estimator;
pub mod interval;
pub mod params;
pub mod safety;
pub mod scalar;
pub mod sim;
pub mod trace;

pub use controller::{CommandPolicy, ControlDecision, DecisionCase, PairSnapshot};
pub use dynamics::{NoiseModel, Route};
pub use estimator::{DelayedObservation, StateBox};
pub use interval::Interval;
pub use params::{InvalidParam, ModelParams, ParamRecord};
pub use scalar::{Exact, Scalar};
pub use sim::{run, Scenario};
pub use trace::{SimTrace, TraceRow};
