//! Pricing game between an access ISP, a content provider and its users,
//! with and without peer-assisted delivery.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod calculus;
pub mod coalition;
pub mod cooperation;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod reference;
pub mod scenario;
pub mod spne;
pub mod states;
pub mod sweep;

#[cfg(test)]
mod properties;

pub use baseline::{solve_state0, BaselineEquilibrium, UtilityPair, Utilities};
pub use coalition::{CoalitionLedger, PcpTraffic};
pub use cooperation::{cooperate, CooperativeOutcome, DiscountPair, StackelbergSettings};
pub use error::{Error, Result};
pub use model::{AccelerationFit, FunctionFamily, MarketParameters, ScalarFn, TrafficProfile};
pub use pipeline::{run_pipeline, Flag, Report};
pub use scenario::Scenario;
pub use spne::{evaluate_transitions, TransitionReport};
pub use states::{solve_state1, solve_state2, P2PContext, StateLabel, StateOutcome};
pub use sweep::{run_sweep, SweepResult};
