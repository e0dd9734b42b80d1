//! Fixtures shared by the solver benchmarks.

use peershare_core::pipeline::build_context;
use peershare_core::{P2PContext, Scenario, TrafficProfile};

/// Context for the reference market at the given profile.
pub fn context(alpha: f64, beta: f64) -> P2PContext {
    let profile = TrafficProfile::new(alpha, beta).expect("valid profile");
    build_context(&Scenario::default().with_profile(profile)).expect("reference market solves")
}

/// A small sweep: `n x n` cells over the default profile ranges.
pub fn small_sweep(n: usize) -> Scenario {
    let mut s = Scenario::default();
    s.sweep.alpha.steps = n;
    s.sweep.beta.steps = n;
    s.sweep.gamma_steps = 11;
    s
}
