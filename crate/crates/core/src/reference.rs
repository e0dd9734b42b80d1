//! Values reported for the reference scenario, kept for cross-checks.

use crate::baseline::UtilityPair;
use crate::model::{AccelerationFit, MarketParameters, ReferenceParams, TrafficProfile};
use crate::scenario::Scenario;

/// Agreement required to call a computed utility equal to a reported one.
pub const MATCH_TOLERANCE: f64 = 2e-3;

/// State-2 utilities as tabulated: `(U_ISP, U_CP)`, with `U_user = 5.1712`.
pub const STATE2_TABLE: UtilityPair = UtilityPair {
    isp: 3.5180,
    cp: 5.6450,
};
pub const STATE2_TABLE_USER: f64 = 5.1712;

/// The usage-based leaf of the game tree as drawn.
pub const STATE2_TREE_LEAF: UtilityPair = UtilityPair {
    isp: 3.5226,
    cp: 5.0835,
};

/// Whether `s` describes the reference market at the reference profile.
pub fn is_reference(s: &Scenario) -> bool {
    s.params == MarketParameters::reference()
        && s.family == ReferenceParams::default()
        && s.acceleration == AccelerationFit::default()
        && s.profile == TrafficProfile::reference()
}

pub fn matches(a: UtilityPair, b: UtilityPair) -> bool {
    (a.isp - b.isp).abs() <= MATCH_TOLERANCE && (a.cp - b.cp).abs() <= MATCH_TOLERANCE
}
