//! Transitions between the non-cooperative states and the subgame
//! perfect equilibrium of the two-level game tree.
//!
//! The CP moves first (adopt P2P or not); if it adopts, the ISP picks flat
//! or usage-based user pricing. The resulting leaf is the threat point for
//! bargaining.

use std::fmt;

use crate::baseline::{UtilityPair, Utilities};
use crate::states::{StateLabel, StateOutcome};

/// Differences below this (relative to the operands, floored at 1) count
/// as ties.
pub const STRICT_MARGIN: f64 = 1e-9;

fn strictly_greater(a: f64, b: f64) -> bool {
    a - b > STRICT_MARGIN * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CpAction {
    NoP2p,
    P2p,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IspAction {
    Flat,
    UsageBased,
}

impl fmt::Display for CpAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CpAction::NoP2p => "no-P2P",
            CpAction::P2p => "P2P",
        })
    }
}

impl fmt::Display for IspAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IspAction::Flat => "flat",
            IspAction::UsageBased => "usage-based",
        })
    }
}

/// CP action and, when the ISP node is reached, the ISP's reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionProfile {
    pub cp: CpAction,
    pub isp: Option<IspAction>,
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.isp {
            Some(isp) => write!(f, "({}, {})", self.cp, isp),
            None => write!(f, "({}, -)", self.cp),
        }
    }
}

/// Leaf payoffs, CP first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub cp: f64,
    pub isp: f64,
}

impl From<Utilities> for Payoff {
    fn from(u: Utilities) -> Self {
        Self { cp: u.cp, isp: u.isp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameSolution {
    pub profile: ActionProfile,
    pub leaf: StateLabel,
    pub payoff: Payoff,
}

/// The two-level tree with one payoff per leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameTree {
    pub no_p2p: Payoff,
    pub flat: Payoff,
    pub usage_based: Payoff,
}

impl GameTree {
    pub fn from_outcomes(s0: &StateOutcome, s1: &StateOutcome, s2: &StateOutcome) -> Self {
        Self {
            no_p2p: s0.utilities.into(),
            flat: s1.utilities.into(),
            usage_based: s2.utilities.into(),
        }
    }

    /// Backward induction; ties go to the status quo (no P2P, flat pricing).
    pub fn solve(&self) -> GameSolution {
        let (isp, leaf, induced) = if strictly_greater(self.usage_based.isp, self.flat.isp) {
            (IspAction::UsageBased, StateLabel::S2, self.usage_based)
        } else {
            (IspAction::Flat, StateLabel::S1, self.flat)
        };
        if strictly_greater(induced.cp, self.no_p2p.cp) {
            GameSolution {
                profile: ActionProfile {
                    cp: CpAction::P2p,
                    isp: Some(isp),
                },
                leaf,
                payoff: induced,
            }
        } else {
            GameSolution {
                profile: ActionProfile {
                    cp: CpAction::NoP2p,
                    isp: None,
                },
                leaf: StateLabel::S0,
                payoff: self.no_p2p,
            }
        }
    }
}

pub fn backward_induction(s0: &StateOutcome, s1: &StateOutcome, s2: &StateOutcome) -> GameSolution {
    GameTree::from_outcomes(s0, s1, s2).solve()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionReport {
    /// CP gains from P2P under flat pricing.
    pub t1: bool,
    /// ISP loses under flat pricing, and gains by switching to usage-based.
    pub t2: (bool, bool),
    /// CP is worse off under usage-based pricing than without P2P.
    pub t3: bool,
    pub final_state: StateLabel,
    /// All three transitions fire, so the states never settle.
    pub cycle: bool,
    pub spne: GameSolution,
    /// Utilities at the SPNE leaf.
    pub starting_point: UtilityPair,
}

impl TransitionReport {
    pub fn t2_holds(&self) -> bool {
        self.t2.0 && self.t2.1
    }

    /// Whether the transition walk and backward induction end at the same state.
    pub fn consistent(&self) -> bool {
        self.cycle || self.final_state == self.spne.leaf
    }
}

pub fn evaluate_transitions(s0: &StateOutcome, s1: &StateOutcome, s2: &StateOutcome) -> TransitionReport {
    let (u0, u1, u2) = (s0.utilities, s1.utilities, s2.utilities);
    let t1 = strictly_greater(u1.cp, u0.cp);
    let t2 = (strictly_greater(u0.isp, u1.isp), strictly_greater(u2.isp, u1.isp));
    let t3 = strictly_greater(u0.cp, u2.cp);
    let t2_all = t2.0 && t2.1;
    let cycle = t1 && t2_all && t3;
    let final_state = match (t1, t2_all, t3) {
        (false, _, _) => StateLabel::S0,
        (true, false, _) => StateLabel::S1,
        (true, true, false) => StateLabel::S2,
        (true, true, true) => StateLabel::S0,
    };
    let spne = backward_induction(s0, s1, s2);
    TransitionReport {
        t1,
        t2,
        t3,
        final_state,
        cycle,
        spne,
        starting_point: UtilityPair::new(spne.payoff.isp, spne.payoff.cp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(label: StateLabel, isp: f64, cp: f64) -> StateOutcome {
        StateOutcome {
            label,
            v_p2p: 0.0,
            v_total: 1.0,
            utilities: Utilities { isp, cp, user: 0.0 },
        }
    }

    fn triple(s0: (f64, f64), s1: (f64, f64), s2: (f64, f64)) -> [StateOutcome; 3] {
        [
            outcome(StateLabel::S0, s0.0, s0.1),
            outcome(StateLabel::S1, s1.0, s1.1),
            outcome(StateLabel::S2, s2.0, s2.1),
        ]
    }

    #[test]
    fn reference_like_payoffs() {
        let [s0, s1, s2] = triple((2.2438, 3.9942), (1.5964, 7.2021), (3.5226, 5.0835));
        let r = evaluate_transitions(&s0, &s1, &s2);
        assert!(r.t1 && r.t2_holds() && !r.t3);
        assert_eq!(r.final_state, StateLabel::S2);
        assert!(!r.cycle && r.consistent());
        assert_eq!(r.spne.profile.to_string(), "(P2P, usage-based)");
        assert_eq!(r.spne.payoff, Payoff { cp: 5.0835, isp: 3.5226 });
        assert_eq!(r.starting_point, UtilityPair::new(3.5226, 5.0835));
    }

    #[test]
    fn identical_states_stay_put() {
        let [s0, s1, s2] = triple((2.0, 4.0), (2.0, 4.0), (1.0, 3.0));
        let r = evaluate_transitions(&s0, &s1, &s2);
        assert!(!r.t1);
        assert_eq!(r.final_state, StateLabel::S0);
        assert_eq!(r.spne.profile, ActionProfile { cp: CpAction::NoP2p, isp: None });
        assert_eq!(r.spne.payoff, Payoff { cp: 4.0, isp: 2.0 });
    }

    #[test]
    fn isp_benefiting_from_p2p_keeps_flat() {
        let [s0, s1, s2] = triple((2.0, 4.0), (2.5, 6.0), (2.4, 5.0));
        let r = evaluate_transitions(&s0, &s1, &s2);
        assert!(r.t1 && !r.t2.0);
        assert_eq!(r.final_state, StateLabel::S1);
        assert_eq!(r.spne.profile.to_string(), "(P2P, flat)");
        assert!(r.consistent());
    }

    #[test]
    fn cp_anticipates_repricing() {
        let [s0, s1, s2] = triple((2.0, 4.0), (1.0, 6.0), (3.0, 3.0));
        let r = evaluate_transitions(&s0, &s1, &s2);
        assert!(r.t1 && r.t2_holds() && r.t3 && r.cycle);
        assert_eq!(r.spne.profile.to_string(), "(no-P2P, -)");
        assert_eq!(r.spne.leaf, StateLabel::S0);
    }

    #[test]
    fn ties_favour_status_quo() {
        let tree = GameTree {
            no_p2p: Payoff { cp: 4.0, isp: 1.0 },
            flat: Payoff { cp: 5.0, isp: 2.0 },
            usage_based: Payoff { cp: 5.0, isp: 2.0 + 1e-12 },
        };
        let s = tree.solve();
        assert_eq!(s.profile.isp, Some(IspAction::Flat));
        let tree = GameTree {
            no_p2p: Payoff { cp: 5.0, isp: 1.0 },
            ..tree
        };
        assert_eq!(tree.solve().profile.cp, CpAction::NoP2p);
    }
}
