//! End-to-end run: State 0, States 1/2, SPNE, cooperation with bargaining,
//! and the split inside each coalition.

use std::fmt;

use crate::baseline::{solve_state0_all, BaselineEquilibrium, UtilityPair};
use crate::coalition::{
    aggregate, distribute, isp_p2p_volumes, isp_weights, pcp_weights, proportional_sides,
    synthesize_uniform_traffic, CoalitionLedger,
};
use crate::cooperation::{settle, solve_stackelberg, CooperativeOutcome, StackelbergSolution};
use crate::error::{Error, Result};
use crate::reference;
use crate::scenario::{CoalitionSpec, Scenario, TrafficSource, UserSides};
use crate::spne::{evaluate_transitions, TransitionReport};
use crate::states::{solve_state1, solve_state2, P2PContext, StateLabel, StateOutcome};

/// Noteworthy conditions that do not stop the run.
#[derive(Debug, Clone, PartialEq)]
pub enum Flag {
    /// The computed State-2 utilities disagree with one of the two
    /// reported versions of them, which also disagree with each other.
    ReportedState2Conflict {
        computed: UtilityPair,
        table: UtilityPair,
        tree_leaf: UtilityPair,
    },
    /// All three transitions fire; the states never settle.
    TransitionCycle,
    /// The transition walk and backward induction end at different states.
    SpneDisagrees { walk: StateLabel, induction: StateLabel },
    /// Bargaining started from a configured point instead of the SPNE leaf.
    StartingPointOverride { computed: UtilityPair, used: UtilityPair },
    /// Joint profit is below the starting point; no bargaining outcome.
    CooperationNotBeneficial { surplus: f64 },
    /// No P2P volume under cooperation, so there is nothing to split.
    NoP2pVolume,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::ReportedState2Conflict {
                computed,
                table,
                tree_leaf,
            } => write!(
                f,
                "state 2 (U_ISP, U_CP): computed ({:.4}, {:.4}); reported table ({:.4}, {:.4}) and tree leaf ({:.4}, {:.4}) disagree",
                computed.isp, computed.cp, table.isp, table.cp, tree_leaf.isp, tree_leaf.cp
            ),
            Flag::TransitionCycle => f.write_str("transitions T1, T2 and T3 all hold: no stable state"),
            Flag::SpneDisagrees { walk, induction } => write!(
                f,
                "transition walk ends at {walk}, backward induction at {induction}"
            ),
            Flag::StartingPointOverride { computed, used } => write!(
                f,
                "bargaining starts at configured ({:.4}, {:.4}) instead of computed ({:.4}, {:.4})",
                used.isp, used.cp, computed.isp, computed.cp
            ),
            Flag::CooperationNotBeneficial { surplus } => {
                write!(f, "cooperation not beneficial: surplus {surplus:.6}")
            }
            Flag::NoP2pVolume => f.write_str("no P2P volume: coalition split skipped"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub context: P2PContext,
    pub s0: StateOutcome,
    pub s1: StateOutcome,
    pub s2: StateOutcome,
    pub transitions: TransitionReport,
    pub stackelberg: StackelbergSolution,
    pub cooperation: Option<CooperativeOutcome>,
    pub ledger: Option<CoalitionLedger>,
    pub flags: Vec<Flag>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn baseline(&self) -> &BaselineEquilibrium {
        &self.context.baseline
    }

    pub fn states(&self) -> [&StateOutcome; 3] {
        [&self.s0, &self.s1, &self.s2]
    }

    pub fn has_flag(&self, pred: impl Fn(&Flag) -> bool) -> bool {
        self.flags.iter().any(pred)
    }
}

pub fn solve_baseline(s: &Scenario) -> Result<BaselineEquilibrium> {
    let family = s.function_family();
    let all = solve_state0_all(&s.params, &family, s.tol).map_err(Error::at("state 0"))?;
    Ok(all[0])
}

pub fn build_context(s: &Scenario) -> Result<P2PContext> {
    let eq = solve_baseline(s)?;
    P2PContext::new(s.params, s.function_family(), eq, s.profile, &s.acceleration).map_err(Error::at("p2p context"))
}

/// States 0, 1 and 2 for the scenario's profile.
pub fn solve_states(s: &Scenario) -> Result<(P2PContext, [StateOutcome; 3])> {
    let ctx = build_context(s)?;
    let s0 = StateOutcome::baseline(&ctx.baseline);
    let s1 = solve_state1(&ctx).map_err(Error::at("state 1"))?;
    let s2 = solve_state2(&ctx).map_err(Error::at("state 2"))?;
    Ok((ctx, [s0, s1, s2]))
}

/// Weights and money flows inside both coalitions.
pub fn split_coalitions(
    ctx: &P2PContext,
    spec: &CoalitionSpec,
    coop: &CooperativeOutcome,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<CoalitionLedger> {
    let v_p2p = coop.v_p2p_s3;
    let traffic = match &spec.traffic {
        TrafficSource::Matrices(m) => m.clone(),
        TrafficSource::Uniform { user_counts, shares } => {
            let users: f64 = user_counts.iter().sum();
            let usage: Vec<f64> = shares.iter().map(|s| s * v_p2p / users).collect();
            synthesize_uniform_traffic(user_counts, &usage, ctx.profile.beta)?
        }
    };
    let sides = match &spec.sides {
        UserSides::Ratio(r) => proportional_sides(ctx.baseline.b_user, ctx.v_cs, r)?,
        UserSides::Explicit(v) => v.clone(),
    };
    let mut absorb = |c: crate::coalition::Checked<Vec<f64>>| -> Result<Vec<f64>> {
        if strict {
            c.strict()
        } else {
            warnings.extend(c.warnings);
            Ok(c.value)
        }
    };
    let phi = absorb(pcp_weights(&traffic, v_p2p)?)?;
    let varpi = isp_p2p_volumes(&aggregate(&traffic)?);
    let psi = absorb(isp_weights(
        &varpi,
        &sides,
        &ctx.params,
        &ctx.profile,
        v_p2p,
        ctx.baseline.v_star,
    )?)?;
    distribute(coop.transfer_r, &phi, &psi)
}

pub fn run_pipeline(s: &Scenario) -> Result<Report> {
    let (ctx, [s0, s1, s2]) = solve_states(s)?;
    let transitions = evaluate_transitions(&s0, &s1, &s2);
    let mut flags = Vec::new();
    let mut warnings = Vec::new();

    if reference::is_reference(s) {
        let computed = UtilityPair::from(s2.utilities);
        let table = reference::STATE2_TABLE;
        let tree_leaf = reference::STATE2_TREE_LEAF;
        if !reference::matches(computed, table) || !reference::matches(computed, tree_leaf) {
            flags.push(Flag::ReportedState2Conflict {
                computed,
                table,
                tree_leaf,
            });
        }
    }
    if transitions.cycle {
        flags.push(Flag::TransitionCycle);
    } else if !transitions.consistent() {
        flags.push(Flag::SpneDisagrees {
            walk: transitions.final_state,
            induction: transitions.spne.leaf,
        });
    }

    let computed = transitions.starting_point;
    let start = match s.starting_point {
        Some(used) => {
            flags.push(Flag::StartingPointOverride { computed, used });
            used
        }
        None => computed,
    };

    let stackelberg = solve_stackelberg(&ctx, s.stackelberg).map_err(Error::at("cooperation"))?;
    let cooperation = match settle(&stackelberg, start) {
        Ok(c) => Some(c),
        Err(Error::NegativeSurplus(surplus)) => {
            flags.push(Flag::CooperationNotBeneficial { surplus });
            None
        }
        Err(e) => return Err(Error::at("bargaining")(e)),
    };

    let ledger = match (&s.coalition, &cooperation) {
        (Some(spec), Some(coop)) if coop.v_p2p_s3 > 0.0 => {
            Some(split_coalitions(&ctx, spec, coop, s.strict, &mut warnings).map_err(Error::at("coalition"))?)
        }
        (Some(_), Some(_)) => {
            flags.push(Flag::NoP2pVolume);
            None
        }
        _ => None,
    };

    Ok(Report {
        context: ctx,
        s0,
        s1,
        s2,
        transitions,
        stackelberg,
        cooperation,
        ledger,
        flags,
        warnings,
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.context;
        let b = &c.baseline;
        writeln!(f, "profile: alpha = {:.4}, beta = {:.4}", c.profile.alpha, c.profile.beta)?;
        writeln!(
            f,
            "state 0: v* = {:.4}, p_b = {:.4}, p_s = {:.4}, tau = {:.4}",
            b.v_star, b.p_b, b.p_s, b.tau
        )?;
        writeln!(f, "p2p: v_cs = {:.4}, a = {:.4}, v_tilde = {:.4}", c.v_cs, c.a, c.v_tilde)?;
        writeln!(f, "state   v_p2p      U_ISP      U_CP       U_user")?;
        for s in self.states() {
            let u = s.utilities;
            writeln!(
                f,
                "{:<7} {:<10.4} {:<10.4} {:<10.4} {:.4}",
                s.label, s.v_p2p, u.isp, u.cp, u.user
            )?;
        }
        let t = &self.transitions;
        writeln!(
            f,
            "transitions: T1 = {}, T2 = {} ({}, {}), T3 = {}, final = {}",
            t.t1,
            t.t2_holds(),
            t.t2.0,
            t.t2.1,
            t.t3,
            t.final_state
        )?;
        writeln!(
            f,
            "spne: {} with (U_CP, U_ISP) = ({:.4}, {:.4})",
            t.spne.profile, t.spne.payoff.cp, t.spne.payoff.isp
        )?;
        let g = &self.stackelberg;
        writeln!(
            f,
            "cooperation: gamma = ({:.4}, {:.4}), v_p2p = {:.4}, U_total = {:.4}, U_user = {:.4}",
            g.discounts.gamma_isp, g.discounts.gamma_pcp, g.profit.v_p2p, g.profit.u_total, g.profit.u_user
        )?;
        writeln!(f, "pre-transfer: (U_ISP, U_CP) = ({:.4}, {:.4})", g.profit.u_isp, g.profit.u_cp)?;
        if let Some(co) = &self.cooperation {
            writeln!(
                f,
                "bargaining: start ({:.4}, {:.4}) -> ({:.4}, {:.4}), R = {:.4}, gains {:+.2}% / {:+.2}%",
                co.starting_point.isp,
                co.starting_point.cp,
                co.u_isp_s3,
                co.u_cp_s3,
                co.transfer_r,
                co.isp_improvement(),
                co.cp_improvement()
            )?;
        }
        if let Some(l) = &self.ledger {
            writeln!(f, "phi: {}", fmt_list(&l.phi))?;
            writeln!(f, "psi: {}", fmt_list(&l.psi))?;
            writeln!(f, "pcp payments: {}", fmt_list(&l.pcp_payments))?;
            writeln!(f, "isp receipts: {}", fmt_list(&l.isp_receipts))?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        for flag in &self.flags {
            writeln!(f, "flag: {flag}")?;
        }
        Ok(())
    }
}
