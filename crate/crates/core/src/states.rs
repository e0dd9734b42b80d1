//! States 1 and 2: a share `alpha` of CP traffic turns peer-assisted.
//!
//! In State 1 the ISP keeps flat user pricing (fee `tau` up to the
//! threshold `v_tilde`, volume pricing on the excess). In State 2 it
//! switches users to pure volume pricing at `p_b / xi_user`.

use std::fmt;

use crate::baseline::{BaselineEquilibrium, Utilities};
use crate::calculus::{maximize_piecewise, PiecewiseObjective};
use crate::error::{Error, Result};
use crate::model::{AccelerationFit, FunctionFamily, MarketParameters, TrafficProfile};

/// Upper bound on total volume relative to ISP capacity.
pub const CAP_FRACTION: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateLabel {
    S0,
    S1,
    S2,
    S3,
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StateLabel::S0 => "S0",
            StateLabel::S1 => "S1",
            StateLabel::S2 => "S2",
            StateLabel::S3 => "S3",
        };
        f.pad(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateOutcome {
    pub label: StateLabel,
    pub v_p2p: f64,
    pub v_total: f64,
    pub utilities: Utilities,
}

impl StateOutcome {
    pub fn baseline(eq: &BaselineEquilibrium) -> Self {
        Self {
            label: StateLabel::S0,
            v_p2p: 0.0,
            v_total: eq.v_star,
            utilities: eq.utilities,
        }
    }
}

/// Everything the P2P states share for one traffic profile.
#[derive(Debug, Clone)]
pub struct P2PContext {
    pub params: MarketParameters,
    pub family: FunctionFamily,
    pub baseline: BaselineEquilibrium,
    pub profile: TrafficProfile,
    /// Background client/server volume, `v* (1 - alpha)`.
    pub v_cs: f64,
    /// Experience acceleration factor.
    pub a: f64,
    /// P2P volume that exhausts the flat-rate allotment.
    pub v_tilde: f64,
    /// Largest admissible P2P volume. Zero when `alpha = 0` (no PCP exists).
    pub cap: f64,
}

impl P2PContext {
    pub fn new(
        params: MarketParameters,
        family: FunctionFamily,
        baseline: BaselineEquilibrium,
        profile: TrafficProfile,
        fit: &AccelerationFit,
    ) -> Result<Self> {
        let a = fit.factor(profile.beta)?;
        let v_cs = baseline.v_star * (1.0 - profile.alpha);
        let v_tilde = (baseline.b_user * params.xi_cp - v_cs) / (2.0 - profile.beta);
        let cap = if profile.alpha == 0.0 {
            0.0
        } else {
            params.b_isp.min(family.capacity()) * CAP_FRACTION - v_cs
        };
        if cap < 0.0 {
            return Err(Error::CapacityExceeded {
                volume: v_cs,
                capacity: params.b_isp,
            });
        }
        Ok(Self {
            params,
            family,
            baseline,
            profile,
            v_cs,
            a,
            v_tilde,
            cap,
        })
    }

    pub fn check_volume(&self, v_p2p: f64) -> Result<()> {
        if (0.0..=self.cap).contains(&v_p2p) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "v_p2p",
                value: v_p2p,
                lo: 0.0,
                hi: self.cap,
            })
        }
    }

    /// Per-volume price equivalent of the bandwidth price on the user side.
    pub fn user_volume_price(&self) -> f64 {
        self.baseline.p_b / self.params.xi_user
    }

    pub(crate) fn experience_hat(&self, x: f64) -> f64 {
        self.family.experience.eval(self.a * x + self.v_cs)
    }

    /// Derivative of the accelerated experience with respect to `v_p2p`.
    pub fn experience_hat_slope(&self, x: f64) -> f64 {
        self.a * self.family.marginal_experience(self.a * x + self.v_cs)
    }

    fn cp_cost_hat(&self, x: f64) -> f64 {
        self.family.cp_cost.eval(self.profile.beta * x + self.v_cs)
    }

    /// CP-side bandwidth bill: only the server-provided share is bought.
    fn cp_bandwidth_payment(&self, x: f64) -> f64 {
        (x * self.profile.beta + self.v_cs) / self.params.xi_cp * self.baseline.p_b
    }

    /// User-side traffic of P2P plus background volume.
    pub(crate) fn user_side_volume(&self, x: f64) -> f64 {
        x * (2.0 - self.profile.beta) + self.v_cs
    }

    /// Excess user-side volume billed above the flat allotment.
    pub(crate) fn overage_volume(&self, x: f64) -> f64 {
        (x - self.v_tilde).max(0.0) * (2.0 - self.profile.beta)
    }

    /// User utility under flat pricing with the given discount rates on
    /// overage and content. `(1, 1)` is State 1.
    pub(crate) fn flat_user_utility(&self, x: f64, gamma_isp: f64, gamma_pcp: f64) -> f64 {
        let mut u = self.experience_hat(x) - (x * gamma_pcp + self.v_cs) * self.baseline.p_s - self.baseline.tau;
        if x > self.v_tilde {
            u -= self.overage_volume(x) * self.user_volume_price() * gamma_isp;
        }
        u
    }

    pub(crate) fn flat_isp_utility(&self, x: f64, gamma_isp: f64) -> Result<f64> {
        let overage = self.overage_volume(x) * self.user_volume_price() * gamma_isp;
        Ok(self.baseline.tau + overage + self.cp_bandwidth_payment(x) - self.family.isp_cost_at(x + self.v_cs)?)
    }

    pub(crate) fn cp_utility(&self, x: f64, gamma_pcp: f64) -> f64 {
        let v = x + self.v_cs;
        (x * gamma_pcp + self.v_cs) * self.baseline.p_s + self.family.ad_fee.eval(v)
            - self.cp_bandwidth_payment(x)
            - self.cp_cost_hat(x)
    }

    fn volume_user_utility(&self, x: f64) -> f64 {
        self.experience_hat(x)
            - (x + self.v_cs) * self.baseline.p_s
            - self.user_side_volume(x) * self.user_volume_price()
    }

    /// Best flat-pricing response of users over `[0, cap]`.
    pub(crate) fn flat_response(&self, gamma_isp: f64, gamma_pcp: f64) -> Result<(f64, f64)> {
        let user = move |x: f64| self.flat_user_utility(x, gamma_isp, gamma_pcp);
        let obj = if self.v_tilde > 0.0 && self.v_tilde < self.cap {
            PiecewiseObjective::new(0.0, self.cap, vec![self.v_tilde], vec![Box::new(user), Box::new(user)])?
        } else {
            PiecewiseObjective::single(0.0, self.cap, user)?
        };
        Ok(maximize_piecewise(&obj))
    }

    fn outcome(&self, label: StateLabel, x: f64, isp: f64, user: f64) -> StateOutcome {
        StateOutcome {
            label,
            v_p2p: x,
            v_total: x + self.v_cs,
            utilities: Utilities {
                isp,
                cp: self.cp_utility(x, 1.0),
                user,
            },
        }
    }
}

/// State-1 user utility at P2P volume `v_p2p`.
pub fn user_utility_s1(ctx: &P2PContext, v_p2p: f64) -> Result<f64> {
    ctx.check_volume(v_p2p)?;
    Ok(ctx.flat_user_utility(v_p2p, 1.0, 1.0))
}

pub fn solve_state1(ctx: &P2PContext) -> Result<StateOutcome> {
    let (x, user) = ctx.flat_response(1.0, 1.0)?;
    let isp = ctx.flat_isp_utility(x, 1.0)?;
    Ok(ctx.outcome(StateLabel::S1, x, isp, user))
}

/// State-2 user utility at P2P volume `v_p2p`.
pub fn user_utility_s2(ctx: &P2PContext, v_p2p: f64) -> Result<f64> {
    ctx.check_volume(v_p2p)?;
    Ok(ctx.volume_user_utility(v_p2p))
}

pub fn solve_state2(ctx: &P2PContext) -> Result<StateOutcome> {
    let obj = PiecewiseObjective::single(0.0, ctx.cap, |x| ctx.volume_user_utility(x))?;
    let (x, user) = maximize_piecewise(&obj);
    let isp = ctx.user_side_volume(x) * ctx.user_volume_price() + ctx.cp_bandwidth_payment(x)
        - ctx.family.isp_cost_at(x + ctx.v_cs)?;
    Ok(ctx.outcome(StateLabel::S2, x, isp, user))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::solve_state0;

    fn ctx(alpha: f64, beta: f64) -> P2PContext {
        let p = MarketParameters::reference();
        let f = FunctionFamily::reference(p.b_isp);
        let eq = solve_state0(&p, &f).unwrap();
        P2PContext::new(p, f, eq, TrafficProfile::new(alpha, beta).unwrap(), &AccelerationFit::default()).unwrap()
    }

    #[test]
    fn context_quantities() {
        let c = ctx(0.6, 0.3);
        assert_eq!(c.v_cs, c.baseline.v_star * 0.4);
        assert!((c.a - 4.0).abs() < 1e-12);
        assert!(c.v_tilde > 0.0);
        assert!((c.v_tilde - 3.2936).abs() < 1e-3);
        assert!(c.v_cs + c.cap < 100.0);
    }

    #[test]
    fn s1_user_utility_edges() {
        let c = ctx(0.6, 0.3);
        let eq = c.baseline;
        let at0 = user_utility_s1(&c, 0.0).unwrap();
        let expect = c.family.experience.eval(c.v_cs) - c.v_cs * eq.p_s - eq.tau;
        assert!((at0 - expect).abs() < 1e-12);
        let l = user_utility_s1(&c, c.v_tilde - 1e-9).unwrap();
        let r = user_utility_s1(&c, c.v_tilde + 1e-9).unwrap();
        assert!((l - r).abs() < 1e-6);
        assert!(user_utility_s1(&c, -1.0).is_err());
        assert!(user_utility_s1(&c, c.cap + 1.0).is_err());
    }

    #[test]
    fn s2_user_utility_edges() {
        let c = ctx(0.6, 0.3);
        let eq = c.baseline;
        let at0 = user_utility_s2(&c, 0.0).unwrap();
        let expect = c.family.experience.eval(c.v_cs) - c.v_cs * eq.p_s - c.v_cs * eq.p_b / 0.25;
        assert!((at0 - expect).abs() < 1e-12);
        assert!(user_utility_s2(&c, -0.5).is_err());
    }

    #[test]
    fn s1_stops_at_threshold() {
        let c = ctx(0.6, 0.3);
        let s1 = solve_state1(&c).unwrap();
        assert!((s1.v_p2p - c.v_tilde).abs() < 1e-9);
        assert!(s1.v_p2p > c.baseline.v_star * 0.6);
        let u = s1.utilities;
        assert!((u.isp - 1.5964).abs() < 2e-3);
        assert!((u.cp - 7.2021).abs() < 2e-3);
        assert!((u.user - 9.6230).abs() < 2e-3);
    }

    #[test]
    fn s2_first_order_condition() {
        let c = ctx(0.6, 0.3);
        let s2 = solve_state2(&c).unwrap();
        let marginal = c.baseline.p_s + 1.7 * c.baseline.p_b / 0.25;
        assert!((c.experience_hat_slope(s2.v_p2p) - marginal).abs() < 1e-6);
        assert!((s2.utilities.user - 5.1712).abs() < 2e-3);
        assert!(s2.v_p2p < solve_state1(&c).unwrap().v_p2p);
    }

    #[test]
    fn no_pcp_collapses_to_baseline() {
        let c = ctx(0.0, 0.3);
        let s0 = c.baseline.utilities;
        for s in [solve_state1(&c).unwrap(), solve_state2(&c).unwrap()] {
            assert_eq!(s.v_p2p, 0.0);
            assert!((s.utilities.isp - s0.isp).abs() < 1e-12);
            assert!((s.utilities.cp - s0.cp).abs() < 1e-12);
        }
        assert!((solve_state1(&c).unwrap().utilities.user - s0.user).abs() < 1e-12);
    }
}
