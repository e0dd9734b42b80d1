//! ISP and PCP as one coalition: a Stackelberg game over the two discount
//! rates with users as price takers, then a Nash-bargaining split of the
//! joint profit and the side payment that realizes it.

use crate::baseline::UtilityPair;
use crate::calculus::maximize_grid_2d;
use crate::error::{Error, Result};
use crate::states::P2PContext;

/// Slack allowed on a negative bargaining surplus before it is an error.
pub const SURPLUS_SLACK: f64 = 1e-9;
/// Agreement required between the totals of two utility pairs.
pub const PAIR_TOLERANCE: f64 = 1e-6;

/// Discount on overage bandwidth (`gamma_isp`) and on P2P content (`gamma_pcp`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountPair {
    pub gamma_isp: f64,
    pub gamma_pcp: f64,
}

impl DiscountPair {
    pub fn new(gamma_isp: f64, gamma_pcp: f64) -> Result<Self> {
        for (what, value) in [("gamma_isp", gamma_isp), ("gamma_pcp", gamma_pcp)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange {
                    what,
                    value,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        Ok(Self {
            gamma_isp,
            gamma_pcp,
        })
    }

    pub const NONE: DiscountPair = DiscountPair {
        gamma_isp: 1.0,
        gamma_pcp: 1.0,
    };
}

pub fn user_utility_s3(ctx: &P2PContext, discounts: DiscountPair, v_p2p: f64) -> Result<f64> {
    ctx.check_volume(v_p2p)?;
    Ok(ctx.flat_user_utility(v_p2p, discounts.gamma_isp, discounts.gamma_pcp))
}

/// Coalition profit at the users' best response to a discount pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupProfit {
    pub u_total: f64,
    pub v_p2p: f64,
    pub u_isp: f64,
    pub u_cp: f64,
    pub u_user: f64,
}

pub fn group_profit(ctx: &P2PContext, discounts: DiscountPair) -> Result<GroupProfit> {
    let (x, u_user) = ctx.flat_response(discounts.gamma_isp, discounts.gamma_pcp)?;
    let u_isp = ctx.flat_isp_utility(x, discounts.gamma_isp)?;
    let u_cp = ctx.cp_utility(x, discounts.gamma_pcp);
    Ok(GroupProfit {
        u_total: u_isp + u_cp,
        v_p2p: x,
        u_isp,
        u_cp,
        u_user,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackelbergSettings {
    pub coarse_n: usize,
    pub refine_levels: usize,
}

impl Default for StackelbergSettings {
    fn default() -> Self {
        Self {
            coarse_n: 101,
            refine_levels: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackelbergSolution {
    pub discounts: DiscountPair,
    pub profit: GroupProfit,
    /// Final lattice spacing of the discount search.
    pub resolution: f64,
}

pub fn solve_stackelberg(ctx: &P2PContext, settings: StackelbergSettings) -> Result<StackelbergSolution> {
    let objective = |gi: f64, gp: f64| {
        group_profit(ctx, DiscountPair { gamma_isp: gi, gamma_pcp: gp })
            .map(|g| g.u_total)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let best = maximize_grid_2d(objective, settings.coarse_n, settings.refine_levels)?;
    let discounts = DiscountPair::new(best.point.0, best.point.1)?;
    let profit = group_profit(ctx, discounts)?;
    Ok(StackelbergSolution {
        discounts,
        profit,
        resolution: best.spacing,
    })
}

/// Each side receives its starting value plus half the surplus.
pub fn nash_bargaining_split(u_total: f64, start: UtilityPair) -> Result<UtilityPair> {
    let surplus = u_total - start.total();
    if surplus < -SURPLUS_SLACK {
        return Err(Error::NegativeSurplus(surplus));
    }
    Ok(UtilityPair {
        isp: start.isp + surplus / 2.0,
        cp: start.cp + surplus / 2.0,
    })
}

/// Side payment from the PCP to the ISP moving `pre` to `post`.
pub fn transfer(pre: UtilityPair, post: UtilityPair) -> Result<f64> {
    if (pre.total() - post.total()).abs() > PAIR_TOLERANCE {
        return Err(Error::InconsistentPairs {
            pre: pre.total(),
            post: post.total(),
        });
    }
    Ok(post.isp - pre.isp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooperativeOutcome {
    pub discounts: DiscountPair,
    pub v_p2p_s3: f64,
    pub u_total_s3: f64,
    /// ISP profit before any transfer.
    pub u_isp_pre: f64,
    pub u_cp_pre: f64,
    pub u_user_s3: f64,
    pub starting_point: UtilityPair,
    pub u_isp_s3: f64,
    pub u_cp_s3: f64,
    pub transfer_r: f64,
}

impl CooperativeOutcome {
    /// Percentage gain of the ISP over its starting utility.
    pub fn isp_improvement(&self) -> f64 {
        percent_gain(self.u_isp_s3, self.starting_point.isp)
    }

    pub fn cp_improvement(&self) -> f64 {
        percent_gain(self.u_cp_s3, self.starting_point.cp)
    }

    pub fn pre_split(&self) -> UtilityPair {
        UtilityPair::new(self.u_isp_pre, self.u_cp_pre)
    }

    pub fn post_split(&self) -> UtilityPair {
        UtilityPair::new(self.u_isp_s3, self.u_cp_s3)
    }
}

fn percent_gain(after: f64, before: f64) -> f64 {
    (after - before) / before.abs() * 100.0
}

/// Combines a Stackelberg solution with a bargaining starting point.
pub fn settle(solution: &StackelbergSolution, start: UtilityPair) -> Result<CooperativeOutcome> {
    let g = solution.profit;
    let post = nash_bargaining_split(g.u_total, start)?;
    let pre = UtilityPair::new(g.u_isp, g.u_cp);
    let r = transfer(pre, post)?;
    Ok(CooperativeOutcome {
        discounts: solution.discounts,
        v_p2p_s3: g.v_p2p,
        u_total_s3: g.u_total,
        u_isp_pre: g.u_isp,
        u_cp_pre: g.u_cp,
        u_user_s3: g.u_user,
        starting_point: start,
        u_isp_s3: post.isp,
        u_cp_s3: post.cp,
        transfer_r: r,
    })
}

pub fn cooperate(ctx: &P2PContext, start: UtilityPair, settings: StackelbergSettings) -> Result<CooperativeOutcome> {
    settle(&solve_stackelberg(ctx, settings)?, start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::solve_state0;
    use crate::model::{AccelerationFit, FunctionFamily, MarketParameters, TrafficProfile};
    use crate::states::{solve_state1, user_utility_s1};

    fn ctx() -> P2PContext {
        let p = MarketParameters::reference();
        let f = FunctionFamily::reference(p.b_isp);
        let eq = solve_state0(&p, &f).unwrap();
        P2PContext::new(p, f, eq, TrafficProfile::reference(), &AccelerationFit::default()).unwrap()
    }

    #[test]
    fn discounts_validated() {
        assert!(DiscountPair::new(-0.1, 0.5).is_err());
        assert!(DiscountPair::new(0.5, 1.1).is_err());
        assert!(DiscountPair::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn undiscounted_is_state1() {
        let c = ctx();
        for x in [0.0, 1.0, c.v_tilde, 10.0, 50.0] {
            assert_eq!(
                user_utility_s3(&c, DiscountPair::NONE, x).unwrap(),
                user_utility_s1(&c, x).unwrap()
            );
        }
        let g = group_profit(&c, DiscountPair::NONE).unwrap();
        let s1 = solve_state1(&c).unwrap().utilities;
        assert!((g.u_total - (s1.isp + s1.cp)).abs() < 1e-12);
    }

    #[test]
    fn free_overage_has_no_kink() {
        let c = ctx();
        let d = DiscountPair::new(0.0, 0.5).unwrap();
        let u = |x| user_utility_s3(&c, d, x).unwrap();
        let expect = |x: f64| c.experience_hat(x) - (0.5 * x + c.v_cs) * c.baseline.p_s - c.baseline.tau;
        for x in [1.0, c.v_tilde + 1.0, 40.0] {
            assert!((u(x) - expect(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_discounts() {
        let c = ctx();
        let g = group_profit(&c, DiscountPair::new(0.0, 0.3443).unwrap()).unwrap();
        assert!((g.u_total - 19.4287).abs() < 2e-3);
        assert!((g.v_p2p - 56.0140).abs() < 0.05);
        assert!((g.u_isp - 4.90593).abs() < 2e-3);
        assert!((g.u_cp - 14.5227).abs() < 2e-3);
        assert!((g.u_user - 19.0598).abs() < 2e-3);
    }

    #[test]
    fn reference_stackelberg() {
        let c = ctx();
        let sol = solve_stackelberg(&c, StackelbergSettings::default()).unwrap();
        assert_eq!(sol.discounts.gamma_isp, 0.0);
        assert!((sol.discounts.gamma_pcp - 0.3443).abs() < 1e-3);
        assert!((sol.profit.u_total - 19.4287).abs() < 1e-2);
        assert!((sol.resolution - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn bargaining_split() {
        let s = nash_bargaining_split(19.4287, UtilityPair::new(3.5180, 5.6450)).unwrap();
        assert!((s.isp - 8.6508).abs() < 1e-4);
        assert!((s.cp - 10.7778).abs() < 1e-4);
        let s = nash_bargaining_split(9.0, UtilityPair::new(4.0, 5.0)).unwrap();
        assert_eq!(s, UtilityPair::new(4.0, 5.0));
        let s = nash_bargaining_split(10.0, UtilityPair::new(3.0, 3.0)).unwrap();
        assert_eq!(s, UtilityPair::new(5.0, 5.0));
        assert!(matches!(
            nash_bargaining_split(5.0, UtilityPair::new(3.0, 3.0)),
            Err(Error::NegativeSurplus(_))
        ));
    }

    #[test]
    fn bargaining_split_maximizes_product() {
        let start = UtilityPair::new(3.5180, 5.6450);
        let total = 19.4287;
        let s = nash_bargaining_split(total, start).unwrap();
        let product = |isp: f64| (isp - start.isp) * (total - isp - start.cp);
        let best = product(s.isp);
        let (lo, hi) = (start.isp, total - start.cp);
        for k in 1..=999 {
            let isp = lo + (hi - lo) * k as f64 / 1000.0;
            assert!(best >= product(isp));
        }
    }

    #[test]
    fn transfers() {
        let pre = UtilityPair::new(4.90593, 14.5227);
        // Four-decimal rounding leaves the two totals 3e-5 apart.
        assert!(transfer(pre, UtilityPair::new(8.6508, 10.7778)).is_err());
        let post = UtilityPair::new(8.6508, pre.total() - 8.6508);
        let r = transfer(pre, post).unwrap();
        assert!((r - 3.7449).abs() < 1e-4);
        assert!((r - (pre.cp - post.cp)).abs() < 1e-12);
        let p = UtilityPair::new(2.0, 3.0);
        assert_eq!(transfer(p, p).unwrap(), 0.0);
        assert!(matches!(
            transfer(p, UtilityPair::new(2.0, 4.0)),
            Err(Error::InconsistentPairs { .. })
        ));
    }
}
