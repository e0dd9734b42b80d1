//! State 0: the client/server market before any CP adopts P2P.
//!
//! ISP (bandwidth price `p_b`) and CP (content price `p_s`) lead, users
//! follow with `v = o^{-1}(d p_b + p_s)`. The equilibrium volume solves
//! `o(v) + phi1(v) + phi2(v) = 0`; prices follow in closed form.

use crate::calculus::{find_root_bracketed, scan_sign_changes, Bracket};
use crate::error::{Error, Result};
use crate::model::{FunctionFamily, MarketParameters};

pub const ROOT_SCAN_POINTS: usize = 1000;
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Utilities of ISP, CP and users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utilities {
    pub isp: f64,
    pub cp: f64,
    pub user: f64,
}

/// `(U_ISP, U_CP)` for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityPair {
    pub isp: f64,
    pub cp: f64,
}

impl UtilityPair {
    pub fn new(isp: f64, cp: f64) -> Self {
        Self { isp, cp }
    }

    pub fn total(&self) -> f64 {
        self.isp + self.cp
    }
}

impl From<Utilities> for UtilityPair {
    fn from(u: Utilities) -> Self {
        Self { isp: u.isp, cp: u.cp }
    }
}

/// Second-order terms of the equilibrium conditions; both must be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub isp: f64,
    pub cp: f64,
}

impl SecondOrder {
    pub fn holds(&self) -> bool {
        self.isp < 0.0 && self.cp < 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineEquilibrium {
    pub v_star: f64,
    pub p_b: f64,
    pub p_s: f64,
    /// Flat user fee, `b_user * p_b`.
    pub tau: f64,
    pub b_user: f64,
    pub b_cp: f64,
    pub utilities: Utilities,
    pub second_order: SecondOrder,
    /// `o(v*) + phi1(v*) + phi2(v*)`.
    pub residual: f64,
}

pub fn phi1(params: &MarketParameters, family: &FunctionFamily, v: f64) -> Result<f64> {
    let slope = family.marginal_experience_slope(v);
    Ok(params.c() * v / params.d() * slope - family.isp_cost_derivative(1, v)?)
}

pub fn phi2(_params: &MarketParameters, family: &FunctionFamily, v: f64) -> Result<f64> {
    family.check_in_domain(v)?;
    Ok(v * family.marginal_experience_slope(v) + family.ad_fee.derivative(1, v)
        - family.cp_cost.derivative(1, v))
}

fn phi1_slope(params: &MarketParameters, family: &FunctionFamily, v: f64) -> Result<f64> {
    let o1 = family.marginal_experience_slope(v);
    let o2 = family.marginal_experience_curvature(v);
    Ok(params.c() / params.d() * (o1 + v * o2) - family.isp_cost_derivative(2, v)?)
}

fn phi2_slope(family: &FunctionFamily, v: f64) -> f64 {
    let o1 = family.marginal_experience_slope(v);
    let o2 = family.marginal_experience_curvature(v);
    o1 + v * o2 + family.ad_fee.derivative(2, v) - family.cp_cost.derivative(2, v)
}

/// `o(v) + phi1(v) + phi2(v)`.
pub fn equilibrium_residual(params: &MarketParameters, family: &FunctionFamily, v: f64) -> Result<f64> {
    Ok(family.marginal_experience(v) + phi1(params, family, v)? + phi2(params, family, v)?)
}

/// All roots of the equilibrium condition in `(0, b_isp)`, ascending.
pub fn equilibrium_roots(params: &MarketParameters, family: &FunctionFamily, tol: f64) -> Result<Vec<f64>> {
    let lo = 1e-6;
    let hi = params.b_isp * (1.0 - 1e-6);
    let g = |v: f64| equilibrium_residual(params, family, v).unwrap_or(f64::NAN);
    let mut roots = Vec::new();
    for (a, b) in scan_sign_changes(g, lo, hi, ROOT_SCAN_POINTS) {
        let r = if a == b {
            a
        } else {
            find_root_bracketed(g, Bracket::new(a, b, tol)?)?
        };
        if roots.last().is_none_or(|&last: &f64| (r - last).abs() > tol) {
            roots.push(r);
        }
    }
    Ok(roots)
}

/// Prices, fee and utilities at an equilibrium volume `v`.
pub fn equilibrium_at(params: &MarketParameters, family: &FunctionFamily, v: f64) -> Result<BaselineEquilibrium> {
    let p_b = -phi1(params, family, v)? / params.c();
    let p_s = params.e() * p_b - phi2(params, family, v)?;
    let b_user = v / params.xi_user;
    let b_cp = v / params.xi_cp;
    let tau = b_user * p_b;

    let isp = (b_cp + b_user) * p_b - family.isp_cost_at(v)?;
    let cp = v * p_s + family.ad_fee.eval(v) - b_cp * p_b - family.cp_cost.eval(v);
    let user = family.experience.eval(v) - (p_b / params.xi_user + p_s) * v;

    let second_order = SecondOrder {
        isp: params.c() / params.d() * family.marginal_experience_slope(v) + phi1_slope(params, family, v)?,
        cp: family.marginal_experience_slope(v) + phi2_slope(family, v),
    };
    Ok(BaselineEquilibrium {
        v_star: v,
        p_b,
        p_s,
        tau,
        b_user,
        b_cp,
        utilities: Utilities { isp, cp, user },
        second_order,
        residual: equilibrium_residual(params, family, v)?,
    })
}

fn validate(params: &MarketParameters, eq: &BaselineEquilibrium) -> Result<()> {
    let v = eq.v_star;
    if eq.p_b < 0.0 || eq.p_s < 0.0 {
        return Err(Error::NegativePrice {
            v,
            p_b: eq.p_b,
            p_s: eq.p_s,
        });
    }
    if !eq.second_order.holds() {
        return Err(Error::SecondOrderFailed {
            v,
            isp: eq.second_order.isp,
            cp: eq.second_order.cp,
        });
    }
    let limit = eq.b_user * params.xi_cp;
    if v > limit {
        return Err(Error::NotUnderused { v, limit });
    }
    Ok(())
}

/// Every admissible equilibrium, smallest volume first. If no root is
/// admissible, the rejection of the first root is returned.
pub fn solve_state0_all(
    params: &MarketParameters,
    family: &FunctionFamily,
    tol: f64,
) -> Result<Vec<BaselineEquilibrium>> {
    let roots = equilibrium_roots(params, family, tol)?;
    if roots.is_empty() {
        return Err(Error::NoEquilibriumRoot {
            capacity: params.b_isp,
        });
    }
    let mut ok = Vec::new();
    let mut first_err = None;
    for v in roots {
        match equilibrium_at(params, family, v).and_then(|eq| validate(params, &eq).map(|_| eq)) {
            Ok(eq) => ok.push(eq),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (ok.is_empty(), first_err) {
        (true, Some(e)) => Err(e),
        _ => Ok(ok),
    }
}

/// The smallest admissible equilibrium.
pub fn solve_state0(params: &MarketParameters, family: &FunctionFamily) -> Result<BaselineEquilibrium> {
    Ok(solve_state0_all(params, family, DEFAULT_ROOT_TOL)?[0])
}
