//! Market parameters, the scalar model functions and the P2P transforms
//! shared by every solver.
//!
//! Volumes, bandwidths and money are plain `f64`s. Each model function is a
//! [`ScalarFn`]: a value map plus as many analytic derivatives as the caller
//! supplies. Missing derivatives fall back to central differences.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative width of the excluded band below ISP capacity.
pub const CAPACITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParameters {
    pub xi_cp: f64,
    pub xi_user: f64,
    pub b_isp: f64,
}

impl MarketParameters {
    pub fn new(xi_cp: f64, xi_user: f64, b_isp: f64) -> Result<Self> {
        if !(xi_user > 0.0 && xi_user <= xi_cp && xi_cp <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth usage ratios must satisfy 0 < xi_user <= xi_cp <= 1 (got xi_user = {xi_user}, xi_cp = {xi_cp})"
            )));
        }
        if !(b_isp > 0.0 && b_isp.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ISP capacity must be positive and finite (got {b_isp})"
            )));
        }
        Ok(Self {
            xi_cp,
            xi_user,
            b_isp,
        })
    }

    /// `xi_cp = 0.75`, `xi_user = 0.25`, `b_isp = 100`.
    pub fn reference() -> Self {
        Self {
            xi_cp: 0.75,
            xi_user: 0.25,
            b_isp: 100.0,
        }
    }

    /// Bandwidth billed per unit volume, summed over both sides.
    pub fn c(&self) -> f64 {
        self.d() + self.e()
    }

    /// User-side bandwidth per unit volume.
    pub fn d(&self) -> f64 {
        1.0 / self.xi_user
    }

    /// CP-side bandwidth per unit volume.
    pub fn e(&self) -> f64 {
        1.0 / self.xi_cp
    }
}

type Map = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A smooth scalar function with optional analytic derivatives.
#[derive(Clone)]
pub struct ScalarFn {
    value: Map,
    derivatives: Vec<Map>,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn")
            .field("analytic_derivatives", &self.derivatives.len())
            .finish()
    }
}

impl ScalarFn {
    pub fn new(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            derivatives: Vec::new(),
        }
    }

    /// Appends the next-order analytic derivative.
    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivatives.push(Arc::new(d));
        self
    }

    pub fn analytic_orders(&self) -> usize {
        self.derivatives.len()
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    /// Derivative of the given order. Orders beyond the supplied analytic
    /// ones are central differences of the highest available order.
    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        if order == 0 {
            return self.eval(x);
        }
        if let Some(d) = self.derivatives.get(order - 1) {
            return d(x);
        }
        let h = 1e-4 * x.abs().max(1.0);
        (self.derivative(order - 1, x + h) - self.derivative(order - 1, x - h)) / (2.0 * h)
    }

    /// `k * f`, with derivatives scaled alongside.
    pub fn scaled(&self, k: f64) -> Self {
        let value = self.value.clone();
        Self {
            value: Arc::new(move |x| k * value(x)),
            derivatives: self
                .derivatives
                .iter()
                .map(|d| {
                    let d = d.clone();
                    Arc::new(move |x| k * d(x)) as Map
                })
                .collect(),
        }
    }
}

/// Overridable constants of the built-in logarithmic family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceParams {
    /// Coefficient of `ln(v+1)` in both cost functions.
    pub log_cost: f64,
    pub cp_fixed: f64,
    pub congestion: f64,
    pub isp_fixed: f64,
    pub ad_scale: f64,
    pub experience_scale: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            log_cost: 1.0,
            cp_fixed: 0.2,
            congestion: 100.0,
            isp_fixed: 0.4,
            ad_scale: 5.0,
            experience_scale: 5.0,
        }
    }
}

/// The four model functions: CP cost, ISP cost, advertisement revenue and
/// user experience. The marginal experience `o = E'` must be strictly
/// decreasing.
#[derive(Clone)]
pub struct FunctionFamily {
    pub cp_cost: ScalarFn,
    pub isp_cost: ScalarFn,
    pub ad_fee: ScalarFn,
    pub experience: ScalarFn,
    marginal_inverse: Option<Map>,
    capacity: f64,
}

impl fmt::Debug for FunctionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionFamily")
            .field("cp_cost", &self.cp_cost)
            .field("isp_cost", &self.isp_cost)
            .field("ad_fee", &self.ad_fee)
            .field("experience", &self.experience)
            .field("analytic_inverse", &self.marginal_inverse.is_some())
            .field("capacity", &self.capacity)
            .finish()
    }
}

impl FunctionFamily {
    /// Builds a family from user-supplied maps. `capacity` is where the ISP
    /// cost becomes singular (`f64::INFINITY` if it never does).
    pub fn new(
        cp_cost: ScalarFn,
        isp_cost: ScalarFn,
        ad_fee: ScalarFn,
        experience: ScalarFn,
        capacity: f64,
    ) -> Self {
        Self {
            cp_cost,
            isp_cost,
            ad_fee,
            experience,
            marginal_inverse: None,
            capacity,
        }
    }

    pub fn with_marginal_inverse(mut self, inv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.marginal_inverse = Some(Arc::new(inv));
        self
    }

    pub fn reference(b_isp: f64) -> Self {
        Self::reference_with(ReferenceParams::default(), b_isp)
    }

    pub fn reference_with(p: ReferenceParams, b_isp: f64) -> Self {
        let ReferenceParams {
            log_cost,
            cp_fixed,
            congestion,
            isp_fixed,
            ad_scale,
            experience_scale: es,
        } = p;
        let b = b_isp;
        let cp_cost = ScalarFn::new(move |v| log_cost * (v + 1.0).ln() + cp_fixed)
            .with_derivative(move |v| log_cost / (v + 1.0))
            .with_derivative(move |v| -log_cost / (v + 1.0).powi(2));
        let isp_cost = ScalarFn::new(move |v| {
            log_cost * (v + 1.0).ln() + congestion * (1.0 / (b - v) - 1.0 / b) + isp_fixed
        })
        .with_derivative(move |v| log_cost / (v + 1.0) + congestion / (b - v).powi(2))
        .with_derivative(move |v| -log_cost / (v + 1.0).powi(2) + 2.0 * congestion / (b - v).powi(3));
        let ad_fee = ScalarFn::new(move |v| ad_scale * (v + 1.0).ln())
            .with_derivative(move |v| ad_scale / (v + 1.0))
            .with_derivative(move |v| -ad_scale / (v + 1.0).powi(2));
        let experience = ScalarFn::new(move |v| es * (v + 1.0).ln())
            .with_derivative(move |v| es / (v + 1.0))
            .with_derivative(move |v| -es / (v + 1.0).powi(2))
            .with_derivative(move |v| 2.0 * es / (v + 1.0).powi(3));
        Self::new(cp_cost, isp_cost, ad_fee, experience, b_isp).with_marginal_inverse(move |y| es / y - 1.0)
    }

    /// Every function multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        let inverse = self.marginal_inverse.clone().map(|inv| {
            Arc::new(move |y: f64| inv(y / k)) as Map
        });
        Self {
            cp_cost: self.cp_cost.scaled(k),
            isp_cost: self.isp_cost.scaled(k),
            ad_fee: self.ad_fee.scaled(k),
            experience: self.experience.scaled(k),
            marginal_inverse: inverse,
            capacity: self.capacity,
        }
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Upper end of the ISP cost's usable domain.
    pub fn capacity_limit(&self) -> f64 {
        self.capacity * (1.0 - CAPACITY_EPSILON)
    }

    pub fn check_in_domain(&self, v: f64) -> Result<()> {
        if v >= self.capacity_limit() {
            Err(Error::CapacityExceeded {
                volume: v,
                capacity: self.capacity,
            })
        } else {
            Ok(())
        }
    }

    pub fn isp_cost_at(&self, v: f64) -> Result<f64> {
        self.check_in_domain(v)?;
        Ok(self.isp_cost.eval(v))
    }

    pub fn isp_cost_derivative(&self, order: usize, v: f64) -> Result<f64> {
        self.check_in_domain(v)?;
        Ok(self.isp_cost.derivative(order, v))
    }

    /// Marginal experience `o(v) = dE/dv`.
    #[inline]
    pub fn marginal_experience(&self, v: f64) -> f64 {
        self.experience.derivative(1, v)
    }

    /// `do/dv`.
    pub fn marginal_experience_slope(&self, v: f64) -> f64 {
        self.experience.derivative(2, v)
    }

    /// `d^2 o/dv^2`.
    pub fn marginal_experience_curvature(&self, v: f64) -> f64 {
        self.experience.derivative(3, v)
    }

    /// `o^{-1}(y)`: the volume at which marginal experience equals `y`.
    pub fn marginal_inverse(&self, y: f64) -> Result<f64> {
        if let Some(inv) = &self.marginal_inverse {
            return Ok(inv(y));
        }
        let hi = if self.capacity.is_finite() {
            self.capacity_limit()
        } else {
            1e9
        };
        let bracket = crate::calculus::Bracket::new(0.0, hi, 1e-13 * hi.max(1.0))?;
        crate::calculus::find_root_bracketed(|v| self.marginal_experience(v) - y, bracket)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficProfile {
    /// PCP share of CP traffic.
    pub alpha: f64,
    /// Share of PCP content served from the PCP's own servers.
    pub beta: f64,
}

impl TrafficProfile {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: alpha,
                lo: 0.0,
                hi: 1.0,
            });
        }
        check_beta(beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn reference() -> Self {
        Self {
            alpha: 0.6,
            beta: 0.3,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "beta",
            value: beta,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// Linear fit of the P2P experience acceleration factor against `beta`,
/// through two empirical anchor points `(beta, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelerationFit {
    pub anchor_low: (f64, f64),
    pub anchor_high: (f64, f64),
}

impl Default for AccelerationFit {
    fn default() -> Self {
        Self {
            anchor_low: (0.3, 4.0),
            anchor_high: (1.0, 1.0),
        }
    }
}

impl AccelerationFit {
    pub fn new(anchor_low: (f64, f64), anchor_high: (f64, f64)) -> Result<Self> {
        if anchor_low.0 == anchor_high.0 {
            return Err(Error::InvalidParameter(
                "acceleration anchors must have distinct beta".into(),
            ));
        }
        Ok(Self {
            anchor_low,
            anchor_high,
        })
    }

    pub fn factor(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let (b0, a0) = self.anchor_low;
        let (b1, a1) = self.anchor_high;
        let a = a0 + (a1 - a0) * (beta - b0) / (b1 - b0);
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "acceleration factor {a} at beta = {beta} is not positive"
            )));
        }
        Ok(a)
    }
}

/// Acceleration factor from the default two-point fit, `1 + (30/7)(1 - beta)`.
pub fn acceleration_factor(profile: &TrafficProfile) -> Result<f64> {
    AccelerationFit::default().factor(profile.beta)
}

fn check_volume_order(v: f64, v_cs: f64) -> Result<()> {
    if v_cs < 0.0 {
        return Err(Error::OutOfRange {
            what: "v_cs",
            value: v_cs,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if v < v_cs {
        return Err(Error::OutOfRange {
            what: "v",
            value: v,
            lo: v_cs,
            hi: f64::INFINITY,
        });
    }
    Ok(())
}

/// Experience of total volume `v` when the part above `v_cs` is P2P-accelerated.
pub fn accelerated_experience(family: &FunctionFamily, v: f64, v_cs: f64, a: f64) -> Result<f64> {
    check_volume_order(v, v_cs)?;
    Ok(family.experience.eval(a * (v - v_cs) + v_cs))
}

/// CP cost of total volume `v` when only a `beta` share of the P2P part
/// leaves the CP's servers.
pub fn alleviated_cost(family: &FunctionFamily, v: f64, v_cs: f64, beta: f64) -> Result<f64> {
    check_volume_order(v, v_cs)?;
    check_beta(beta)?;
    Ok(family.cp_cost.eval((v - v_cs) * beta + v_cs))
}
