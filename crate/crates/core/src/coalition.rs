//! Splitting the transfer inside each coalition: PCPs pay in proportion to
//! the P2P traffic they cause, ISPs receive in proportion to the free-riding
//! traffic their users generate.

use crate::error::{Error, Result};
use crate::model::{MarketParameters, TrafficProfile};

/// Relative mismatch tolerated between measured traffic and model totals.
pub const TRAFFIC_TOLERANCE: f64 = 1e-3;
/// Allowed deviation of a weight vector's sum from 1 before rescaling.
pub const WEIGHT_TOLERANCE: f64 = 1e-6;

/// A value together with non-fatal consistency warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Checked<T> {
    pub fn clean(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }

    /// Turns the first warning into an error.
    pub fn strict(self) -> Result<T> {
        match self.warnings.into_iter().next() {
            Some(w) => Err(Error::Consistency(w)),
            None => Ok(self.value),
        }
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// One PCP's traffic: `t[j][k]` flows from users in ISP `j` to users in
/// ISP `k`; `server[j]` flows from the PCP's servers into ISP `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcpTraffic {
    t: Vec<Vec<f64>>,
    server: Vec<f64>,
}

impl PcpTraffic {
    pub fn new(t: Vec<Vec<f64>>, server: Vec<f64>) -> Result<Self> {
        let m = server.len();
        if m == 0 {
            return Err(Error::EmptySystem("traffic matrix has no ISPs"));
        }
        if t.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: t.len(),
            });
        }
        for row in &t {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
        }
        for &x in t.iter().flatten().chain(&server) {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "traffic entries must be finite and nonnegative (got {x})"
                )));
            }
        }
        Ok(Self { t, server })
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::new(vec![vec![0.0; m]; m], vec![0.0; m])
    }

    pub fn isp_count(&self) -> usize {
        self.server.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.t
    }

    pub fn server(&self) -> &[f64] {
        &self.server
    }

    pub fn peer_total(&self) -> f64 {
        self.t.iter().flatten().sum()
    }

    pub fn server_total(&self) -> f64 {
        self.server.iter().sum()
    }

    /// All P2P volume attributed to this PCP.
    pub fn total(&self) -> f64 {
        self.peer_total() + self.server_total()
    }
}

/// `phi_i`: share of P2P volume caused by each PCP.
pub fn pcp_weights(traffic: &[PcpTraffic], v_p2p: f64) -> Result<Checked<Vec<f64>>> {
    if !(v_p2p > 0.0) {
        return Err(Error::ZeroVolume);
    }
    if traffic.is_empty() {
        return Err(Error::EmptySystem("no PCPs"));
    }
    let totals: Vec<f64> = traffic.iter().map(PcpTraffic::total).collect();
    let sum: f64 = totals.iter().sum();
    let mut out = Checked::clean(totals.iter().map(|t| t / v_p2p).collect());
    if relative_gap(sum, v_p2p) > TRAFFIC_TOLERANCE {
        out.warnings.push(format!(
            "traffic mismatch: PCP traffic sums to {sum}, P2P volume is {v_p2p}"
        ));
    }
    Ok(out)
}

/// Elementwise sum of all PCPs' traffic.
pub fn aggregate(traffic: &[PcpTraffic]) -> Result<PcpTraffic> {
    let first = traffic.first().ok_or(Error::EmptySystem("no PCPs"))?;
    let m = first.isp_count();
    let mut acc = PcpTraffic::zeros(m)?;
    for p in traffic {
        if p.isp_count() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: p.isp_count(),
            });
        }
        for (row, src) in acc.t.iter_mut().zip(&p.t) {
            for (a, b) in row.iter_mut().zip(src) {
                *a += b;
            }
        }
        for (a, b) in acc.server.iter_mut().zip(&p.server) {
            *a += b;
        }
    }
    Ok(acc)
}

/// `varpi_l`: user-side P2P volume in ISP `l` (0-based). The diagonal entry
/// is counted in both the row and the column, once per direction.
pub fn isp_p2p_volume(agg: &PcpTraffic, l: usize) -> Result<f64> {
    let m = agg.isp_count();
    if l >= m {
        return Err(Error::IndexOutOfRange { index: l, len: m });
    }
    let row: f64 = agg.t[l].iter().sum();
    let col: f64 = agg.t.iter().map(|r| r[l]).sum();
    Ok(row + col + agg.server[l])
}

pub fn isp_p2p_volumes(agg: &PcpTraffic) -> Vec<f64> {
    (0..agg.isp_count())
        .map(|l| isp_p2p_volume(agg, l).expect("index in range"))
        .collect()
}

/// Flat-rate bandwidth and background client/server volume of one ISP's users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IspUserSide {
    pub bandwidth: f64,
    pub background_volume: f64,
}

impl IspUserSide {
    pub fn new(bandwidth: f64, background_volume: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ISP user bandwidth must be positive (got {bandwidth})"
            )));
        }
        if !(background_volume >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "background volume must be nonnegative (got {background_volume})"
            )));
        }
        Ok(Self {
            bandwidth,
            background_volume,
        })
    }

    /// Total user-side volume given this ISP's P2P volume.
    pub fn total_volume(&self, varpi: f64) -> f64 {
        self.background_volume + varpi
    }
}

/// Splits system-wide user bandwidth and background volume across ISPs in
/// proportion to `ratio`.
pub fn proportional_sides(b_user: f64, v_cs: f64, ratio: &[f64]) -> Result<Vec<IspUserSide>> {
    if ratio.is_empty() {
        return Err(Error::EmptySystem("no ISPs"));
    }
    if ratio.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter("ISP split ratio entries must be positive".into()));
    }
    let sum: f64 = ratio.iter().sum();
    ratio
        .iter()
        .map(|r| IspUserSide::new(b_user * r / sum, v_cs * r / sum))
        .collect()
}

/// `psi_l`: each ISP's share of the free-riding traffic.
///
/// Warnings are attached when the background volumes do not reproduce the
/// system-wide offset `v_s0 * alpha`, or when the raw weights miss 1 by more
/// than [`WEIGHT_TOLERANCE`]; in the latter case they are rescaled.
pub fn isp_weights(
    varpi: &[f64],
    sides: &[IspUserSide],
    params: &MarketParameters,
    profile: &TrafficProfile,
    v_p2p: f64,
    v_s0: f64,
) -> Result<Checked<Vec<f64>>> {
    if varpi.is_empty() {
        return Err(Error::EmptySystem("no ISPs"));
    }
    if sides.len() != varpi.len() {
        return Err(Error::DimensionMismatch {
            expected: varpi.len(),
            found: sides.len(),
        });
    }
    let xi = params.xi_user;
    let offset = v_s0 * profile.alpha;
    let denom = v_p2p * (2.0 - profile.beta) - offset;
    if !(denom > 0.0) {
        return Err(Error::NonPositiveFreeRiding(denom));
    }

    let mut out = Checked::clean(Vec::with_capacity(varpi.len()));
    let background: f64 = sides.iter().map(|s| s.bandwidth * xi - s.background_volume).sum();
    if relative_gap(background, offset) > TRAFFIC_TOLERANCE {
        out.warnings.push(format!(
            "inconsistent background traffic: unused flat bandwidth sums to {background}, expected {offset}"
        ));
    }

    let slack = 1e-12 * denom;
    for (l, (&w, side)) in varpi.iter().zip(sides).enumerate() {
        let free = side.total_volume(w) - side.bandwidth * xi;
        if free < -slack {
            return Err(Error::NegativeFreeRiding { index: l, volume: free });
        }
        out.value.push(free.max(0.0) / denom);
    }

    let sum: f64 = out.value.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        out.warnings.push(format!(
            "traffic mismatch: ISP weights sum to {sum} before rescaling"
        ));
        if sum > 0.0 {
            out.value.iter_mut().for_each(|p| *p /= sum);
        }
    }
    Ok(out)
}

/// Traffic of `usage.len()` PCPs under uniform random peer selection among
/// identical users, `user_counts[j]` of them in ISP `j`.
pub fn synthesize_uniform_traffic(user_counts: &[f64], usage: &[f64], beta: f64) -> Result<Vec<PcpTraffic>> {
    if user_counts.is_empty() {
        return Err(Error::EmptySystem("no ISPs"));
    }
    if usage.is_empty() {
        return Err(Error::EmptySystem("no PCPs"));
    }
    if user_counts.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::InvalidParameter("user counts must be positive".into()));
    }
    if usage.iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::InvalidParameter("per-user usage must be nonnegative".into()));
    }
    TrafficProfile::new(0.0, beta)?;
    let total: f64 = user_counts.iter().sum();
    usage
        .iter()
        .map(|&sigma| {
            let t = user_counts
                .iter()
                .map(|&nj| {
                    user_counts
                        .iter()
                        .map(|&nk| sigma * (1.0 - beta) * nk * nj / total)
                        .collect()
                })
                .collect();
            let server = user_counts.iter().map(|&n| sigma * n * beta).collect();
            PcpTraffic::new(t, server)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionLedger {
    pub transfer: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Amount each PCP pays into the transfer.
    pub pcp_payments: Vec<f64>,
    /// Amount each ISP receives from it.
    pub isp_receipts: Vec<f64>,
}

fn check_weights(w: &[f64], what: &'static str) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::EmptySystem(what));
    }
    let sum: f64 = w.iter().sum();
    if w.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > TRAFFIC_TOLERANCE {
        return Err(Error::WeightSum(sum));
    }
    Ok(sum)
}

/// Payments `R * phi_i` and receipts `R * psi_l`. Weight vectors must sum
/// to 1 within [`TRAFFIC_TOLERANCE`]; they are normalized so that both
/// sides balance to `R` exactly.
pub fn distribute(r: f64, phi: &[f64], psi: &[f64]) -> Result<CoalitionLedger> {
    let sp = check_weights(phi, "no PCPs")?;
    let si = check_weights(psi, "no ISPs")?;
    Ok(CoalitionLedger {
        transfer: r,
        phi: phi.to_vec(),
        psi: psi.to_vec(),
        pcp_payments: phi.iter().map(|p| r * p / sp).collect(),
        isp_receipts: psi.iter().map(|p| r * p / si).collect(),
    })
}
