//! Scenario files: flat `key = value` lines with dotted section prefixes.
//!
//! ```text
//! # market
//! market.xi_cp = 0.75
//! market.xi_user = 0.25
//! profile.alpha = 0.6
//! coalition.pcp.1.matrix = pcp1.csv
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors. Matrix paths are relative to the scenario file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::baseline::{UtilityPair, DEFAULT_ROOT_TOL};
use crate::coalition::{IspUserSide, PcpTraffic};
use crate::cooperation::StackelbergSettings;
use crate::error::{Error, Result};
use crate::model::{AccelerationFit, FunctionFamily, MarketParameters, ReferenceParams, TrafficProfile};

/// Inclusive, evenly spaced range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Range {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(min <= max) || (steps == 1 && min != max) {
            return Err(Error::Scenario(format!(
                "range [{min}, {max}] with {steps} steps is empty or inverted"
            )));
        }
        Ok(Self { min, max, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        (0..self.steps)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRanges {
    pub alpha: Range,
    pub beta: Range,
    /// Points per axis of the discount surface.
    pub gamma_steps: usize,
}

impl Default for SweepRanges {
    fn default() -> Self {
        Self {
            alpha: Range {
                min: 0.3,
                max: 0.9,
                steps: 20,
            },
            beta: Range {
                min: 0.05,
                max: 0.5,
                steps: 20,
            },
            gamma_steps: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrafficSource {
    Matrices(Vec<PcpTraffic>),
    /// Uniform peer selection; PCP `i` carries `shares[i]` of the P2P volume.
    Uniform { user_counts: Vec<f64>, shares: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum UserSides {
    /// Split system-wide bandwidth and background volume by this ratio.
    Ratio(Vec<f64>),
    Explicit(Vec<IspUserSide>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionSpec {
    pub traffic: TrafficSource,
    pub sides: UserSides,
}

impl CoalitionSpec {
    pub fn isp_count(&self) -> usize {
        match &self.traffic {
            TrafficSource::Matrices(m) => m[0].isp_count(),
            TrafficSource::Uniform { user_counts, .. } => user_counts.len(),
        }
    }
}

/// Default uniform coalition: three ISPs with users 2:3:5, two PCPs at 0.4/0.6.
pub fn default_uniform_coalition() -> CoalitionSpec {
    CoalitionSpec {
        traffic: TrafficSource::Uniform {
            user_counts: vec![2.0, 3.0, 5.0],
            shares: vec![0.4, 0.6],
        },
        sides: UserSides::Ratio(vec![2.0, 3.0, 5.0]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: MarketParameters,
    pub family: ReferenceParams,
    pub acceleration: AccelerationFit,
    pub profile: TrafficProfile,
    pub sweep: SweepRanges,
    pub stackelberg: StackelbergSettings,
    /// Fixed bargaining starting point; `None` uses the SPNE leaf.
    pub starting_point: Option<UtilityPair>,
    pub coalition: Option<CoalitionSpec>,
    pub tol: f64,
    /// Upgrade consistency warnings to errors.
    pub strict: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: MarketParameters::reference(),
            family: ReferenceParams::default(),
            acceleration: AccelerationFit::default(),
            profile: TrafficProfile::reference(),
            sweep: SweepRanges::default(),
            stackelberg: StackelbergSettings::default(),
            starting_point: None,
            coalition: None,
            tol: DEFAULT_ROOT_TOL,
            strict: false,
            output_dir: None,
        }
    }
}

impl Scenario {
    pub fn function_family(&self) -> FunctionFamily {
        FunctionFamily::reference_with(self.family, self.params.b_isp)
    }

    pub fn with_profile(&self, profile: TrafficProfile) -> Self {
        Self {
            profile,
            ..self.clone()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses scenario text; relative matrix paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut kv = Entries::parse(text)?;
        let mut s = Scenario::default();

        let xi_cp = kv.f64("market.xi_cp")?.unwrap_or(s.params.xi_cp);
        let xi_user = kv.f64("market.xi_user")?.unwrap_or(s.params.xi_user);
        let b_isp = kv.f64("market.b_isp")?.unwrap_or(s.params.b_isp);
        s.params = MarketParameters::new(xi_cp, xi_user, b_isp).map_err(scenario_err)?;

        if let Some(kind) = kv.take("family.kind") {
            if kind != "reference" {
                return Err(Error::Scenario(format!("unknown function family '{kind}'")));
            }
        }
        let f = &mut s.family;
        for (key, slot) in [
            ("family.log_cost", &mut f.log_cost),
            ("family.cp_fixed", &mut f.cp_fixed),
            ("family.congestion", &mut f.congestion),
            ("family.isp_fixed", &mut f.isp_fixed),
            ("family.ad_scale", &mut f.ad_scale),
            ("family.experience_scale", &mut f.experience_scale),
        ] {
            if let Some(v) = kv.f64(key)? {
                *slot = v;
            }
        }
        if !(s.family.experience_scale > 0.0) {
            return Err(Error::Scenario("family.experience_scale must be positive".into()));
        }

        let mut low = s.acceleration.anchor_low;
        let mut high = s.acceleration.anchor_high;
        for (key, slot) in [
            ("acceleration.low_beta", &mut low.0),
            ("acceleration.low_factor", &mut low.1),
            ("acceleration.high_beta", &mut high.0),
            ("acceleration.high_factor", &mut high.1),
        ] {
            if let Some(v) = kv.f64(key)? {
                *slot = v;
            }
        }
        s.acceleration = AccelerationFit::new(low, high).map_err(scenario_err)?;

        let alpha = kv.f64("profile.alpha")?.unwrap_or(s.profile.alpha);
        let beta = kv.f64("profile.beta")?.unwrap_or(s.profile.beta);
        s.profile = TrafficProfile::new(alpha, beta).map_err(scenario_err)?;

        let sw = &s.sweep;
        let alpha = Range::new(
            kv.f64("sweep.alpha_min")?.unwrap_or(sw.alpha.min),
            kv.f64("sweep.alpha_max")?.unwrap_or(sw.alpha.max),
            kv.usize("sweep.alpha_steps")?.unwrap_or(sw.alpha.steps),
        )?;
        let beta = Range::new(
            kv.f64("sweep.beta_min")?.unwrap_or(sw.beta.min),
            kv.f64("sweep.beta_max")?.unwrap_or(sw.beta.max),
            kv.usize("sweep.beta_steps")?.unwrap_or(sw.beta.steps),
        )?;
        let gamma_steps = kv.usize("sweep.gamma_steps")?.unwrap_or(sw.gamma_steps);
        if gamma_steps < 2 {
            return Err(Error::Scenario("sweep.gamma_steps must be at least 2".into()));
        }
        s.sweep = SweepRanges {
            alpha,
            beta,
            gamma_steps,
        };

        if let Some(n) = kv.usize("cooperation.coarse_n")? {
            s.stackelberg.coarse_n = n;
        }
        if let Some(n) = kv.usize("cooperation.refine_levels")? {
            s.stackelberg.refine_levels = n;
        }
        if s.stackelberg.coarse_n < 11 || s.stackelberg.refine_levels < 2 {
            return Err(Error::Scenario(
                "cooperation.coarse_n must be >= 11 and cooperation.refine_levels >= 2".into(),
            ));
        }
        if let Some(sp) = kv.take("cooperation.starting_point") {
            if sp != "computed" {
                let v = parse_list(&sp, "cooperation.starting_point")?;
                if v.len() != 2 {
                    return Err(Error::Scenario(
                        "cooperation.starting_point takes 'computed' or 'u_isp, u_cp'".into(),
                    ));
                }
                s.starting_point = Some(UtilityPair::new(v[0], v[1]));
            }
        }

        s.coalition = parse_coalition(&mut kv, base)?;

        if let Some(t) = kv.f64("solver.tol")? {
            if !(t > 0.0) {
                return Err(Error::Scenario("solver.tol must be positive".into()));
            }
            s.tol = t;
        }
        if let Some(v) = kv.take("solver.strict") {
            s.strict = parse_bool(&v, "solver.strict")?;
        }
        s.output_dir = kv.take("output.dir").map(|d| base.join(d));

        kv.finish()?;
        Ok(s)
    }
}

fn scenario_err(e: Error) -> Error {
    Error::Scenario(e.to_string())
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Scenario(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(Error::Scenario(format!("line {}: empty key", i + 1)));
            }
            if let Some((first, _)) = map.insert(k.clone(), (i + 1, v)) {
                return Err(Error::Scenario(format!(
                    "line {}: key '{k}' already set on line {first}",
                    i + 1
                )));
            }
        }
        Ok(Self(map))
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key).map(|(_, v)| v)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Scenario(format!("{key}: '{v}' is not a finite number")))
            })
            .transpose()
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Scenario(format!("{key}: '{v}' is not a count")))
            })
            .transpose()
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key).map(|v| parse_list(&v, key)).transpose()
    }

    fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.0.keys().filter(|k| k.starts_with(prefix)).cloned().collect()
    }

    fn finish(self) -> Result<()> {
        match self.0.into_iter().next() {
            Some((k, (line, _))) => Err(Error::Scenario(format!("line {line}: unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

fn parse_list(v: &str, key: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Scenario(format!("{key}: '{}' is not a finite number", x.trim())))
        })
        .collect()
}

fn parse_bool(v: &str, key: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Scenario(format!("{key}: '{v}' is not a boolean"))),
    }
}

fn parse_coalition(kv: &mut Entries, base: &Path) -> Result<Option<CoalitionSpec>> {
    let matrix_keys = kv.keys_with_prefix("coalition.pcp.");
    let user_counts = kv.list("coalition.user_counts")?;
    let shares = kv.list("coalition.shares")?;
    let split = kv.list("coalition.isp_split")?;
    let bandwidth = kv.list("coalition.bandwidth")?;
    let background = kv.list("coalition.background")?;

    let traffic = match (matrix_keys.is_empty(), user_counts, shares) {
        (true, None, None) => {
            if split.is_some() || bandwidth.is_some() || background.is_some() {
                return Err(Error::Scenario(
                    "coalition user-side keys given without traffic (matrices or user_counts)".into(),
                ));
            }
            return Ok(None);
        }
        (false, None, None) => {
            let mut indexed = Vec::new();
            for key in matrix_keys {
                let idx = key
                    .strip_prefix("coalition.pcp.")
                    .and_then(|r| r.strip_suffix(".matrix"))
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| Error::Scenario(format!("unknown key '{key}'")))?;
                let path = kv.take(&key).expect("key listed");
                indexed.push((idx, base.join(path)));
            }
            indexed.sort();
            for (expect, (idx, _)) in (1..).zip(&indexed) {
                if *idx != expect {
                    return Err(Error::Scenario(format!(
                        "coalition PCP matrices must be numbered 1..n (missing {expect})"
                    )));
                }
            }
            let matrices = indexed
                .iter()
                .map(|(_, p)| read_traffic_csv(p))
                .collect::<Result<Vec<_>>>()?;
            let m = matrices[0].isp_count();
            if let Some(bad) = matrices.iter().find(|t| t.isp_count() != m) {
                return Err(Error::Scenario(format!(
                    "PCP matrices disagree on ISP count ({m} vs {})",
                    bad.isp_count()
                )));
            }
            TrafficSource::Matrices(matrices)
        }
        (true, Some(user_counts), Some(shares)) => {
            if user_counts.is_empty() || user_counts.iter().any(|&n| !(n > 0.0)) {
                return Err(Error::Scenario("coalition.user_counts must be positive".into()));
            }
            if shares.iter().any(|&s| !(s >= 0.0)) {
                return Err(Error::Scenario("coalition.shares must be nonnegative".into()));
            }
            TrafficSource::Uniform { user_counts, shares }
        }
        _ => {
            return Err(Error::Scenario(
                "coalition traffic needs either coalition.pcp.N.matrix files or both coalition.user_counts and coalition.shares".into(),
            ))
        }
    };

    let m = match &traffic {
        TrafficSource::Matrices(t) => t[0].isp_count(),
        TrafficSource::Uniform { user_counts, .. } => user_counts.len(),
    };
    let sides = match (split, bandwidth, background) {
        (None, Some(b), Some(v)) => {
            if b.len() != m || v.len() != m {
                return Err(Error::Scenario(format!(
                    "coalition.bandwidth and coalition.background need {m} entries"
                )));
            }
            UserSides::Explicit(
                b.iter()
                    .zip(&v)
                    .map(|(&b, &v)| IspUserSide::new(b, v))
                    .collect::<Result<_>>()
                    .map_err(scenario_err)?,
            )
        }
        (split, None, None) => {
            let ratio = split.unwrap_or_else(|| match &traffic {
                TrafficSource::Uniform { user_counts, .. } => user_counts.clone(),
                TrafficSource::Matrices(_) => vec![1.0; m],
            });
            if ratio.len() != m || ratio.iter().any(|&r| !(r > 0.0)) {
                return Err(Error::Scenario(format!(
                    "coalition.isp_split needs {m} positive entries"
                )));
            }
            UserSides::Ratio(ratio)
        }
        _ => {
            return Err(Error::Scenario(
                "give either coalition.isp_split or both coalition.bandwidth and coalition.background".into(),
            ))
        }
    };
    Ok(Some(CoalitionSpec { traffic, sides }))
}

/// Reads one PCP's traffic: header `from,to_isp_1..to_isp_m`, one row per
/// source ISP, then a `server` row.
pub fn read_traffic_csv(path: &Path) -> Result<PcpTraffic> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    let m = rdr.headers()?.len().saturating_sub(1);
    if m == 0 {
        return Err(Error::Scenario(format!("{}: no ISP columns", path.display())));
    }
    let mut rows = Vec::new();
    let mut server = None;
    for rec in rdr.records() {
        let rec = rec?;
        let label = rec.get(0).unwrap_or("");
        let values = rec
            .iter()
            .skip(1)
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|_| Error::Scenario(format!("{}: '{x}' is not a number", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        if label == "server" {
            server = Some(values);
        } else {
            rows.push(values);
        }
    }
    let server = server.ok_or_else(|| Error::Scenario(format!("{}: missing server row", path.display())))?;
    PcpTraffic::new(rows, server).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
}

pub fn write_traffic_csv(path: &Path, traffic: &PcpTraffic) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let m = traffic.isp_count();
    let mut header = vec!["from".to_string()];
    header.extend((1..=m).map(|k| format!("to_isp_{k}")));
    w.write_record(&header)?;
    for (j, row) in traffic.matrix().iter().enumerate() {
        let mut rec = vec![format!("isp_{}", j + 1)];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    let mut rec = vec!["server".to_string()];
    rec.extend(traffic.server().iter().map(|x| x.to_string()));
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let s = Scenario::parse("", Path::new(".")).unwrap();
        assert_eq!(s, Scenario::default());
        let s = Scenario::parse(
            "# comment\nmarket.xi_user = 0.1\nprofile.alpha=0.5 # trailing\ncooperation.starting_point = 3.5180, 5.6450\nsweep.alpha_steps = 3\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(s.params.xi_user, 0.1);
        assert_eq!(s.profile.alpha, 0.5);
        assert_eq!(s.starting_point, Some(UtilityPair::new(3.518, 5.645)));
        let pts = s.sweep.alpha.points();
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().zip([0.3, 0.6, 0.9]).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_input() {
        let p = Path::new(".");
        assert!(Scenario::parse("market.xi_user 0.1", p).is_err());
        assert!(Scenario::parse("market.bogus = 1", p).is_err());
        assert!(Scenario::parse("profile.alpha = 0.2\nprofile.alpha = 0.3", p).is_err());
        assert!(Scenario::parse("profile.alpha = x", p).is_err());
        assert!(Scenario::parse("market.xi_user = 0.9", p).is_err());
        assert!(Scenario::parse("sweep.alpha_min = 0.9\nsweep.alpha_max = 0.3", p).is_err());
        assert!(Scenario::parse("coalition.user_counts = 2,3,5", p).is_err());
        assert!(Scenario::parse("coalition.isp_split = 2,3,5", p).is_err());
        assert!(Scenario::parse("cooperation.starting_point = 1", p).is_err());
    }

    #[test]
    fn uniform_coalition() {
        let s = Scenario::parse("coalition.user_counts = 2,3,5\ncoalition.shares = 0.4,0.6", Path::new(".")).unwrap();
        let c = s.coalition.unwrap();
        assert_eq!(c.sides, UserSides::Ratio(vec![2.0, 3.0, 5.0]));
        assert_eq!(c.isp_count(), 3);
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = PcpTraffic::new(vec![vec![1.0, 2.5], vec![0.0, 3.25]], vec![0.5, 0.75]).unwrap();
        write_traffic_csv(&dir.path().join("a.csv"), &t).unwrap();
        fs::write(
            dir.path().join("s.scenario"),
            "coalition.pcp.1.matrix = a.csv\ncoalition.bandwidth = 4, 5\ncoalition.background = 0.5, 0.5\n",
        )
        .unwrap();
        let s = Scenario::load(dir.path().join("s.scenario")).unwrap();
        let c = s.coalition.unwrap();
        assert_eq!(c.traffic, TrafficSource::Matrices(vec![t]));
        assert!(matches!(c.sides, UserSides::Explicit(ref v) if v.len() == 2));
    }
}
