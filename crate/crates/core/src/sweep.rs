//! Parameter sweeps over the traffic profile and over the discount pair,
//! written as CSV tables with six decimals.
//!
//! A failing cell keeps its row; the numeric columns stay empty and the
//! trailing `error` column carries the message.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cooperation::{group_profit, DiscountPair};
use crate::error::{Error, Result};
use crate::model::TrafficProfile;
use crate::pipeline::{build_context, run_pipeline, Report};
use crate::scenario::{default_uniform_coalition, Scenario, TrafficSource};
use crate::states::StateOutcome;

pub const STATE_UTILITIES: &str = "state_utilities.csv";
pub const COOPERATION: &str = "cooperation.csv";
pub const IMPROVEMENT: &str = "improvement.csv";
pub const LEDGER: &str = "ledger.csv";
pub const GAMMA_SURFACE: &str = "gamma_surface.csv";
pub const TRANSFERS: &str = "transfers.csv";

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub report: std::result::Result<Report, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub gamma_isp: f64,
    pub gamma_pcp: f64,
    pub u_total: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Sorted by `(alpha, beta)`.
    pub cells: Vec<SweepCell>,
    /// Joint profit over the discount lattice at the scenario's profile,
    /// sorted by `(gamma_isp, gamma_pcp)`.
    pub surface: std::result::Result<Vec<SurfacePoint>, String>,
    /// Full run at the scenario's profile, source of the ledger table.
    pub focus: std::result::Result<Report, String>,
}

/// Scenario used for every sweep cell: computed starting point, and a
/// coalition section that adapts to any P2P volume.
fn cell_scenario(s: &Scenario, profile: TrafficProfile) -> Scenario {
    let coalition = match &s.coalition {
        Some(c) if matches!(c.traffic, TrafficSource::Uniform { .. }) => c.clone(),
        _ => default_uniform_coalition(),
    };
    Scenario {
        profile,
        starting_point: None,
        coalition: Some(coalition),
        ..s.clone()
    }
}

pub fn sweep_profiles(s: &Scenario) -> Vec<SweepCell> {
    let grid: Vec<(f64, f64)> = s
        .sweep
        .alpha
        .points()
        .into_iter()
        .flat_map(|a| s.sweep.beta.points().into_iter().map(move |b| (a, b)))
        .collect();
    let mut cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(alpha, beta)| {
            let report = TrafficProfile::new(alpha, beta)
                .and_then(|p| run_pipeline(&cell_scenario(s, p)))
                .map_err(|e| e.to_string());
            SweepCell { alpha, beta, report }
        })
        .collect();
    cells.sort_by(|x, y| x.alpha.total_cmp(&y.alpha).then(x.beta.total_cmp(&y.beta)));
    cells
}

pub fn gamma_surface(s: &Scenario) -> Result<Vec<SurfacePoint>> {
    let ctx = build_context(s)?;
    let n = s.sweep.gamma_steps;
    let axis: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let pts: Vec<(f64, f64)> = axis
        .iter()
        .flat_map(|&gi| axis.iter().map(move |&gp| (gi, gp)))
        .collect();
    pts.par_iter()
        .map(|&(gamma_isp, gamma_pcp)| {
            let g = group_profit(&ctx, DiscountPair { gamma_isp, gamma_pcp })?;
            Ok(SurfacePoint {
                gamma_isp,
                gamma_pcp,
                u_total: g.u_total,
            })
        })
        .collect()
}

pub fn run_sweep(s: &Scenario) -> SweepResult {
    let focus_scenario = Scenario {
        coalition: s.coalition.clone().or_else(|| Some(default_uniform_coalition())),
        ..s.clone()
    };
    SweepResult {
        cells: sweep_profiles(s),
        surface: gamma_surface(s).map_err(|e| e.to_string()),
        focus: run_pipeline(&focus_scenario).map_err(|e| e.to_string()),
    }
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

struct Table {
    writer: csv::Writer<fs::File>,
    width: usize,
}

impl Table {
    fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut h: Vec<&str> = header.to_vec();
        h.push("error");
        writer.write_record(&h)?;
        Ok(Self {
            writer,
            width: header.len(),
        })
    }

    fn row(&mut self, mut fields: Vec<String>) -> Result<()> {
        fields.push(String::new());
        self.writer.write_record(&fields)?;
        Ok(())
    }

    /// Leading key fields, blank values, then the error message.
    fn failed(&mut self, keys: Vec<String>, err: &str) -> Result<()> {
        let mut fields = keys;
        fields.resize(self.width, String::new());
        fields.push(err.to_string());
        self.writer.write_record(&fields)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn state_row(alpha: f64, beta: f64, label: &str, isp: f64, cp: f64, user: f64, v: f64) -> Vec<String> {
    vec![num(alpha), num(beta), label.to_string(), num(isp), num(cp), num(user), num(v)]
}

fn state_rows(alpha: f64, beta: f64, r: &Report) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = r
        .states()
        .iter()
        .map(|s: &&StateOutcome| {
            let u = s.utilities;
            state_row(alpha, beta, &s.label.to_string(), u.isp, u.cp, u.user, s.v_p2p)
        })
        .collect();
    if let Some(c) = &r.cooperation {
        rows.push(state_row(alpha, beta, "S3", c.u_isp_s3, c.u_cp_s3, c.u_user_s3, c.v_p2p_s3));
    }
    rows
}

impl SweepResult {
    /// Writes every table into `dir` and returns the paths written.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let keys = |c: &SweepCell| vec![num(c.alpha), num(c.beta)];

        let path = dir.join(STATE_UTILITIES);
        let mut t = Table::create(&path, &["alpha", "beta", "state", "u_isp", "u_cp", "u_user", "v_p2p"])?;
        for c in &self.cells {
            match &c.report {
                Ok(r) => {
                    for row in state_rows(c.alpha, c.beta, r) {
                        t.row(row)?;
                    }
                }
                Err(e) => t.failed(keys(c), e)?,
            }
        }
        t.finish()?;
        written.push(path);

        let path = dir.join(COOPERATION);
        let mut t = Table::create(
            &path,
            &[
                "alpha", "beta", "gamma_isp", "gamma_pcp", "v_p2p_s3", "u_total", "u_isp_pre", "u_cp_pre",
                "u_isp_s3", "u_cp_s3", "transfer_r", "u_user_s3",
            ],
        )?;
        for c in &self.cells {
            match c.report.as_ref().map(|r| r.cooperation) {
                Ok(Some(o)) => t.row(vec![
                    num(c.alpha),
                    num(c.beta),
                    num(o.discounts.gamma_isp),
                    num(o.discounts.gamma_pcp),
                    num(o.v_p2p_s3),
                    num(o.u_total_s3),
                    num(o.u_isp_pre),
                    num(o.u_cp_pre),
                    num(o.u_isp_s3),
                    num(o.u_cp_s3),
                    num(o.transfer_r),
                    num(o.u_user_s3),
                ])?,
                Ok(None) => t.failed(keys(c), "cooperation not beneficial")?,
                Err(e) => t.failed(keys(c), e)?,
            }
        }
        t.finish()?;
        written.push(path);

        let path = dir.join(IMPROVEMENT);
        let mut t = Table::create(&path, &["alpha", "beta", "isp_gain_pct", "cp_gain_pct"])?;
        for c in &self.cells {
            match c.report.as_ref().map(|r| r.cooperation) {
                Ok(Some(o)) => t.row(vec![
                    num(c.alpha),
                    num(c.beta),
                    num(o.isp_improvement()),
                    num(o.cp_improvement()),
                ])?,
                Ok(None) => t.failed(keys(c), "cooperation not beneficial")?,
                Err(e) => t.failed(keys(c), e)?,
            }
        }
        t.finish()?;
        written.push(path);

        let (n_pcp, n_isp) = self
            .cells
            .iter()
            .find_map(|c| c.report.as_ref().ok()?.ledger.as_ref())
            .map_or((0, 0), |l| (l.phi.len(), l.psi.len()));
        let path = dir.join(TRANSFERS);
        let mut header = vec!["alpha".to_string(), "beta".to_string(), "transfer_r".to_string()];
        header.extend((1..=n_pcp).map(|i| format!("pcp_{i}")));
        header.extend((1..=n_isp).map(|l| format!("isp_{l}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::create(&path, &header_refs)?;
        for c in &self.cells {
            match c.report.as_ref().map(|r| (r.cooperation, r.ledger.as_ref())) {
                Ok((Some(o), Some(l))) => {
                    let mut row = vec![num(c.alpha), num(c.beta), num(o.transfer_r)];
                    row.extend(l.pcp_payments.iter().chain(&l.isp_receipts).map(|&x| num(x)));
                    t.row(row)?;
                }
                Ok((Some(o), None)) => {
                    let mut row = vec![num(c.alpha), num(c.beta), num(o.transfer_r)];
                    row.resize(3 + n_pcp + n_isp, num(0.0));
                    t.row(row)?;
                }
                Ok((None, _)) => t.failed(keys(c), "cooperation not beneficial")?,
                Err(e) => t.failed(keys(c), e)?,
            }
        }
        t.finish()?;
        written.push(path);

        let path = dir.join(LEDGER);
        let mut t = Table::create(&path, &["member_kind", "member_id", "weight", "amount"])?;
        match self.focus.as_ref().map(|r| r.ledger.as_ref()) {
            Ok(Some(l)) => {
                for (i, (w, a)) in l.phi.iter().zip(&l.pcp_payments).enumerate() {
                    t.row(vec!["pcp".into(), (i + 1).to_string(), num(*w), num(*a)])?;
                }
                for (i, (w, a)) in l.psi.iter().zip(&l.isp_receipts).enumerate() {
                    t.row(vec!["isp".into(), (i + 1).to_string(), num(*w), num(*a)])?;
                }
            }
            Ok(None) => t.failed(Vec::new(), "no coalition split at this profile")?,
            Err(e) => t.failed(Vec::new(), e)?,
        }
        t.finish()?;
        written.push(path);

        let path = dir.join(GAMMA_SURFACE);
        let mut t = Table::create(&path, &["gamma_isp", "gamma_pcp", "u_total"])?;
        match &self.surface {
            Ok(points) => {
                for p in points {
                    t.row(vec![num(p.gamma_isp), num(p.gamma_pcp), num(p.u_total)])?;
                }
            }
            Err(e) => t.failed(Vec::new(), e)?,
        }
        t.finish()?;
        written.push(path);

        Ok(written)
    }
}

/// Reads a table written by [`SweepResult::write_all`] back as rows of strings.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(Error::from)?;
    let header = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Range;

    fn small() -> Scenario {
        let mut s = Scenario::default();
        s.sweep.alpha = Range::new(0.3, 0.6, 2).unwrap();
        s.sweep.beta = Range::new(0.3, 0.5, 2).unwrap();
        s.sweep.gamma_steps = 11;
        s
    }

    #[test]
    fn writes_every_table() {
        let s = small();
        let res = run_sweep(&s);
        assert_eq!(res.cells.len(), 4);
        assert_eq!((res.cells[1].alpha, res.cells[1].beta), (0.3, 0.5));
        let dir = tempfile::tempdir().unwrap();
        let files = res.write_all(dir.path()).unwrap();
        assert_eq!(files.len(), 6);
        let (h, rows) = read_table(&dir.path().join(STATE_UTILITIES)).unwrap();
        assert_eq!(h.last().unwrap(), "error");
        assert_eq!(rows.len(), 16);
        let (h, rows) = read_table(&dir.path().join(TRANSFERS)).unwrap();
        assert_eq!(h.len(), 3 + 2 + 3 + 1);
        assert!(rows.iter().all(|r| r.last().unwrap().is_empty()));
        let (_, rows) = read_table(&dir.path().join(GAMMA_SURFACE)).unwrap();
        assert_eq!(rows.len(), 121);
        assert_eq!(rows[0][0], "0.000000");
    }

    #[test]
    fn failed_cell_keeps_row() {
        let mut s = small();
        s.sweep.alpha = Range::new(0.5, 1.2, 2).unwrap();
        let res = run_sweep(&s);
        assert!(res.cells[2].report.is_err());
        let dir = tempfile::tempdir().unwrap();
        res.write_all(dir.path()).unwrap();
        let (_, rows) = read_table(&dir.path().join(COOPERATION)).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2][0], "1.200000");
        assert!(rows[2][2].is_empty());
        assert!(rows[2].last().unwrap().contains("alpha"));
    }
}
