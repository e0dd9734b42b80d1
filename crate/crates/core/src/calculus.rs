//! Scalar numerics: bracketed roots, piecewise golden-section maximization,
//! a refining 2-D lattice search and a finite-difference derivative check.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAX_ROOT_ITERATIONS: usize = 200;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "bracket requires lo < hi (got [{lo}, {hi}])"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bracket tolerance must be positive (got {tol})"
            )));
        }
        Ok(Self { lo, hi, tol })
    }
}

fn finite(x: f64, fx: f64) -> Result<f64> {
    if fx.is_finite() {
        Ok(fx)
    } else {
        Err(Error::NonFinite(x))
    }
}

/// Root of `f` inside a sign-changing bracket.
///
/// Regula-falsi steps are taken while they at least halve the bracket;
/// otherwise the next step bisects, so the width shrinks by half at least
/// every second iteration.
pub fn find_root_bracketed(f: impl Fn(f64) -> f64, bracket: Bracket) -> Result<f64> {
    let Bracket { mut lo, mut hi, tol } = bracket;
    let mut flo = finite(lo, f(lo))?;
    let mut fhi = finite(hi, f(hi))?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }

    let mut secant = true;
    for _ in 0..MAX_ROOT_ITERATIONS {
        if hi - lo <= tol {
            return Ok(if flo.abs() <= fhi.abs() { lo } else { hi });
        }
        let mid = 0.5 * (lo + hi);
        let x = if secant {
            let s = lo - flo * (hi - lo) / (fhi - flo);
            if s > lo && s < hi {
                s
            } else {
                mid
            }
        } else {
            mid
        };
        let fx = finite(x, f(x))?;
        if fx == 0.0 {
            return Ok(x);
        }
        let width = hi - lo;
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        secant = hi - lo <= 0.5 * width;
    }
    Err(Error::MaxIterations(MAX_ROOT_ITERATIONS))
}

/// Sub-brackets of `[lo, hi]` where `f` changes sign between consecutive
/// points of an `n`-point uniform scan. Non-finite samples are skipped.
pub fn scan_sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(2);
    let xs: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..n - 1 {
        let (a, b) = (fs[i], fs[i + 1]);
        if !(a.is_finite() && b.is_finite()) {
            continue;
        }
        if a == 0.0 {
            out.push((xs[i], xs[i]));
        } else if a.signum() != b.signum() && b != 0.0 {
            out.push((xs[i], xs[i + 1]));
        }
    }
    if fs[n - 1] == 0.0 {
        out.push((xs[n - 1], xs[n - 1]));
    }
    out
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// A scalar objective made of smooth pieces joined at breakpoints.
pub struct PiecewiseObjective<'a> {
    lo: f64,
    hi: f64,
    breakpoints: Vec<f64>,
    pieces: Vec<Box<dyn Fn(f64) -> f64 + 'a>>,
}

impl<'a> PiecewiseObjective<'a> {
    pub fn single(lo: f64, hi: f64, f: impl Fn(f64) -> f64 + 'a) -> Result<Self> {
        Self::new(lo, hi, Vec::new(), vec![Box::new(f)])
    }

    /// `pieces.len()` must be `breakpoints.len() + 1`; piece `i` covers
    /// `[breakpoint[i-1], breakpoint[i]]`.
    pub fn new(
        lo: f64,
        hi: f64,
        breakpoints: Vec<f64>,
        pieces: Vec<Box<dyn Fn(f64) -> f64 + 'a>>,
    ) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "piecewise bounds must be finite with lo <= hi (got [{lo}, {hi}])"
            )));
        }
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: breakpoints.len() + 1,
                found: pieces.len(),
            });
        }
        let mut prev = lo;
        for &bp in &breakpoints {
            if !(bp > prev && bp < hi) {
                return Err(Error::InvalidParameter(format!(
                    "breakpoints must be strictly increasing inside ({lo}, {hi})"
                )));
            }
            prev = bp;
        }
        Ok(Self {
            lo,
            hi,
            breakpoints,
            pieces,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&bp| bp < x);
        (self.pieces[i])(x)
    }

    fn piece_bounds(&self, i: usize) -> (f64, f64) {
        let a = if i == 0 { self.lo } else { self.breakpoints[i - 1] };
        let b = self.breakpoints.get(i).copied().unwrap_or(self.hi);
        (a, b)
    }
}

const PIECE_SCAN: usize = 16;

/// Maximizes each piece and returns the best `(argmax, value)`.
///
/// Every piece is sampled on a uniform grid; each sampled local maximum
/// (a sign change of the discrete slope) seeds a golden-section search on
/// its neighbouring cells. Piece endpoints are always candidates.
/// Among equal values the smallest argument wins.
pub fn maximize_piecewise(obj: &PiecewiseObjective<'_>) -> (f64, f64) {
    let mut best = (obj.lo, f64::NEG_INFINITY);
    let mut offer = |x: f64, v: f64| {
        if v > best.1 || (v == best.1 && x < best.0) {
            best = (x, v);
        }
    };
    for (i, piece) in obj.pieces.iter().enumerate() {
        let (a, b) = obj.piece_bounds(i);
        if b <= a {
            offer(a, piece(a));
            continue;
        }
        let step = (b - a) / PIECE_SCAN as f64;
        let xs: Vec<f64> = (0..=PIECE_SCAN).map(|k| a + step * k as f64).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| piece(x)).collect();
        offer(a, fs[0]);
        offer(b, fs[PIECE_SCAN]);
        for k in 0..=PIECE_SCAN {
            let left = k.saturating_sub(1);
            let right = (k + 1).min(PIECE_SCAN);
            if fs[k] >= fs[left] && fs[k] >= fs[right] {
                let tol = 1e-12 * (1.0 + xs[k].abs());
                let (x, v) = golden_section_max(piece, xs[left], xs[right], tol);
                offer(x, v);
                offer(xs[k], fs[k]);
            }
        }
    }
    best
}

/// Result of [`maximize_grid_2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMax {
    pub point: (f64, f64),
    pub value: f64,
    /// Final lattice spacing.
    pub spacing: f64,
}

/// Maximizes `f` over the unit square: an `n x n` lattice, then
/// `refine_levels` rounds of a 21 x 21 lattice, ten times finer, centred
/// on the incumbent. Ties go to the lexicographically smallest point.
pub fn maximize_grid_2d<F>(f: F, coarse_n: usize, refine_levels: usize) -> Result<GridMax>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if coarse_n < 11 || refine_levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "2-D search needs coarse_n >= 11 and refine_levels >= 2 (got {coarse_n}, {refine_levels})"
        )));
    }
    let axis: Vec<f64> = (0..coarse_n)
        .map(|i| i as f64 / (coarse_n - 1) as f64)
        .collect();
    let mut spacing = 1.0 / (coarse_n - 1) as f64;
    let (mut point, mut value) = best_on_lattice(&f, &axis, &axis);

    for _ in 0..refine_levels {
        let fine = spacing / 10.0;
        let around = |c: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (-10..=10)
                .map(|k| (c + fine * k as f64).clamp(0.0, 1.0))
                .collect();
            v.dedup();
            v
        };
        let (p, val) = best_on_lattice(&f, &around(point.0), &around(point.1));
        if val > value || (val == value && p < point) {
            point = p;
            value = val;
        }
        spacing = fine;
    }
    Ok(GridMax {
        point,
        value,
        spacing,
    })
}

fn best_on_lattice<F>(f: &F, xs: &[f64], ys: &[f64]) -> ((f64, f64), f64)
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .collect();
    let vals: Vec<f64> = pts.par_iter().map(|&(x, y)| f(x, y)).collect();
    // Ordered reduction: lattice order is lexicographic, so a strict
    // comparison keeps the smallest point among ties.
    let mut best = (pts[0], f64::NEG_INFINITY);
    for (p, v) in pts.into_iter().zip(vals) {
        if v > best.1 {
            best = (p, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub max_rel_error: f64,
    pub worst_point: Option<f64>,
    /// Points where either map was not finite.
    pub non_finite: Vec<f64>,
}

/// Compares `f_prime` against a central difference of `f` with
/// `h = 1e-6 * max(1, |x|)`. The error at each point is relative to
/// `|f_prime(x)|`, floored at `1e-8`.
pub fn check_derivative(
    f: impl Fn(f64) -> f64,
    f_prime: impl Fn(f64) -> f64,
    points: &[f64],
) -> DerivativeCheck {
    let mut out = DerivativeCheck {
        max_rel_error: 0.0,
        worst_point: None,
        non_finite: Vec::new(),
    };
    for &x in points {
        let h = 1e-6 * x.abs().max(1.0);
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let an = f_prime(x);
        if !(fd.is_finite() && an.is_finite()) {
            out.non_finite.push(x);
            continue;
        }
        let err = (fd - an).abs() / an.abs().max(1e-8);
        if out.worst_point.is_none() || err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst_point = Some(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_simple_maps() {
        let r = find_root_bracketed(|x| x - 1.0, Bracket::new(0.0, 2.0, 1e-12).unwrap()).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = find_root_bracketed(|x| x * x - 4.0, Bracket::new(0.0, 3.0, 1e-12).unwrap()).unwrap();
        assert!((r - 2.0).abs() < 1e-11);
    }

    #[test]
    fn root_errors() {
        let b = Bracket::new(0.0, 1.0, 1e-12).unwrap();
        assert!(matches!(
            find_root_bracketed(|x| x + 1.0, b),
            Err(Error::NoSignChange { .. })
        ));
        assert!(matches!(
            find_root_bracketed(|x| if x > 0.5 { f64::NAN } else { -1.0 }, b),
            Err(Error::NonFinite(_))
        ));
        assert!(Bracket::new(1.0, 1.0, 1e-3).is_err());
        assert!(Bracket::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn secant_stall_falls_back_to_bisection() {
        // Strongly convex map: plain regula falsi would creep from one side.
        let f = |x: f64| x.powi(9) - 1e-3;
        let r = find_root_bracketed(f, Bracket::new(0.0, 2.0, 1e-13).unwrap()).unwrap();
        assert!((r - 1e-3_f64.powf(1.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn sign_change_scan() {
        let roots = scan_sign_changes(|x| (x - 1.0) * (x - 2.5), 0.0, 4.0, 1000);
        assert_eq!(roots.len(), 2);
        assert!(roots[0].0 <= 1.0 && roots[0].1 >= 1.0);
    }

    #[test]
    fn piecewise_single_parabola() {
        let obj = PiecewiseObjective::single(0.0, 10.0, |x| -(x - 3.0).powi(2)).unwrap();
        let (x, v) = maximize_piecewise(&obj);
        assert!((x - 3.0).abs() < 1e-6);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn piecewise_kink_at_breakpoint() {
        // Increasing to the left of 2, decreasing to the right.
        let obj = PiecewiseObjective::new(
            0.0,
            5.0,
            vec![2.0],
            vec![Box::new(|x| x), Box::new(|x| 2.0 - 3.0 * (x - 2.0))],
        )
        .unwrap();
        let (x, v) = maximize_piecewise(&obj);
        assert_eq!(x, 2.0);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn piecewise_peak_inside_first_cell() {
        let obj = PiecewiseObjective::single(0.0, 100.0, |x| -(x - 2.0).powi(2)).unwrap();
        assert!((maximize_piecewise(&obj).0 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn piecewise_boundary_maximum() {
        let obj = PiecewiseObjective::single(0.0, 1.0, |x| x.exp()).unwrap();
        assert_eq!(maximize_piecewise(&obj).0, 1.0);
    }

    #[test]
    fn piecewise_validation() {
        let bad = PiecewiseObjective::new(0.0, 1.0, vec![0.5], vec![Box::new(|x| x)]);
        assert!(bad.is_err());
        let bad = PiecewiseObjective::new(
            0.0,
            1.0,
            vec![1.5],
            vec![Box::new(|x| x), Box::new(|x| x)],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn grid_interior_and_boundary() {
        let g = maximize_grid_2d(|x, y| -(x - 0.5).powi(2) - (y - 0.5).powi(2), 101, 4).unwrap();
        assert_eq!(g.point, (0.5, 0.5));
        assert_eq!(g.value, 0.0);
        let g = maximize_grid_2d(|x, y| x + y, 101, 4).unwrap();
        assert_eq!(g.point, (1.0, 1.0));
        assert_eq!(g.value, 2.0);
        assert!((g.spacing - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn grid_resolves_off_lattice_optimum() {
        let g = maximize_grid_2d(|x, y| -(x - 0.123_456_7).powi(2) - (y - 0.765_432_1).powi(2), 101, 4)
            .unwrap();
        assert!((g.point.0 - 0.123_456_7).abs() <= 1e-6);
        assert!((g.point.1 - 0.765_432_1).abs() <= 1e-6);
    }

    #[test]
    fn grid_tie_break_prefers_smallest() {
        // Flat in x: every x ties.
        let g = maximize_grid_2d(|_, y| -(y - 0.3).powi(2), 11, 2).unwrap();
        assert_eq!(g.point.0, 0.0);
    }

    #[test]
    fn derivative_checks() {
        assert!(check_derivative(|x| x * x, |x| 2.0 * x, &[3.0]).max_rel_error < 1e-7);
        assert!(
            check_derivative(|x: f64| (x + 1.0).ln(), |x| 1.0 / (x + 1.0), &[2.0]).max_rel_error < 1e-7
        );
        let wrong = check_derivative(|x| x * x, |x| x, &[1.0]);
        assert!((wrong.max_rel_error - 1.0).abs() < 1e-6);
        let nf = check_derivative(|x: f64| x.ln(), |x| 1.0 / x, &[-1.0, 1.0]);
        assert_eq!(nf.non_finite, vec![-1.0]);
    }
}
