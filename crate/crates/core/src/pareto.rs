//! Pareto-front extraction across resolutions and cross-over geometry.
//!
//! The front is the non-dominated envelope of all per-resolution
//! rate-quality points; the cross-over QPs are where adjacent resolutions'
//! curves intersect, i.e. where the ladder switches resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::RqInterp;
use crate::model::Resolution;

/// One candidate point for the front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RqPoint {
    pub log_rate: f64,
    pub bitrate_kbps: f64,
    pub vmaf: f64,
    pub qp: i32,
    pub resolution: Resolution,
}

/// Non-dominated set across all curves, sorted by log-rate ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<RqPoint>,
}

impl ParetoFront {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The point with the largest rate not exceeding `rate_kbps`, if any.
    pub fn at_or_below(&self, rate_kbps: f64) -> Option<&RqPoint> {
        let mut best: Option<&RqPoint> = None;
        for p in &self.points {
            if p.bitrate_kbps <= rate_kbps {
                best = Some(p);
            } else {
                break;
            }
        }
        best
    }

    pub fn lowest_rate(&self) -> Option<&RqPoint> {
        self.points.first()
    }
}

/// Filter the union of per-resolution point sets down to the non-dominated
/// envelope. Exact ties in (log-rate, VMAF) resolve toward the higher
/// resolution.
pub fn pareto_front(curves: &[Vec<RqPoint>]) -> Result<ParetoFront> {
    let mut all: Vec<RqPoint> = curves.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::InsufficientData("no points for Pareto front".to_string()));
    }
    all.sort_by(|a, b| {
        a.log_rate
            .partial_cmp(&b.log_rate)
            .expect("finite log rates")
            .then(b.vmaf.partial_cmp(&a.vmaf).expect("finite vmaf"))
            .then(b.resolution.cmp(&a.resolution))
    });
    let mut points: Vec<RqPoint> = Vec::new();
    let mut best_vmaf = f64::NEG_INFINITY;
    for p in all {
        if p.vmaf > best_vmaf {
            points.push(p);
            best_vmaf = p.vmaf;
        }
    }
    Ok(ParetoFront { points })
}

/// Evaluate a fitted curve pair at every integer QP of its span.
pub fn dense_points(interp: &RqInterp) -> Result<Vec<RqPoint>> {
    let mut out = Vec::new();
    for qp in interp.qp_min()..=interp.qp_max() {
        let log_rate = interp.log_rate.eval(f64::from(qp))?;
        let vmaf = interp.vmaf.eval(f64::from(qp))?;
        out.push(RqPoint {
            log_rate,
            bitrate_kbps: log_rate.exp(),
            vmaf,
            qp,
            resolution: interp.resolution,
        });
    }
    Ok(out)
}

/// The QP pair at which two adjacent resolutions' curves intersect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPair {
    pub high_res: Resolution,
    pub low_res: Resolution,
    /// High-QP (low-rate) end of the higher resolution.
    pub qp_high: i32,
    /// Low-QP (high-rate) end of the lower resolution.
    pub qp_low: i32,
    /// Log-rate of the intersection.
    pub log_rate: f64,
    /// More than one sign flip was present; the highest-rate one was taken.
    pub multiple_intersections: bool,
}

/// Outcome of a cross-over search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CrossoverOutcome {
    Pair(CrossoverPair),
    /// One curve dominates the other over the whole shared rate span.
    Dominated,
    /// The curves coincide within tolerance; no unique intersection.
    Coincident,
}

/// How fractional intersection QPs map to integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QpRounding {
    #[default]
    Nearest,
    Floor,
    Ceil,
}

impl QpRounding {
    pub fn apply(self, qp: f64) -> i32 {
        match self {
            QpRounding::Nearest => qp.round() as i32,
            QpRounding::Floor => qp.floor() as i32,
            QpRounding::Ceil => qp.ceil() as i32,
        }
    }
}

const COINCIDENCE_TOL: f64 = 1e-9;

/// Find the cross-over between a higher-resolution curve and the adjacent
/// lower one.
///
/// Both curves are walked over a dense QP grid; the VMAF difference at
/// equal log-rate (via monotone inverse lookup on the lower curve) flips
/// sign at an intersection. With several flips the highest-rate one wins,
/// since the ladder cares about where the higher resolution takes over.
pub fn crossover_qps(
    high: &RqInterp,
    low: &RqInterp,
    grid_step: f64,
    rounding: QpRounding,
) -> Result<CrossoverOutcome> {
    if high.resolution <= low.resolution {
        return Err(Error::Validation(format!(
            "expected adjacent (higher, lower) resolutions, got ({}, {})",
            high.resolution, low.resolution
        )));
    }
    if grid_step <= 0.0 {
        return Err(Error::Config(format!("grid_step must be positive, got {grid_step}")));
    }
    // Log-rate is decreasing in QP, so span ends come from opposite QP ends.
    let high_span = (
        high.log_rate.eval(high.log_rate.x_max())?,
        high.log_rate.eval(high.log_rate.x_min())?,
    );
    let low_span = (
        low.log_rate.eval(low.log_rate.x_max())?,
        low.log_rate.eval(low.log_rate.x_min())?,
    );
    let lo = high_span.0.max(low_span.0);
    let hi = high_span.1.min(low_span.1);
    if lo >= hi {
        return Err(Error::NoOverlap {
            a_lo: high_span.0,
            a_hi: high_span.1,
            b_lo: low_span.0,
            b_hi: low_span.1,
        });
    }

    let diff_at = |log_rate: f64| -> Result<f64> {
        let qp_h = high.qp_at_log_rate(log_rate)?;
        let qp_l = low.qp_at_log_rate(log_rate)?;
        Ok(high.vmaf.eval(qp_h)? - low.vmaf.eval(qp_l)?)
    };

    // Dense trace over the shared span, stepped in QP units of the higher
    // resolution's curve.
    let qp_hi_end = high.qp_at_log_rate(lo.max(high_span.0))?;
    let qp_lo_end = high.qp_at_log_rate(hi.min(high_span.1))?;
    let (qp_start, qp_stop) = (qp_lo_end.min(qp_hi_end), qp_lo_end.max(qp_hi_end));
    let steps = (((qp_stop - qp_start) / grid_step).ceil() as usize).max(1);
    let mut grid: Vec<(f64, f64)> = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let qp = qp_start + (qp_stop - qp_start) * i as f64 / steps as f64;
        let lr = high.log_rate.eval(qp)?.clamp(lo, hi);
        grid.push((lr, diff_at(lr)?));
    }
    grid.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite log rates"));

    let max_abs = grid.iter().map(|&(_, d)| d.abs()).fold(0.0f64, f64::max);
    if max_abs < COINCIDENCE_TOL {
        return Ok(CrossoverOutcome::Coincident);
    }
    let mut flips: Vec<usize> = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i].1, grid[i + 1].1);
        if a * b < 0.0 || (a != 0.0 && b == 0.0) {
            flips.push(i);
        }
    }
    if flips.is_empty() {
        return Ok(CrossoverOutcome::Dominated);
    }
    let pick = *flips.last().expect("non-empty flips");
    let multiple = flips.len() > 1;

    // Bisect the bracketing interval down to the intersection log-rate.
    let (mut a, mut b) = (grid[pick].0, grid[pick + 1].0);
    let mut fa = grid[pick].1;
    for _ in 0..200 {
        if b - a < 1e-12 {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = diff_at(mid)?;
        if fm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if fa.signum() == fm.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let log_rate = 0.5 * (a + b);
    Ok(CrossoverOutcome::Pair(CrossoverPair {
        high_res: high.resolution,
        low_res: low.resolution,
        qp_high: rounding.apply(high.qp_at_log_rate(log_rate)?),
        qp_low: rounding.apply(low.qp_at_log_rate(log_rate)?),
        log_rate,
        multiple_intersections: multiple,
    }))
}
