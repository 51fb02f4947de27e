//! Knee-point detection on rate-quality curves.
//!
//! The detector normalizes the trace to the unit square, subtracts the
//! diagonal, and looks for the first local maximum of the difference curve
//! that survives the sensitivity threshold. On a saturating quality curve
//! that maximum marks where additional rate stops buying quality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::RqInterp;
use crate::model::Resolution;

/// Curve shape the detector supports. Rate-quality traces ordered by
/// increasing rate are concave and increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KneeShape {
    ConcaveIncreasing,
}

/// Plane on which the knee is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KneePlane {
    /// (log rate, VMAF), the plane the curves are smooth on.
    #[default]
    LogRateVmaf,
    /// (rate in kbps, VMAF).
    RateVmaf,
}

/// A detected knee, always one of the evaluated curve samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KneePoint {
    pub qp: i32,
    pub log_rate: f64,
    pub vmaf: f64,
    pub resolution: Resolution,
}

/// Per-resolution knee-QP prior means, rounded to integers, used as a
/// fallback when a degenerate curve yields no knee.
pub fn prior_knee_qp(resolution: Resolution) -> i32 {
    match resolution {
        Resolution::R2160p => 30,
        Resolution::R1080p => 25,
        Resolution::R720p => 25,
        Resolution::R540p => 23,
    }
}

/// Locate a knee in `points` (sorted by strictly increasing x).
///
/// Returns the index of the first confirmed knee, or `None` when the
/// difference curve has no local maximum (e.g. a straight line). A
/// candidate is confirmed once the difference curve falls to its threshold
/// before any later candidate exceeds it.
pub fn kneedle(
    points: &[(f64, f64)],
    sensitivity: f64,
    _shape: KneeShape,
) -> Result<Option<usize>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "kneedle needs at least 3 points, got {n}"
        )));
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Validation(format!(
                "x must be strictly increasing, got {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    let (x0, x1) = (points[0].0, points[n - 1].0);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, y) in points {
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let x_span = x1 - x0;
    let y_span = y1 - y0;
    if y_span == 0.0 {
        return Ok(None);
    }

    // Normalized difference curve d = y_n - x_n.
    let diff: Vec<f64> = points
        .iter()
        .map(|&(x, y)| (y - y0) / y_span - (x - x0) / x_span)
        .collect();
    let mut is_candidate = vec![false; n];
    for i in 1..n - 1 {
        is_candidate[i] = diff[i] > diff[i - 1] && diff[i] >= diff[i + 1];
    }
    if !is_candidate.iter().any(|&c| c) {
        return Ok(None);
    }

    // Mean normalized x-spacing is 1/(n-1) by construction.
    let mean_dx = 1.0 / (n - 1) as f64;
    for i in 1..n - 1 {
        if !is_candidate[i] {
            continue;
        }
        let threshold = diff[i] - sensitivity * mean_dx;
        for j in i + 1..n {
            if is_candidate[j] && diff[j] > diff[i] {
                break;
            }
            if diff[j] <= threshold {
                return Ok(Some(i));
            }
        }
    }
    Ok(None)
}

/// Detect the knee QP of a fitted rate-quality curve pair.
///
/// The curve is evaluated at every integer QP of its span, ordered by
/// increasing rate (decreasing QP), run through `kneedle`, and the knee is
/// mapped back to its integer QP.
pub fn knee_qp(interp: &RqInterp, sensitivity: f64, plane: KneePlane) -> Result<KneePoint> {
    let qps: Vec<i32> = (interp.qp_min()..=interp.qp_max()).rev().collect();
    if qps.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "curve span [{}, {}] too short for knee detection",
            interp.qp_min(),
            interp.qp_max()
        )));
    }
    let mut trace = Vec::with_capacity(qps.len());
    for &qp in &qps {
        let lr = interp.log_rate.eval(f64::from(qp))?;
        let v = interp.vmaf.eval(f64::from(qp))?;
        let x = match plane {
            KneePlane::LogRateVmaf => lr,
            KneePlane::RateVmaf => lr.exp(),
        };
        trace.push((x, v, lr, qp));
    }
    // Repairs leave log-rate strictly decreasing in QP, so reversing the QP
    // order gives strictly increasing x; guard anyway for raw input.
    let points: Vec<(f64, f64)> = trace.iter().map(|t| (t.0, t.1)).collect();
    match kneedle(&points, sensitivity, KneeShape::ConcaveIncreasing)? {
        Some(idx) => Ok(KneePoint {
            qp: trace[idx].3,
            log_rate: trace[idx].2,
            vmaf: trace[idx].1,
            resolution: interp.resolution,
        }),
        None => Err(Error::NoKnee(format!(
            "no knee on ({}, {})",
            interp.sequence, interp.resolution
        ))),
    }
}
