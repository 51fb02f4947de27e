//! Shape-preserving piecewise cubic Hermite interpolation.
//!
//! Slopes follow the Fritsch-Carlson rule: weighted harmonic means in the
//! interior, a three-point formula with monotone clamping at the ends, and
//! zero slope wherever adjacent secants vanish or change sign. Monotone
//! knots therefore yield a monotone interpolant with no overshoot, which is
//! what lets sparse QP encodes stand in for dense rate-quality curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EncodeRecord, Resolution};

/// Fritsch-Carlson slopes for the knots `(xs[i], ys[i])`.
///
/// Requires at least two knots with strictly increasing abscissae.
pub fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::Config(format!(
            "knot arrays disagree in length: {} vs {}",
            n,
            ys.len()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 knots for interpolation".to_string(),
        ));
    }
    let mut h = vec![0.0; n - 1];
    let mut delta = vec![0.0; n - 1];
    for i in 0..n - 1 {
        h[i] = xs[i + 1] - xs[i];
        if h[i] <= 0.0 {
            return Err(Error::Validation(format!(
                "abscissae must be strictly increasing, got {} then {}",
                xs[i],
                xs[i + 1]
            )));
        }
        delta[i] = (ys[i + 1] - ys[i]) / h[i];
    }

    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return Ok(d);
    }

    for i in 1..n - 1 {
        let (del0, del1) = (delta[i - 1], delta[i]);
        if del0 == 0.0 || del1 == 0.0 || (del0 > 0.0) != (del1 > 0.0) {
            d[i] = 0.0;
        } else {
            // Weighted harmonic mean of the two secants.
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / del0 + w2 / del1);
        }
    }
    d[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    Ok(d)
}

/// Non-centered three-point estimate, clamped so the end interval stays
/// monotone.
fn endpoint_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        d = 0.0;
    } else if del0 * del1 < 0.0 && d.abs() > 3.0 * del0.abs() {
        d = 3.0 * del0;
    }
    d
}

/// A fitted monotone cubic Hermite interpolant, evaluable on its knot span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl InterpolatedCurve {
    pub fn fit(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let slopes = pchip_slopes(&xs, &ys)?;
        Ok(InterpolatedCurve { xs, ys, slopes })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().expect("at least two knots")
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Evaluate at `x`. Extrapolation is a domain error.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.x_min(), self.x_max());
        if !(lo..=hi).contains(&x) {
            return Err(Error::Domain { x, lo, hi });
        }
        let i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite abscissae"))
        {
            Ok(idx) => return Ok(self.ys[idx]),
            Err(ins) => ins - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1])
    }

    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// Invert a strictly monotone interpolant by bisection: the `x` with
    /// `eval(x) == y` to within `tol` in x.
    pub fn inverse(&self, y: f64, tol: f64) -> Result<f64> {
        let (mut lo, mut hi) = (self.x_min(), self.x_max());
        let (y_lo, y_hi) = (self.eval(lo)?, self.eval(hi)?);
        let increasing = y_hi > y_lo;
        let (y_at_lo, y_at_hi) = if increasing { (y_lo, y_hi) } else { (y_hi, y_lo) };
        if y < y_at_lo - 1e-9 || y > y_at_hi + 1e-9 {
            return Err(Error::Domain {
                x: y,
                lo: y_at_lo,
                hi: y_at_hi,
            });
        }
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let v = self.eval(mid)?;
            if (v < y) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// The two interpolants a sparse set of encodes produces: QP to log-rate
/// and QP to VMAF. Their composition is the estimated Rate-VMAF curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RqInterp {
    pub sequence: String,
    pub resolution: Resolution,
    pub log_rate: InterpolatedCurve,
    pub vmaf: InterpolatedCurve,
}

impl RqInterp {
    pub fn qp_min(&self) -> i32 {
        self.log_rate.x_min().ceil() as i32
    }

    pub fn qp_max(&self) -> i32 {
        self.log_rate.x_max().floor() as i32
    }

    /// QP at a given log-rate via monotone inverse lookup (log-rate is
    /// strictly decreasing in QP).
    pub fn qp_at_log_rate(&self, log_rate: f64) -> Result<f64> {
        self.log_rate.inverse(log_rate, 1e-9)
    }
}

/// Fit both rate-quality interpolants over a resolution's encode records.
pub fn fit_rq_curve(records: &[EncodeRecord]) -> Result<RqInterp> {
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 records to fit a curve, got {}",
            records.len()
        )));
    }
    let (sequence, resolution) = (records[0].sequence.clone(), records[0].resolution);
    for r in records {
        if r.resolution != resolution || r.sequence != sequence {
            return Err(Error::Validation(format!(
                "mixed curves in fit: ({}, {}) vs ({}, {})",
                sequence, resolution, r.sequence, r.resolution
            )));
        }
    }
    let mut sorted: Vec<&EncodeRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.qp);
    let qps: Vec<f64> = sorted.iter().map(|r| f64::from(r.qp)).collect();
    let log_rates: Vec<f64> = sorted.iter().map(|r| r.log_rate()).collect();
    let vmafs: Vec<f64> = sorted.iter().map(|r| r.vmaf).collect();
    Ok(RqInterp {
        sequence,
        resolution,
        log_rate: InterpolatedCurve::fit(qps.clone(), log_rates)?,
        vmaf: InterpolatedCurve::fit(qps, vmafs)?,
    })
}
