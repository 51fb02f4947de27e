//! Ladder evaluation: BD-Rate, RL-hits, and corpus-level reporting.
//!
//! BD-Rate follows the classic procedure: fit log-rate as a cubic
//! polynomial in quality for each point set, integrate the difference over
//! the shared quality interval, and report the mean rate ratio as a
//! percentage. Clustered quality values (VMAF saturating near 100) make
//! cubic fits singular, so a monotone piecewise-linear fit is the fallback
//! and the default for sets of fewer than four points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::Ladder;

/// Which fit produced each side of a BD-Rate figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BdFit {
    Cubic,
    PiecewiseLinear,
}

/// BD-Rate of a test set against a reference set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdResult {
    pub bd_rate_percent: f64,
    /// Quality interval the integration ran over.
    pub overlap: (f64, f64),
    pub test_fit: BdFit,
    pub reference_fit: BdFit,
}

/// A fitted log-rate(quality) model, integrable in closed form.
enum RateModel {
    /// Coefficients of `a0 + a1*u + a2*u^2 + a3*u^3` with `u = v - shift`.
    Cubic { coeffs: [f64; 4], shift: f64 },
    /// Monotone piecewise-linear interpolation over (quality, log-rate).
    Linear { points: Vec<(f64, f64)> },
}

impl RateModel {
    fn fit_kind(&self) -> BdFit {
        match self {
            RateModel::Cubic { .. } => BdFit::Cubic,
            RateModel::Linear { .. } => BdFit::PiecewiseLinear,
        }
    }

    /// Definite integral over `[lo, hi]`.
    fn integrate(&self, lo: f64, hi: f64) -> f64 {
        match self {
            RateModel::Cubic { coeffs, shift } => {
                let anti = |v: f64| {
                    let u = v - shift;
                    coeffs[0] * u
                        + coeffs[1] * u * u / 2.0
                        + coeffs[2] * u * u * u / 3.0
                        + coeffs[3] * u * u * u * u / 4.0
                };
                anti(hi) - anti(lo)
            }
            RateModel::Linear { points } => {
                let mut total = 0.0;
                for w in points.windows(2) {
                    let (v0, y0) = w[0];
                    let (v1, y1) = w[1];
                    let a = v0.max(lo);
                    let b = v1.min(hi);
                    if b <= a {
                        continue;
                    }
                    let slope = (y1 - y0) / (v1 - v0);
                    let ya = y0 + slope * (a - v0);
                    let yb = y0 + slope * (b - v0);
                    total += 0.5 * (ya + yb) * (b - a);
                }
                total
            }
        }
    }
}

/// Sort by quality and collapse duplicate quality values by averaging their
/// log-rates, so the piecewise-linear model is a function.
fn clean_points(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "BD-Rate needs at least 2 points per set, got {}",
            points.len()
        )));
    }
    for &(rate, vmaf) in points {
        if !(rate.is_finite() && rate > 0.0 && vmaf.is_finite()) {
            return Err(Error::Validation(format!(
                "bad rate-quality point ({rate}, {vmaf})"
            )));
        }
    }
    let mut sorted: Vec<(f64, f64)> = points.iter().map(|&(r, v)| (v, r.ln())).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite quality"));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        let mut sum = 0.0;
        let mut count = 0usize;
        while i < sorted.len() && sorted[i].0 == v {
            sum += sorted[i].1;
            count += 1;
            i += 1;
        }
        out.push((v, sum / count as f64));
    }
    if out.len() < 2 {
        return Err(Error::InsufficientData(
            "all points share one quality value".to_string(),
        ));
    }
    Ok(out)
}

/// Least-squares cubic fit of log-rate against centered quality. Falls back
/// to `None` when the normal equations are near-singular (clustered
/// quality values).
fn fit_cubic(points: &[(f64, f64)]) -> Option<RateModel> {
    if points.len() < 4 {
        return None;
    }
    let shift = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    // Normal equations A^T A c = A^T y for the Vandermonde design.
    let mut ata = [[0.0f64; 4]; 4];
    let mut aty = [0.0f64; 4];
    for &(v, y) in points {
        let u = v - shift;
        let row = [1.0, u, u * u, u * u * u];
        for r in 0..4 {
            for c in 0..4 {
                ata[r][c] += row[r] * row[c];
            }
            aty[r] += row[r] * y;
        }
    }
    let coeffs = solve4(ata, aty)?;
    Some(RateModel::Cubic { coeffs, shift })
}

/// Gaussian elimination with partial pivoting; `None` on a tiny pivot.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1e-300);
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for c in col..4 {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 4];
    for row in (0..4).rev() {
        let mut sum = b[row];
        for c in row + 1..4 {
            sum -= a[row][c] * x[c];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

fn fit_model(points: &[(f64, f64)]) -> RateModel {
    fit_cubic(points).unwrap_or_else(|| RateModel::Linear {
        points: points.to_vec(),
    })
}

/// BD-Rate of `test` against `reference`, both as (rate_kbps, quality)
/// points. Positive means the test set spends more rate for the same
/// quality.
pub fn bd_rate(test: &[(f64, f64)], reference: &[(f64, f64)]) -> Result<BdResult> {
    let test_pts = clean_points(test)?;
    let ref_pts = clean_points(reference)?;
    let lo = test_pts[0].0.max(ref_pts[0].0);
    let hi = test_pts[test_pts.len() - 1].0.min(ref_pts[ref_pts.len() - 1].0);
    if hi <= lo {
        return Err(Error::NoOverlap {
            a_lo: test_pts[0].0,
            a_hi: test_pts[test_pts.len() - 1].0,
            b_lo: ref_pts[0].0,
            b_hi: ref_pts[ref_pts.len() - 1].0,
        });
    }
    let test_model = fit_model(&test_pts);
    let ref_model = fit_model(&ref_pts);
    let mean_diff =
        (test_model.integrate(lo, hi) - ref_model.integrate(lo, hi)) / (hi - lo);
    Ok(BdResult {
        bd_rate_percent: (mean_diff.exp() - 1.0) * 100.0,
        overlap: (lo, hi),
        test_fit: test_model.fit_kind(),
        reference_fit: ref_model.fit_kind(),
    })
}

/// BD-Rate between two ladders in rung space.
pub fn bd_rate_ladders(test: &Ladder, reference: &Ladder) -> Result<BdResult> {
    let t: Vec<(f64, f64)> = test.rungs.iter().map(|r| (r.rate_kbps, r.vmaf)).collect();
    let r: Vec<(f64, f64)> = reference.rungs.iter().map(|r| (r.rate_kbps, r.vmaf)).collect();
    bd_rate(&t, &r)
}

/// Percentage of reference rungs whose (resolution, QP) pair also appears
/// in the estimated ladder.
pub fn rl_hits(estimated: &Ladder, reference: &Ladder) -> f64 {
    if reference.rungs.is_empty() {
        return 0.0;
    }
    let estimated_keys: Vec<(crate::model::Resolution, i32)> = estimated
        .rungs
        .iter()
        .map(|r| (r.resolution, r.qp))
        .collect();
    let hits = reference
        .rungs
        .iter()
        .filter(|r| estimated_keys.contains(&(r.resolution, r.qp)))
        .count();
    hits as f64 / reference.rungs.len() as f64 * 100.0
}

/// One sequence's contribution to a corpus report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceResult {
    pub sequence: String,
    pub bd_rate_percent: f64,
    pub rl_hit_count: usize,
    pub reference_rungs: usize,
    pub tally: u64,
}

/// Histogram as CSV-ready bin edges and counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bin_width: f64) -> Histogram {
        if values.is_empty() {
            return Histogram { edges: vec![], counts: vec![] };
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = (min / bin_width).floor() * bin_width;
        let bins = (((max - lo) / bin_width).floor() as usize + 1).max(1);
        let mut counts = vec![0usize; bins];
        for &v in values {
            let idx = (((v - lo) / bin_width).floor() as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let edges = (0..=bins).map(|i| lo + bin_width * i as f64).collect();
        Histogram { edges, counts }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, count) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], count));
        }
        out
    }
}

/// Corpus-level summary of one method against the reference ladders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusReport {
    pub per_sequence: Vec<SequenceResult>,
    pub mean_bd_rate_percent: f64,
    /// Mean absolute deviation about the mean.
    pub mad_bd_rate_percent: f64,
    /// Pooled: total hits over total reference rungs.
    pub rl_hits_percent: f64,
    pub max_tally: u64,
    pub encode_reduction_percent: f64,
    pub histogram: Histogram,
}

/// Aggregate per-sequence results into the corpus report.
pub fn corpus_report(results: &[SequenceResult], rl_tally: u64) -> Result<CorpusReport> {
    if results.is_empty() {
        return Err(Error::InsufficientData("no sequence results".to_string()));
    }
    let bd: Vec<f64> = results.iter().map(|r| r.bd_rate_percent).collect();
    let mean = bd.iter().sum::<f64>() / bd.len() as f64;
    let mad = bd.iter().map(|x| (x - mean).abs()).sum::<f64>() / bd.len() as f64;
    let total_hits: usize = results.iter().map(|r| r.rl_hit_count).sum();
    let total_rungs: usize = results.iter().map(|r| r.reference_rungs).sum();
    let max_tally = results.iter().map(|r| r.tally).max().unwrap_or(0);
    let reduction = if rl_tally > 0 {
        (1.0 - max_tally as f64 / rl_tally as f64) * 100.0
    } else {
        0.0
    };
    Ok(CorpusReport {
        per_sequence: results.to_vec(),
        mean_bd_rate_percent: mean,
        mad_bd_rate_percent: mad,
        rl_hits_percent: if total_rungs > 0 {
            total_hits as f64 / total_rungs as f64 * 100.0
        } else {
            0.0
        },
        max_tally,
        encode_reduction_percent: reduction,
        histogram: Histogram::from_values(&bd, 0.5),
    })
}
