//! Bitrate ladder construction.
//!
//! A ladder is an ordered set of rungs (rate, VMAF, QP, resolution) sampled
//! from a Pareto front at doubling target rates, pruned where quality has
//! saturated, and repaired so that rate is strictly increasing while VMAF
//! and resolution never decrease and QP never increases within a
//! resolution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Resolution;
use crate::pareto::ParetoFront;

/// Default ladder bitrate range, 150 kbps to 25 Mbps.
pub const DEFAULT_RATE_RANGE: (f64, f64) = (150.0, 25_000.0);
/// VMAF level above which flat rungs are pruned.
pub const DEFAULT_V_HIGH: f64 = 97.0;
/// Slope threshold in VMAF per kbps (0.01 VMAF per Mbps).
pub const DEFAULT_EPSILON: f64 = 0.01 / 1000.0;

/// One published rung.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub rate_kbps: f64,
    pub vmaf: f64,
    pub qp: i32,
    pub resolution: Resolution,
}

/// An ordered bitrate ladder for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub sequence: String,
    pub rungs: Vec<Rung>,
    pub target_rates: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Ladder {
    /// Check every ladder invariant, returning the first violation.
    pub fn check_invariants(&self) -> Result<()> {
        if self.rungs.is_empty() {
            return Err(Error::Validation("ladder has no rungs".to_string()));
        }
        if self.rungs.len() > self.target_rates.len().max(1) {
            return Err(Error::Validation(format!(
                "{} rungs exceed {} targets",
                self.rungs.len(),
                self.target_rates.len()
            )));
        }
        let mut last_qp_per_res: BTreeMap<Resolution, i32> = BTreeMap::new();
        for (i, w) in self.rungs.windows(2).enumerate() {
            if w[1].rate_kbps <= w[0].rate_kbps {
                return Err(Error::Validation(format!(
                    "rates not strictly increasing at rung {}",
                    i + 1
                )));
            }
            if w[1].vmaf < w[0].vmaf {
                return Err(Error::Validation(format!(
                    "vmaf decreases at rung {}",
                    i + 1
                )));
            }
            if w[1].resolution < w[0].resolution {
                return Err(Error::Validation(format!(
                    "resolution decreases at rung {}",
                    i + 1
                )));
            }
        }
        for r in &self.rungs {
            if let Some(&prev) = last_qp_per_res.get(&r.resolution) {
                if r.qp > prev {
                    return Err(Error::Validation(format!(
                        "qp increases with rate within {}",
                        r.resolution
                    )));
                }
            }
            last_qp_per_res.insert(r.resolution, r.qp);
        }
        Ok(())
    }
}

/// Doubling target rates: `{r_min * 2^i : r_min * 2^i <= r_max}`.
pub fn target_rates(r_min: f64, r_max: f64) -> Result<Vec<f64>> {
    if r_min <= 0.0 {
        return Err(Error::Config(format!("r_min must be positive, got {r_min}")));
    }
    if r_max < r_min {
        return Err(Error::Config(format!(
            "empty rate range [{r_min}, {r_max}]"
        )));
    }
    let mut out = Vec::new();
    let mut r = r_min;
    while r <= r_max {
        out.push(r);
        r *= 2.0;
    }
    Ok(out)
}

/// Sample a Pareto front at the target rates and assemble a valid ladder.
///
/// Each target takes the front point with the largest rate not exceeding
/// it; a target below the whole front takes the lowest point and is
/// flagged. Rungs past quality saturation (previous VMAF above `v_high`
/// and slope at most `epsilon` VMAF/kbps) are pruned, then the monotonicity
/// repair runs.
pub fn build_ladder(
    sequence: &str,
    front: &ParetoFront,
    targets: &[f64],
    v_high: f64,
    epsilon: f64,
) -> Result<Ladder> {
    if front.is_empty() {
        return Err(Error::InsufficientData("empty Pareto front".to_string()));
    }
    if targets.is_empty() {
        return Err(Error::Config("no target rates".to_string()));
    }
    let mut warnings = Vec::new();
    let mut rungs: Vec<Rung> = Vec::new();
    for &target in targets {
        let point = match front.at_or_below(target) {
            Some(p) => p,
            None => {
                let lowest = front.lowest_rate().expect("front is non-empty");
                warnings.push(format!(
                    "target {target} kbps undercuts the front; kept lowest point at {:.1} kbps",
                    lowest.bitrate_kbps
                ));
                lowest
            }
        };
        let rung = Rung {
            rate_kbps: point.bitrate_kbps,
            vmaf: point.vmaf,
            qp: point.qp,
            resolution: point.resolution,
        };
        // Two targets mapping to the same front point collapse to one rung.
        if rungs.last() != Some(&rung) {
            rungs.push(rung);
        }
    }

    // Slope pruning: beyond v_high, a rung must still buy quality.
    let mut pruned: Vec<Rung> = Vec::new();
    for rung in rungs {
        if let Some(prev) = pruned.last() {
            if prev.vmaf > v_high {
                let slope = (rung.vmaf - prev.vmaf) / (rung.rate_kbps - prev.rate_kbps);
                if slope <= epsilon {
                    continue;
                }
            }
        }
        pruned.push(rung);
    }

    let ladder = Ladder {
        sequence: sequence.to_string(),
        rungs: pruned,
        target_rates: targets.to_vec(),
        warnings,
    };
    Ok(enforce_monotonicity(ladder))
}

/// Drop rungs violating the ladder ordering constraints, scanning from the
/// low-rate end and keeping the earlier rung on every conflict.
pub fn enforce_monotonicity(ladder: Ladder) -> Ladder {
    let mut kept: Vec<Rung> = Vec::new();
    let mut last_qp_per_res: BTreeMap<Resolution, i32> = BTreeMap::new();
    for rung in ladder.rungs {
        if let Some(prev) = kept.last() {
            if rung.rate_kbps <= prev.rate_kbps
                || rung.vmaf < prev.vmaf
                || rung.resolution < prev.resolution
            {
                continue;
            }
        }
        if let Some(&prev_qp) = last_qp_per_res.get(&rung.resolution) {
            if rung.qp > prev_qp {
                continue;
            }
        }
        last_qp_per_res.insert(rung.resolution, rung.qp);
        kept.push(rung);
    }
    Ladder {
        sequence: ladder.sequence,
        rungs: kept,
        target_rates: ladder.target_rates,
        warnings: ladder.warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::RqPoint;

    #[test]
    fn doubling_targets_over_paper_range() {
        let t = target_rates(150.0, 25_000.0).unwrap();
        assert_eq!(
            t,
            vec![150.0, 300.0, 600.0, 1200.0, 2400.0, 4800.0, 9600.0, 19200.0]
        );
        assert_eq!(t.len(), 8);
    }

    #[test]
    fn single_rung_when_range_collapses() {
        assert_eq!(target_rates(100.0, 100.0).unwrap(), vec![100.0]);
    }

    #[test]
    fn empty_range_is_an_error() {
        assert!(target_rates(100.0, 99.0).is_err());
        assert!(target_rates(0.0, 99.0).is_err());
    }

    fn point(rate: f64, vmaf: f64, qp: i32, resolution: Resolution) -> RqPoint {
        RqPoint {
            log_rate: rate.ln(),
            bitrate_kbps: rate,
            vmaf,
            qp,
            resolution,
        }
    }

    fn rung(rate: f64, vmaf: f64, qp: i32, resolution: Resolution) -> Rung {
        Rung { rate_kbps: rate, vmaf, qp, resolution }
    }

    #[test]
    fn saturated_tail_is_pruned() {
        // Front reaching VMAF 99 by the 5th target with a flat tail.
        let targets = target_rates(150.0, 25_000.0).unwrap();
        let points = vec![
            point(140.0, 60.0, 45, Resolution::R540p),
            point(290.0, 72.0, 40, Resolution::R540p),
            point(580.0, 83.0, 38, Resolution::R720p),
            point(1150.0, 92.0, 33, Resolution::R1080p),
            point(2300.0, 99.0, 28, Resolution::R2160p),
            point(4700.0, 99.02, 25, Resolution::R2160p),
            point(9500.0, 99.03, 21, Resolution::R2160p),
            point(19000.0, 99.04, 17, Resolution::R2160p),
        ];
        let front = ParetoFront { points };
        let ladder = build_ladder("s", &front, &targets, 97.0, DEFAULT_EPSILON).unwrap();
        assert!(ladder.rungs.len() < 8, "flat tail must be pruned: {:?}", ladder.rungs);
        assert_eq!(ladder.rungs.last().unwrap().vmaf, 99.0);
        // Manual slope check: every kept transition past v_high buys quality.
        for w in ladder.rungs.windows(2) {
            if w[0].vmaf > 97.0 {
                let slope = (w[1].vmaf - w[0].vmaf) / (w[1].rate_kbps - w[0].rate_kbps);
                assert!(slope > DEFAULT_EPSILON);
            }
        }
        ladder.check_invariants().unwrap();
    }

    #[test]
    fn unsaturated_front_keeps_all_rungs() {
        let targets = target_rates(150.0, 25_000.0).unwrap();
        let points: Vec<RqPoint> = (0..8)
            .map(|i| {
                let rate = 150.0 * 2f64.powi(i) * 0.95;
                point(rate, 50.0 + 5.0 * f64::from(i), 40 - 3 * i, Resolution::R2160p)
            })
            .collect();
        let front = ParetoFront { points };
        let ladder = build_ladder("s", &front, &targets, 97.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(ladder.rungs.len(), 8);
        ladder.check_invariants().unwrap();
    }

    #[test]
    fn target_below_front_keeps_lowest_point_with_warning() {
        let targets = vec![100.0, 1000.0];
        let front = ParetoFront {
            points: vec![
                point(400.0, 70.0, 40, Resolution::R540p),
                point(900.0, 80.0, 35, Resolution::R540p),
            ],
        };
        let ladder = build_ladder("s", &front, &targets, 97.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(ladder.rungs.len(), 2);
        assert_eq!(ladder.rungs[0].rate_kbps, 400.0);
        assert_eq!(ladder.warnings.len(), 1);
        assert!(ladder.warnings[0].contains("undercuts"));
    }

    #[test]
    fn monotonicity_already_valid_is_identity() {
        let ladder = Ladder {
            sequence: "s".into(),
            rungs: vec![
                rung(150.0, 60.0, 42, Resolution::R540p),
                rung(300.0, 70.0, 38, Resolution::R540p),
                rung(600.0, 80.0, 36, Resolution::R720p),
                rung(1200.0, 88.0, 30, Resolution::R1080p),
            ],
            target_rates: vec![150.0, 300.0, 600.0, 1200.0],
            warnings: vec![],
        };
        let fixed = enforce_monotonicity(ladder.clone());
        assert_eq!(fixed, ladder);
    }

    #[test]
    fn resolution_regression_is_dropped() {
        let ladder = Ladder {
            sequence: "s".into(),
            rungs: vec![
                rung(150.0, 60.0, 42, Resolution::R540p),
                rung(300.0, 70.0, 38, Resolution::R720p),
                rung(600.0, 80.0, 30, Resolution::R540p),
                rung(1200.0, 88.0, 30, Resolution::R1080p),
            ],
            target_rates: vec![150.0, 300.0, 600.0, 1200.0],
            warnings: vec![],
        };
        let fixed = enforce_monotonicity(ladder);
        assert_eq!(fixed.rungs.len(), 3);
        assert_eq!(fixed.rungs[1].resolution, Resolution::R720p);
        assert_eq!(fixed.rungs[2].resolution, Resolution::R1080p);
        fixed.check_invariants().unwrap();
    }

    #[test]
    fn randomized_ladders_always_repair_and_are_idempotent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.random_range(1..10);
            let mut rate = rng.random_range(100.0..400.0);
            let mut rungs = Vec::with_capacity(n);
            for _ in 0..n {
                rate *= rng.random_range(0.8..2.6);
                rungs.push(Rung {
                    rate_kbps: rate,
                    vmaf: rng.random_range(40.0..100.0),
                    qp: rng.random_range(15..=45),
                    resolution: Resolution::ALL[rng.random_range(0..4)],
                });
            }
            let ladder = Ladder {
                sequence: "s".into(),
                rungs,
                target_rates: (0..10).map(|i| 100.0 * 2f64.powi(i)).collect(),
                warnings: vec![],
            };
            let fixed = enforce_monotonicity(ladder);
            if !fixed.rungs.is_empty() {
                fixed.check_invariants().unwrap();
            }
            let twice = enforce_monotonicity(fixed.clone());
            assert_eq!(fixed, twice, "repair must be idempotent");
        }
    }
}
