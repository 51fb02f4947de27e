//! The ladder estimation methods.
//!
//! RL exhaustively encodes the full QP grid and is the reference every
//! other method is judged against. NIL encodes seven fixed QPs per
//! resolution and interpolates the rest. CIL-n concentrates n encodes per
//! resolution on the range above the (predicted) knee, where the Pareto
//! front lives. FL encodes only the six predicted cross-over QPs plus two
//! extra points and estimates rung QPs from per-resolution linear models in
//! the log-rate domain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::EncodeSession;
use crate::error::{Error, Result};
use crate::interp::{fit_rq_curve, RqInterp};
use crate::kneedle::{knee_qp, prior_knee_qp, KneePlane};
use crate::ladder::{build_ladder, Ladder, DEFAULT_EPSILON, DEFAULT_RATE_RANGE, DEFAULT_V_HIGH};
use crate::model::{EncodeRecord, QpRange, Resolution};
use crate::pareto::{dense_points, pareto_front, ParetoFront, RqPoint};

/// Ladder estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rl,
    Nil,
    Cil,
    Fl,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Rl => "rl",
            Method::Nil => "nil",
            Method::Cil => "cil",
            Method::Fl => "fl",
        };
        f.write_str(s)
    }
}

/// Parameters of the FL extra-encode rule for one end resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlExtraParams {
    pub qp_m: i32,
    pub delta: i32,
}

/// Full configuration of an estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// CIL initial encodes per resolution.
    pub cil_n: usize,
    /// Per-resolution knee offsets t_s.
    pub offsets: BTreeMap<Resolution, i32>,
    /// The seven fixed NIL QPs per resolution.
    pub nil_qps: Vec<i32>,
    /// FL extra-encode parameters for the end resolutions.
    pub fl_extra: BTreeMap<Resolution, FlExtraParams>,
    pub qp_range: QpRange,
    pub rate_range: (f64, f64),
    pub v_high: f64,
    pub epsilon: f64,
    pub kneedle_sensitivity: f64,
    pub knee_plane: KneePlane,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        let mut offsets = BTreeMap::new();
        offsets.insert(Resolution::R2160p, -4);
        offsets.insert(Resolution::R1080p, -4);
        offsets.insert(Resolution::R720p, 6);
        offsets.insert(Resolution::R540p, 10);
        let mut fl_extra = BTreeMap::new();
        fl_extra.insert(Resolution::R2160p, FlExtraParams { qp_m: 30, delta: 5 });
        fl_extra.insert(Resolution::R540p, FlExtraParams { qp_m: 38, delta: 2 });
        MethodConfig {
            method,
            cil_n: 5,
            offsets,
            nil_qps: vec![15, 20, 25, 30, 35, 40, 45],
            fl_extra,
            qp_range: QpRange::DEFAULT,
            rate_range: DEFAULT_RATE_RANGE,
            v_high: DEFAULT_V_HIGH,
            epsilon: DEFAULT_EPSILON,
            kneedle_sensitivity: 1.0,
            knee_plane: KneePlane::LogRateVmaf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::Cil && !(4..=7).contains(&self.cil_n) {
            return Err(Error::Config(format!(
                "CIL n must be within 4..=7, got {}",
                self.cil_n
            )));
        }
        if self.method == Method::Nil {
            if self.nil_qps.len() != 7 {
                return Err(Error::Config(format!(
                    "NIL needs exactly 7 QPs, got {}",
                    self.nil_qps.len()
                )));
            }
            for &qp in &self.nil_qps {
                if !self.qp_range.contains(qp) {
                    return Err(Error::Config(format!("NIL qp {qp} outside universe")));
                }
            }
        }
        Ok(())
    }

    pub fn targets(&self) -> Result<Vec<f64>> {
        crate::ladder::target_rates(self.rate_range.0, self.rate_range.1)
    }
}

/// Everything one estimation run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub sequence: String,
    pub config: MethodConfig,
    pub tally: u64,
    pub ladder: Ladder,
    /// Initial-encode QP sets actually used, per resolution.
    pub qp_sets: BTreeMap<Resolution, Vec<i32>>,
}

/// Reference ladder: encode the full grid, build the front, sample it.
pub fn estimate_rl(session: &EncodeSession, sequence: &str, config: &MethodConfig) -> Result<RunReport> {
    config.validate()?;
    let mut curves: Vec<Vec<RqPoint>> = Vec::with_capacity(4);
    let mut qp_sets = BTreeMap::new();
    for res in Resolution::ALL {
        let mut points = Vec::with_capacity(config.qp_range.len());
        for qp in config.qp_range.iter() {
            let rec = session.encode(sequence, res, qp)?;
            points.push(RqPoint {
                log_rate: rec.log_rate(),
                bitrate_kbps: rec.bitrate_kbps,
                vmaf: rec.vmaf,
                qp,
                resolution: res,
            });
        }
        qp_sets.insert(res, config.qp_range.iter().collect());
        curves.push(points);
    }
    let front = pareto_front(&curves)?;
    let targets = config.targets()?;
    let ladder = build_ladder(sequence, &front, &targets, config.v_high, config.epsilon)?;
    Ok(RunReport {
        method: Method::Rl,
        sequence: sequence.to_string(),
        config: config.clone(),
        tally: session.tally(),
        ladder,
        qp_sets,
    })
}

/// Shared tail of NIL and CIL: interpolate each resolution from its initial
/// encodes, extract the estimated front, pick one (resolution, QP) per
/// target, encode those picks, and assemble the ladder from the measured
/// records.
fn interpolation_ladder(
    session: &EncodeSession,
    sequence: &str,
    config: &MethodConfig,
    method: Method,
    qp_sets: BTreeMap<Resolution, Vec<i32>>,
) -> Result<RunReport> {
    let mut interps: Vec<RqInterp> = Vec::with_capacity(4);
    for (&res, qps) in &qp_sets {
        let records: Vec<EncodeRecord> = qps
            .iter()
            .map(|&qp| session.encode(sequence, res, qp))
            .collect::<Result<_>>()?;
        interps.push(fit_rq_curve(&records)?);
    }
    let curves: Vec<Vec<RqPoint>> = interps.iter().map(dense_points).collect::<Result<_>>()?;
    let estimated_front = pareto_front(&curves)?;
    let targets = config.targets()?;

    // Encode the estimated picks; rungs carry measured values.
    let mut rung_points: Vec<RqPoint> = Vec::new();
    for &target in &targets {
        let pick = estimated_front
            .at_or_below(target)
            .or_else(|| estimated_front.lowest_rate())
            .expect("front is non-empty");
        let rec = session.encode(sequence, pick.resolution, pick.qp)?;
        rung_points.push(RqPoint {
            log_rate: rec.log_rate(),
            bitrate_kbps: rec.bitrate_kbps,
            vmaf: rec.vmaf,
            qp: rec.qp,
            resolution: rec.resolution,
        });
    }
    let measured_front = ParetoFront { points: dedup_points(rung_points) };
    let ladder = build_ladder(sequence, &measured_front, &targets, config.v_high, config.epsilon)?;
    Ok(RunReport {
        method,
        sequence: sequence.to_string(),
        config: config.clone(),
        tally: session.tally(),
        ladder,
        qp_sets,
    })
}

fn dedup_points(mut points: Vec<RqPoint>) -> Vec<RqPoint> {
    points.sort_by(|a, b| {
        (a.resolution, a.qp)
            .cmp(&(b.resolution, b.qp))
            .then(a.log_rate.partial_cmp(&b.log_rate).expect("finite log rates"))
    });
    points.dedup_by(|a, b| a.resolution == b.resolution && a.qp == b.qp);
    points.sort_by(|a, b| a.log_rate.partial_cmp(&b.log_rate).expect("finite log rates"));
    points
}

/// Naive interpolation-based ladder from seven fixed QPs per resolution.
pub fn estimate_nil(session: &EncodeSession, sequence: &str, config: &MethodConfig) -> Result<RunReport> {
    config.validate()?;
    let mut qps = config.nil_qps.clone();
    qps.sort_unstable();
    qps.dedup();
    let qp_sets: BTreeMap<Resolution, Vec<i32>> = Resolution::ALL
        .iter()
        .map(|&res| (res, qps.clone()))
        .collect();
    interpolation_ladder(session, sequence, config, Method::Nil, qp_sets)
}

/// Evenly space `n` integer QPs over `[knee_qp + t_s, qp_max]`, clamped to
/// the universe. Rounding collisions shift to the nearest free integer in
/// the range.
pub fn cil_qp_set(knee_qp: i32, t_s: i32, n: usize, qp_max: i32, universe: QpRange) -> Result<Vec<i32>> {
    if n < 2 {
        return Err(Error::Config(format!("need n >= 2 initial encodes, got {n}")));
    }
    let lo = universe.clamp(knee_qp + t_s);
    let hi = universe.clamp(qp_max);
    if lo >= hi {
        return Err(Error::Config(format!(
            "empty CIL range: knee {knee_qp} + offset {t_s} reaches {lo}, qp_max {hi}"
        )));
    }
    let available = (hi - lo + 1) as usize;
    if available < n {
        return Err(Error::Config(format!(
            "CIL range [{lo}, {hi}] has {available} integers, need {n}"
        )));
    }
    let mut chosen: Vec<i32> = Vec::with_capacity(n);
    for i in 0..n {
        let ideal = f64::from(lo) + (f64::from(hi) - f64::from(lo)) * i as f64 / (n - 1) as f64;
        let mut qp = ideal.round() as i32;
        if chosen.contains(&qp) {
            // Shift to the nearest free integer within the range.
            let mut shifted = None;
            'search: for dist in 1..=(hi - lo) {
                for candidate in [qp - dist, qp + dist] {
                    if candidate >= lo && candidate <= hi && !chosen.contains(&candidate) {
                        shifted = Some(candidate);
                        break 'search;
                    }
                }
            }
            qp = shifted.expect("range has at least n free integers");
        }
        chosen.push(qp);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Content-driven interpolation-based ladder: per-resolution initial QP
/// sets positioned by the predicted knees.
pub fn estimate_cil(
    session: &EncodeSession,
    sequence: &str,
    knee_predictions: &BTreeMap<Resolution, f64>,
    config: &MethodConfig,
) -> Result<RunReport> {
    config.validate()?;
    let mut qp_sets = BTreeMap::new();
    for res in Resolution::ALL {
        let knee = knee_predictions
            .get(&res)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing knee prediction for {res}")))?;
        let t_s = config.offsets.get(&res).copied().unwrap_or(0);
        let qps = cil_qp_set(
            knee.round() as i32,
            t_s,
            config.cil_n,
            config.qp_range.max,
            config.qp_range,
        )?;
        qp_sets.insert(res, qps);
    }
    interpolation_ladder(session, sequence, config, Method::Cil, qp_sets)
}

/// Knees measured from full-grid curves of a session; the ground-truth
/// stand-in for the GP predictions.
pub fn oracle_knees(
    session: &EncodeSession,
    sequence: &str,
    config: &MethodConfig,
) -> Result<BTreeMap<Resolution, f64>> {
    let mut out = BTreeMap::new();
    for res in Resolution::ALL {
        let records: Vec<EncodeRecord> = config
            .qp_range
            .iter()
            .map(|qp| session.encode(sequence, res, qp))
            .collect::<Result<_>>()?;
        let interp = fit_rq_curve(&records)?;
        let qp = match knee_qp(&interp, config.kneedle_sensitivity, config.knee_plane) {
            Ok(k) => f64::from(k.qp),
            Err(Error::NoKnee(_)) => f64::from(prior_knee_qp(res)),
            Err(e) => return Err(e),
        };
        out.insert(res, qp);
    }
    Ok(out)
}

/// Extra-encode rule for the FL end resolutions: step away from the
/// predicted cross-over QP by delta, downward at or above the pivot and
/// upward below it.
pub fn fl_extra_qp(predicted_qp: i32, qp_m: i32, delta: i32, universe: QpRange) -> i32 {
    let qp = if predicted_qp >= qp_m {
        predicted_qp - delta
    } else {
        predicted_qp + delta
    };
    universe.clamp(qp)
}

/// Predicted cross-over QPs for one adjacent resolution pair.
///
/// `qp_high` is the high-QP end of the pair's higher resolution, `qp_low`
/// the low-QP end of its lower resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPrediction {
    pub high_res: Resolution,
    pub low_res: Resolution,
    pub qp_high: f64,
    pub qp_low: f64,
}

/// Feature-predicted ladder: encode the six cross-over QPs plus one extra
/// each for 2160p and 540p, fit `QP = alpha + beta * log_rate` per
/// resolution through its two encodes, assign each target a resolution by
/// the measured cross-over rates, and encode the estimated rung QPs.
pub fn estimate_fl(
    session: &EncodeSession,
    sequence: &str,
    crossovers: &[CrossoverPrediction; 3],
    config: &MethodConfig,
) -> Result<RunReport> {
    config.validate()?;
    for (pair, (want_high, want_low)) in crossovers.iter().zip(Resolution::ADJACENT_PAIRS) {
        if pair.high_res != want_high || pair.low_res != want_low {
            return Err(Error::Config(format!(
                "crossover predictions must cover ({want_high}, {want_low}), got ({}, {})",
                pair.high_res, pair.low_res
            )));
        }
    }
    let universe = config.qp_range;
    let round = |qp: f64| universe.clamp(qp.round() as i32);

    // Two encode QPs per resolution: the middle resolutions reuse their two
    // cross-over QPs, the end resolutions add one extra point.
    let mut encode_qps: BTreeMap<Resolution, Vec<i32>> = BTreeMap::new();
    let top = round(crossovers[0].qp_high);
    let top_extra = config
        .fl_extra
        .get(&Resolution::R2160p)
        .map(|p| fl_extra_qp(top, p.qp_m, p.delta, universe))
        .ok_or_else(|| Error::Config("missing FL extra params for 2160p".to_string()))?;
    encode_qps.insert(Resolution::R2160p, vec![top, top_extra]);
    encode_qps.insert(
        Resolution::R1080p,
        vec![round(crossovers[0].qp_low), round(crossovers[1].qp_high)],
    );
    encode_qps.insert(
        Resolution::R720p,
        vec![round(crossovers[1].qp_low), round(crossovers[2].qp_high)],
    );
    let bottom = round(crossovers[2].qp_low);
    let bottom_extra = config
        .fl_extra
        .get(&Resolution::R540p)
        .map(|p| fl_extra_qp(bottom, p.qp_m, p.delta, universe))
        .ok_or_else(|| Error::Config("missing FL extra params for 540p".to_string()))?;
    encode_qps.insert(Resolution::R540p, vec![bottom, bottom_extra]);

    let mut lines: BTreeMap<Resolution, (f64, f64)> = BTreeMap::new();
    let mut crossover_records: BTreeMap<(Resolution, i32), EncodeRecord> = BTreeMap::new();
    for (&res, qps) in &encode_qps {
        let recs: Vec<EncodeRecord> = qps
            .iter()
            .map(|&qp| session.encode(sequence, res, qp))
            .collect::<Result<_>>()?;
        let (r0, r1) = (&recs[0], &recs[1]);
        let (x0, x1) = (r0.log_rate(), r1.log_rate());
        if (x1 - x0).abs() < 1e-12 {
            return Err(Error::Validation(format!(
                "degenerate FL line for {res}: encodes at qp {} and {} have equal log-rate",
                r0.qp, r1.qp
            )));
        }
        let beta = f64::from(r1.qp - r0.qp) / (x1 - x0);
        let alpha = f64::from(r0.qp) - beta * x0;
        lines.insert(res, (alpha, beta));
        for r in recs {
            crossover_records.insert((res, r.qp), r);
        }
    }

    // Switch thresholds from the measured cross-over rates: geometric mean
    // of each pair's two cross-over encodes.
    let pair_qps = [
        (crossovers[0].high_res, top, crossovers[0].low_res, round(crossovers[0].qp_low)),
        (
            crossovers[1].high_res,
            round(crossovers[1].qp_high),
            crossovers[1].low_res,
            round(crossovers[1].qp_low),
        ),
        (crossovers[2].high_res, round(crossovers[2].qp_high), crossovers[2].low_res, bottom),
    ];
    let mut thresholds: Vec<(Resolution, f64)> = Vec::with_capacity(3);
    for (high_res, qp_high, low_res, qp_low) in pair_qps {
        let high_rec = &crossover_records[&(high_res, qp_high)];
        let low_rec = &crossover_records[&(low_res, qp_low)];
        let mid_log = 0.5 * (high_rec.log_rate() + low_rec.log_rate());
        thresholds.push((high_res, mid_log.exp()));
    }

    let targets = config.targets()?;
    let mut rung_points: Vec<RqPoint> = Vec::new();
    for &target in &targets {
        let mut res = Resolution::R540p;
        for &(high_res, switch_rate) in &thresholds {
            if target >= switch_rate {
                res = res.max(high_res);
            }
        }
        let (alpha, beta) = lines[&res];
        let qp = round(alpha + beta * target.ln());
        let rec = session.encode(sequence, res, qp)?;
        rung_points.push(RqPoint {
            log_rate: rec.log_rate(),
            bitrate_kbps: rec.bitrate_kbps,
            vmaf: rec.vmaf,
            qp: rec.qp,
            resolution: rec.resolution,
        });
    }
    let measured_front = ParetoFront { points: dedup_points(rung_points) };
    let ladder = build_ladder(sequence, &measured_front, &targets, config.v_high, config.epsilon)?;
    Ok(RunReport {
        method: Method::Fl,
        sequence: sequence.to_string(),
        config: config.clone(),
        tally: session.tally(),
        ladder,
        qp_sets: encode_qps,
    })
}

/// Ground-truth cross-over predictions measured from full-grid curves; the
/// oracle stand-in for the GP predictions.
pub fn oracle_crossovers(
    session: &EncodeSession,
    sequence: &str,
    config: &MethodConfig,
) -> Result<[CrossoverPrediction; 3]> {
    use crate::pareto::{crossover_qps, CrossoverOutcome, QpRounding};
    let mut interps: BTreeMap<Resolution, RqInterp> = BTreeMap::new();
    for res in Resolution::ALL {
        let records: Vec<EncodeRecord> = config
            .qp_range
            .iter()
            .map(|qp| session.encode(sequence, res, qp))
            .collect::<Result<_>>()?;
        interps.insert(res, fit_rq_curve(&records)?);
    }
    let mut out = Vec::with_capacity(3);
    for (high, low) in Resolution::ADJACENT_PAIRS {
        let outcome = crossover_qps(&interps[&high], &interps[&low], 0.1, QpRounding::Nearest)?;
        let pred = match outcome {
            CrossoverOutcome::Pair(pair) => CrossoverPrediction {
                high_res: high,
                low_res: low,
                qp_high: f64::from(pair.qp_high),
                qp_low: f64::from(pair.qp_low),
            },
            // No usable intersection: fall back near the knee priors so the
            // pipeline keeps running on degenerate curves.
            CrossoverOutcome::Dominated | CrossoverOutcome::Coincident => CrossoverPrediction {
                high_res: high,
                low_res: low,
                qp_high: f64::from(prior_knee_qp(high) + 6),
                qp_low: f64::from(prior_knee_qp(low) - 6),
            },
        };
        out.push(pred);
    }
    Ok([out[0], out[1], out[2]])
}

/// Worst-case encode budget of a method for a given ladder length.
pub fn encode_budget(method: Method, cil_n: usize, qp_universe: usize, ladder_len: usize) -> usize {
    match method {
        Method::Rl => qp_universe * 4,
        Method::Nil => 7 * 4 + ladder_len,
        Method::Cil => cil_n * 4 + ladder_len,
        Method::Fl => 8 + ladder_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{generate_corpus, CorpusSpec, EncodeSession, ReplayBackend};
    use std::sync::Arc;

    fn session_for(corpus: &crate::backend::SyntheticCorpus) -> EncodeSession {
        EncodeSession::new(
            Arc::new(ReplayBackend::new(Arc::new(corpus.measurements.clone()))),
            corpus.measurements.qp_range,
        )
    }

    #[test]
    fn rl_uses_exactly_124_encodes() {
        let corpus = generate_corpus(1, &CorpusSpec::default(), 7).unwrap();
        let session = session_for(&corpus);
        let report = estimate_rl(&session, "synth0000", &MethodConfig::new(Method::Rl)).unwrap();
        assert_eq!(report.tally, 124);
        report.ladder.check_invariants().unwrap();
    }

    #[test]
    fn rl_ladder_matches_ground_truth_front_sampling() {
        let corpus = generate_corpus(1, &CorpusSpec::default(), 13).unwrap();
        let session = session_for(&corpus);
        let config = MethodConfig::new(Method::Rl);
        let report = estimate_rl(&session, "synth0000", &config).unwrap();

        // Oracle: build the front straight from the parametric model.
        let params = &corpus.params["synth0000"];
        let curves: Vec<Vec<RqPoint>> = Resolution::ALL
            .iter()
            .map(|&res| {
                let p = params.curve(res).unwrap();
                (15..=45)
                    .map(|qp| {
                        let lr = p.log_rate(qp);
                        RqPoint {
                            log_rate: lr,
                            bitrate_kbps: lr.exp(),
                            vmaf: p.vmaf(qp),
                            qp,
                            resolution: res,
                        }
                    })
                    .collect()
            })
            .collect();
        let front = pareto_front(&curves).unwrap();
        let targets = config.targets().unwrap();
        let oracle =
            build_ladder("synth0000", &front, &targets, config.v_high, config.epsilon).unwrap();
        assert_eq!(report.ladder.rungs.len(), oracle.rungs.len());
        for (a, b) in report.ladder.rungs.iter().zip(oracle.rungs.iter()) {
            assert_eq!((a.resolution, a.qp), (b.resolution, b.qp));
            assert!((a.rate_kbps - b.rate_kbps).abs() / b.rate_kbps < 1e-12);
        }
    }

    #[test]
    fn rl_rungs_all_exist_in_the_measurements() {
        let corpus = generate_corpus(2, &CorpusSpec::default(), 21).unwrap();
        let session = session_for(&corpus);
        let report = estimate_rl(&session, "synth0001", &MethodConfig::new(Method::Rl)).unwrap();
        for rung in &report.ladder.rungs {
            let curve = corpus.measurements.curve("synth0001", rung.resolution).unwrap();
            let sample = curve.sample_at(rung.qp).expect("rung must be a real encode");
            assert_eq!(sample.bitrate_kbps, rung.rate_kbps);
            assert_eq!(sample.vmaf, rung.vmaf);
        }
    }

    #[test]
    fn nil_stays_within_budget() {
        let corpus = generate_corpus(1, &CorpusSpec::default(), 3).unwrap();
        let session = session_for(&corpus);
        let config = MethodConfig::new(Method::Nil);
        let report = estimate_nil(&session, "synth0000", &config).unwrap();
        let targets = config.targets().unwrap();
        assert!(report.tally <= (28 + targets.len()) as u64, "tally {}", report.tally);
        report.ladder.check_invariants().unwrap();
        assert!(!report.ladder.rungs.is_empty());
    }

    #[test]
    fn nil_handles_nearly_flat_degenerate_content() {
        use crate::backend::{SyntheticBackend, SyntheticCurveParams, SyntheticSequenceParams};
        let mut curves = BTreeMap::new();
        for (i, res) in Resolution::ALL.iter().enumerate() {
            curves.insert(
                *res,
                SyntheticCurveParams {
                    v_max: 20.0 - i as f64,
                    mu: 2.0,
                    sigma_s: 3.0,
                    rate_a: 9.0 + i as f64 * 0.8,
                    rate_b: 0.13,
                },
            );
        }
        let mut sequences = BTreeMap::new();
        sequences.insert("flat".to_string(), SyntheticSequenceParams { curves });
        let backend = SyntheticBackend::new(sequences, 0.0, 5).unwrap();
        let session = EncodeSession::new(Arc::new(backend), QpRange::DEFAULT);
        let report = estimate_nil(&session, "flat", &MethodConfig::new(Method::Nil)).unwrap();
        assert!(!report.ladder.rungs.is_empty());
        report.ladder.check_invariants().unwrap();
    }

    #[test]
    fn cil_qp_set_matches_worked_example() {
        let qps = cil_qp_set(30, -4, 5, 45, QpRange::DEFAULT).unwrap();
        assert_eq!(qps, vec![26, 31, 36, 40, 45]);
    }

    #[test]
    fn cil_qp_set_n2_is_endpoints() {
        let qps = cil_qp_set(30, -4, 2, 45, QpRange::DEFAULT).unwrap();
        assert_eq!(qps, vec![26, 45]);
    }

    #[test]
    fn cil_qp_set_dedups_in_short_range() {
        let qps = cil_qp_set(25, 10, 7, 45, QpRange::DEFAULT).unwrap();
        assert_eq!(qps.len(), 7);
        let mut sorted = qps.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 7, "all distinct: {qps:?}");
        assert!(qps.iter().all(|&q| (35..=45).contains(&q)));
    }

    #[test]
    fn cil_qp_set_range_too_short_errors() {
        assert!(cil_qp_set(42, 0, 5, 45, QpRange::DEFAULT).is_err());
        assert!(cil_qp_set(30, 20, 5, 45, QpRange::DEFAULT).is_err());
    }

    #[test]
    fn cil_budget_and_validity() {
        let corpus = generate_corpus(1, &CorpusSpec::default(), 17).unwrap();
        let oracle_session = session_for(&corpus);
        let config = MethodConfig::new(Method::Cil);
        let knees = oracle_knees(&oracle_session, "synth0000", &config).unwrap();

        let session = session_for(&corpus);
        let report = estimate_cil(&session, "synth0000", &knees, &config).unwrap();
        let targets = config.targets().unwrap();
        assert!(report.tally <= (4 * 5 + targets.len()) as u64, "tally {}", report.tally);
        report.ladder.check_invariants().unwrap();

        let mut config7 = config.clone();
        config7.cil_n = 7;
        let session7 = session_for(&corpus);
        let report7 = estimate_cil(&session7, "synth0000", &knees, &config7).unwrap();
        assert!(report7.tally <= (4 * 7 + targets.len()) as u64);
    }

    #[test]
    fn fl_extra_qp_follows_the_piecewise_rule() {
        assert_eq!(fl_extra_qp(34, 30, 5, QpRange::DEFAULT), 29);
        assert_eq!(fl_extra_qp(28, 30, 5, QpRange::DEFAULT), 33);
        assert_eq!(fl_extra_qp(38, 38, 2, QpRange::DEFAULT), 36);
        assert_eq!(fl_extra_qp(17, 30, 5, QpRange::DEFAULT), 22);
        // Clamped to the universe.
        assert_eq!(fl_extra_qp(43, 44, 5, QpRange::DEFAULT), 45);
        assert_eq!(fl_extra_qp(18, 15, 5, QpRange::DEFAULT), 15);
    }

    #[test]
    fn fl_budget_and_exact_recovery_on_loglinear_rates() {
        let corpus = generate_corpus(1, &CorpusSpec::default(), 31).unwrap();
        let oracle_session = session_for(&corpus);
        let config = MethodConfig::new(Method::Fl);
        let crossovers = oracle_crossovers(&oracle_session, "synth0000", &config).unwrap();

        let session = session_for(&corpus);
        let report = estimate_fl(&session, "synth0000", &crossovers, &config).unwrap();
        let targets = config.targets().unwrap();
        assert!(report.tally <= (8 + targets.len()) as u64, "tally {}", report.tally);
        report.ladder.check_invariants().unwrap();

        // The synthetic rate map is exactly log-linear, so the fitted line
        // recovers the model QP exactly (before rounding).
        let params = &corpus.params["synth0000"];
        for (&res, qps) in &report.qp_sets {
            let p = params.curve(res).unwrap();
            let r0 = session.encode("synth0000", res, qps[0]).unwrap();
            let r1 = session.encode("synth0000", res, qps[1]).unwrap();
            let beta = f64::from(r1.qp - r0.qp) / (r1.log_rate() - r0.log_rate());
            let alpha = f64::from(r0.qp) - beta * r0.log_rate();
            for probe in [500.0f64, 2000.0, 8000.0] {
                let exact = (p.rate_a - probe.ln()) / p.rate_b;
                let line = alpha + beta * probe.ln();
                assert!((exact - line).abs() < 1e-9, "res {res}: {exact} vs {line}");
            }
        }
    }

    #[test]
    fn estimators_are_deterministic() {
        let corpus = generate_corpus(1, &CorpusSpec::default(), 77).unwrap();
        let config = MethodConfig::new(Method::Nil);
        let a = estimate_nil(&session_for(&corpus), "synth0000", &config).unwrap();
        let b = estimate_nil(&session_for(&corpus), "synth0000", &config).unwrap();
        assert_eq!(a.ladder, b.ladder);
        assert_eq!(a.tally, b.tally);
    }
}
