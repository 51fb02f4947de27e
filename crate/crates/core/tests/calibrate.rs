//! Scratch calibration probe (temporary).
use ladderkit::backend::{generate_corpus, CorpusSpec, EncodeSession, ReplayBackend};
use ladderkit::estimators::{oracle_crossovers, oracle_knees, MethodConfig, Method};
use ladderkit::model::Resolution;
use std::collections::BTreeMap;
use std::sync::Arc;

#[test]
#[ignore]
fn calibrate_corpus() {
    let spec = CorpusSpec::default();
    let corpus = generate_corpus(40, &spec, 7).unwrap();
    let config = MethodConfig::new(Method::Cil);
    let mut knee_sums: BTreeMap<Resolution, (f64, f64, f64)> = BTreeMap::new(); // sum, min, max
    let mut cross_stats: BTreeMap<(Resolution, Resolution), Vec<(f64, f64)>> = BTreeMap::new();
    let mut n_sat = 0usize;
    let mut feasible_failures = 0usize;
    for seq in corpus.measurements.sequences() {
        let session = EncodeSession::new(
            Arc::new(ReplayBackend::new(Arc::new(corpus.measurements.clone()))),
            corpus.measurements.qp_range,
        );
        let knees = oracle_knees(&session, &seq, &config).unwrap();
        for (res, k) in &knees {
            let e = knee_sums.entry(*res).or_insert((0.0, 99.0, 0.0));
            e.0 += k; e.1 = e.1.min(*k); e.2 = e.2.max(*k);
            let lo = *config.offsets.get(res).unwrap() + (*k as i32);
            if 45 - lo + 1 < 7 { feasible_failures += 1; }
        }
        let crosses = oracle_crossovers(&session, &seq, &config).unwrap();
        for c in crosses {
            cross_stats.entry((c.high_res, c.low_res)).or_default().push((c.qp_high, c.qp_low));
        }
        let top = corpus.measurements.curve(&seq, Resolution::R2160p).unwrap();
        if top.samples.iter().any(|s| s.vmaf > 97.0) { n_sat += 1; }
    }
    let n = corpus.measurements.sequences().len() as f64;
    for (res, (sum, lo, hi)) in &knee_sums {
        println!("knee {res}: mean {:.2} range [{lo:.0}, {hi:.0}]", sum / n);
    }
    for ((h, l), v) in &cross_stats {
        let mh: f64 = v.iter().map(|p| p.0).sum::<f64>() / v.len() as f64;
        let ml: f64 = v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64;
        let min_h = v.iter().map(|p| p.0).fold(99.0, f64::min);
        let max_h = v.iter().map(|p| p.0).fold(0.0, f64::max);
        println!("crossover ({h}, {l}): qp_high mean {mh:.1} [{min_h:.0},{max_h:.0}], qp_low mean {ml:.1}, n={}", v.len());
    }
    println!("saturated (>97 at 2160p): {n_sat}/{}", n as usize);
    println!("cil-7 feasibility failures: {feasible_failures}");
    // ladder lengths under RL
    let mut lens = BTreeMap::new();
    for seq in corpus.measurements.sequences().iter().take(40) {
        let session = EncodeSession::new(
            Arc::new(ReplayBackend::new(Arc::new(corpus.measurements.clone()))),
            corpus.measurements.qp_range,
        );
        let rl = ladderkit::estimators::estimate_rl(&session, seq, &MethodConfig::new(Method::Rl)).unwrap();
        *lens.entry(rl.ladder.rungs.len()).or_insert(0usize) += 1;
    }
    println!("RL ladder lengths: {lens:?}");
}
