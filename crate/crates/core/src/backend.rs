//! Encode backends and cost accounting.
//!
//! Every estimator obtains measurements through an [`EncodeSession`], which
//! caches records per (sequence, resolution, QP) triple and tallies the
//! distinct triples actually served. The tally is the quantity the whole
//! toolkit exists to minimize. Three backends implement the contract:
//! replay from a loaded measurement set, a parametric synthetic model, and
//! an external command wrapping a real encoder + metric pipeline.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use once_cell::sync::OnceCell;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    save_measurements, EncodeRecord, MeasurementFormat, MeasurementSet, QpRange, Resolution,
};

/// A source of encode measurements.
pub trait EncodeBackend: Send + Sync {
    fn encode(&self, sequence: &str, resolution: Resolution, qp: i32) -> Result<EncodeRecord>;
    fn kind(&self) -> &'static str;
}

type Triple = (String, Resolution, i32);

/// Caching, tallying front-end over a backend.
///
/// Requests for distinct triples may run concurrently; concurrent requests
/// for the same triple coalesce into one backend call via a per-triple cell.
pub struct EncodeSession {
    backend: Arc<dyn EncodeBackend>,
    qp_range: QpRange,
    cells: Mutex<HashMap<Triple, Arc<OnceCell<EncodeRecord>>>>,
    tally: AtomicU64,
}

impl EncodeSession {
    pub fn new(backend: Arc<dyn EncodeBackend>, qp_range: QpRange) -> Self {
        EncodeSession {
            backend,
            qp_range,
            cells: Mutex::new(HashMap::new()),
            tally: AtomicU64::new(0),
        }
    }

    pub fn backend_kind(&self) -> &'static str {
        self.backend.kind()
    }

    pub fn qp_range(&self) -> QpRange {
        self.qp_range
    }

    /// Number of distinct triples served without a cache hit.
    pub fn tally(&self) -> u64 {
        self.tally.load(Ordering::SeqCst)
    }

    /// Obtain the record for a triple, caching it and counting the encode
    /// exactly once.
    pub fn encode(&self, sequence: &str, resolution: Resolution, qp: i32) -> Result<EncodeRecord> {
        if !self.qp_range.contains(qp) {
            return Err(Error::Validation(format!(
                "qp {qp} outside universe [{}, {}]",
                self.qp_range.min, self.qp_range.max
            )));
        }
        let key = (sequence.to_string(), resolution, qp);
        let cell = {
            let mut cells = self.cells.lock().expect("session cache poisoned");
            cells.entry(key).or_insert_with(|| Arc::new(OnceCell::new())).clone()
        };
        let record = cell.get_or_try_init(|| {
            let rec = self.backend.encode(sequence, resolution, qp)?;
            self.tally.fetch_add(1, Ordering::SeqCst);
            Ok::<_, Error>(rec)
        })?;
        Ok(record.clone())
    }

    /// Seed the cache with existing records (cache hits, not encodes).
    pub fn preload(&self, records: impl IntoIterator<Item = EncodeRecord>) {
        let mut cells = self.cells.lock().expect("session cache poisoned");
        for rec in records {
            let key = (rec.sequence.clone(), rec.resolution, rec.qp);
            let cell = cells.entry(key).or_insert_with(|| Arc::new(OnceCell::new()));
            let _ = cell.set(rec);
        }
    }

    /// Snapshot of all cached records, sorted by (sequence, resolution, qp).
    pub fn cached_records(&self) -> Vec<EncodeRecord> {
        let cells = self.cells.lock().expect("session cache poisoned");
        let mut out: Vec<EncodeRecord> = cells
            .values()
            .filter_map(|c| c.get().cloned())
            .collect();
        out.sort_by(|a, b| {
            (&a.sequence, a.resolution, a.qp).cmp(&(&b.sequence, b.resolution, b.qp))
        });
        out
    }

    /// Persist the cache in the measurement CSV schema so a partial corpus
    /// can resume without re-encoding.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut set = MeasurementSet::new(self.qp_range);
        for rec in self.cached_records() {
            set.insert(rec)?;
        }
        save_measurements(&set, path, MeasurementFormat::from_path(path))
    }
}

/// Replays records from a loaded measurement set.
pub struct ReplayBackend {
    set: Arc<MeasurementSet>,
}

impl ReplayBackend {
    pub fn new(set: Arc<MeasurementSet>) -> Self {
        ReplayBackend { set }
    }
}

impl EncodeBackend for ReplayBackend {
    fn encode(&self, sequence: &str, resolution: Resolution, qp: i32) -> Result<EncodeRecord> {
        self.set
            .curve(sequence, resolution)
            .and_then(|c| c.sample_at(qp))
            .map(|s| EncodeRecord {
                sequence: sequence.to_string(),
                resolution,
                qp,
                bitrate_kbps: s.bitrate_kbps,
                vmaf: s.vmaf,
            })
            .ok_or(Error::MissingMeasurement {
                sequence: sequence.to_string(),
                resolution,
                qp,
            })
    }

    fn kind(&self) -> &'static str {
        "replay"
    }
}

/// Per-resolution parameters of the synthetic rate-quality model.
///
/// Rate follows `log_rate(qp) = a - b*qp` and quality a logistic in the
/// log-rate domain, `V(r) = v_max / (1 + exp(-(r - mu) / sigma_s))`, which
/// reproduces the saturation real VMAF curves show at high bitrates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCurveParams {
    pub v_max: f64,
    pub mu: f64,
    pub sigma_s: f64,
    pub rate_a: f64,
    pub rate_b: f64,
}

impl SyntheticCurveParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.v_max && self.v_max <= 100.0) {
            return Err(Error::Config(format!("v_max must be in (0, 100], got {}", self.v_max)));
        }
        if self.sigma_s <= 0.0 {
            return Err(Error::Config(format!("sigma_s must be positive, got {}", self.sigma_s)));
        }
        if self.rate_b <= 0.0 {
            return Err(Error::Config(format!("rate_b must be positive, got {}", self.rate_b)));
        }
        Ok(())
    }

    pub fn log_rate(&self, qp: i32) -> f64 {
        self.rate_a - self.rate_b * f64::from(qp)
    }

    pub fn vmaf_at_log_rate(&self, log_rate: f64) -> f64 {
        self.v_max / (1.0 + (-(log_rate - self.mu) / self.sigma_s).exp())
    }

    pub fn vmaf(&self, qp: i32) -> f64 {
        self.vmaf_at_log_rate(self.log_rate(qp))
    }
}

/// Ground-truth parameters of one synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSequenceParams {
    pub curves: BTreeMap<Resolution, SyntheticCurveParams>,
}

impl SyntheticSequenceParams {
    pub fn curve(&self, resolution: Resolution) -> Result<&SyntheticCurveParams> {
        self.curves.get(&resolution).ok_or_else(|| {
            Error::Config(format!("no synthetic params for {resolution}"))
        })
    }
}

/// Parametric stand-in for a real encoder + VMAF pipeline.
pub struct SyntheticBackend {
    sequences: BTreeMap<String, SyntheticSequenceParams>,
    noise_sigma: f64,
    seed: u64,
}

impl SyntheticBackend {
    pub fn new(
        sequences: BTreeMap<String, SyntheticSequenceParams>,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if noise_sigma < 0.0 {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {noise_sigma}")));
        }
        for params in sequences.values() {
            for curve in params.curves.values() {
                curve.validate()?;
            }
        }
        Ok(SyntheticBackend { sequences, noise_sigma, seed })
    }

    pub fn params(&self, sequence: &str) -> Option<&SyntheticSequenceParams> {
        self.sequences.get(sequence)
    }

    /// Deterministic per-triple noise draw: the same triple always yields
    /// the same record regardless of request order.
    fn noise(&self, sequence: &str, resolution: Resolution, qp: i32) -> f64 {
        if self.noise_sigma == 0.0 {
            return 0.0;
        }
        let mut h = 0xcbf29ce484222325u64; // FNV-1a
        for byte in sequence.bytes() {
            h = (h ^ u64::from(byte)).wrapping_mul(0x100000001b3);
        }
        h = (h ^ resolution as u64).wrapping_mul(0x100000001b3);
        h = (h ^ qp as u64).wrapping_mul(0x100000001b3);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ h);
        // Box-Muller standard normal.
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        self.noise_sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

impl EncodeBackend for SyntheticBackend {
    fn encode(&self, sequence: &str, resolution: Resolution, qp: i32) -> Result<EncodeRecord> {
        let params = self
            .sequences
            .get(sequence)
            .ok_or_else(|| Error::Backend(format!("unknown synthetic sequence '{sequence}'")))?
            .curve(resolution)?;
        let log_rate = params.log_rate(qp);
        let vmaf = (params.vmaf_at_log_rate(log_rate) + self.noise(sequence, resolution, qp))
            .clamp(0.0, 100.0);
        Ok(EncodeRecord {
            sequence: sequence.to_string(),
            resolution,
            qp,
            bitrate_kbps: log_rate.exp(),
            vmaf,
        })
    }

    fn kind(&self) -> &'static str {
        "synthetic"
    }
}

/// Shells out to `program <sequence> <resolution_label> <qp>` and expects
/// `bitrate_kbps vmaf` on stdout.
pub struct ExternalCommandBackend {
    program: PathBuf,
    args: Vec<String>,
}

impl ExternalCommandBackend {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        ExternalCommandBackend { program: program.into(), args }
    }
}

impl EncodeBackend for ExternalCommandBackend {
    fn encode(&self, sequence: &str, resolution: Resolution, qp: i32) -> Result<EncodeRecord> {
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(sequence)
            .arg(resolution.label())
            .arg(qp.to_string())
            .output()
            .map_err(|e| Error::Backend(format!(
                "failed to spawn {}: {e}",
                self.program.display()
            )))?;
        if !output.status.success() {
            return Err(Error::Backend(format!(
                "{} exited with {} for ({sequence}, {resolution}, qp={qp}); stdout: {}; stderr: {}",
                self.program.display(),
                output.status,
                String::from_utf8_lossy(&output.stdout).trim(),
                String::from_utf8_lossy(&output.stderr).trim(),
            )));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let mut fields = stdout.split_whitespace();
        let parse = |field: Option<&str>, name: &str| -> Result<f64> {
            field
                .ok_or_else(|| Error::Backend(format!("missing {name} in output '{}'", stdout.trim())))?
                .parse::<f64>()
                .map_err(|e| Error::Backend(format!("bad {name} in output '{}': {e}", stdout.trim())))
        };
        let bitrate_kbps = parse(fields.next(), "bitrate_kbps")?;
        let vmaf = parse(fields.next(), "vmaf")?;
        Ok(EncodeRecord {
            sequence: sequence.to_string(),
            resolution,
            qp,
            bitrate_kbps,
            vmaf,
        })
    }

    fn kind(&self) -> &'static str {
        "external"
    }
}

/// Uniform sampling ranges for synthetic corpus generation, per resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub ranges: BTreeMap<Resolution, CurveParamRanges>,
    pub noise_sigma: f64,
    pub qp_range: QpRange,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurveParamRanges {
    pub v_max: (f64, f64),
    pub mu: (f64, f64),
    pub sigma_s: (f64, f64),
    pub rate_a: (f64, f64),
    pub rate_b: (f64, f64),
}

impl CurveParamRanges {
    fn validate(&self, resolution: Resolution) -> Result<()> {
        for (name, (lo, hi)) in [
            ("v_max", self.v_max),
            ("mu", self.mu),
            ("sigma_s", self.sigma_s),
            ("rate_a", self.rate_a),
            ("rate_b", self.rate_b),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!(
                    "bad {name} range [{lo}, {hi}] for {resolution}"
                )));
            }
        }
        if self.sigma_s.0 <= 0.0 {
            return Err(Error::Config(format!(
                "sigma_s range must be positive for {resolution}, got [{}, {}]",
                self.sigma_s.0, self.sigma_s.1
            )));
        }
        if self.rate_b.0 <= 0.0 {
            return Err(Error::Config(format!(
                "rate_b range must be positive for {resolution}, got [{}, {}]",
                self.rate_b.0, self.rate_b.1
            )));
        }
        if self.v_max.0 <= 0.0 || self.v_max.1 > 100.0 {
            return Err(Error::Config(format!(
                "v_max range must lie in (0, 100] for {resolution}, got [{}, {}]",
                self.v_max.0, self.v_max.1
            )));
        }
        Ok(())
    }
}

impl Default for CorpusSpec {
    /// Ranges tuned so generated corpora behave like the real one: knees
    /// near QP 30/25/25/23 from 2160p down to 540p, crossovers between all
    /// adjacent resolutions inside the shared rate span, rates covering
    /// roughly 150 kbps to 40 Mbps, and VMAF saturating above 97 for about
    /// half the sequences at 2160p.
    fn default() -> Self {
        let mut ranges = BTreeMap::new();
        ranges.insert(
            Resolution::R2160p,
            CurveParamRanges {
                v_max: (94.0, 100.0),
                mu: (7.3, 7.7),
                sigma_s: (0.45, 0.65),
                rate_a: (12.5, 13.1),
                rate_b: (0.135, 0.155),
            },
        );
        ranges.insert(
            Resolution::R1080p,
            CurveParamRanges {
                v_max: (88.0, 96.0),
                mu: (6.1, 6.5),
                sigma_s: (0.5, 0.7),
                rate_a: (11.0, 11.6),
                rate_b: (0.13, 0.15),
            },
        );
        ranges.insert(
            Resolution::R720p,
            CurveParamRanges {
                v_max: (80.0, 90.0),
                mu: (5.2, 5.6),
                sigma_s: (0.55, 0.75),
                rate_a: (10.1, 10.7),
                rate_b: (0.125, 0.145),
            },
        );
        ranges.insert(
            Resolution::R540p,
            CurveParamRanges {
                v_max: (70.0, 82.0),
                mu: (4.4, 4.8),
                sigma_s: (0.6, 0.8),
                rate_a: (9.3, 9.9),
                rate_b: (0.12, 0.14),
            },
        );
        CorpusSpec {
            ranges,
            noise_sigma: 0.0,
            qp_range: QpRange::DEFAULT,
        }
    }
}

/// A generated corpus: the measurements plus the ground-truth parameters
/// they were drawn from, retained for oracle checks.
pub struct SyntheticCorpus {
    pub measurements: MeasurementSet,
    pub params: BTreeMap<String, SyntheticSequenceParams>,
    pub backend: Arc<SyntheticBackend>,
}

/// Generate `n_sequences` synthetic sequences, each with four parametric
/// curves sampled at the full QP universe. Deterministic for a fixed seed.
pub fn generate_corpus(n_sequences: usize, spec: &CorpusSpec, seed: u64) -> Result<SyntheticCorpus> {
    if n_sequences < 1 {
        return Err(Error::Config("n_sequences must be >= 1".to_string()));
    }
    for (res, ranges) in &spec.ranges {
        ranges.validate(*res)?;
    }
    for res in Resolution::ALL {
        if !spec.ranges.contains_key(&res) {
            return Err(Error::Config(format!("corpus spec missing ranges for {res}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = BTreeMap::new();
    for i in 0..n_sequences {
        let name = format!("synth{i:04}");
        let mut curves = BTreeMap::new();
        for res in Resolution::ALL {
            let r = &spec.ranges[&res];
            let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            };
            curves.insert(
                res,
                SyntheticCurveParams {
                    v_max: draw(&mut rng, r.v_max),
                    mu: draw(&mut rng, r.mu),
                    sigma_s: draw(&mut rng, r.sigma_s),
                    rate_a: draw(&mut rng, r.rate_a),
                    rate_b: draw(&mut rng, r.rate_b),
                },
            );
        }
        params.insert(name, SyntheticSequenceParams { curves });
    }
    let backend = Arc::new(SyntheticBackend::new(params.clone(), spec.noise_sigma, seed)?);
    let mut measurements = MeasurementSet::new(spec.qp_range);
    for name in params.keys() {
        for res in Resolution::ALL {
            for qp in spec.qp_range.iter() {
                measurements.insert(backend.encode(name, res, qp)?)?;
            }
        }
    }
    Ok(SyntheticCorpus { measurements, params, backend })
}
