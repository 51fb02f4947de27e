//! Domain types and measurement ingestion.
//!
//! A measurement is one encode result: a (sequence, resolution, QP) triple
//! mapped to the bitrate and VMAF it produced. Measurements are grouped into
//! per-resolution rate-quality curves and validated for the monotone
//! behaviour the rest of the pipeline relies on: bitrate strictly decreasing
//! and VMAF non-increasing as QP grows.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial resolutions of the ladder, ordered low to high.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Resolution {
    #[serde(rename = "540p")]
    R540p,
    #[serde(rename = "720p")]
    R720p,
    #[serde(rename = "1080p")]
    R1080p,
    #[serde(rename = "2160p")]
    R2160p,
}

impl Resolution {
    /// All resolutions, ascending.
    pub const ALL: [Resolution; 4] = [
        Resolution::R540p,
        Resolution::R720p,
        Resolution::R1080p,
        Resolution::R2160p,
    ];

    /// Adjacent (higher, lower) pairs, highest pair first.
    pub const ADJACENT_PAIRS: [(Resolution, Resolution); 3] = [
        (Resolution::R2160p, Resolution::R1080p),
        (Resolution::R1080p, Resolution::R720p),
        (Resolution::R720p, Resolution::R540p),
    ];

    pub fn label(self) -> &'static str {
        match self {
            Resolution::R540p => "540p",
            Resolution::R720p => "720p",
            Resolution::R1080p => "1080p",
            Resolution::R2160p => "2160p",
        }
    }

    /// Pixel dimensions (width, height).
    pub fn dims(self) -> (u32, u32) {
        match self {
            Resolution::R540p => (960, 540),
            Resolution::R720p => (1280, 720),
            Resolution::R1080p => (1920, 1080),
            Resolution::R2160p => (3840, 2160),
        }
    }

    /// The next lower resolution, if any.
    pub fn lower(self) -> Option<Resolution> {
        match self {
            Resolution::R540p => None,
            Resolution::R720p => Some(Resolution::R540p),
            Resolution::R1080p => Some(Resolution::R720p),
            Resolution::R2160p => Some(Resolution::R1080p),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "540p" | "540" => Ok(Resolution::R540p),
            "720p" | "720" => Ok(Resolution::R720p),
            "1080p" | "1080" => Ok(Resolution::R1080p),
            "2160p" | "2160" => Ok(Resolution::R2160p),
            other => Err(Error::Validation(format!("unknown resolution '{other}'"))),
        }
    }
}

/// Inclusive QP range the corpus was (or will be) encoded over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QpRange {
    pub min: i32,
    pub max: i32,
}

impl QpRange {
    pub const DEFAULT: QpRange = QpRange { min: 15, max: 45 };

    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min > max {
            return Err(Error::Config(format!("empty QP range [{min}, {max}]")));
        }
        Ok(QpRange { min, max })
    }

    pub fn contains(&self, qp: i32) -> bool {
        qp >= self.min && qp <= self.max
    }

    pub fn clamp(&self, qp: i32) -> i32 {
        qp.clamp(self.min, self.max)
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.min..=self.max
    }

    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.max < self.min
    }
}

impl Default for QpRange {
    fn default() -> Self {
        QpRange::DEFAULT
    }
}

/// One encode measurement: the atomic unit of cost accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeRecord {
    pub sequence: String,
    pub resolution: Resolution,
    pub qp: i32,
    pub bitrate_kbps: f64,
    pub vmaf: f64,
}

impl EncodeRecord {
    pub fn log_rate(&self) -> f64 {
        self.bitrate_kbps.ln()
    }

    fn check(&self, qp_range: QpRange) -> Result<()> {
        if !self.bitrate_kbps.is_finite() || self.bitrate_kbps <= 0.0 {
            return Err(Error::Validation(format!(
                "bitrate must be positive, got {} for ({}, {}, qp={})",
                self.bitrate_kbps, self.sequence, self.resolution, self.qp
            )));
        }
        if !self.vmaf.is_finite() || !(0.0..=100.0).contains(&self.vmaf) {
            return Err(Error::Validation(format!(
                "vmaf must be within [0, 100], got {} for ({}, {}, qp={})",
                self.vmaf, self.sequence, self.resolution, self.qp
            )));
        }
        if !qp_range.contains(self.qp) {
            return Err(Error::Validation(format!(
                "qp {} outside universe [{}, {}] for ({}, {})",
                self.qp, qp_range.min, qp_range.max, self.sequence, self.resolution
            )));
        }
        Ok(())
    }
}

/// One sample of a rate-quality curve, kept in both the kbps and the
/// log-rate domain so persistence stays bit-exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RqSample {
    pub qp: i32,
    pub bitrate_kbps: f64,
    pub log_rate: f64,
    pub vmaf: f64,
}

/// A per-resolution sampled rate-quality curve, sorted by QP ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqCurve {
    pub sequence: String,
    pub resolution: Resolution,
    pub samples: Vec<RqSample>,
}

impl RqCurve {
    pub fn new(sequence: impl Into<String>, resolution: Resolution) -> Self {
        RqCurve {
            sequence: sequence.into(),
            resolution,
            samples: Vec::new(),
        }
    }

    /// Insert keeping QP order. Duplicate QPs are a conflict.
    pub fn insert(&mut self, record: &EncodeRecord) -> Result<()> {
        let sample = RqSample {
            qp: record.qp,
            bitrate_kbps: record.bitrate_kbps,
            log_rate: record.log_rate(),
            vmaf: record.vmaf,
        };
        match self.samples.binary_search_by_key(&record.qp, |s| s.qp) {
            Ok(_) => Err(Error::DuplicateRecord {
                sequence: record.sequence.clone(),
                resolution: record.resolution,
                qp: record.qp,
            }),
            Err(pos) => {
                self.samples.insert(pos, sample);
                Ok(())
            }
        }
    }

    pub fn sample_at(&self, qp: i32) -> Option<&RqSample> {
        self.samples
            .binary_search_by_key(&qp, |s| s.qp)
            .ok()
            .map(|i| &self.samples[i])
    }

    pub fn to_records(&self) -> impl Iterator<Item = EncodeRecord> + '_ {
        self.samples.iter().map(move |s| EncodeRecord {
            sequence: self.sequence.clone(),
            resolution: self.resolution,
            qp: s.qp,
            bitrate_kbps: s.bitrate_kbps,
            vmaf: s.vmaf,
        })
    }
}

/// Outcome of a curve validation pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// QPs whose sample violated monotonicity against the previous kept one.
    pub violations: Vec<i32>,
    /// QPs dropped by the repair pass (empty when `repair` was false).
    pub removed: Vec<i32>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.removed.is_empty()
    }
}

/// Check (and optionally repair) the monotone rate-quality behaviour of a
/// curve: log-rate strictly decreasing and VMAF non-increasing in QP.
///
/// Repair drops the higher-QP sample of every violating pair, scanning
/// upward in QP, which removes inversions starting from the noisy high-QP
/// side while keeping the low-QP envelope intact.
pub fn validate_curve(curve: &RqCurve, repair: bool) -> Result<(RqCurve, ValidationReport)> {
    if curve.samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "curve ({}, {}) has {} samples, need at least 2",
            curve.sequence,
            curve.resolution,
            curve.samples.len()
        )));
    }
    let mut report = ValidationReport::default();
    let mut kept: Vec<RqSample> = Vec::with_capacity(curve.samples.len());
    kept.push(curve.samples[0]);
    for &s in &curve.samples[1..] {
        let prev = kept.last().expect("kept is never empty");
        let violates = s.vmaf > prev.vmaf || s.log_rate >= prev.log_rate;
        if violates {
            report.violations.push(s.qp);
            if repair {
                report.removed.push(s.qp);
                continue;
            }
        }
        kept.push(s);
    }
    let repaired = RqCurve {
        sequence: curve.sequence.clone(),
        resolution: curve.resolution,
        samples: kept,
    };
    Ok((repaired, report))
}

/// Supported on-disk formats for measurement sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementFormat {
    Csv,
    Json,
}

impl MeasurementFormat {
    /// Guess from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => MeasurementFormat::Json,
            _ => MeasurementFormat::Csv,
        }
    }
}

/// All measurements of a corpus, grouped into per-resolution curves.
///
/// Immutable after load; all downstream modules consume it read-only.
#[derive(Debug, Clone, Default)]
pub struct MeasurementSet {
    pub curves: BTreeMap<(String, Resolution), RqCurve>,
    pub qp_range: QpRange,
    pub warnings: Vec<String>,
}

impl MeasurementSet {
    pub fn new(qp_range: QpRange) -> Self {
        MeasurementSet {
            curves: BTreeMap::new(),
            qp_range,
            warnings: Vec::new(),
        }
    }

    pub fn insert(&mut self, record: EncodeRecord) -> Result<()> {
        record.check(self.qp_range)?;
        let key = (record.sequence.clone(), record.resolution);
        self.curves
            .entry(key)
            .or_insert_with(|| RqCurve::new(record.sequence.clone(), record.resolution))
            .insert(&record)
    }

    pub fn curve(&self, sequence: &str, resolution: Resolution) -> Option<&RqCurve> {
        self.curves.get(&(sequence.to_string(), resolution))
    }

    /// Distinct sequence ids, sorted.
    pub fn sequences(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (seq, _) in self.curves.keys() {
            if out.last().map(|s| s.as_str()) != Some(seq.as_str()) {
                out.push(seq.clone());
            }
        }
        out
    }

    pub fn len_records(&self) -> usize {
        self.curves.values().map(|c| c.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// All records in (sequence, resolution, qp) order.
    pub fn records(&self) -> Vec<EncodeRecord> {
        self.curves
            .values()
            .flat_map(|c| c.to_records().collect::<Vec<_>>())
            .collect()
    }

    /// Run `validate_curve` over every curve. Returns the repaired set and
    /// the non-clean reports keyed like `curves`.
    pub fn validate_all(
        &self,
        repair: bool,
    ) -> Result<(MeasurementSet, BTreeMap<(String, Resolution), ValidationReport>)> {
        let mut out = MeasurementSet::new(self.qp_range);
        out.warnings = self.warnings.clone();
        let mut reports = BTreeMap::new();
        for (key, curve) in &self.curves {
            let (fixed, report) = validate_curve(curve, repair)?;
            if !report.is_clean() {
                reports.insert(key.clone(), report);
            }
            out.curves.insert(key.clone(), fixed);
        }
        Ok((out, reports))
    }
}

const CSV_HEADER: [&str; 5] = ["sequence", "resolution", "qp", "bitrate_kbps", "vmaf"];

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    sequence: String,
    resolution: String,
    qp: i32,
    bitrate_kbps: f64,
    vmaf: f64,
}

/// Load a measurement file, grouping rows into per-resolution curves.
pub fn load_measurements(path: &Path, format: MeasurementFormat) -> Result<MeasurementSet> {
    load_measurements_with_range(path, format, QpRange::DEFAULT)
}

pub fn load_measurements_with_range(
    path: &Path,
    format: MeasurementFormat,
    qp_range: QpRange,
) -> Result<MeasurementSet> {
    let path_str = path.display().to_string();
    let mut set = MeasurementSet::new(qp_range);
    match format {
        MeasurementFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(path)
                .map_err(|e| io_or_parse(&path_str, e))?;
            let headers = reader
                .headers()
                .map_err(|e| io_or_parse(&path_str, e))?
                .clone();
            for (i, expected) in CSV_HEADER.iter().enumerate() {
                if headers.get(i) != Some(expected) {
                    return Err(Error::Parse {
                        path: path_str,
                        line: 1,
                        msg: format!(
                            "expected header '{}', got '{}'",
                            CSV_HEADER.join(","),
                            headers.iter().collect::<Vec<_>>().join(",")
                        ),
                    });
                }
            }
            for result in reader.deserialize::<CsvRow>() {
                let row = result.map_err(|e| {
                    let line = e
                        .position()
                        .map(|p| p.line())
                        .unwrap_or(0);
                    Error::Parse {
                        path: path_str.clone(),
                        line,
                        msg: e.to_string(),
                    }
                })?;
                let record = EncodeRecord {
                    sequence: row.sequence,
                    resolution: row.resolution.parse()?,
                    qp: row.qp,
                    bitrate_kbps: row.bitrate_kbps,
                    vmaf: row.vmaf,
                };
                set.insert(record)?;
            }
        }
        MeasurementFormat::Json => {
            let data = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path_str.clone(),
                source: e,
            })?;
            let rows: Vec<CsvRow> = serde_json::from_str(&data).map_err(|e| Error::Parse {
                path: path_str.clone(),
                line: e.line() as u64,
                msg: e.to_string(),
            })?;
            for row in rows {
                let record = EncodeRecord {
                    sequence: row.sequence,
                    resolution: row.resolution.parse()?,
                    qp: row.qp,
                    bitrate_kbps: row.bitrate_kbps,
                    vmaf: row.vmaf,
                };
                set.insert(record)?;
            }
        }
    }
    if set.is_empty() {
        set.warnings.push("empty corpus: no measurement rows".to_string());
    }
    Ok(set)
}

/// Write a measurement set back out. Floats are formatted with Rust's
/// shortest round-trip representation, so a save/load cycle is bit-exact.
pub fn save_measurements(
    set: &MeasurementSet,
    path: &Path,
    format: MeasurementFormat,
) -> Result<()> {
    let path_str = path.display().to_string();
    let rows: Vec<CsvRow> = set
        .records()
        .into_iter()
        .map(|r| CsvRow {
            sequence: r.sequence,
            resolution: r.resolution.label().to_string(),
            qp: r.qp,
            bitrate_kbps: r.bitrate_kbps,
            vmaf: r.vmaf,
        })
        .collect();
    match format {
        MeasurementFormat::Csv => {
            let mut writer = csv::Writer::from_path(path).map_err(|e| io_or_parse(&path_str, e))?;
            writer
                .write_record(CSV_HEADER)
                .map_err(|e| io_or_parse(&path_str, e))?;
            for row in &rows {
                writer
                    .write_record([
                        row.sequence.as_str(),
                        row.resolution.as_str(),
                        &row.qp.to_string(),
                        &row.bitrate_kbps.to_string(),
                        &row.vmaf.to_string(),
                    ])
                    .map_err(|e| io_or_parse(&path_str, e))?;
            }
            writer.flush().map_err(|e| Error::Io {
                path: path_str,
                source: e,
            })?;
        }
        MeasurementFormat::Json => {
            let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
                path: path_str.clone(),
                source: e,
            })?;
            let body = serde_json::to_string_pretty(&rows)
                .map_err(|e| Error::Other(format!("json serialization: {e}")))?;
            file.write_all(body.as_bytes()).map_err(|e| Error::Io {
                path: path_str,
                source: e,
            })?;
        }
    }
    Ok(())
}

fn io_or_parse(path: &str, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io {
                path: path.to_string(),
                source: io,
            },
            other => Error::Parse {
                path: path.to_string(),
                line: 0,
                msg: format!("{other:?}"),
            },
        }
    } else {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            path: path.to_string(),
            line,
            msg: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seq: &str, res: Resolution, qp: i32, rate: f64, vmaf: f64) -> EncodeRecord {
        EncodeRecord {
            sequence: seq.to_string(),
            resolution: res,
            qp,
            bitrate_kbps: rate,
            vmaf,
        }
    }

    #[test]
    fn resolution_ordering_matches_pixel_count() {
        assert!(Resolution::R540p < Resolution::R720p);
        assert!(Resolution::R720p < Resolution::R1080p);
        assert!(Resolution::R1080p < Resolution::R2160p);
        assert_eq!(Resolution::ALL.len(), 4);
    }

    #[test]
    fn load_full_grid_groups_into_four_curves() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "sequence,resolution,qp,bitrate_kbps,vmaf").unwrap();
        for res in Resolution::ALL {
            for qp in 15..=45 {
                let rate = 50000.0 / f64::from(qp);
                let vmaf = 100.0 - f64::from(qp);
                writeln!(file, "seq0,{},{},{},{}", res.label(), qp, rate, vmaf).unwrap();
            }
        }
        file.flush().unwrap();
        let set = load_measurements(file.path(), MeasurementFormat::Csv).unwrap();
        assert_eq!(set.curves.len(), 4);
        for curve in set.curves.values() {
            assert_eq!(curve.samples.len(), 31);
        }
        assert!(set.warnings.is_empty());
    }

    #[test]
    fn load_header_only_is_empty_with_warning() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "sequence,resolution,qp,bitrate_kbps,vmaf").unwrap();
        file.flush().unwrap();
        let set = load_measurements(file.path(), MeasurementFormat::Csv).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.warnings.len(), 1);
        assert!(set.warnings[0].contains("empty corpus"));
    }

    #[test]
    fn load_rejects_out_of_range_vmaf() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "sequence,resolution,qp,bitrate_kbps,vmaf").unwrap();
        writeln!(file, "seq0,1080p,20,1000.0,101.0").unwrap();
        file.flush().unwrap();
        let err = load_measurements(file.path(), MeasurementFormat::Csv).unwrap_err();
        match err {
            Error::Validation(msg) => {
                assert!(msg.contains("101"), "message should name the row: {msg}");
                assert!(msg.contains("qp=20"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_duplicate_triple() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "sequence,resolution,qp,bitrate_kbps,vmaf").unwrap();
        writeln!(file, "seq0,1080p,20,1000.0,90.0").unwrap();
        writeln!(file, "seq0,1080p,20,1001.0,90.5").unwrap();
        file.flush().unwrap();
        let err = load_measurements(file.path(), MeasurementFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::DuplicateRecord { qp: 20, .. }));
    }

    #[test]
    fn load_reports_line_number_on_malformed_row() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "sequence,resolution,qp,bitrate_kbps,vmaf").unwrap();
        writeln!(file, "seq0,1080p,20,1000.0,90.0").unwrap();
        writeln!(file, "seq0,1080p,not_a_qp,1000.0,90.0").unwrap();
        file.flush().unwrap();
        let err = load_measurements(file.path(), MeasurementFormat::Csv).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validate_monotone_curve_is_unchanged() {
        let mut curve = RqCurve::new("s", Resolution::R1080p);
        for qp in 15..=45 {
            curve
                .insert(&rec("s", Resolution::R1080p, qp, 50000.0 / f64::from(qp), 100.0 - f64::from(qp)))
                .unwrap();
        }
        let (fixed, report) = validate_curve(&curve, false).unwrap();
        assert_eq!(fixed, curve);
        assert!(report.is_clean());
    }

    #[test]
    fn repair_drops_higher_qp_inversion() {
        let mut curve = RqCurve::new("s", Resolution::R1080p);
        curve.insert(&rec("s", Resolution::R1080p, 29, 1200.0, 81.0)).unwrap();
        curve.insert(&rec("s", Resolution::R1080p, 30, 1100.0, 80.0)).unwrap();
        curve.insert(&rec("s", Resolution::R1080p, 31, 1000.0, 80.2)).unwrap();
        let (fixed, report) = validate_curve(&curve, true).unwrap();
        assert_eq!(report.removed, vec![31]);
        assert_eq!(fixed.samples.len(), 2);
        assert!(fixed.sample_at(31).is_none());
    }

    #[test]
    fn validate_rejects_single_sample() {
        let mut curve = RqCurve::new("s", Resolution::R540p);
        curve.insert(&rec("s", Resolution::R540p, 20, 500.0, 70.0)).unwrap();
        assert!(matches!(
            validate_curve(&curve, false),
            Err(Error::InsufficientData(_))
        ));
    }

    /// Independent oracle: a pairwise dominance scan where a sample is
    /// dropped if any previously kept sample fails to dominate it.
    fn brute_force_repair(samples: &[RqSample]) -> Vec<RqSample> {
        let mut kept: Vec<RqSample> = Vec::new();
        for &s in samples {
            let ok = kept
                .iter()
                .all(|k| s.vmaf <= k.vmaf && s.log_rate < k.log_rate);
            if kept.is_empty() || ok {
                kept.push(s);
            }
        }
        kept
    }

    #[test]
    fn repair_count_matches_pairwise_scan_on_noisy_curve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut curve = RqCurve::new("s", Resolution::R720p);
            for qp in 15..=45 {
                let vmaf = (95.0 - 1.5 * f64::from(qp - 15) + rng.random_range(-0.05..0.05))
                    .clamp(0.0, 100.0);
                let rate = (9.0 - 0.12 * f64::from(qp)).exp();
                curve.insert(&rec("s", Resolution::R720p, qp, rate, vmaf)).unwrap();
            }
            let (fixed, report) = validate_curve(&curve, true).unwrap();
            let oracle = brute_force_repair(&curve.samples);
            assert_eq!(fixed.samples, oracle);
            assert_eq!(report.removed.len(), curve.samples.len() - oracle.len());
            for w in fixed.samples.windows(2) {
                assert!(w[0].vmaf >= w[1].vmaf);
                assert!(w[0].log_rate > w[1].log_rate);
            }
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let mut set = MeasurementSet::new(QpRange::DEFAULT);
        let mut state = 0x9e3779b97f4a7c15u64;
        for res in Resolution::ALL {
            for qp in [15, 23, 31, 45] {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let jitter = (state >> 11) as f64 / (1u64 << 53) as f64;
                set.insert(rec(
                    "seq0",
                    res,
                    qp,
                    (10.0 - 0.13 * f64::from(qp)).exp() * (1.0 + jitter * 1e-7),
                    90.0 - f64::from(qp) + jitter,
                ))
                .unwrap();
            }
        }
        for format in [MeasurementFormat::Csv, MeasurementFormat::Json] {
            let file = tempfile::NamedTempFile::new().unwrap();
            save_measurements(&set, file.path(), format).unwrap();
            let loaded = load_measurements(file.path(), format).unwrap();
            let a = set.records();
            let b = loaded.records();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.sequence, y.sequence);
                assert_eq!(x.resolution, y.resolution);
                assert_eq!(x.qp, y.qp);
                assert_eq!(x.bitrate_kbps.to_bits(), y.bitrate_kbps.to_bits());
                assert_eq!(x.vmaf.to_bits(), y.vmaf.to_bits());
            }
        }
    }
}
