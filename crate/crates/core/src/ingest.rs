//! Campaign directories: `metadata.json` plus `runs.csv`.
//!
//! ```text
//! offered_load_pps,run_index,duration_s,offered_count,delivered_count
//! 1000000,0,10,10000000,10000000
//! 1000000,1,10,10000000,9999998
//! ```
//!
//! Rows are sorted by `(offered_load_pps, run_index)` and `run_index` counts
//! from 0 within each load. The writer emits exactly the format the reader
//! accepts, so a canonical directory survives read + write byte for byte.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{aggregate_level, LoadLevelStats, RunObservation, DEFAULT_TX_TOLERANCE};

pub const METADATA_FILE: &str = "metadata.json";
pub const RUNS_FILE: &str = "runs.csv";
pub const RUNS_HEADER: &str = "offered_load_pps,run_index,duration_s,offered_count,delivered_count";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum ExperimentClass {
    Ipv6Routing,
    EbpfRouting,
    Other(String),
}

impl From<String> for ExperimentClass {
    fn from(s: String) -> Self {
        match s.as_str() {
            "ipv6-routing" => ExperimentClass::Ipv6Routing,
            "ebpf-routing" => ExperimentClass::EbpfRouting,
            _ => ExperimentClass::Other(s),
        }
    }
}

impl From<ExperimentClass> for String {
    fn from(c: ExperimentClass) -> Self {
        c.to_string()
    }
}

impl fmt::Display for ExperimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentClass::Ipv6Routing => f.write_str("ipv6-routing"),
            ExperimentClass::EbpfRouting => f.write_str("ebpf-routing"),
            ExperimentClass::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Environment {
    BareMetal,
    VirtualMachine,
    Container,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CpuPinning {
    #[serde(rename = "unpinned")]
    Unpinned,
    #[serde(rename = "pin-1-cpu")]
    Pin1Cpu,
    #[serde(rename = "pin-2-cpu")]
    Pin2Cpu,
}

/// NIC descriptor ring size. Serialized as `small-512`, `large-4096` or
/// `custom-<count>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NicRingBuffer {
    Small512,
    Large4096,
    Custom(u32),
}

impl TryFrom<String> for NicRingBuffer {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "small-512" => Ok(NicRingBuffer::Small512),
            "large-4096" => Ok(NicRingBuffer::Large4096),
            other => other
                .strip_prefix("custom-")
                .and_then(|n| n.parse().ok())
                .filter(|&n: &u32| n > 0)
                .map(NicRingBuffer::Custom)
                .ok_or_else(|| {
                    format!(
                        "nic_ring_buffer {other:?} is not small-512, large-4096 or custom-<count>"
                    )
                }),
        }
    }
}

impl From<NicRingBuffer> for String {
    fn from(n: NicRingBuffer) -> Self {
        match n {
            NicRingBuffer::Small512 => "small-512".into(),
            NicRingBuffer::Large4096 => "large-4096".into(),
            NicRingBuffer::Custom(c) => format!("custom-{c}"),
        }
    }
}

/// Experiment configuration. Field order here is the on-disk key order;
/// keys this version does not know are kept in `extra` and written back
/// after `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub experiment_class: ExperimentClass,
    pub testbed: String,
    pub environment: Environment,
    pub kernel_version: String,
    pub cpu_pinning: CpuPinning,
    pub nic_ring_buffer: NicRingBuffer,
    pub runs: usize,
    pub duration_s: f64,
    pub packet_size_bytes: u32,
    /// ISO-8601 calendar date, `YYYY-MM-DD`.
    pub date: String,
    pub version: String,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ExperimentMetadata {
    /// Metadata for a generated campaign.
    pub fn synthetic(runs: usize, duration_s: f64) -> Self {
        ExperimentMetadata {
            experiment_class: ExperimentClass::Other("synthetic".into()),
            testbed: "synthetic".into(),
            environment: Environment::BareMetal,
            kernel_version: "n/a".into(),
            cpu_pinning: CpuPinning::Unpinned,
            nic_ring_buffer: NicRingBuffer::Small512,
            runs,
            duration_s,
            packet_size_bytes: 64,
            date: "1970-01-01".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            notes: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.runs < 1 {
            return Err("runs must be ≥ 1".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err("duration_s must be > 0".into());
        }
        if self.packet_size_bytes == 0 {
            return Err("packet_size_bytes must be > 0".into());
        }
        if chrono::NaiveDate::parse_from_str(&self.date, "%Y-%m-%d").is_err() {
            return Err(format!(
                "date {:?} is not an ISO-8601 date (YYYY-MM-DD)",
                self.date
            ));
        }
        Ok(())
    }

    fn add_note(&mut self, note: String) {
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }
}

/// Runs measured at one offered load.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadLevel {
    pub offered_load: u64,
    pub runs: Vec<RunObservation>,
}

/// A validated sweep with its per-level statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadLossCurve {
    pub metadata: ExperimentMetadata,
    levels: Vec<LoadLevel>,
    stats: Vec<LoadLevelStats>,
    warnings: Vec<String>,
}

impl LoadLossCurve {
    /// Build from runs sorted by offered load. Runs at one load form a
    /// level. Per-level run counts that differ from `metadata.runs` are
    /// recorded as warnings and appended to `metadata.notes`.
    pub fn from_runs(
        metadata: ExperimentMetadata,
        runs: Vec<RunObservation>,
        tx_tolerance: f64,
    ) -> Result<Self> {
        metadata.validate().map_err(Error::InvalidInput)?;
        if runs.is_empty() {
            return Err(Error::invalid("campaign has no runs"));
        }
        let mut levels: Vec<LoadLevel> = Vec::new();
        for run in runs {
            run.validate()?;
            run.check_tx_tolerance(tx_tolerance)?;
            match levels.last_mut() {
                Some(l) if l.offered_load == run.offered_load => l.runs.push(run),
                Some(l) if l.offered_load > run.offered_load => {
                    return Err(Error::invalid(format!(
                        "non-increasing loads: {} pps after {} pps",
                        run.offered_load, l.offered_load
                    )))
                }
                _ => levels.push(LoadLevel {
                    offered_load: run.offered_load,
                    runs: vec![run],
                }),
            }
        }
        Self::from_levels(metadata, levels)
    }

    fn from_levels(mut metadata: ExperimentMetadata, levels: Vec<LoadLevel>) -> Result<Self> {
        let stats = levels
            .iter()
            .map(|l| aggregate_level(&l.runs))
            .collect::<Result<Vec<_>>>()?;
        let warnings: Vec<String> = levels
            .iter()
            .filter(|l| l.runs.len() != metadata.runs)
            .map(|l| {
                format!(
                    "level {} pps has {} runs, metadata declares {}",
                    l.offered_load,
                    l.runs.len(),
                    metadata.runs
                )
            })
            .collect();
        for w in &warnings {
            metadata.add_note(w.clone());
        }
        Ok(LoadLossCurve {
            metadata,
            levels,
            stats,
            warnings,
        })
    }

    pub fn levels(&self) -> &[LoadLevel] {
        &self.levels
    }

    pub fn stats(&self) -> &[LoadLevelStats] {
        &self.stats
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunObservation> {
        self.levels.iter().flat_map(|l| l.runs.iter())
    }

    /// Canonical `runs.csv` contents.
    pub fn runs_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.levels.len() + 1));
        out.push_str(RUNS_HEADER);
        out.push('\n');
        for level in &self.levels {
            for (i, r) in level.runs.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.offered_load, i, r.duration, r.offered_count, r.delivered_count
                ));
            }
        }
        out
    }

    /// Canonical `metadata.json` contents.
    pub fn metadata_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.metadata)?;
        s.push('\n');
        Ok(s)
    }

    /// SHA-256 over the canonical runs file, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.runs_csv().as_bytes()))
    }
}

fn rule(file: &Path, line: Option<usize>, rule: impl Into<String>) -> Error {
    Error::Validation {
        file: file.to_path_buf(),
        line,
        rule: rule.into(),
    }
}

pub fn read_campaign(dir: impl AsRef<Path>) -> Result<LoadLossCurve> {
    read_campaign_with(dir, DEFAULT_TX_TOLERANCE)
}

/// Read and validate a campaign directory.
pub fn read_campaign_with(dir: impl AsRef<Path>, tx_tolerance: f64) -> Result<LoadLossCurve> {
    let dir = dir.as_ref();
    let meta_path = dir.join(METADATA_FILE);
    let runs_path = dir.join(RUNS_FILE);

    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let metadata: ExperimentMetadata = serde_json::from_str(&meta_text)
        .map_err(|e| rule(&meta_path, Some(e.line()).filter(|&l| l > 0), e.to_string()))?;
    metadata.validate().map_err(|r| rule(&meta_path, None, r))?;

    let runs_text = fs::read_to_string(&runs_path).map_err(|e| Error::io(&runs_path, e))?;
    let runs = parse_runs(&runs_path, &runs_text, &metadata, tx_tolerance)?;
    if runs.is_empty() {
        return Err(rule(&runs_path, None, "runs file has no data rows"));
    }

    let mut levels: Vec<LoadLevel> = Vec::new();
    for run in runs {
        match levels.last_mut() {
            Some(l) if l.offered_load == run.offered_load => l.runs.push(run),
            _ => levels.push(LoadLevel {
                offered_load: run.offered_load,
                runs: vec![run],
            }),
        }
    }
    LoadLossCurve::from_levels(metadata, levels)
}

fn parse_runs(
    path: &Path,
    text: &str,
    metadata: &ExperimentMetadata,
    tx_tolerance: f64,
) -> Result<Vec<RunObservation>> {
    let mut lines = text.split('\n');
    match lines.next() {
        Some(h) if h == RUNS_HEADER => {}
        Some(h) => {
            return Err(rule(
                path,
                Some(1),
                format!("header must be {RUNS_HEADER:?}, found {h:?}"),
            ))
        }
        None => return Err(rule(path, Some(1), "empty file")),
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut prev: Option<(u64, u64)> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            rule(path, line, format!("malformed row: {e}"))
        })?;
        if i == 0 {
            continue;
        }
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() != 5 {
            return Err(rule(
                path,
                Some(line),
                format!("expected 5 fields, found {}", record.len()),
            ));
        }
        let int = |idx: usize, name: &str| -> Result<u64> {
            record[idx].parse::<u64>().map_err(|_| {
                rule(
                    path,
                    Some(line),
                    format!(
                        "{name} must be an unsigned integer, found {:?}",
                        &record[idx]
                    ),
                )
            })
        };
        let load = int(0, "offered_load_pps")?;
        let run_index = int(1, "run_index")?;
        let duration: f64 = record[2].parse().map_err(|_| {
            rule(
                path,
                Some(line),
                format!("duration_s must be a number, found {:?}", &record[2]),
            )
        })?;
        let offered = int(3, "offered_count")?;
        let delivered = int(4, "delivered_count")?;

        if load == 0 {
            return Err(rule(path, Some(line), "offered_load_pps must be > 0"));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(rule(path, Some(line), "duration_s must be > 0"));
        }
        if duration != metadata.duration_s {
            return Err(rule(
                path,
                Some(line),
                format!(
                    "duration_s {duration} differs from metadata duration_s {}",
                    metadata.duration_s
                ),
            ));
        }
        if offered == 0 || delivered > offered {
            return Err(rule(
                path,
                Some(line),
                "offered_count ≥ delivered_count ≥ 0 and > 0",
            ));
        }
        match prev {
            Some((pl, _)) if load < pl => {
                return Err(rule(
                    path,
                    Some(line),
                    format!("non-increasing loads: {load} pps after {pl} pps"),
                ))
            }
            Some((pl, pi)) if load == pl && run_index != pi + 1 => {
                return Err(rule(
                    path,
                    Some(line),
                    format!(
                        "run_index must count up from 0 within a level, expected {}",
                        pi + 1
                    ),
                ))
            }
            Some((pl, _)) if load != pl && run_index != 0 => {
                return Err(rule(
                    path,
                    Some(line),
                    "run_index must start at 0 for each level",
                ))
            }
            None if run_index != 0 => {
                return Err(rule(
                    path,
                    Some(line),
                    "run_index must start at 0 for each level",
                ))
            }
            _ => {}
        }
        prev = Some((load, run_index));

        let run = RunObservation::new(load, duration, offered, delivered);
        if let Err(Error::InvalidInput(msg)) = run.check_tx_tolerance(tx_tolerance) {
            return Err(rule(path, Some(line), msg));
        }
        out.push(run);
    }
    Ok(out)
}

/// Write `metadata.json` and `runs.csv` into `dir`, creating it if needed.
pub fn write_campaign(curve: &LoadLossCurve, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(METADATA_FILE), curve.metadata_json()?.as_bytes())?;
    write_file(&dir.join(RUNS_FILE), curve.runs_csv().as_bytes())
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(runs: usize) -> ExperimentMetadata {
        ExperimentMetadata::synthetic(runs, 10.0)
    }

    #[test]
    fn enum_strings() {
        let c: ExperimentClass = "ipv6-routing".to_string().into();
        assert_eq!(c, ExperimentClass::Ipv6Routing);
        let c: ExperimentClass = "srv6".to_string().into();
        assert_eq!(c.to_string(), "srv6");
        assert_eq!(
            NicRingBuffer::try_from("custom-1024".to_string()),
            Ok(NicRingBuffer::Custom(1024))
        );
        assert!(NicRingBuffer::try_from("huge".to_string()).is_err());
        assert!(NicRingBuffer::try_from("custom-0".to_string()).is_err());
        assert_eq!(String::from(NicRingBuffer::Large4096), "large-4096");
    }

    #[test]
    fn metadata_key_order_and_extras() {
        let mut m = meta(2);
        m.extra.insert("zz_future".into(), serde_json::json!(3));
        let s = serde_json::to_string(&m).unwrap();
        let keys = [
            "experiment_class",
            "testbed",
            "environment",
            "kernel_version",
            "cpu_pinning",
            "nic_ring_buffer",
            "runs",
            "duration_s",
            "packet_size_bytes",
            "date",
            "version",
            "notes",
            "zz_future",
        ];
        let pos: Vec<usize> = keys
            .iter()
            .map(|k| s.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{s}");
        let back: ExperimentMetadata = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn metadata_validation() {
        let mut m = meta(1);
        m.date = "16/10/2026".into();
        assert!(m.validate().is_err());
        let mut m = meta(0);
        assert!(m.validate().is_err());
        m.runs = 1;
        m.packet_size_bytes = 0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn from_runs_groups_and_warns() {
        let runs = vec![
            RunObservation::new(100, 10.0, 1000, 1000),
            RunObservation::new(100, 10.0, 1000, 999),
            RunObservation::new(200, 10.0, 2000, 1990),
        ];
        let curve = LoadLossCurve::from_runs(meta(2), runs, 0.01).unwrap();
        assert_eq!(curve.levels().len(), 2);
        assert_eq!(curve.warnings().len(), 1);
        assert_eq!(curve.metadata.notes, curve.warnings());
    }

    #[test]
    fn from_runs_rejects_decreasing() {
        let runs = vec![
            RunObservation::new(200, 10.0, 2000, 2000),
            RunObservation::new(100, 10.0, 1000, 1000),
        ];
        assert!(LoadLossCurve::from_runs(meta(1), runs, 0.01).is_err());
    }

    #[test]
    fn from_runs_rejects_tx_drift() {
        let runs = vec![RunObservation::new(100, 10.0, 1100, 1000)];
        assert!(LoadLossCurve::from_runs(meta(1), runs, 0.01).is_err());
    }

    #[test]
    fn csv_is_canonical() {
        let runs = vec![
            RunObservation::new(100, 10.0, 1000, 1000),
            RunObservation::new(100, 10.0, 1000, 999),
        ];
        let curve = LoadLossCurve::from_runs(meta(2), runs, 0.01).unwrap();
        assert_eq!(
            curve.runs_csv(),
            format!("{RUNS_HEADER}\n100,0,10,1000,1000\n100,1,10,1000,999\n")
        );
        assert_eq!(curve.checksum().len(), 64);
    }
}
