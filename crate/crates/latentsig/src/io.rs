//! File formats.
//!
//! | file | layout |
//! |------|--------|
//! | signal CSV | header `time_s,value`, one row per sample |
//! | record sidecar JSON | [`RecordMeta`] |
//! | dataset JSON | [`Dataset`] |
//! | translation JSON | [`TranslationFile`] |
//! | trials CSV | header `rt_s,choice`, choice 0 = lower, 1 = upper |
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back gives the same bits.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use latentsig_core::cardiosynth::{CardiacSimConfig, Signal};
use latentsig_core::ddm::{Choice, Trial};
use latentsig_core::preprocess::{NormStats, PairedSequence};

/// Writes through a temporary file in the same directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn signal_csv(s: &Signal) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time_s", "value"])?;
    for (i, v) in s.samples.iter().enumerate() {
        w.write_record([format!("{:?}", s.time_of(i)), format!("{v:?}")])?;
    }
    Ok(w.into_inner()?)
}

pub fn write_signal_csv(path: &Path, s: &Signal) -> Result<()> {
    atomic_write(path, &signal_csv(s)?)
}

/// Reads values; the sampling rate comes from the caller (usually the sidecar).
pub fn read_signal_csv(path: &Path, fs_hz: f64) -> Result<Signal> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["time_s", "value"] {
        bail!("{}: expected header time_s,value", path.display());
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: f64 = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .with_context(|| format!("{}: bad value on data row {}", path.display(), i + 1))?;
        samples.push(v);
    }
    Ok(Signal::new(fs_hz, samples)?)
}

/// Everything needed to regenerate one synthetic record bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub record: usize,
    pub fs: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub samples: usize,
    pub sim: CardiacSimConfig,
    pub rr: Vec<f64>,
    pub ecg_file: String,
    pub ppg_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub fs: f64,
    pub seg_len: usize,
    /// Whether the PPG values carry the configured input noise.
    pub noisy: bool,
    pub sequences: Vec<PairedSequence>,
}

/// One translated chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatedSequence {
    pub record: usize,
    pub offset: usize,
    /// Original PPG interval lengths, used to restore the time axis.
    pub pp_lengths: Vec<usize>,
    pub x_norm: NormStats,
    pub segments: Vec<Vec<f64>>,
    pub spread: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationFile {
    pub mode: String,
    pub seed: u64,
    pub sequences: Vec<TranslatedSequence>,
}

/// ECG segments of one chunk, with the per-sample spread when sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub record: usize,
    pub offset: usize,
    pub segments: Vec<Vec<f64>>,
    pub spread: Option<Vec<Vec<f64>>>,
}

/// Reads either a dataset (its ECG side) or a translation file.
pub fn read_segment_sets(path: &Path) -> Result<Vec<SegmentSet>> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("mode").is_some() {
        let t: TranslationFile = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
        Ok(t.sequences
            .into_iter()
            .map(|s| SegmentSet {
                record: s.record,
                offset: s.offset,
                segments: s.segments,
                spread: s.spread,
            })
            .collect())
    } else {
        let d: Dataset = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
        Ok(d.sequences
            .into_iter()
            .map(|s| SegmentSet {
                record: s.record,
                offset: s.offset,
                segments: s.y.segments().to_vec(),
                spread: None,
            })
            .collect())
    }
}

pub fn trials_csv(trials: &[Trial]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rt_s", "choice"])?;
    for t in trials {
        w.write_record([format!("{:?}", t.rt), (t.choice as u8).to_string()])?;
    }
    Ok(w.into_inner()?)
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<Trial>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["rt_s", "choice"] {
        bail!("{}: expected header rt_s,choice", path.display());
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let rt: f64 = rec
            .get(0)
            .and_then(|v| v.parse().ok())
            .with_context(|| format!("{}: bad rt_s on data row {row}", path.display()))?;
        let choice = rec
            .get(1)
            .and_then(|v| v.parse::<u8>().ok())
            .and_then(Choice::from_index)
            .with_context(|| format!("{}: choice must be 0 or 1 on data row {row}", path.display()))?;
        out.push(Trial { rt, choice });
    }
    Ok(out)
}
