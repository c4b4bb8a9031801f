//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Unknown
//! keys are rejected. `preset = paper | desk` picks the starting values
//! wherever it appears in the file; every other key overrides the preset.
//! [`RunConfig::dump`] writes every key explicitly, so a dumped file parses
//! back to the same config under either preset.

use std::collections::HashMap;
use std::fmt;

use latentsig_core::adssm::{AdssmConfig, PosteriorWindow};
use latentsig_core::cardiosynth::{CardiacSimConfig, NoiseConfig, Sinusoid};
use latentsig_core::preprocess::PairingConfig;
use latentsig_core::trainkit::TrainConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {key}: {message}")]
pub struct ConfigError {
    /// 0 when the offending key was not set in the file.
    pub line: usize,
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub records: usize,
    pub duration_s: f64,
    /// Added to `mean_rr` once per record index, so records differ in heart rate.
    pub mean_rr_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub sim: CardiacSimConfig,
    pub noise: NoiseConfig,
    pub pairing: PairingConfig,
    pub model: AdssmConfig,
    pub train: TrainConfig,
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let (model, train) = match p {
            Preset::Paper => (AdssmConfig::default(), TrainConfig::default()),
            Preset::Desk => (AdssmConfig::desk(), TrainConfig::desk()),
        };
        Self {
            seed: 0,
            dataset: DatasetConfig {
                records: 20,
                duration_s: 400.0,
                mean_rr_step: 0.015,
            },
            sim: CardiacSimConfig {
                mean_rr: 0.8,
                ..CardiacSimConfig::default()
            },
            noise: NoiseConfig::default(),
            pairing: PairingConfig::default(),
            model,
            train,
            checkpoint_every: 0,
        }
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Simulation settings of record `r`.
    pub fn record_sim(&self, r: usize) -> CardiacSimConfig {
        CardiacSimConfig {
            mean_rr: self.sim.mean_rr + self.dataset.mean_rr_step * r as f64,
            ..self.sim.clone()
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let mut preset = Preset::Paper;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |key: &str, message: String| ConfigError {
                line,
                key: key.to_string(),
                message,
            };
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(content, "expected `key = value`".into()))?;
            if let Some(prev) = seen.insert(key, line) {
                return Err(err(key, format!("already set on line {prev}")));
            }
            if key == "preset" {
                preset = match value {
                    "paper" => Preset::Paper,
                    "desk" => Preset::Desk,
                    _ => return Err(err(key, format!("expected paper or desk, got `{value}`"))),
                };
            } else if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(err(key, "unknown key".into()));
            } else {
                entries.push((line, key, value));
            }
        }
        let mut cfg = Self::preset(preset);
        for (line, key, value) in entries {
            set_key(&mut cfg, key, value).map_err(|message| ConfigError {
                line,
                key: key.to_string(),
                message,
            })?;
        }
        cfg.validate().map_err(|(key, message)| ConfigError {
            line: seen.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    /// Canonical text: every key in documentation order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            out.push_str(&format!("{key} = {}\n", get_key(self, key)));
        }
        out
    }

    /// The dump of `preset` with each key's description as a comment.
    pub fn documented_defaults(preset: Preset) -> String {
        let cfg = Self::preset(preset);
        let mut out = String::new();
        for (key, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key} = {}\n", get_key(&cfg, key)));
        }
        out
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.dataset.records == 0 {
            return Err(("records", "must be at least 1".into()));
        }
        if !(self.dataset.duration_s > 0.0 && self.dataset.duration_s.is_finite()) {
            return Err(("duration_s", "must be positive".into()));
        }
        for r in [0, self.dataset.records - 1] {
            if let Err(e) = self.record_sim(r).validate() {
                let key = if r == 0 { "mean_rr" } else { "mean_rr_step" };
                return Err((sim_key(&e).unwrap_or(key), e.to_string()));
            }
        }
        self.noise.validate().map_err(|e| ("noise_std", e.to_string()))?;
        if !(self.pairing.chunk_s > 0.0) {
            return Err(("chunk_s", "must be positive".into()));
        }
        if let Some(d) = self.pairing.detrend_s {
            if !(d > 0.0) {
                return Err(("detrend_s", "must be positive or none".into()));
            }
        }
        self.pairing.peaks.validate().map_err(|e| ("peak_window_s", e.to_string()))?;
        if let Err(e) = self.model.validate() {
            let key = match &e {
                latentsig_core::adssm::AdssmError::InvalidConfig { field } => field,
                _ => "hidden",
            };
            return Err((key, e.to_string()));
        }
        if let Err(e) = self.train.validate() {
            let key = match &e {
                latentsig_core::trainkit::TrainError::InvalidConfig { field, .. } => field,
                _ => "epochs",
            };
            return Err((key, e.to_string()));
        }
        Ok(())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Paper)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

fn sim_key(e: &latentsig_core::cardiosynth::SynthError) -> Option<&'static str> {
    match e {
        latentsig_core::cardiosynth::SynthError::InvalidConfig { field, .. } => match *field {
            "rr_std" => Some("rr_std"),
            "fs" => Some("fs"),
            f if f.starts_with("hrv") => Some("hrv_amplitude"),
            _ => None,
        },
        _ => None,
    }
}

trait Value: Sized {
    fn parse(s: &str) -> Result<Self, String>;
    fn format(&self) -> String;
}

impl Value for usize {
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
    }
    fn format(&self) -> String {
        self.to_string()
    }
}

impl Value for u64 {
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
    }
    fn format(&self) -> String {
        self.to_string()
    }
}

impl Value for f64 {
    fn parse(s: &str) -> Result<Self, String> {
        let v: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("expected a finite number, got `{s}`"))
        }
    }
    fn format(&self) -> String {
        format!("{self:?}")
    }
}

impl Value for Option<f64> {
    fn parse(s: &str) -> Result<Self, String> {
        if s == "none" {
            Ok(None)
        } else {
            f64::parse(s).map(Some)
        }
    }
    fn format(&self) -> String {
        self.map_or_else(|| "none".into(), |v| v.format())
    }
}

impl Value for PosteriorWindow {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "future" => Ok(PosteriorWindow::Future),
            "inclusive" => Ok(PosteriorWindow::Inclusive),
            _ => Err(format!("expected future or inclusive, got `{s}`")),
        }
    }
    fn format(&self) -> String {
        match self {
            PosteriorWindow::Future => "future".into(),
            PosteriorWindow::Inclusive => "inclusive".into(),
        }
    }
}

/// `amplitude@frequency` pairs separated by commas, or `none`.
impl Value for Vec<Sinusoid> {
    fn parse(s: &str) -> Result<Self, String> {
        if s == "none" {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|part| {
                let (a, f) = part
                    .trim()
                    .split_once('@')
                    .ok_or_else(|| format!("expected amplitude@frequency, got `{part}`"))?;
                Ok(Sinusoid {
                    amplitude: f64::parse(a.trim())?,
                    frequency: f64::parse(f.trim())?,
                })
            })
            .collect()
    }
    fn format(&self) -> String {
        if self.is_empty() {
            return "none".into();
        }
        self.iter()
            .map(|s| format!("{}@{}", s.amplitude.format(), s.frequency.format()))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

macro_rules! config_keys {
    ($( $key:literal => $($field:ident).+ : $doc:literal ; )*) => {
        const KEYS: &[(&str, &str)] = &[$(($key, $doc)),*];

        fn set_key(c: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
            match key {
                $($key => c.$($field).+ = Value::parse(value)?,)*
                _ => return Err("unknown key".into()),
            }
            Ok(())
        }

        fn get_key(c: &RunConfig, key: &str) -> String {
            match key {
                $($key => c.$($field).+.format(),)*
                _ => unreachable!("key list and match arms come from the same table"),
            }
        }
    };
}

config_keys! {
    "seed" => seed: "run seed for synthesis, initialisation, shuffling and sampling";
    "records" => dataset.records: "number of synthetic records";
    "duration_s" => dataset.duration_s: "length of each synthetic record in seconds";
    "mean_rr" => sim.mean_rr: "mean RR interval of record 0 in seconds";
    "mean_rr_step" => dataset.mean_rr_step: "mean RR increment per record index in seconds";
    "rr_std" => sim.rr_std: "beat-to-beat RR standard deviation in seconds";
    "hrv_amplitude" => sim.hrv_mod.amplitude: "respiratory RR modulation amplitude in seconds";
    "hrv_frequency" => sim.hrv_mod.frequency: "respiratory RR modulation frequency in Hz";
    "fs" => sim.fs: "sampling rate in Hz";
    "noise_std" => noise.gaussian_std: "white noise standard deviation for prep --noise";
    "noise_baseline" => noise.baseline: "baseline wander sinusoids as amplitude@frequency list";
    "chunk_s" => pairing.chunk_s: "chunk length in seconds";
    "detrend_s" => pairing.detrend_s: "moving-average detrend window in seconds, or none";
    "peak_window_s" => pairing.peaks.window_s: "rolling threshold window of the peak detector in seconds";
    "peak_k" => pairing.peaks.k: "standard deviations above the rolling mean a peak must reach";
    "peak_refractory_s" => pairing.peaks.refractory_s: "minimum spacing between peaks in seconds";
    "peak_min_rel_height" => pairing.peaks.min_rel_height: "peaks must exceed this fraction of the chunk range";
    "hidden" => model.hidden: "hidden layer width";
    "latent" => model.latent: "latent state size";
    "posterior_window" => model.posterior_window: "posterior observation window: future or inclusive";
    "translate_samples" => model.translate_samples: "latent draws for translate --mode sample";
    "epochs" => train.epochs: "training epochs";
    "batch" => train.batch: "minibatch size";
    "lr" => train.lr: "Adam learning rate";
    "beta1" => train.beta1: "Adam first moment decay";
    "beta2" => train.beta2: "Adam second moment decay";
    "anneal_end_epoch" => train.anneal_end_epoch: "epoch at which the KL weight reaches 1 (0 disables annealing)";
    "grad_clip_norm" => train.grad_clip_norm: "global gradient norm cap, or none";
    "shard_size" => train.shard_size: "examples per parallel shard; part of the numerical result";
    "checkpoint_every" => checkpoint_every: "epochs between checkpoints; 0 keeps only the final one";
}
