//! Deterministic paired PPG/ECG generator.
//!
//! Beats follow an RR series with Gaussian jitter and a sinusoidal
//! heart-rate modulation. Within a beat of duration `rr` the intra-beat phase
//! `u` runs over `[0, 1)`; the ECG is a sum of five Gaussian bumps (P, Q, R, S,
//! T) in `u`, the PPG one asymmetric pulse with a Gaussian upstroke and an
//! exponential run-off. Beat starts are rounded to the nearest sample of the
//! cumulative beat time, so both waveforms share identical beat boundaries.

use alloc::vec;
use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::numcore::{stream, Purpose};

/// Shortest and longest RR interval the generator emits, in seconds.
pub const RR_MIN: f64 = 0.3;
pub const RR_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid configuration: {field} {reason}")]
    InvalidConfig {
        field: &'static str,
        reason: &'static str,
    },
    #[error("at least one beat is required")]
    NoBeats,
    #[error("signal samples must be finite and fs positive")]
    InvalidSignal,
}

/// Uniformly sampled waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub fs: f64,
    pub samples: Vec<f64>,
}

impl Signal {
    pub fn new(fs: f64, samples: Vec<f64>) -> Result<Self, SynthError> {
        if !(fs > 0.0 && fs.is_finite()) || samples.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::InvalidSignal);
        }
        Ok(Self { fs, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.fs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcgWave {
    /// Centre in intra-beat phase, in `(0, 1)`.
    pub phase: f64,
    pub amplitude: f64,
    /// Standard deviation in phase units.
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpgPulse {
    /// Phase of the systolic apex, in `[0, 0.5]`.
    pub lag: f64,
    pub rise_width: f64,
    pub decay_width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvModulation {
    /// Seconds of RR swing.
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardiacSimConfig {
    pub mean_rr: f64,
    pub rr_std: f64,
    pub hrv_mod: HrvModulation,
    /// P, Q, R, S, T in that order.
    pub ecg_waves: [EcgWave; 5],
    pub ppg_pulse: PpgPulse,
    pub fs: f64,
}

pub const R_WAVE: usize = 2;

impl Default for CardiacSimConfig {
    fn default() -> Self {
        let w = |phase, amplitude, width| EcgWave {
            phase,
            amplitude,
            width,
        };
        Self {
            mean_rr: 1.0,
            rr_std: 0.02,
            hrv_mod: HrvModulation {
                amplitude: 0.04,
                frequency: 0.25,
            },
            ecg_waves: [
                w(0.15, 0.12, 0.025),
                w(0.28, -0.1, 0.01),
                w(0.30, 1.0, 0.012),
                w(0.32, -0.15, 0.01),
                w(0.55, 0.25, 0.04),
            ],
            ppg_pulse: PpgPulse {
                lag: 0.25,
                rise_width: 0.08,
                decay_width: 0.2,
                amplitude: 1.0,
            },
            fs: 125.0,
        }
    }
}

impl CardiacSimConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |field, reason| Err(SynthError::InvalidConfig { field, reason });
        if !(self.mean_rr > 0.0) {
            return bad("mean_rr", "must be positive");
        }
        if !(self.rr_std >= 0.0) {
            return bad("rr_std", "must be non-negative");
        }
        if !(self.hrv_mod.amplitude >= 0.0) || !(self.hrv_mod.frequency >= 0.0) {
            return bad("hrv_mod", "amplitude and frequency must be non-negative");
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return bad("fs", "must be positive");
        }
        let mut prev = 0.0;
        for w in &self.ecg_waves {
            if !(w.width > 0.0) {
                return bad("ecg_waves", "widths must be positive");
            }
            if !(w.phase > prev && w.phase < 1.0) || !w.amplitude.is_finite() {
                return bad("ecg_waves", "phases must be strictly increasing in (0, 1)");
            }
            prev = w.phase;
        }
        let p = &self.ppg_pulse;
        if !(0.0..=0.5).contains(&p.lag) {
            return bad("ppg_pulse.lag", "must lie in [0, 0.5]");
        }
        if !(p.rise_width > 0.0 && p.decay_width > 0.0) {
            return bad("ppg_pulse", "widths must be positive");
        }
        if !p.amplitude.is_finite() {
            return bad("ppg_pulse.amplitude", "must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
}

/// Baseline wander plus white Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub baseline: Vec<Sinusoid>,
    pub gaussian_std: f64,
}

impl Default for NoiseConfig {
    /// Three baseline sinusoids (0.3 @ 0.3 Hz, 0.4 @ 0.2 Hz, 0.1 @ 0.9 Hz) and
    /// white noise with standard deviation 0.3.
    fn default() -> Self {
        let s = |amplitude, frequency| Sinusoid {
            amplitude,
            frequency,
        };
        Self {
            baseline: vec![s(0.3, 0.3), s(0.4, 0.2), s(0.1, 0.9)],
            gaussian_std: 0.3,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            baseline: Vec::new(),
            gaussian_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for s in &self.baseline {
            if !(s.frequency > 0.0) || !(s.amplitude >= 0.0) {
                return Err(SynthError::InvalidConfig {
                    field: "noise.baseline",
                    reason: "frequencies must be positive and amplitudes non-negative",
                });
            }
        }
        if !(self.gaussian_std >= 0.0) {
            return Err(SynthError::InvalidConfig {
                field: "noise.gaussian_std",
                reason: "must be non-negative",
            });
        }
        Ok(())
    }

    /// Mean power the noise adds: `gaussian_std^2 + sum a_j^2 / 2`.
    pub fn expected_power(&self) -> f64 {
        self.gaussian_std * self.gaussian_std
            + self.baseline.iter().map(|s| 0.5 * s.amplitude * s.amplitude).sum::<f64>()
    }
}

/// `n_beats` RR intervals in seconds:
/// `mean_rr + rr_std * eps_i + A sin(2 pi f t_i)` clamped to `[0.3, 2.0]`,
/// where `t_i` is the start time of beat `i`.
pub fn gen_rr_series(cfg: &CardiacSimConfig, n_beats: usize, seed: u64) -> Result<Vec<f64>, SynthError> {
    cfg.validate()?;
    if n_beats == 0 {
        return Err(SynthError::NoBeats);
    }
    Ok(RrIter::new(cfg, seed).take(n_beats).collect())
}

/// RR intervals covering at least `duration_s` seconds.
pub fn gen_rr_for_duration(cfg: &CardiacSimConfig, duration_s: f64, seed: u64) -> Result<Vec<f64>, SynthError> {
    cfg.validate()?;
    let mut total = 0.0;
    let mut out = Vec::new();
    for rr in RrIter::new(cfg, seed) {
        out.push(rr);
        total += rr;
        if total >= duration_s {
            break;
        }
    }
    Ok(out)
}

struct RrIter<'a> {
    cfg: &'a CardiacSimConfig,
    rng: crate::numcore::StreamRng,
    t: f64,
}

impl<'a> RrIter<'a> {
    fn new(cfg: &'a CardiacSimConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: stream(seed, Purpose::Synthesis, 0),
            t: 0.0,
        }
    }
}

impl Iterator for RrIter<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let eps: f64 = StandardNormal.sample(&mut self.rng);
        let m = &self.cfg.hrv_mod;
        let rr = self.cfg.mean_rr
            + self.cfg.rr_std * eps
            + m.amplitude * math::sin(2.0 * math::PI * m.frequency * self.t);
        let rr = rr.clamp(RR_MIN, RR_MAX);
        self.t += rr;
        Some(rr)
    }
}

/// Sample index where each beat starts, plus the end index as the last entry.
pub fn beat_starts(rr: &[f64], fs: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(rr.len() + 1);
    let mut t = 0.0;
    out.push(0);
    for &r in rr {
        t += r;
        out.push(math::round(t * fs) as usize);
    }
    out
}

fn render(rr: &[f64], fs: f64, mut shape: impl FnMut(f64) -> f64) -> Vec<f64> {
    let starts = beat_starts(rr, fs);
    let mut out = vec![0.0; *starts.last().expect("at least one entry")];
    for (b, &r) in rr.iter().enumerate() {
        let span = fs * r;
        for n in starts[b]..starts[b + 1] {
            let u = (n - starts[b]) as f64 / span;
            out[n] = shape(u);
        }
    }
    out
}

pub fn gen_ecg(rr: &[f64], cfg: &CardiacSimConfig) -> Result<Signal, SynthError> {
    cfg.validate()?;
    if rr.is_empty() {
        return Err(SynthError::NoBeats);
    }
    let waves = cfg.ecg_waves;
    let samples = render(rr, cfg.fs, |u| {
        waves
            .iter()
            .map(|w| {
                let d = u - w.phase;
                w.amplitude * math::exp(-d * d / (2.0 * w.width * w.width))
            })
            .sum()
    });
    Signal::new(cfg.fs, samples)
}

pub fn gen_ppg(rr: &[f64], cfg: &CardiacSimConfig) -> Result<Signal, SynthError> {
    cfg.validate()?;
    if rr.is_empty() {
        return Err(SynthError::NoBeats);
    }
    let p = cfg.ppg_pulse;
    let samples = render(rr, cfg.fs, |u| {
        let d = u - p.lag;
        let shape = if d < 0.0 {
            math::exp(-d * d / (2.0 * p.rise_width * p.rise_width))
        } else {
            math::exp(-d / p.decay_width)
        };
        p.amplitude * shape
    });
    Signal::new(cfg.fs, samples)
}

/// Ground-truth sample index of each beat's feature at intra-beat `phase`.
pub fn phase_indices(rr: &[f64], fs: f64, phase: f64) -> Vec<usize> {
    let starts = beat_starts(rr, fs);
    rr.iter()
        .enumerate()
        .map(|(b, &r)| starts[b] + math::round(phase * r * fs) as usize)
        .filter(|&i| i < *starts.last().expect("non-empty"))
        .collect()
}

/// `s + sum_j a_j sin(2 pi f_j t) + gaussian_std * eps_t` with `t = n / fs`.
pub fn add_noise(s: &Signal, noise: &NoiseConfig, seed: u64) -> Result<Signal, SynthError> {
    add_noise_from(s, noise, seed, 0.0)
}

/// [`add_noise`] for a signal whose first sample sits at `t0` seconds of a
/// longer recording, so baseline wander stays continuous across chunks.
pub fn add_noise_from(s: &Signal, noise: &NoiseConfig, seed: u64, t0: f64) -> Result<Signal, SynthError> {
    noise.validate()?;
    let mut rng = stream(seed, Purpose::Noise, 0);
    let samples = s
        .samples
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let t = t0 + n as f64 / s.fs;
            let wander: f64 = noise
                .baseline
                .iter()
                .map(|b| b.amplitude * math::sin(2.0 * math::PI * b.frequency * t))
                .sum();
            let white = if noise.gaussian_std > 0.0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                noise.gaussian_std * e
            } else {
                0.0
            };
            v + wander + white
        })
        .collect();
    Signal::new(s.fs, samples)
}

/// One paired recording with its generating RR series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub rr: Vec<f64>,
    pub ecg: Signal,
    pub ppg: Signal,
}

pub fn generate_record(cfg: &CardiacSimConfig, duration_s: f64, seed: u64) -> Result<SyntheticRecord, SynthError> {
    let rr = gen_rr_for_duration(cfg, duration_s, seed)?;
    let mut ecg = gen_ecg(&rr, cfg)?;
    let mut ppg = gen_ppg(&rr, cfg)?;
    let n = (math::round(duration_s * cfg.fs) as usize).min(ecg.len());
    ecg.samples.truncate(n);
    ppg.samples.truncate(n);
    Ok(SyntheticRecord { rr, ecg, ppg })
}
