//! Peak detection, peak-to-peak segmentation, resampling, normalisation and
//! chunking of paired PPG/ECG recordings.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cardiosynth::{add_noise_from, NoiseConfig, Signal};
use crate::math;

/// Samples per resampled peak-to-peak segment.
pub const SEG_LEN: usize = 90;

/// Intervals shorter than this many samples are dropped.
pub const MIN_INTERVAL: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrepError {
    #[error("signal of {len} samples is shorter than the {needed} required")]
    TooShort { len: usize, needed: usize },
    #[error("need at least 2 peaks, found {found}")]
    NotEnoughPeaks { found: usize },
    #[error("expected {expected} lengths, got {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("empty input")]
    Empty,
    #[error("segment {index} has {len} samples, expected {expected}")]
    BadSegment {
        index: usize,
        len: usize,
        expected: usize,
    },
    #[error("peak index {index} outside a signal of {len} samples")]
    PeakOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDetectConfig {
    pub window_s: f64,
    pub k: f64,
    pub refractory_s: f64,
    /// Peaks must also rise this fraction of the signal's full range above its minimum.
    pub min_rel_height: f64,
}

impl Default for PeakDetectConfig {
    fn default() -> Self {
        Self {
            window_s: 0.75,
            k: 1.0,
            refractory_s: 0.3,
            min_rel_height: 0.5,
        }
    }
}

impl PeakDetectConfig {
    pub fn validate(&self) -> Result<(), PrepError> {
        if !(self.window_s > 0.0 && self.k > 0.0 && self.refractory_s > 0.0) {
            return Err(PrepError::InvalidConfig("peak detector parameters must be positive"));
        }
        if !(0.0..1.0).contains(&self.min_rel_height) {
            return Err(PrepError::InvalidConfig("min_rel_height must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Local maxima above a centred rolling `mean + k * std` (and above the
/// `min_rel_height` floor of the whole signal), thinned so that no
/// two survivors are closer than the refractory period. Thinning visits
/// candidates from the highest down; equal heights keep the earlier index.
pub fn detect_peaks(s: &Signal, cfg: &PeakDetectConfig) -> Result<Vec<usize>, PrepError> {
    cfg.validate()?;
    let x = &s.samples;
    let needed = math::round(2.0 * cfg.window_s * s.fs).max(3.0) as usize;
    if x.len() < needed {
        return Err(PrepError::TooShort {
            len: x.len(),
            needed,
        });
    }
    let half = (math::round(cfg.window_s * s.fs) as usize / 2).max(1);
    let (mean, sd) = rolling_stats(x, half);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = lo + cfg.min_rel_height * (hi - lo);

    let mut cand: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > mean[i] + cfg.k * sd[i] && x[i] > floor)
        .collect();
    cand.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));

    let gap = math::round(cfg.refractory_s * s.fs) as usize;
    let mut kept: Vec<usize> = Vec::new();
    for c in cand {
        if kept.iter().all(|&k| k.abs_diff(c) >= gap) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Mean and population standard deviation over `[i - half, i + half]`,
/// truncated at the edges.
fn rolling_stats(x: &[f64], half: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for i in 0..n {
        s1[i + 1] = s1[i] + x[i];
        s2[i + 1] = s2[i] + x[i] * x[i];
    }
    let mut mean = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let m = (hi - lo) as f64;
        let mu = (s1[hi] - s1[lo]) / m;
        let var = ((s2[hi] - s2[lo]) / m - mu * mu).max(0.0);
        mean.push(mu);
        sd.push(math::sqrt(var));
    }
    (mean, sd)
}

/// Linear interpolation of `x` onto `n` points; the first and last samples
/// are kept exactly.
pub fn resample_linear(x: &[f64], n: usize) -> Vec<f64> {
    let m = x.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if m == 1 || n == 1 {
        return vec![x[0]; n];
    }
    if m == n {
        return x.to_vec();
    }
    let step = (m - 1) as f64 / (n - 1) as f64;
    (0..n)
        .map(|j| {
            if j == n - 1 {
                return x[m - 1];
            }
            let pos = j as f64 * step;
            let i = pos as usize;
            let frac = pos - i as f64;
            if i + 1 >= m {
                x[m - 1]
            } else {
                x[i] + frac * (x[i + 1] - x[i])
            }
        })
        .collect()
}

/// Ordered fixed-length segments with the sample count each was resampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSequence {
    segments: Vec<Vec<f64>>,
    orig_lengths: Vec<usize>,
    fs: f64,
}

impl SegmentSequence {
    pub fn new(segments: Vec<Vec<f64>>, orig_lengths: Vec<usize>, fs: f64) -> Result<Self, PrepError> {
        if segments.len() != orig_lengths.len() {
            return Err(PrepError::CountMismatch {
                expected: segments.len(),
                found: orig_lengths.len(),
            });
        }
        for (index, s) in segments.iter().enumerate() {
            if s.len() != SEG_LEN {
                return Err(PrepError::BadSegment {
                    index,
                    len: s.len(),
                    expected: SEG_LEN,
                });
            }
        }
        if let Some(index) = orig_lengths.iter().position(|&l| l < MIN_INTERVAL) {
            return Err(PrepError::BadSegment {
                index,
                len: orig_lengths[index],
                expected: MIN_INTERVAL,
            });
        }
        if !(fs > 0.0) {
            return Err(PrepError::InvalidConfig("fs must be positive"));
        }
        Ok(Self {
            segments,
            orig_lengths,
            fs,
        })
    }

    pub fn empty(fs: f64) -> Self {
        Self {
            segments: Vec::new(),
            orig_lengths: Vec::new(),
            fs,
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Vec<f64>] {
        &self.segments
    }

    pub fn orig_lengths(&self) -> &[usize] {
        &self.orig_lengths
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Same lengths, new segment values.
    pub fn with_segments(&self, segments: Vec<Vec<f64>>) -> Result<Self, PrepError> {
        Self::new(segments, self.orig_lengths.clone(), self.fs)
    }
}

/// An interval skipped by [`segment_resample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedInterval {
    pub index: usize,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub seq: SegmentSequence,
    pub dropped: Vec<DroppedInterval>,
}

/// Cuts `s` into `[peaks[i], peaks[i+1])` and resamples each piece to
/// [`SEG_LEN`] points.
pub fn segment_resample(s: &Signal, peaks: &[usize]) -> Result<Segmented, PrepError> {
    if peaks.len() < 2 {
        return Err(PrepError::NotEnoughPeaks { found: peaks.len() });
    }
    if let Some(&p) = peaks.iter().find(|&&p| p >= s.len()) {
        return Err(PrepError::PeakOutOfRange { index: p, len: s.len() });
    }
    let mut segments = Vec::new();
    let mut lengths = Vec::new();
    let mut dropped = Vec::new();
    for (index, w) in peaks.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = b.saturating_sub(a);
        if len < MIN_INTERVAL {
            dropped.push(DroppedInterval { index, start: a, len });
            continue;
        }
        segments.push(resample_linear(&s.samples[a..b], SEG_LEN));
        lengths.push(len);
    }
    Ok(Segmented {
        seq: SegmentSequence::new(segments, lengths, s.fs)?,
        dropped,
    })
}

/// Concatenates the segments after stretching each back to `pp_lengths[i]` samples.
pub fn restore_lengths(seq: &SegmentSequence, pp_lengths: &[usize]) -> Result<Signal, PrepError> {
    if pp_lengths.len() != seq.len() {
        return Err(PrepError::CountMismatch {
            expected: seq.len(),
            found: pp_lengths.len(),
        });
    }
    let mut out = Vec::with_capacity(pp_lengths.iter().sum());
    for (segment, &n) in seq.segments.iter().zip(pp_lengths) {
        out.extend(resample_linear(segment, n));
    }
    Signal::new(seq.fs, out).map_err(|_| PrepError::InvalidConfig("non-finite segment values"))
}

/// Affine map onto `[-1, 1]` recorded for inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
    /// Set when the input was constant and mapped to zeros.
    pub degenerate: bool,
}

impl NormStats {
    pub fn of(x: &[f64]) -> Result<Self, PrepError> {
        if x.is_empty() {
            return Err(PrepError::Empty);
        }
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            min,
            max,
            degenerate: !(max > min),
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            2.0 * (v - self.min) / (self.max - self.min) - 1.0
        }
    }

    pub fn invert(&self, v: f64) -> f64 {
        if self.degenerate {
            self.min
        } else {
            self.min + (v + 1.0) * 0.5 * (self.max - self.min)
        }
    }
}

pub fn normalize(x: &[f64]) -> Result<(Vec<f64>, NormStats), PrepError> {
    let stats = NormStats::of(x)?;
    Ok((x.iter().map(|&v| stats.apply(v)).collect(), stats))
}

pub fn denormalize(x: &[f64], stats: &NormStats) -> Vec<f64> {
    x.iter().map(|&v| stats.invert(v)).collect()
}

pub fn normalize_signal(s: &Signal) -> Result<(Signal, NormStats), PrepError> {
    let (samples, stats) = normalize(&s.samples)?;
    Ok((Signal { fs: s.fs, samples }, stats))
}

/// Normalises all segments of a sequence jointly.
pub fn normalize_sequence(seq: &SegmentSequence) -> Result<(SegmentSequence, NormStats), PrepError> {
    let flat: Vec<f64> = seq.segments.iter().flatten().copied().collect();
    let stats = NormStats::of(&flat)?;
    let segments = seq
        .segments
        .iter()
        .map(|s| s.iter().map(|&v| stats.apply(v)).collect())
        .collect();
    Ok((seq.with_segments(segments)?, stats))
}

pub fn chunk_len(fs: f64, chunk_s: f64) -> usize {
    math::round(fs * chunk_s) as usize
}

/// Non-overlapping chunks of `round(fs * chunk_s)` samples; the remainder is dropped.
pub fn chunk(s: &Signal, chunk_s: f64) -> Result<Vec<Signal>, PrepError> {
    let n = chunk_len(s.fs, chunk_s);
    if n == 0 {
        return Err(PrepError::InvalidConfig("fs * chunk_s must be at least 1"));
    }
    Ok(s.samples
        .chunks_exact(n)
        .map(|c| Signal {
            fs: s.fs,
            samples: c.to_vec(),
        })
        .collect())
}

/// Subtracts a centred moving average of `window_s` seconds.
pub fn detrend(s: &Signal, window_s: f64) -> Result<Signal, PrepError> {
    if !(window_s > 0.0) {
        return Err(PrepError::InvalidConfig("detrend window must be positive"));
    }
    if s.is_empty() {
        return Err(PrepError::Empty);
    }
    let half = (math::round(window_s * s.fs) as usize / 2).max(1);
    let (mean, _) = rolling_stats(&s.samples, half);
    Ok(Signal {
        fs: s.fs,
        samples: s.samples.iter().zip(mean).map(|(v, m)| v - m).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingConfig {
    pub peaks: PeakDetectConfig,
    pub chunk_s: f64,
    /// Moving-average detrend window in seconds applied before normalisation.
    pub detrend_s: Option<f64>,
}

impl Default for PairingConfig {
    fn default() -> Self {
        Self {
            peaks: PeakDetectConfig::default(),
            chunk_s: 4.0,
            detrend_s: None,
        }
    }
}

/// Aligned PPG (`x`) and ECG (`y`) segment sequences from one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSequence {
    pub x: SegmentSequence,
    pub y: SegmentSequence,
    pub record: usize,
    /// First sample of the chunk inside its record.
    pub offset: usize,
    /// Chunk normalisation of the PPG and ECG.
    pub x_norm: NormStats,
    pub y_norm: NormStats,
}

impl PairedSequence {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Normalised chunk ready for pairing.
pub fn condition(s: &Signal, cfg: &PairingConfig) -> Result<(Signal, NormStats), PrepError> {
    let s = match cfg.detrend_s {
        Some(w) => detrend(s, w)?,
        None => s.clone(),
    };
    normalize_signal(&s)
}

/// Pairs each PP interval with the RR interval whose R peak lies nearest its
/// starting PPG peak.
///
/// Peaks are located on `ppg_ref`; segment values come from `ppg_input`,
/// which lets a corrupted input be paired through clean peak positions. Both
/// PPG signals and `ecg` must already be conditioned and equally long.
pub fn pair_segments(
    ppg_ref: &Signal,
    ppg_input: &Signal,
    ecg: &Signal,
    cfg: &PeakDetectConfig,
) -> Result<(SegmentSequence, SegmentSequence), PrepError> {
    if ppg_ref.len() != ppg_input.len() || ppg_ref.len() != ecg.len() {
        return Err(PrepError::CountMismatch {
            expected: ppg_ref.len(),
            found: ecg.len().min(ppg_input.len()),
        });
    }
    let pp = detect_peaks(ppg_ref, cfg)?;
    let rr = detect_peaks(ecg, cfg)?;
    let mut xs = Vec::new();
    let mut xl = Vec::new();
    let mut ys = Vec::new();
    let mut yl = Vec::new();
    let mut last_r = None;
    for w in pp.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < MIN_INTERVAL {
            continue;
        }
        let Some(j) = nearest(&rr, a) else { continue };
        if j + 1 >= rr.len() || last_r == Some(j) || rr[j].abs_diff(a) * 2 > b - a {
            continue;
        }
        let (ra, rb) = (rr[j], rr[j + 1]);
        if rb - ra < MIN_INTERVAL {
            continue;
        }
        last_r = Some(j);
        xs.push(resample_linear(&ppg_input.samples[a..b], SEG_LEN));
        xl.push(b - a);
        ys.push(resample_linear(&ecg.samples[ra..rb], SEG_LEN));
        yl.push(rb - ra);
    }
    Ok((
        SegmentSequence::new(xs, xl, ppg_ref.fs)?,
        SegmentSequence::new(ys, yl, ecg.fs)?,
    ))
}

fn nearest(sorted: &[usize], target: usize) -> Option<usize> {
    let pos = sorted.partition_point(|&v| v < target);
    let mut best = None;
    for j in [pos.wrapping_sub(1), pos] {
        if j < sorted.len() && best.is_none_or(|b: usize| sorted[j].abs_diff(target) < sorted[b].abs_diff(target)) {
            best = Some(j);
        }
    }
    best
}

/// Chunks a paired recording and pairs every chunk with at least one segment.
pub fn pair_record(ppg: &Signal, ecg: &Signal, record: usize, cfg: &PairingConfig) -> Result<Vec<PairedSequence>, PrepError> {
    pair_record_noisy(ppg, ecg, record, cfg, None)
}

/// Additive noise applied to every normalised PPG chunk after its peaks are located.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNoise<'a> {
    pub noise: &'a NoiseConfig,
    pub seed: u64,
}

/// [`pair_record`] with optionally corrupted PPG values. Peaks still come from
/// the clean chunk, so clean and noisy runs produce the same segment boundaries.
pub fn pair_record_noisy(
    ppg: &Signal,
    ecg: &Signal,
    record: usize,
    cfg: &PairingConfig,
    input_noise: Option<InputNoise<'_>>,
) -> Result<Vec<PairedSequence>, PrepError> {
    let n = chunk_len(ppg.fs, cfg.chunk_s);
    let mut out = Vec::new();
    for (c, (p, e)) in chunk(ppg, cfg.chunk_s)?.iter().zip(chunk(ecg, cfg.chunk_s)?).enumerate() {
        let (p, x_norm) = condition(p, cfg)?;
        let (e, y_norm) = condition(&e, cfg)?;
        let input = match &input_noise {
            None => p.clone(),
            Some(inp) => {
                let seed = inp.seed ^ (((record as u64) << 32) | c as u64);
                let t0 = (c * n) as f64 / ppg.fs;
                add_noise_from(&p, inp.noise, seed, t0).map_err(|_| PrepError::InvalidConfig("invalid noise config"))?
            }
        };
        let (x, y) = pair_segments(&p, &input, &e, &cfg.peaks)?;
        if !x.is_empty() {
            out.push(PairedSequence {
                x,
                y,
                record,
                offset: c * n,
                x_norm,
                y_norm,
            });
        }
    }
    Ok(out)
}
