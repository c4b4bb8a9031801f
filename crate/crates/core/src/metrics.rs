//! Signal-comparison metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::numcore::{dft, normal_vec, stream, Purpose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} samples, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("correlation is undefined for a constant input")]
    Constant,
    #[error("residual is exactly zero, SNR is infinite")]
    ZeroResidual,
    #[error("power spectrum is identically zero")]
    ZeroSpectrum,
    #[error("empty input")]
    Empty,
    #[error("sample sets must have equal counts ({left} vs {right}); subsample the larger one")]
    UnequalCounts { left: usize, right: usize },
    #[error("sample {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        found: usize,
        expected: usize,
    },
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Pearson correlation coefficient.
pub fn pearson(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    same_len(y, y_hat)?;
    if y.len() < 2 {
        return Err(MetricError::TooShort { len: y.len(), min: 2 });
    }
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mh = y_hat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(y_hat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Constant);
    }
    Ok((sxy / (math::sqrt(sxx) * math::sqrt(syy))).clamp(-1.0, 1.0))
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    same_len(y, y_hat)?;
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(math::sqrt(ss / y.len() as f64))
}

/// `20 log10(||y||^2 / ||y - y_hat||^2)`.
///
/// Squared norms inside a `20 log10` mean the value is twice the usual
/// power-ratio SNR in decibels.
pub fn snr_db(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    same_len(y, y_hat)?;
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    let signal: f64 = y.iter().map(|v| v * v).sum();
    let noise: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    if noise == 0.0 {
        return Err(MetricError::ZeroResidual);
    }
    Ok(20.0 * math::log10(signal / noise))
}

/// Sum of absolute differences.
pub fn rec_l1(x: &[f64], x_rec: &[f64]) -> Result<f64, MetricError> {
    same_len(x, x_rec)?;
    Ok(x.iter().zip(x_rec).map(|(a, b)| math::fabs(a - b)).sum())
}

pub const DEFAULT_PROJECTIONS: usize = 128;

fn check_set(set: &[Vec<f64>], dim: usize) -> Result<(), MetricError> {
    for (index, v) in set.iter().enumerate() {
        if v.len() != dim {
            return Err(MetricError::Dimension {
                index,
                found: v.len(),
                expected: dim,
            });
        }
    }
    Ok(())
}

/// Sliced 2-Wasserstein distance between two equally sized point sets.
///
/// Each of `n_proj` directions is drawn uniformly on the unit sphere; the 1-D
/// distance pairs sorted projections. The result is the square root of the
/// mean squared 1-D distance.
pub fn swd(a: &[Vec<f64>], b: &[Vec<f64>], n_proj: usize, seed: u64) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() || n_proj == 0 {
        return Err(MetricError::Empty);
    }
    if a.len() != b.len() {
        return Err(MetricError::UnequalCounts {
            left: a.len(),
            right: b.len(),
        });
    }
    let dim = a[0].len();
    if dim == 0 {
        return Err(MetricError::Empty);
    }
    check_set(a, dim)?;
    check_set(b, dim)?;

    let mut rng = stream(seed, Purpose::Projection, 0);
    let n = a.len() as f64;
    let mut total = 0.0;
    let mut pa = Vec::with_capacity(a.len());
    let mut pb = Vec::with_capacity(b.len());
    for _ in 0..n_proj {
        let dir = unit_direction(&mut rng, dim);
        pa.clear();
        pb.clear();
        pa.extend(a.iter().map(|v| dot(v, &dir)));
        pb.extend(b.iter().map(|v| dot(v, &dir)));
        pa.sort_by(f64::total_cmp);
        pb.sort_by(f64::total_cmp);
        total += pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    }
    Ok(math::sqrt(total / n_proj as f64))
}

fn unit_direction(rng: &mut crate::numcore::StreamRng, dim: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, dim);
        let norm = math::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Seeded draw of `n` distinct elements, in their original order.
pub fn subsample<T: Clone>(set: &[T], n: usize, seed: u64) -> Vec<T> {
    if n >= set.len() {
        return set.to_vec();
    }
    let mut rng = stream(seed, Purpose::Subsample, 0);
    let mut idx: Vec<usize> = (0..set.len()).collect();
    for i in 0..n {
        let j = i + (rng.next_u64() % (set.len() - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut chosen = idx[..n].to_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| set[i].clone()).collect()
}

/// Periodogram `|X_k|^2` over the non-negative frequency bins `0..=T/2`.
pub fn periodogram(x: &[f64]) -> Result<Vec<f64>, MetricError> {
    let coeffs = dft(x).map_err(|_| MetricError::Empty)?;
    Ok(coeffs[..x.len() / 2 + 1].iter().map(|c| c.norm_sqr()).collect())
}

/// Shannon entropy in bits of the normalised periodogram.
///
/// `fs` only scales the frequency axis and so does not change the value; it
/// is validated and kept for symmetry with the other spectral helpers.
pub fn spectral_entropy(x: &[f64], fs: f64) -> Result<f64, MetricError> {
    if x.len() < 2 {
        return Err(MetricError::TooShort { len: x.len(), min: 2 });
    }
    debug_assert!(fs > 0.0);
    let p = periodogram(x)?;
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(MetricError::ZeroSpectrum);
    }
    let h: f64 = p
        .iter()
        .map(|&v| v / total)
        .filter(|&v| v > 0.0)
        .map(|v| -v * math::log2(v))
        .sum();
    Ok(h.max(0.0))
}

/// Per-bin mean magnitude and circular-mean phase over a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FftStats {
    pub magnitude: Vec<f64>,
    /// Angle of the mean resultant; 0 where the resultant vanishes.
    pub phase: Vec<f64>,
}

pub fn fft_batch_stats(batch: &[Vec<f64>]) -> Result<FftStats, MetricError> {
    let first = batch.first().ok_or(MetricError::Empty)?;
    let t = first.len();
    if t == 0 {
        return Err(MetricError::Empty);
    }
    let bins = t / 2 + 1;
    let mut mag = alloc::vec![0.0; bins];
    let mut re = alloc::vec![0.0; bins];
    let mut im = alloc::vec![0.0; bins];
    for x in batch {
        same_len(first, x)?;
        let c = dft(x).map_err(|_| MetricError::Empty)?;
        for k in 0..bins {
            mag[k] += c[k].norm();
            let theta = c[k].arg();
            re[k] += math::cos(theta);
            im[k] += math::sin(theta);
        }
    }
    let n = batch.len() as f64;
    let phase = re
        .iter()
        .zip(&im)
        .map(|(&r, &i)| {
            if math::sqrt(r * r + i * i) <= 1e-12 * n {
                0.0
            } else {
                math::atan2(i, r)
            }
        })
        .collect();
    Ok(FftStats {
        magnitude: mag.into_iter().map(|m| m / n).collect(),
        phase,
    })
}

/// One metric across records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = if values.is_empty() { f64::NAN } else { values.iter().sum::<f64>() / n };
        let std = if values.len() < 2 {
            0.0
        } else {
            math::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        };
        Self {
            name: name.into(),
            values,
            mean,
            std,
        }
    }
}

/// Named per-record metric values with mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: usize,
    pub metrics: Vec<MetricSummary>,
}

impl MetricReport {
    pub fn new(records: usize) -> Self {
        Self {
            records,
            metrics: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) -> Result<(), MetricError> {
        if values.len() != self.records {
            return Err(MetricError::LengthMismatch {
                left: self.records,
                right: values.len(),
            });
        }
        self.metrics.push(MetricSummary::new(name, values));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// `metric | mean ± std` rows.
    pub fn to_table(&self) -> String {
        let width = self.metrics.iter().map(|m| m.name.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:<width$} | mean ± std (n = {})\n", "metric", self.records);
        out.push_str(&format!("{}-+-{}\n", "-".repeat(width), "-".repeat(24)));
        for m in &self.metrics {
            out.push_str(&format!("{:<width$} | {:.3} ± {:.3}\n", m.name, m.mean, m.std));
        }
        out
    }
}

/// Per-record Pearson, RMSE and SNR between paired reference and hypothesis signals.
pub fn translation_report(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<MetricReport, MetricError> {
    let mut rho = Vec::with_capacity(pairs.len());
    let mut err = Vec::with_capacity(pairs.len());
    let mut snr = Vec::with_capacity(pairs.len());
    for (y, h) in pairs {
        rho.push(pearson(y, h)?);
        err.push(rmse(y, h)?);
        snr.push(match snr_db(y, h) {
            Ok(v) => v,
            Err(MetricError::ZeroResidual) => f64::INFINITY,
            Err(e) => return Err(e),
        });
    }
    let mut report = MetricReport::new(pairs.len());
    report.push("pearson", rho)?;
    report.push("rmse", err)?;
    report.push("snr_db", snr)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn wave(n: usize) -> Vec<f64> {
        (0..n).map(|i| math::sin(0.3 * i as f64) + 0.1 * i as f64).collect()
    }

    #[test]
    fn pearson_identities() {
        let x = wave(50);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let aff: Vec<f64> = x.iter().map(|v| 3.0 * v - 7.0).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&x, &aff).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[1.0; 50]), Err(MetricError::Constant));
        assert!(pearson(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn rmse_arithmetic() {
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[0.0; 4], &[2.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rmse(&wave(9), &wave(9)).unwrap(), 0.0);
        assert!(rmse(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn snr_arithmetic() {
        let y = [10.0, 0.0];
        assert!((snr_db(&y, &[9.0, 0.0]).unwrap() - 40.0).abs() < 1e-12);
        assert!(snr_db(&y, &[0.0, 0.0]).unwrap().abs() < 1e-12);
        assert_eq!(snr_db(&y, &y), Err(MetricError::ZeroResidual));
    }

    #[test]
    fn rec_l1_arithmetic() {
        assert_eq!(rec_l1(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(rec_l1(&wave(5), &wave(5)).unwrap(), 0.0);
    }

    #[test]
    fn swd_zero_and_symmetric() {
        let a: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * i % 7) as f64, 0.5]).collect();
        let b: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 5) as f64, i as f64 * 0.2, -1.0]).collect();
        assert_eq!(swd(&a, &a, 64, 1).unwrap(), 0.0);
        let ab = swd(&a, &b, 64, 1).unwrap();
        assert!(ab > 0.0);
        assert!((ab - swd(&b, &a, 64, 1).unwrap()).abs() < 1e-12);
        assert!(swd(&a, &b[..10], 8, 1).is_err());
        assert!(swd(&[], &[], 8, 1).is_err());
    }

    #[test]
    fn swd_recovers_shift_in_one_dimension() {
        let mut rng = stream(3, Purpose::Synthesis, 0);
        let a: Vec<Vec<f64>> = normal_vec(&mut rng, 10_000).into_iter().map(|v| vec![v]).collect();
        let b: Vec<Vec<f64>> = a.iter().map(|v| vec![v[0] + 1.0]).collect();
        let d = swd(&a, &b, DEFAULT_PROJECTIONS, 9).unwrap();
        assert!((d - 1.0).abs() < 0.05, "{d}");
    }

    #[test]
    fn subsample_is_seeded_and_distinct() {
        let set: Vec<usize> = (0..100).collect();
        let s = subsample(&set, 10, 4);
        assert_eq!(s, subsample(&set, 10, 4));
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(&set, 200, 4), set);
    }

    #[test]
    fn entropy_extremes() {
        let n = 64;
        let sinus: Vec<f64> = (0..n).map(|t| math::cos(2.0 * math::PI * 5.0 * t as f64 / n as f64)).collect();
        assert!(spectral_entropy(&sinus, 125.0).unwrap() < 1e-12);
        let mut impulse = vec![0.0; n];
        impulse[0] = 1.0;
        let bins = (n / 2 + 1) as f64;
        assert!((spectral_entropy(&impulse, 125.0).unwrap() - math::log2(bins)).abs() < 1e-12);
        assert_eq!(spectral_entropy(&[0.0; 8], 1.0), Err(MetricError::ZeroSpectrum));
    }

    #[test]
    fn fft_stats_of_single_and_negated() {
        let x = wave(32);
        let one = fft_batch_stats(&[x.clone()]).unwrap();
        let c = dft(&x).unwrap();
        for k in 0..17 {
            assert_eq!(one.magnitude[k], c[k].norm());
            assert!((one.phase[k] - c[k].arg()).abs() < 1e-12);
        }
        let same = fft_batch_stats(&[x.clone(), x.clone(), x.clone()]).unwrap();
        for k in 0..17 {
            assert!((same.magnitude[k] - one.magnitude[k]).abs() < 1e-12);
            assert!((same.phase[k] - one.phase[k]).abs() < 1e-12);
        }
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let pair = fft_batch_stats(&[x, neg]).unwrap();
        for k in 0..17 {
            assert!((pair.magnitude[k] - one.magnitude[k]).abs() < 1e-12);
            // Opposite phasors cancel.
            assert_eq!(pair.phase[k], 0.0);
        }
        assert!(fft_batch_stats(&[]).is_err());
    }

    #[test]
    fn report_table() {
        let mut r = MetricReport::new(2);
        r.push("pearson", vec![0.8, 0.9]).unwrap();
        assert!(r.push("rmse", vec![0.1]).is_err());
        let t = r.to_table();
        assert!(t.contains("pearson | 0.850 ± 0.071"), "{t}");
    }
}
