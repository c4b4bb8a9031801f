//! Dataset assembly shared by the subcommands and the acceptance harness.

use anyhow::{ensure, Context, Result};

use latentsig_core::adssm::{self, AdssmParams, Mode};
use latentsig_core::cardiosynth::{generate_record, SyntheticRecord};
use latentsig_core::metrics::{translation_report, MetricReport};
use latentsig_core::preprocess::{pair_record_noisy, InputNoise, PairedSequence, SEG_LEN};
use latentsig_core::trainkit::{split_by_record, SeqPair, Split};

use crate::config::RunConfig;
use crate::io::{Dataset, TranslatedSequence};

pub fn record_seed(seed: u64, record: usize) -> u64 {
    seed.wrapping_add((record as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn synth_record(cfg: &RunConfig, record: usize) -> Result<SyntheticRecord> {
    let sim = cfg.record_sim(record);
    generate_record(&sim, cfg.dataset.duration_s, record_seed(cfg.seed, record))
        .with_context(|| format!("synthesising record {record}"))
}

/// Pairs one record. `noisy` corrupts the PPG values with `cfg.noise`.
pub fn pair(cfg: &RunConfig, rec: &SyntheticRecord, record: usize, noisy: bool) -> Result<Vec<PairedSequence>> {
    let noise = noisy.then(|| InputNoise {
        noise: &cfg.noise,
        seed: cfg.seed,
    });
    pair_record_noisy(&rec.ppg, &rec.ecg, record, &cfg.pairing, noise).with_context(|| format!("pairing record {record}"))
}

/// Clean and noisy datasets over `cfg.dataset.records` freshly synthesised records.
pub fn build_datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for r in 0..cfg.dataset.records {
        let rec = synth_record(cfg, r)?;
        clean.extend(pair(cfg, &rec, r, false)?);
        noisy.extend(pair(cfg, &rec, r, true)?);
    }
    let ds = |sequences, noisy| Dataset {
        fs: cfg.sim.fs,
        seg_len: SEG_LEN,
        noisy,
        sequences,
    };
    Ok((ds(clean, false), ds(noisy, true)))
}

pub fn split(ds: &Dataset, seed: u64) -> Split {
    let records: Vec<usize> = ds.sequences.iter().map(|s| s.record).collect();
    split_by_record(&records, seed)
}

pub fn seq_pairs(ds: &Dataset, idx: &[usize]) -> Vec<SeqPair> {
    idx.iter().map(|&i| SeqPair::from(&ds.sequences[i])).collect()
}

/// Translates the chosen chunks; draw seeds differ per chunk.
pub fn translate_sequences(
    params: &AdssmParams,
    ds: &Dataset,
    idx: &[usize],
    mode: Mode,
    seed: u64,
) -> Result<Vec<TranslatedSequence>> {
    idx.iter()
        .map(|&i| {
            let s = &ds.sequences[i];
            let t = adssm::translate(params, s.x.segments(), mode, seed.wrapping_add(i as u64))
                .with_context(|| format!("translating record {} offset {}", s.record, s.offset))?;
            Ok(TranslatedSequence {
                record: s.record,
                offset: s.offset,
                pp_lengths: s.x.orig_lengths().to_vec(),
                x_norm: s.x_norm,
                segments: t.segments,
                spread: t.spread,
            })
        })
        .collect()
}

/// Per-chunk metrics on the concatenated normalised segments.
pub fn score(reference: &[Vec<Vec<f64>>], hypothesis: &[Vec<Vec<f64>>]) -> Result<MetricReport> {
    ensure!(
        reference.len() == hypothesis.len(),
        "{} reference chunks but {} hypothesis chunks",
        reference.len(),
        hypothesis.len()
    );
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = reference
        .iter()
        .zip(hypothesis)
        .map(|(r, h)| (r.concat(), h.concat()))
        .collect();
    Ok(translation_report(&pairs)?)
}

/// Translates chunks `idx` of `ds` in mean mode and scores them against their ECG.
pub fn evaluate(params: &AdssmParams, ds: &Dataset, idx: &[usize]) -> Result<MetricReport> {
    let hyp = translate_sequences(params, ds, idx, Mode::Mean, 0)?;
    let reference: Vec<Vec<Vec<f64>>> = idx.iter().map(|&i| ds.sequences[i].y.segments().to_vec()).collect();
    let hypothesis: Vec<Vec<Vec<f64>>> = hyp.into_iter().map(|t| t.segments).collect();
    score(&reference, &hypothesis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::preset(Preset::Desk);
        cfg.dataset.records = 3;
        cfg.dataset.duration_s = 12.0;
        cfg
    }

    #[test]
    fn noisy_dataset_shares_boundaries_and_targets() {
        let (clean, noisy) = build_datasets(&small()).unwrap();
        assert!(!clean.sequences.is_empty());
        assert_eq!(clean.sequences.len(), noisy.sequences.len());
        for (c, n) in clean.sequences.iter().zip(&noisy.sequences) {
            assert_eq!(c.y, n.y);
            assert_eq!(c.x.orig_lengths(), n.x.orig_lengths());
            assert_ne!(c.x.segments(), n.x.segments());
        }
    }

    #[test]
    fn records_get_distinct_seeds_and_rates() {
        let cfg = small();
        assert_ne!(record_seed(7, 0), record_seed(7, 1));
        let a = synth_record(&cfg, 0).unwrap();
        assert_eq!(a, synth_record(&cfg, 0).unwrap());
        assert_ne!(a.rr, synth_record(&cfg, 1).unwrap().rr);
    }

    #[test]
    fn identical_segments_score_perfectly() {
        let seg = vec![vec![(0..90).map(|i| (i as f64 * 0.2).sin()).collect::<Vec<f64>>()]];
        let r = score(&seg, &seg).unwrap();
        assert!((r.get("pearson").unwrap().mean - 1.0).abs() < 1e-12);
        assert_eq!(r.get("rmse").unwrap().mean, 0.0);
        assert!(score(&seg, &[]).is_err());
    }
}
