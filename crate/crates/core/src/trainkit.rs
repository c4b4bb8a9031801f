//! KL-annealed minibatch training for the ADSSM.
//!
//! Every random choice in an epoch is drawn from streams keyed by the run
//! seed and the epoch number, so an epoch depends only on the incoming
//! parameters and optimizer state. That is what makes resuming from a
//! checkpoint reproduce an uninterrupted run.
//!
//! A minibatch is cut into fixed-size shards. Shards may run on any executor
//! but their results are always summed in shard order.

use alloc::string::String;
use alloc::vec::Vec;
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adssm::{self, AdssmError, AdssmParams, Example, Param};
use crate::math;
use crate::numcore::{adam_step, stream, AdamConfig, AdamState, Purpose, StreamRng, Tensor, TensorError};
use crate::preprocess::PairedSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub anneal_end_epoch: usize,
    /// Global gradient norm cap; `None` disables clipping.
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    /// Examples per shard. Changing it changes floating-point summation order.
    pub shard_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            batch: 128,
            lr: 0.0008,
            beta1: 0.9,
            beta2: 0.999,
            anneal_end_epoch: 1250,
            grad_clip_norm: Some(10.0),
            seed: 0,
            shard_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            epochs: 200,
            batch: 32,
            anneal_end_epoch: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field: &'static str, reason: &'static str| Err(TrainError::InvalidConfig { field, reason });
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.batch == 0 {
            return bad("batch", "must be at least 1");
        }
        if self.shard_size == 0 {
            return bad("shard_size", "must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", "must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", "must lie in [0, 1)");
        }
        if self.anneal_end_epoch > self.epochs {
            return bad("anneal_end_epoch", "must not exceed epochs");
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return bad("grad_clip_norm", "must be positive and finite");
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }
}

/// Linear ramp `min(1, epoch / anneal_end)`; `anneal_end == 0` means no annealing.
pub fn kl_anneal(epoch: usize, anneal_end: usize) -> f64 {
    if anneal_end == 0 || epoch >= anneal_end {
        1.0
    } else {
        epoch as f64 / anneal_end as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: &'static str },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("non-finite value in {tensor} during epoch {epoch}")]
    NonFinite { epoch: usize, tensor: &'static str },
    #[error("history epochs must increase: got {got} after {last}")]
    HistoryOrder { last: usize, got: usize },
    #[error("state was trained for {found} epochs but config asks for {epochs}")]
    Resume { found: usize, epochs: usize },
    #[error("epoch hook failed: {0}")]
    Hook(String),
    #[error(transparent)]
    Model(#[from] AdssmError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// One input/output sequence pair, segments already resampled and normalised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqPair {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl SeqPair {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

impl From<&PairedSequence> for SeqPair {
    fn from(p: &PairedSequence) -> Self {
        Self {
            x: p.x.segments().to_vec(),
            y: p.y.segments().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub beta: f64,
    /// Mean single-sample ELBO per training sequence at this epoch's beta.
    pub train_elbo: f64,
    /// Mean ELBO per validation sequence at beta 1, after the epoch's updates.
    pub val_elbo: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: EpochRecord) -> Result<(), TrainError> {
        if let Some(last) = self.records.last() {
            if r.epoch <= last.epoch {
                return Err(TrainError::HistoryOrder {
                    last: last.epoch,
                    got: r.epoch,
                });
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Everything needed to continue training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: AdssmParams,
    pub adam: AdamState,
    pub next_epoch: usize,
    pub history: TrainHistory,
}

impl TrainState {
    pub fn fresh(params: AdssmParams) -> Self {
        let adam = AdamState::for_params(params.tensors());
        Self {
            params,
            adam,
            next_epoch: 0,
            history: TrainHistory::new(),
        }
    }
}

/// Summed ELBO of one shard and, when requested, its gradient.
pub type ShardResult = Result<(f64, Option<Vec<Tensor>>), AdssmError>;

/// Runs `n` independent shard jobs and returns their results in index order.
pub trait ShardExecutor {
    fn run(&self, n: usize, job: &(dyn Fn(usize) -> ShardResult + Sync)) -> Vec<ShardResult>;
}

pub struct Serial;

impl ShardExecutor for Serial {
    fn run(&self, n: usize, job: &(dyn Fn(usize) -> ShardResult + Sync)) -> Vec<ShardResult> {
        (0..n).map(job).collect()
    }
}

pub trait Clock {
    fn now_ms(&self) -> u64;
}

/// Always reads zero, so histories carry no timing noise.
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> u64 {
        0
    }
}

/// Uniform index in `0..n`.
fn below(rng: &mut StreamRng, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

fn shuffle<T>(rng: &mut StreamRng, v: &mut [T]) {
    for i in (1..v.len()).rev() {
        let j = below(rng, i + 1);
        v.swap(i, j);
    }
}

/// Shuffled minibatches in which every sequence has the same number of segments.
pub fn epoch_batches(data: &[SeqPair], batch: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut rng = stream(seed, Purpose::Shuffle, epoch as u64);
    let mut order: Vec<usize> = (0..data.len()).collect();
    shuffle(&mut rng, &mut order);
    order.sort_by_key(|&i| data[i].len());
    let mut batches = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let len = data[order[start]].len();
        let end = order[start..].iter().position(|&i| data[i].len() != len).map_or(order.len(), |k| start + k);
        for c in order[start..end].chunks(batch) {
            batches.push(c.to_vec());
        }
        start = end;
    }
    shuffle(&mut rng, &mut batches);
    batches
}

fn example_noise_index(epoch: usize, example: usize) -> u64 {
    ((epoch as u64) << 32) | example as u64
}

fn sum_shards(results: Vec<ShardResult>) -> Result<(f64, Option<Vec<Tensor>>), AdssmError> {
    let mut total = 0.0;
    let mut grads: Option<Vec<Tensor>> = None;
    for r in results {
        let (v, g) = r?;
        total += v;
        if let Some(g) = g {
            match grads.as_mut() {
                None => grads = Some(g),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&g) {
                        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                            *x += y;
                        }
                    }
                }
            }
        }
    }
    Ok((total, grads))
}

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = math::sqrt(grads.iter().map(Tensor::sq_norm).sum());
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}

/// Mean validation ELBO at beta 1 with fixed per-sequence noise.
pub fn validation_elbo(
    params: &AdssmParams,
    data: &[SeqPair],
    seed: u64,
    shard_size: usize,
    exec: &dyn ShardExecutor,
) -> Result<f64, AdssmError> {
    if data.is_empty() {
        return Err(AdssmError::Empty);
    }
    let latent = params.config().latent;
    let noise: Vec<Vec<f64>> = data
        .iter()
        .enumerate()
        .map(|(i, d)| adssm::sequence_noise(seed, Purpose::Validation, i as u64, d.len(), latent))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&i| data[i].len());
    let mut shards: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let len = data[order[start]].len();
        let end = order[start..].iter().position(|&i| data[i].len() != len).map_or(order.len(), |k| start + k);
        shards.extend(order[start..end].chunks(shard_size));
        start = end;
    }
    let job = |s: usize| -> ShardResult {
        let ex: Vec<Example<'_>> = shards[s]
            .iter()
            .map(|&i| Example {
                x: &data[i].x,
                y: &data[i].y,
                eps: &noise[i],
            })
            .collect();
        Ok((adssm::batch_elbo(params, &ex, 1.0)?, None))
    };
    let (total, _) = sum_shards(exec.run(shards.len(), &job))?;
    Ok(total / data.len() as f64)
}

/// One optimizer step on `batch`. Returns the summed ELBO of the batch.
fn train_step(
    state: &mut TrainState,
    data: &[SeqPair],
    batch: &[usize],
    epoch: usize,
    beta: f64,
    cfg: &TrainConfig,
    exec: &dyn ShardExecutor,
) -> Result<f64, TrainError> {
    let latent = state.params.config().latent;
    let noise: Vec<Vec<f64>> = batch
        .iter()
        .map(|&i| {
            let idx = example_noise_index(epoch, i);
            adssm::sequence_noise(cfg.seed, Purpose::Sampling, idx, data[i].len(), latent)
        })
        .collect();
    let shards: Vec<&[usize]> = batch.chunks(cfg.shard_size).collect();
    let params = &state.params;
    let job = |s: usize| -> ShardResult {
        let offset = s * cfg.shard_size;
        let ex: Vec<Example<'_>> = shards[s]
            .iter()
            .enumerate()
            .map(|(k, &i)| Example {
                x: &data[i].x,
                y: &data[i].y,
                eps: &noise[offset + k],
            })
            .collect();
        let (v, g) = adssm::batch_elbo_grad(params, &ex, beta)?;
        Ok((v, Some(g)))
    };
    let (total, grads) = sum_shards(exec.run(shards.len(), &job))?;
    let mut grads = grads.expect("at least one shard");
    if !total.is_finite() {
        return Err(TrainError::NonFinite { epoch, tensor: "elbo" });
    }
    // ascend the mean ELBO by descending its negation
    let scale = -1.0 / batch.len() as f64;
    for g in grads.iter_mut() {
        for v in g.data_mut() {
            *v *= scale;
        }
    }
    if let Some((p, _)) = Param::ALL.iter().zip(&grads).find(|(_, g)| !g.is_finite()) {
        return Err(TrainError::NonFinite {
            epoch,
            tensor: p.name(),
        });
    }
    if let Some(c) = cfg.grad_clip_norm {
        clip_global_norm(&mut grads, c);
    }
    adam_step(state.params.tensors_mut(), &grads, &mut state.adam, &cfg.adam())?;
    if let Some(name) = state.params.first_non_finite() {
        return Err(TrainError::NonFinite { epoch, tensor: name });
    }
    Ok(total)
}

/// Trains from `state.next_epoch` up to `cfg.epochs`. `on_epoch` sees the
/// state after every epoch, for checkpointing or logging.
pub fn train(
    train_set: &[SeqPair],
    val_set: &[SeqPair],
    cfg: &TrainConfig,
    mut state: TrainState,
    exec: &dyn ShardExecutor,
    clock: &dyn Clock,
    on_epoch: &mut dyn FnMut(&TrainState) -> Result<(), String>,
) -> Result<TrainState, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if state.next_epoch > cfg.epochs {
        return Err(TrainError::Resume {
            found: state.next_epoch,
            epochs: cfg.epochs,
        });
    }
    for epoch in state.next_epoch..cfg.epochs {
        let t0 = clock.now_ms();
        let beta = kl_anneal(epoch, cfg.anneal_end_epoch);
        let mut total = 0.0;
        for batch in epoch_batches(train_set, cfg.batch, cfg.seed, epoch) {
            total += train_step(&mut state, train_set, &batch, epoch, beta, cfg, exec)?;
        }
        let val_elbo = if val_set.is_empty() {
            None
        } else {
            let v = validation_elbo(&state.params, val_set, cfg.seed, cfg.shard_size, exec)?;
            if !v.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    tensor: "val_elbo",
                });
            }
            Some(v)
        };
        state.history.push(EpochRecord {
            epoch,
            beta,
            train_elbo: total / train_set.len() as f64,
            val_elbo,
            wall_ms: clock.now_ms().saturating_sub(t0),
        })?;
        state.next_epoch = epoch + 1;
        on_epoch(&state).map_err(TrainError::Hook)?;
    }
    Ok(state)
}

/// Indices of a record-level train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// 80/10/10 split of records (not chunks), shuffled by `seed`. With fewer
/// than three records everything goes to training.
pub fn split_by_record(records: &[usize], seed: u64) -> Split {
    let mut ids: Vec<usize> = records.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = stream(seed, Purpose::Split, 0);
    shuffle(&mut rng, &mut ids);
    let n = ids.len();
    let (n_val, n_test) = if n < 3 {
        (0, 0)
    } else {
        let k = (math::round(n as f64 * 0.1) as usize).max(1);
        (k, k)
    };
    let val_ids = &ids[..n_val];
    let test_ids = &ids[n_val..n_val + n_test];
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (i, r) in records.iter().enumerate() {
        if val_ids.contains(r) {
            split.val.push(i);
        } else if test_ids.contains(r) {
            split.test.push(i);
        } else {
            split.train.push(i);
        }
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adssm::AdssmConfig;
    use crate::numcore::normal_vec;
    use alloc::vec;

    fn toy_data(n: usize, seed: u64) -> Vec<SeqPair> {
        let cfg = AdssmConfig::tiny();
        (0..n)
            .map(|i| {
                let t = 2 + i % 3;
                let mut rng = stream(seed, Purpose::Synthesis, i as u64);
                let x: Vec<Vec<f64>> = (0..t).map(|_| normal_vec(&mut rng, cfg.seg_len)).collect();
                let y = x.iter().map(|s| s.iter().map(|v| 0.5 * v + 0.1).collect()).collect();
                SeqPair { x, y }
            })
            .collect()
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch: 4,
            anneal_end_epoch: epochs.min(2),
            lr: 0.01,
            seed: 11,
            shard_size: 3,
            ..TrainConfig::default()
        }
    }

    fn run(cfg: &TrainConfig, data: &[SeqPair], val: &[SeqPair], state: TrainState) -> TrainState {
        train(data, val, cfg, state, &Serial, &NoClock, &mut |_| Ok(())).unwrap()
    }

    #[test]
    fn anneal_endpoints() {
        assert_eq!(kl_anneal(0, 1250), 0.0);
        assert_eq!(kl_anneal(1250, 1250), 1.0);
        assert_eq!(kl_anneal(2000, 1250), 1.0);
        assert_eq!(kl_anneal(625, 1250), 0.5);
        assert_eq!(kl_anneal(0, 0), 1.0);
    }

    #[test]
    fn presets_validate() {
        TrainConfig::default().validate().unwrap();
        let d = TrainConfig::desk();
        d.validate().unwrap();
        assert_eq!((d.epochs, d.batch, d.anneal_end_epoch), (200, 32, 50));
        let bad = TrainConfig { lr: -1.0, ..d.clone() };
        assert!(matches!(bad.validate(), Err(TrainError::InvalidConfig { field: "lr", .. })));
        let bad = TrainConfig { anneal_end_epoch: 201, ..d };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn batches_cover_data_with_equal_lengths() {
        let data = toy_data(23, 1);
        let batches = epoch_batches(&data, 4, 3, 0);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
        for b in &batches {
            assert!(b.len() <= 4 && !b.is_empty());
            assert!(b.iter().all(|&i| data[i].len() == data[b[0]].len()));
        }
        assert_eq!(batches, epoch_batches(&data, 4, 3, 0));
        assert_ne!(batches, epoch_batches(&data, 4, 3, 1));
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let data = toy_data(10, 2);
        let params = AdssmParams::init(&AdssmConfig::tiny(), 5).unwrap();
        let cfg = TrainConfig { lr: 0.0, ..small_cfg(2) };
        let out = run(&cfg, &data, &[], TrainState::fresh(params.clone()));
        assert_eq!(out.params, params);
        assert_eq!(out.history.len(), 2);
    }

    #[test]
    fn one_epoch_moves_params_without_clipping() {
        let data = toy_data(10, 3);
        let params = AdssmParams::init(&AdssmConfig::tiny(), 6).unwrap();
        let cfg = TrainConfig {
            grad_clip_norm: None,
            ..small_cfg(1)
        };
        let out = run(&cfg, &data, &[], TrainState::fresh(params.clone()));
        assert_ne!(out.params, params);
    }

    #[test]
    fn training_is_deterministic_and_finite() {
        let data = toy_data(12, 4);
        let val = toy_data(4, 40);
        let params = AdssmParams::init(&AdssmConfig::tiny(), 7).unwrap();
        let cfg = small_cfg(3);
        let a = run(&cfg, &data, &val, TrainState::fresh(params.clone()));
        let b = run(&cfg, &data, &val, TrainState::fresh(params));
        assert_eq!(a, b);
        let epochs: Vec<usize> = a.history.records().iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![0, 1, 2]);
        for r in a.history.records() {
            assert!(r.train_elbo.is_finite() && r.val_elbo.unwrap().is_finite());
            assert_eq!(r.wall_ms, 0);
        }
        assert_eq!(a.history.records()[0].beta, 0.0);
        assert_eq!(a.history.records()[2].beta, 1.0);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let data = toy_data(9, 5);
        let val = toy_data(3, 50);
        let params = AdssmParams::init(&AdssmConfig::tiny(), 8).unwrap();
        let full = run(&small_cfg(4), &data, &val, TrainState::fresh(params.clone()));
        let half = run(&small_cfg(2), &data, &val, TrainState::fresh(params));
        let resumed = run(&small_cfg(4), &data, &val, half);
        assert_eq!(full, resumed);
    }

    #[test]
    fn shard_size_only_regroups_sums() {
        let data = toy_data(8, 6);
        let params = AdssmParams::init(&AdssmConfig::tiny(), 9).unwrap();
        let a = run(&TrainConfig { shard_size: 1, ..small_cfg(1) }, &data, &[], TrainState::fresh(params.clone()));
        let b = run(&TrainConfig { shard_size: 8, ..small_cfg(1) }, &data, &[], TrainState::fresh(params));
        let (ra, rb) = (&a.history.records()[0], &b.history.records()[0]);
        assert!((ra.train_elbo - rb.train_elbo).abs() < 1e-9 * ra.train_elbo.abs());
    }

    #[test]
    fn non_finite_input_is_reported() {
        let mut data = toy_data(4, 7);
        let params = AdssmParams::init(&AdssmConfig::tiny(), 10).unwrap();
        let mut bad = params.clone();
        bad.get_mut(Param::We3).data_mut()[0] = f64::NAN;
        let err = train(&data, &[], &small_cfg(1), TrainState::fresh(bad), &Serial, &NoClock, &mut |_| Ok(())).unwrap_err();
        assert!(matches!(err, TrainError::NonFinite { epoch: 0, .. }), "{err:?}");
        data[0].y[0][0] = 1e300;
        let cfg = TrainConfig { lr: 1e300, ..small_cfg(1) };
        assert!(train(&data, &[], &cfg, TrainState::fresh(params), &Serial, &NoClock, &mut |_| Ok(())).is_err());
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![Tensor::vector(vec![3.0, 4.0]), Tensor::vector(vec![0.0, 12.0])];
        let before = clip_global_norm(&mut g, 6.5);
        assert_eq!(before, 13.0);
        let after = math::sqrt(g.iter().map(Tensor::sq_norm).sum());
        assert!((after - 6.5).abs() < 1e-12);
        let mut small = vec![Tensor::vector(vec![0.1])];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small[0].data(), &[0.1]);
    }

    #[test]
    fn history_rejects_out_of_order_epochs() {
        let mut h = TrainHistory::new();
        let rec = |epoch| EpochRecord {
            epoch,
            beta: 1.0,
            train_elbo: 0.0,
            val_elbo: None,
            wall_ms: 0,
        };
        h.push(rec(0)).unwrap();
        h.push(rec(2)).unwrap();
        assert!(h.push(rec(2)).is_err());
    }

    #[test]
    fn record_split_is_disjoint() {
        let records: Vec<usize> = (0..20).flat_map(|r| vec![r; 5]).collect();
        let s = split_by_record(&records, 3);
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 100);
        let rec_of = |v: &[usize]| {
            let mut r: Vec<usize> = v.iter().map(|&i| records[i]).collect();
            r.dedup();
            r
        };
        assert_eq!(rec_of(&s.val).len(), 2);
        assert_eq!(rec_of(&s.test).len(), 2);
        assert!(rec_of(&s.val).iter().all(|r| !rec_of(&s.train).contains(r)));
        assert_eq!(s, split_by_record(&records, 3));
    }
}
