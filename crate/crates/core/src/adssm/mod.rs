//! Attention-based deep state-space model.
//!
//! Generative side: `z_0 = 0`, then for each step an attention context over
//! the whole input sequence `x` drives a gated transition `p(z_t | z_{t-1}, c_t)`
//! and the latent emits `y_t ~ N(mu_y(z_t), I)`. Inference side: a backward and a
//! forward GRU summarise the output window, and a combiner with the previous
//! latent gives `q(z_t | z_{t-1}, y_{t:T})`.
//!
//! Sequences are slices of equal-length segments (`seg_len` samples each).

mod graph;
mod params;

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::numcore::{normal_vec, stream, DiagGaussian, Purpose, Tape, Tensor, TensorError, Var};

pub use params::{AdssmParams, Init, Param};

/// Which observations the posterior for `z_t` sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PosteriorWindow {
    /// `y_t .. y_T`.
    #[default]
    Future,
    /// `y_{t-1} .. y_T`.
    Inclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdssmConfig {
    pub seg_len: usize,
    pub hidden: usize,
    pub latent: usize,
    pub posterior_window: PosteriorWindow,
    /// Latent draws per sequence in [`Mode::Sample`].
    pub translate_samples: usize,
}

impl Default for AdssmConfig {
    fn default() -> Self {
        Self {
            seg_len: crate::preprocess::SEG_LEN,
            hidden: 256,
            latent: 128,
            posterior_window: PosteriorWindow::Future,
            translate_samples: 30,
        }
    }
}

impl AdssmConfig {
    pub fn desk() -> Self {
        Self {
            hidden: 64,
            latent: 32,
            ..Self::default()
        }
    }

    /// Very small sizes for unit tests and gradient checks.
    pub fn tiny() -> Self {
        Self {
            seg_len: 6,
            hidden: 5,
            latent: 3,
            posterior_window: PosteriorWindow::Future,
            translate_samples: 4,
        }
    }

    pub fn validate(&self) -> Result<(), AdssmError> {
        for (field, v) in [
            ("seg_len", self.seg_len),
            ("hidden", self.hidden),
            ("latent", self.latent),
            ("translate_samples", self.translate_samples),
        ] {
            if v == 0 {
                return Err(AdssmError::InvalidConfig { field });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdssmError {
    #[error("config field {field} must be at least 1")]
    InvalidConfig { field: &'static str },
    #[error("expected {expected} parameter tensors, found {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ParamShape {
        name: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("parameter {name} is not finite")]
    NonFinite { name: &'static str },
    #[error("input has {x} segments but output has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("segment {index} has {found} samples, expected {expected}")]
    SegmentLength { index: usize, found: usize, expected: usize },
    #[error("segment {index} contains a non-finite sample")]
    NonFiniteInput { index: usize },
    #[error("vector has length {found}, expected {expected}")]
    VectorLength { found: usize, expected: usize },
    #[error("sequence is empty")]
    Empty,
    #[error("batch examples have different lengths")]
    RaggedBatch,
    #[error("noise has {found} values, expected {expected}")]
    NoiseLength { found: usize, expected: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Latent trajectory with the distributions that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPath {
    pub z: Vec<Vec<f64>>,
    /// Prior `p(z_t | z_{t-1}, c_t)` per step; empty from [`infer_posterior`].
    pub prior: Vec<DiagGaussian>,
    /// Posterior per step; empty from [`translate`].
    pub posterior: Vec<DiagGaussian>,
    /// Row `t` holds the attention weights over the input segments used for step `t`.
    pub attention: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elbo {
    pub value: f64,
    pub beta: f64,
    pub recon: Vec<f64>,
    pub kl: Vec<f64>,
    pub path: LatentPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Propagate prior means; no randomness.
    Mean,
    /// Average the emission means of `translate_samples` latent draws.
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub segments: Vec<Vec<f64>>,
    /// Per-sample standard deviation across draws, in [`Mode::Sample`].
    pub spread: Option<Vec<Vec<f64>>>,
    /// Attention rows of the mean path, or of the first draw when sampling.
    pub attention: Vec<Vec<f64>>,
}

/// One training pair plus its standard normal noise (`T * latent` values, step-major).
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [Vec<f64>],
    pub eps: &'a [f64],
}

/// Reparameterisation noise for one sequence.
pub fn sequence_noise(seed: u64, purpose: Purpose, index: u64, steps: usize, latent: usize) -> Vec<f64> {
    normal_vec(&mut stream(seed, purpose, index), steps * latent)
}

fn check_vec(v: &[f64], expected: usize) -> Result<(), AdssmError> {
    if v.len() != expected {
        return Err(AdssmError::VectorLength {
            found: v.len(),
            expected,
        });
    }
    Ok(())
}

fn check_segments(seq: &[Vec<f64>], len: usize) -> Result<(), AdssmError> {
    for (index, s) in seq.iter().enumerate() {
        if s.len() != len {
            return Err(AdssmError::SegmentLength {
                index,
                found: s.len(),
                expected: len,
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(AdssmError::NonFiniteInput { index });
        }
    }
    Ok(())
}

fn row(v: &[f64]) -> Tensor {
    Tensor::matrix(1, v.len(), v.to_vec()).expect("row vector")
}

fn gaussian_rows(t: &Tape, mean: Var, var: Var) -> Result<Vec<DiagGaussian>, AdssmError> {
    let (m, v) = (t.value(mean), t.value(var));
    (0..m.rows())
        .map(|r| Ok(DiagGaussian::new(m.row(r).to_vec(), v.row(r).to_vec())?))
        .collect()
}

/// Context vector and attention weights for one query latent.
pub fn attention_context(
    params: &AdssmParams,
    z_prev: &[f64],
    xs: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>), AdssmError> {
    let cfg = params.config();
    check_vec(z_prev, cfg.latent)?;
    if xs.is_empty() {
        return Err(AdssmError::Empty);
    }
    check_segments(xs, cfg.seg_len)?;
    let mut t = Tape::new();
    let p = params.register(&mut t, false);
    let x: Vec<Var> = xs.iter().map(|s| t.constant(row(s))).collect();
    let keys = graph::attention_keys(&mut t, &p, &x)?;
    let z = t.constant(row(z_prev));
    let (c, alpha) = graph::attention(&mut t, &p, z, &x, &keys)?;
    Ok((t.value(c).data().to_vec(), t.value(alpha).data().to_vec()))
}

/// Gated transition from `z` given the next context.
pub fn prior_transition(params: &AdssmParams, z: &[f64], c: &[f64]) -> Result<DiagGaussian, AdssmError> {
    let cfg = params.config();
    check_vec(z, cfg.latent)?;
    check_vec(c, cfg.seg_len)?;
    let mut t = Tape::new();
    let p = params.register(&mut t, false);
    let zv = t.constant(row(z));
    let cv = t.constant(row(c));
    let (m, v) = graph::transition(&mut t, &p, zv, cv)?;
    Ok(gaussian_rows(&t, m, v)?.remove(0))
}

/// Output distribution `N(mu_y(z), I)`.
pub fn emission(params: &AdssmParams, z: &[f64]) -> Result<DiagGaussian, AdssmError> {
    let cfg = params.config();
    check_vec(z, cfg.latent)?;
    let mut t = Tape::new();
    let p = params.register(&mut t, false);
    let zv = t.constant(row(z));
    let m = graph::emission(&mut t, &p, zv)?;
    Ok(DiagGaussian::new(t.value(m).data().to_vec(), vec![1.0; cfg.seg_len])?)
}

/// Samples a latent path from the posterior, with noise from the sampling stream of `seed`.
pub fn infer_posterior(params: &AdssmParams, ys: &[Vec<f64>], seed: u64) -> Result<LatentPath, AdssmError> {
    let cfg = params.config();
    if ys.is_empty() {
        return Err(AdssmError::Empty);
    }
    check_segments(ys, cfg.seg_len)?;
    let n = ys.len();
    let eps = sequence_noise(seed, Purpose::Sampling, 0, n, cfg.latent);
    let mut t = Tape::new();
    let p = params.register(&mut t, false);
    let y: Vec<Var> = ys.iter().map(|s| t.constant(row(s))).collect();
    let (bwd, fwd) = graph::encode(&mut t, &p, &y, 1, cfg.hidden)?;
    let mut z_prev = t.constant(Tensor::zeros(&[1, cfg.latent]));
    let mut path = LatentPath {
        z: Vec::with_capacity(n),
        prior: Vec::new(),
        posterior: Vec::with_capacity(n),
        attention: Vec::new(),
    };
    for s in 0..n {
        let w = graph::window_start(cfg.posterior_window, s);
        let (qm, qv) = graph::posterior(&mut t, &p, z_prev, bwd[w], fwd[w])?;
        let e = t.constant(row(&eps[s * cfg.latent..(s + 1) * cfg.latent]));
        let z = crate::numcore::tape_reparam(&mut t, qm, qv, e)?;
        path.posterior.extend(gaussian_rows(&t, qm, qv)?);
        path.z.push(t.value(z).data().to_vec());
        z_prev = z;
    }
    Ok(path)
}

fn step_tensors(seqs: &[&[Vec<f64>]], step: usize) -> Tensor {
    let rows: Vec<&[f64]> = seqs.iter().map(|s| s[step].as_slice()).collect();
    Tensor::from_rows(&rows).expect("equal segment lengths")
}

fn batch_inputs(cfg: &AdssmConfig, examples: &[Example<'_>]) -> Result<graph::ElboInputs, AdssmError> {
    let first = examples.first().ok_or(AdssmError::Empty)?;
    let n = first.x.len();
    if n == 0 {
        return Err(AdssmError::Empty);
    }
    for ex in examples {
        if ex.y.len() != ex.x.len() {
            return Err(AdssmError::LengthMismatch {
                x: ex.x.len(),
                y: ex.y.len(),
            });
        }
        if ex.x.len() != n {
            return Err(AdssmError::RaggedBatch);
        }
        if ex.eps.len() != n * cfg.latent {
            return Err(AdssmError::NoiseLength {
                found: ex.eps.len(),
                expected: n * cfg.latent,
            });
        }
        check_segments(ex.x, cfg.seg_len)?;
        check_segments(ex.y, cfg.seg_len)?;
    }
    let xs: Vec<&[Vec<f64>]> = examples.iter().map(|e| e.x).collect();
    let ys: Vec<&[Vec<f64>]> = examples.iter().map(|e| e.y).collect();
    let z = cfg.latent;
    let eps = (0..n)
        .map(|s| {
            let rows: Vec<&[f64]> = examples.iter().map(|e| &e.eps[s * z..(s + 1) * z]).collect();
            Tensor::from_rows(&rows).expect("equal noise lengths")
        })
        .collect();
    Ok(graph::ElboInputs {
        xs: (0..n).map(|s| step_tensors(&xs, s)).collect(),
        ys: (0..n).map(|s| step_tensors(&ys, s)).collect(),
        eps,
    })
}

fn build_elbo(
    params: &AdssmParams,
    examples: &[Example<'_>],
    beta: f64,
    trainable: bool,
) -> Result<(Tape, params::ParamVars, graph::ElboNodes), AdssmError> {
    let cfg = params.config();
    let inputs = batch_inputs(cfg, examples)?;
    let mut t = Tape::new();
    let p = params.register(&mut t, trainable);
    let nodes = graph::elbo(&mut t, &p, inputs, beta, cfg.posterior_window, cfg.hidden, cfg.latent)?;
    Ok((t, p, nodes))
}

/// Summed ELBO of a batch of equal-length sequences.
pub fn batch_elbo(params: &AdssmParams, examples: &[Example<'_>], beta: f64) -> Result<f64, AdssmError> {
    let (t, _, nodes) = build_elbo(params, examples, beta, false)?;
    Ok(t.value(nodes.total).item()?)
}

/// Summed ELBO of a batch and its gradient for every parameter, in [`Param::ALL`] order.
pub fn batch_elbo_grad(
    params: &AdssmParams,
    examples: &[Example<'_>],
    beta: f64,
) -> Result<(f64, Vec<Tensor>), AdssmError> {
    let (t, p, nodes) = build_elbo(params, examples, beta, true)?;
    let value = t.value(nodes.total).item()?;
    let grads = t.backward(nodes.total)?;
    Ok((value, p.0.iter().map(|&v| grads.wrt(v).clone()).collect()))
}

/// Single-sample ELBO of one sequence pair with its per-step breakdown.
pub fn elbo(params: &AdssmParams, xs: &[Vec<f64>], ys: &[Vec<f64>], beta: f64, seed: u64) -> Result<Elbo, AdssmError> {
    if xs.len() != ys.len() {
        return Err(AdssmError::LengthMismatch {
            x: xs.len(),
            y: ys.len(),
        });
    }
    let eps = sequence_noise(seed, Purpose::Sampling, 0, xs.len(), params.config().latent);
    let ex = [Example { x: xs, y: ys, eps: &eps }];
    let (t, _, nodes) = build_elbo(params, &ex, beta, false)?;
    let scalar = |v: Var| t.value(v).item();
    let mut path = LatentPath {
        z: nodes.z.iter().map(|&z| t.value(z).data().to_vec()).collect(),
        prior: Vec::new(),
        posterior: Vec::new(),
        attention: nodes.alpha.iter().map(|&a| t.value(a).data().to_vec()).collect(),
    };
    for (&(qm, qv), &(pm, pv)) in nodes.q.iter().zip(&nodes.prior) {
        path.posterior.extend(gaussian_rows(&t, qm, qv)?);
        path.prior.extend(gaussian_rows(&t, pm, pv)?);
    }
    Ok(Elbo {
        value: scalar(nodes.total)?,
        beta,
        recon: nodes.recon.iter().map(|&v| scalar(v)).collect::<Result<_, _>>()?,
        kl: nodes.kl.iter().map(|&v| scalar(v)).collect::<Result<_, _>>()?,
        path,
    })
}

/// Rolls the prior over `xs` and emits one output segment per input segment.
pub fn translate(params: &AdssmParams, xs: &[Vec<f64>], mode: Mode, seed: u64) -> Result<Translation, AdssmError> {
    let cfg = params.config();
    if xs.is_empty() {
        return Ok(Translation {
            segments: Vec::new(),
            spread: matches!(mode, Mode::Sample).then(Vec::new),
            attention: Vec::new(),
        });
    }
    check_segments(xs, cfg.seg_len)?;
    let n = xs.len();
    let draws = match mode {
        Mode::Mean => 1,
        Mode::Sample => cfg.translate_samples,
    };
    let noise: Vec<Vec<f64>> = match mode {
        Mode::Mean => Vec::new(),
        Mode::Sample => (0..draws)
            .map(|d| sequence_noise(seed, Purpose::Sampling, d as u64, n, cfg.latent))
            .collect(),
    };

    let mut t = Tape::new();
    let p = params.register(&mut t, false);
    let x: Vec<Var> = xs
        .iter()
        .map(|s| {
            let rows = vec![s.as_slice(); draws];
            t.constant(Tensor::from_rows(&rows).expect("equal segment lengths"))
        })
        .collect();
    let keys = graph::attention_keys(&mut t, &p, &x)?;
    let mut z = t.constant(Tensor::zeros(&[draws, cfg.latent]));
    let mut outputs = Vec::with_capacity(n);
    let mut attention = Vec::with_capacity(n);
    for s in 0..n {
        let (c, alpha) = graph::attention(&mut t, &p, z, &x, &keys)?;
        attention.push(t.value(alpha).row(0).to_vec());
        let (pm, pv) = graph::transition(&mut t, &p, z, c)?;
        z = match mode {
            Mode::Mean => pm,
            Mode::Sample => {
                let rows: Vec<&[f64]> = noise.iter().map(|e| &e[s * cfg.latent..(s + 1) * cfg.latent]).collect();
                let e = t.constant(Tensor::from_rows(&rows).expect("equal noise lengths"));
                crate::numcore::tape_reparam(&mut t, pm, pv, e)?
            }
        };
        let y = graph::emission(&mut t, &p, z)?;
        outputs.push(t.value(y).clone());
    }

    let l = cfg.seg_len;
    let mut segments = Vec::with_capacity(n);
    let mut spread = Vec::with_capacity(n);
    for y in &outputs {
        let mut mean = vec![0.0; l];
        for r in 0..draws {
            for (m, v) in mean.iter_mut().zip(y.row(r)) {
                *m += v / draws as f64;
            }
        }
        let mut sd = vec![0.0; l];
        for r in 0..draws {
            for ((s, v), m) in sd.iter_mut().zip(y.row(r)).zip(&mean) {
                *s += (v - m) * (v - m) / draws as f64;
            }
        }
        spread.push(sd.into_iter().map(math::sqrt).collect());
        segments.push(mean);
    }
    Ok(Translation {
        segments,
        spread: matches!(mode, Mode::Sample).then_some(spread),
        attention,
    })
}
