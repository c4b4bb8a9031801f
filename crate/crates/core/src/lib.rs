//! Numerical core for attention-based deep state-space translation of PPG
//! into ECG, plus drift-diffusion first-passage likelihoods.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or wall-clock time lives in the `latentsig` companion
//! crate; this crate exposes small traits ([`trainkit::ShardExecutor`],
//! [`trainkit::Clock`]) where those concerns have to be injected.
//!
//! Module map:
//!
//! - [`numcore`]: dense tensors, a reverse-mode tape, Adam, diagonal Gaussians,
//!   the DFT and seeded random streams.
//! - [`cardiosynth`]: paired synthetic PPG/ECG generator and the additive noise model.
//! - [`preprocess`]: peak detection, interval segmentation, resampling, normalization.
//! - [`adssm`]: the attention-based deep state-space model and its lower bound.
//! - [`trainkit`]: KL annealing and the minibatch training loop.
//! - [`metrics`]: signal similarity and distribution metrics.
//! - [`ddm`]: Wiener first-passage densities, simulation and maximum likelihood.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adssm;
pub mod cardiosynth;
pub mod ddm;
pub mod metrics;
pub mod numcore;
pub mod preprocess;
pub mod trainkit;

pub(crate) mod math;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
