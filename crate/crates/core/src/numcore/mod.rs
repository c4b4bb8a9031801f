//! Dense tensor math with reverse-mode differentiation, Adam, diagonal
//! Gaussians, the discrete Fourier transform and seeded random streams.

mod adam;
mod dft;
mod gaussian;
pub mod ops;
mod rng;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dft::{dft, inverse_dft, inverse_dft_real, Complex64};
pub use gaussian::{
    kl_diag_gaussian, reparam_sample, tape_gaussian_loglik_unit, tape_kl_diag, tape_reparam,
    DiagGaussian, VAR_FLOOR,
};
pub use rng::{normal_vec, stream, Purpose, StreamRng};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Tensor, TensorError};
