use alloc::vec::Vec;
use core::ops::Index;
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use super::{AdssmConfig, AdssmError};
use crate::math;
use crate::numcore::{normal_vec, stream, Purpose, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// `U(-a, a)` with `a = sqrt(1 / fan_in)`.
    Uniform,
    /// Rows of a random orthogonal matrix, scaled by 0.1.
    Orthogonal,
    Zero,
}

macro_rules! param_set {
    (($h:ident, $z:ident, $l:ident); $( $variant:ident $name:literal [$($dim:expr),+] $init:ident, )*) => {
        /// Every tensor of the model, in checkpoint order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Param { $($variant,)* }

        impl Param {
            pub const ALL: &'static [Param] = &[$(Param::$variant,)*];

            pub fn name(self) -> &'static str {
                match self { $(Param::$variant => $name,)* }
            }

            pub fn shape(self, cfg: &AdssmConfig) -> Vec<usize> {
                let ($h, $z, $l) = (cfg.hidden, cfg.latent, cfg.seg_len);
                let _ = ($h, $z, $l);
                match self { $(Param::$variant => alloc::vec![$($dim),+],)* }
            }

            pub fn init(self) -> Init {
                match self { $(Param::$variant => Init::$init,)* }
            }
        }
    };
}

param_set! {
    (h, z, l);
    // attention score
    WsZ "W_s_z" [h, z] Uniform,
    WsX "W_s_x" [h, h] Uniform,
    Bs "b_s" [h] Zero,
    Vs "v_s" [1, h] Uniform,
    Wx "W_x" [h, l] Uniform,
    // gated transition
    Wg1 "W_g1" [h, z + l] Uniform,
    Bg1 "b_g1" [h] Zero,
    Wg2 "W_g2" [h, h] Uniform,
    Bg2 "b_g2" [h] Zero,
    Wg3 "W_g3" [z, h] Uniform,
    Bg3 "b_g3" [z] Zero,
    Wd1 "W_d1" [h, z + l] Uniform,
    Bd1 "b_d1" [h] Zero,
    Wd2 "W_d2" [h, h] Uniform,
    Bd2 "b_d2" [h] Zero,
    Wd3 "W_d3" [z, h] Uniform,
    Bd3 "b_d3" [z] Zero,
    WMuZ "W_mu_z" [z, z + l] Uniform,
    BMuZ "b_mu_z" [z] Zero,
    WVarZ "W_var_z" [z, z] Uniform,
    BVarZ "b_var_z" [z] Zero,
    // emission
    We1 "W_e1" [h, z] Uniform,
    Be1 "b_e1" [h] Zero,
    We2 "W_e2" [h, h] Uniform,
    Be2 "b_e2" [h] Zero,
    We3 "W_e3" [l, h] Uniform,
    Be3 "b_e3" [l] Zero,
    // posterior
    Wy "W_y" [h, l] Uniform,
    BwdWz "gru_bwd.W_z" [h, h] Orthogonal,
    BwdUz "gru_bwd.U_z" [h, h] Orthogonal,
    BwdBz "gru_bwd.b_z" [h] Zero,
    BwdWr "gru_bwd.W_r" [h, h] Orthogonal,
    BwdUr "gru_bwd.U_r" [h, h] Orthogonal,
    BwdBr "gru_bwd.b_r" [h] Zero,
    BwdWn "gru_bwd.W_n" [h, h] Orthogonal,
    BwdUn "gru_bwd.U_n" [h, h] Orthogonal,
    BwdBn "gru_bwd.b_n" [h] Zero,
    FwdWz "gru_fwd.W_z" [h, h] Orthogonal,
    FwdUz "gru_fwd.U_z" [h, h] Orthogonal,
    FwdBz "gru_fwd.b_z" [h] Zero,
    FwdWr "gru_fwd.W_r" [h, h] Orthogonal,
    FwdUr "gru_fwd.U_r" [h, h] Orthogonal,
    FwdBr "gru_fwd.b_r" [h] Zero,
    FwdWn "gru_fwd.W_n" [h, h] Orthogonal,
    FwdUn "gru_fwd.U_n" [h, h] Orthogonal,
    FwdBn "gru_fwd.b_n" [h] Zero,
    Wh "W_h" [h, z] Uniform,
    Bh "b_h" [h] Zero,
    WMu "W_mu" [z, h] Uniform,
    BMu "b_mu" [z] Zero,
    WVar "W_var" [z, h] Uniform,
    BVar "b_var" [z] Zero,
}

/// Named model tensors, stored in [`Param::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdssmParams {
    config: AdssmConfig,
    tensors: Vec<Tensor>,
}

impl AdssmParams {
    /// Fresh weights drawn from the init stream of `seed`, one sub-stream per tensor.
    pub fn init(config: &AdssmConfig, seed: u64) -> Result<Self, AdssmError> {
        config.validate()?;
        let tensors = Param::ALL
            .iter()
            .enumerate()
            .map(|(i, &p)| init_tensor(p.shape(config), p.init(), seed, i as u64))
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    /// All-zero tensors of the right shapes.
    pub fn zeros(config: &AdssmConfig) -> Result<Self, AdssmError> {
        config.validate()?;
        let tensors = Param::ALL.iter().map(|p| Tensor::zeros(&p.shape(config))).collect();
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    /// Rebuilds from tensors in [`Param::ALL`] order, checking every shape.
    pub fn from_tensors(config: &AdssmConfig, tensors: Vec<Tensor>) -> Result<Self, AdssmError> {
        config.validate()?;
        if tensors.len() != Param::ALL.len() {
            return Err(AdssmError::ParamCount {
                expected: Param::ALL.len(),
                found: tensors.len(),
            });
        }
        for (p, t) in Param::ALL.iter().zip(&tensors) {
            let shape = p.shape(config);
            if t.shape() != shape.as_slice() {
                return Err(AdssmError::ParamShape {
                    name: p.name(),
                    expected: shape,
                    found: t.shape().to_vec(),
                });
            }
            if !t.is_finite() {
                return Err(AdssmError::NonFinite { name: p.name() });
            }
        }
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    pub fn config(&self) -> &AdssmConfig {
        &self.config
    }

    /// The window does not change any shape, so it can be switched on trained weights.
    pub fn set_posterior_window(&mut self, window: super::PosteriorWindow) {
        self.config.posterior_window = window;
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.tensors
    }

    pub fn get(&self, p: Param) -> &Tensor {
        &self.tensors[p as usize]
    }

    pub fn get_mut(&mut self, p: Param) -> &mut Tensor {
        &mut self.tensors[p as usize]
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        Param::ALL.iter().zip(&self.tensors).find(|(_, t)| !t.is_finite()).map(|(p, _)| p.name())
    }

    /// Registers every tensor on `tape`, as leaves or as constants.
    pub(crate) fn register(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let vars = self
            .tensors
            .iter()
            .map(|t| if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) })
            .collect();
        ParamVars(vars)
    }
}

/// Tape handles for an [`AdssmParams`], indexed by [`Param`].
#[derive(Debug, Clone)]
pub(crate) struct ParamVars(pub(crate) Vec<Var>);

impl Index<Param> for ParamVars {
    type Output = Var;

    fn index(&self, p: Param) -> &Var {
        &self.0[p as usize]
    }
}

fn init_tensor(shape: Vec<usize>, init: Init, seed: u64, index: u64) -> Tensor {
    let n: usize = shape.iter().product();
    let mut rng = stream(seed, Purpose::Init, index);
    let data = match init {
        Init::Zero => alloc::vec![0.0; n],
        Init::Uniform => {
            let fan_in = *shape.last().expect("non-empty shape") as f64;
            let a = math::sqrt(1.0 / fan_in);
            (0..n)
                .map(|_| {
                    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                    a * (2.0 * u - 1.0)
                })
                .collect()
        }
        Init::Orthogonal => {
            let (rows, cols) = (shape[0], shape[1]);
            orthogonal_rows(&mut rng, rows, cols, 0.1)
        }
    };
    Tensor::new(shape, data).expect("shape and data agree")
}

/// Gram-Schmidt on Gaussian rows. Rows beyond `cols` cannot be orthogonal
/// and are only normalised.
fn orthogonal_rows(rng: &mut crate::numcore::StreamRng, rows: usize, cols: usize, scale: f64) -> Vec<f64> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut v = normal_vec(rng, cols);
        if r < cols {
            for u in &out {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
        }
        let norm = math::sqrt(v.iter().map(|x| x * x).sum());
        for x in &mut v {
            *x /= norm;
        }
        out.push(v);
    }
    out.into_iter().flatten().map(|x| x * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names: Vec<&str> = Param::ALL.iter().map(|p| p.name()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), Param::ALL.len());
    }

    #[test]
    fn init_shapes_and_ranges() {
        let cfg = AdssmConfig::tiny();
        let p = AdssmParams::init(&cfg, 3).unwrap();
        for (&param, t) in Param::ALL.iter().zip(p.tensors()) {
            assert_eq!(t.shape(), param.shape(&cfg).as_slice());
            match param.init() {
                Init::Zero => assert!(t.data().iter().all(|&v| v == 0.0)),
                Init::Uniform => {
                    let a = math::sqrt(1.0 / t.cols() as f64);
                    assert!(t.data().iter().all(|v| v.abs() <= a));
                }
                Init::Orthogonal => {
                    let n = t.rows();
                    for i in 0..n {
                        for j in 0..n {
                            let d: f64 = t.row(i).iter().zip(t.row(j)).map(|(a, b)| a * b).sum();
                            let expected = if i == j { 0.01 } else { 0.0 };
                            assert!((d - expected).abs() < 1e-12);
                        }
                    }
                }
            }
        }
        assert_eq!(p, AdssmParams::init(&cfg, 3).unwrap());
        assert_ne!(p, AdssmParams::init(&cfg, 4).unwrap());
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let cfg = AdssmConfig::tiny();
        let p = AdssmParams::init(&cfg, 1).unwrap();
        let mut ts = p.clone().into_tensors();
        assert_eq!(AdssmParams::from_tensors(&cfg, ts.clone()).unwrap(), p);
        ts[0] = Tensor::zeros(&[1, 1]);
        assert!(matches!(AdssmParams::from_tensors(&cfg, ts), Err(AdssmError::ParamShape { .. })));
    }
}
