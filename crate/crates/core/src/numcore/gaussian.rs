use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::rng::{normal_vec, stream, Purpose};
use super::tape::{Tape, Var};
use super::tensor::TensorError;
use crate::math;

/// Additive floor applied to every variance a network emits.
pub const VAR_FLOOR: f64 = 1e-6;

/// Gaussian with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self, TensorError> {
        if mean.len() != var.len() {
            return Err(TensorError::ShapeMismatch {
                op: "DiagGaussian",
                left: alloc::vec![mean.len()],
                right: alloc::vec![var.len()],
            });
        }
        if let Some((index, &value)) = var.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(TensorError::NonPositiveVariance { index, value });
        }
        Ok(Self { mean, var })
    }

    /// Like [`DiagGaussian::new`] but raises every variance to at least [`VAR_FLOOR`].
    pub fn floored(mean: Vec<f64>, var: Vec<f64>) -> Result<Self, TensorError> {
        let var = var.into_iter().map(|v| if v < VAR_FLOOR { VAR_FLOOR } else { v }).collect();
        Self::new(mean, var)
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: alloc::vec![0.0; dim],
            var: alloc::vec![1.0; dim],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((&xi, &m), &v) in x.iter().zip(&self.mean).zip(&self.var) {
            let d = xi - m;
            s += math::log(v) + d * d / v;
        }
        -0.5 * (s + self.dim() as f64 * math::LN_2PI)
    }
}

/// Closed-form `KL(q || p)` for diagonal Gaussians.
pub fn kl_diag_gaussian(q: &DiagGaussian, p: &DiagGaussian) -> Result<f64, TensorError> {
    if q.dim() != p.dim() {
        return Err(TensorError::ShapeMismatch {
            op: "kl_diag_gaussian",
            left: alloc::vec![q.dim()],
            right: alloc::vec![p.dim()],
        });
    }
    let mut kl = 0.0;
    for i in 0..q.dim() {
        let d = q.mean[i] - p.mean[i];
        kl += math::log(p.var[i] / q.var[i]) + (q.var[i] + d * d) / p.var[i] - 1.0;
    }
    // Rounding can leave a tiny negative value when q == p.
    Ok((0.5 * kl).max(0.0))
}

/// `mean + sqrt(var) * eps`, `eps ~ N(0, I)` drawn from the sampling stream of `seed`.
pub fn reparam_sample(q: &DiagGaussian, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Sampling, 0);
    let eps = normal_vec(&mut rng, q.dim());
    q.mean
        .iter()
        .zip(&q.var)
        .zip(eps)
        .map(|((m, v), e)| m + math::sqrt(*v) * e)
        .collect()
}

/// Differentiable reparameterised draw; `eps` is a constant leaf of standard normals.
pub fn tape_reparam(tape: &mut Tape, mean: Var, var: Var, eps: Var) -> Result<Var, TensorError> {
    let sd = tape.sqrt(var);
    let noise = tape.mul(sd, eps)?;
    tape.add(mean, noise)
}

/// Differentiable KL between row-wise diagonal Gaussians, summed over every
/// row and dimension.
pub fn tape_kl_diag(
    tape: &mut Tape,
    q_mean: Var,
    q_var: Var,
    p_mean: Var,
    p_var: Var,
) -> Result<Var, TensorError> {
    let log_p = tape.ln(p_var);
    let log_q = tape.ln(q_var);
    let log_ratio = tape.sub(log_p, log_q)?;
    let diff = tape.sub(q_mean, p_mean)?;
    let sq = tape.square(diff);
    let num = tape.add(q_var, sq)?;
    let frac = tape.div(num, p_var)?;
    let inner = tape.add(log_ratio, frac)?;
    let total = tape.sum_all(inner);
    let n = tape.value(q_mean).len() as f64;
    Ok(tape.affine(total, 0.5, -0.5 * n))
}

/// `sum log N(y | mean, I)` over every element.
pub fn tape_gaussian_loglik_unit(tape: &mut Tape, y: Var, mean: Var) -> Result<Var, TensorError> {
    let diff = tape.sub(y, mean)?;
    let sq = tape.square(diff);
    let total = tape.sum_all(sq);
    let n = tape.value(y).len() as f64;
    Ok(tape.affine(total, -0.5, -0.5 * n * math::LN_2PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor;
    use alloc::vec;

    #[test]
    fn self_divergence_is_zero() {
        let q = DiagGaussian::new(vec![0.3, -1.0], vec![0.5, 2.0]).unwrap();
        assert_eq!(kl_diag_gaussian(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn unit_shift_gives_half() {
        let q = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap();
        let p = DiagGaussian::standard(1);
        assert!((kl_diag_gaussian(&q, &p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(kl_diag_gaussian(&DiagGaussian::standard(2), &DiagGaussian::standard(3)).is_err());
    }

    #[test]
    fn invalid_variance_rejected_and_floor_applied() {
        assert!(DiagGaussian::new(vec![0.0], vec![0.0]).is_err());
        assert!(DiagGaussian::new(vec![0.0], vec![f64::NAN]).is_err());
        let g = DiagGaussian::floored(vec![0.0, 1.0], vec![0.0, 3.0]).unwrap();
        assert_eq!(g.var(), &[VAR_FLOOR, 3.0]);
    }

    #[test]
    fn floored_sample_sits_on_mean() {
        let g = DiagGaussian::floored(vec![1.5, -2.0, 0.25], vec![0.0; 3]).unwrap();
        let z = reparam_sample(&g, 11);
        for (zi, mi) in z.iter().zip(g.mean()) {
            // sqrt(1e-6) * |eps| with |eps| < 6
            assert!((zi - mi).abs() < 6e-3);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = DiagGaussian::new(vec![0.0; 4], vec![1.0; 4]).unwrap();
        assert_eq!(reparam_sample(&g, 5), reparam_sample(&g, 5));
        assert_ne!(reparam_sample(&g, 5), reparam_sample(&g, 6));
    }

    #[test]
    fn standard_normal_moments() {
        let n = 1_000_000;
        let z = reparam_sample(&DiagGaussian::standard(n), 2024);
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn tape_kl_matches_closed_form() {
        let q = DiagGaussian::new(vec![0.2, -0.7, 1.1], vec![0.4, 1.3, 0.9]).unwrap();
        let p = DiagGaussian::new(vec![-0.1, 0.5, 1.0], vec![1.2, 0.6, 2.5]).unwrap();
        let mut t = Tape::new();
        let row = |t: &mut Tape, v: &[f64]| t.leaf(Tensor::matrix(1, 3, v.to_vec()).unwrap());
        let (qm, qv, pm, pv) = (row(&mut t, q.mean()), row(&mut t, q.var()), row(&mut t, p.mean()), row(&mut t, p.var()));
        let kl = tape_kl_diag(&mut t, qm, qv, pm, pv).unwrap();
        let expected = kl_diag_gaussian(&q, &p).unwrap();
        assert!((t.value(kl).data()[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn unit_loglik_at_mean_is_normaliser() {
        let mut t = Tape::new();
        let y = t.leaf(Tensor::vector(vec![0.5; 90]));
        let m = t.leaf(Tensor::vector(vec![0.5; 90]));
        let ll = tape_gaussian_loglik_unit(&mut t, y, m).unwrap();
        let expected = -45.0 * math::LN_2PI;
        assert!((t.value(ll).data()[0] - expected).abs() < 1e-12);
    }
}
