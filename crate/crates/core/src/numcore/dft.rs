//! Discrete Fourier transform with the `1/T` forward normalisation, so that
//! `X_0` is the mean of the input:
//!
//! `X_k = (1/T) sum_t x_t exp(-2 pi i k t / T)`,
//! `x_t = sum_k X_k exp(+2 pi i k t / T)`.
//!
//! Power-of-two lengths take an iterative radix-2 path; everything else uses
//! the direct O(T^2) sum.

use alloc::vec;
use alloc::vec::Vec;
pub use num_complex::Complex64;

use super::tensor::TensorError;
use crate::math;

pub fn dft(x: &[f64]) -> Result<Vec<Complex64>, TensorError> {
    if x.is_empty() {
        return Err(TensorError::Empty { op: "dft" });
    }
    let input: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut out = transform(&input, -1.0);
    let scale = 1.0 / x.len() as f64;
    for c in &mut out {
        *c *= scale;
    }
    Ok(out)
}

pub fn inverse_dft(coeffs: &[Complex64]) -> Result<Vec<Complex64>, TensorError> {
    if coeffs.is_empty() {
        return Err(TensorError::Empty { op: "inverse_dft" });
    }
    Ok(transform(coeffs, 1.0))
}

/// Real part of [`inverse_dft`].
pub fn inverse_dft_real(coeffs: &[Complex64]) -> Result<Vec<f64>, TensorError> {
    Ok(inverse_dft(coeffs)?.into_iter().map(|c| c.re).collect())
}

fn twiddle(k: usize, n: usize, sign: f64) -> Complex64 {
    // Reduce the angle exactly before scaling to keep large-T accuracy.
    let angle = sign * 2.0 * math::PI * ((k % n) as f64) / n as f64;
    Complex64::new(math::cos(angle), math::sin(angle))
}

fn transform(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    if n.is_power_of_two() && n > 1 {
        radix2(x, sign)
    } else {
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| acc + v * twiddle(k * t % n, n, sign))
            })
            .collect()
    }
}

fn radix2(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    let bits = n.trailing_zeros();
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in x.iter().enumerate() {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        a[j] = v;
    }
    let table: Vec<Complex64> = (0..n / 2).map(|k| twiddle(k, n, sign)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let w = table[j * stride];
                let u = a[start + j];
                let v = a[start + j + half] * w;
                a[start + j] = u + v;
                a[start + j + half] = u - v;
            }
        }
        len <<= 1;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        let input: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        (0..n)
            .map(|k| {
                input
                    .iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| acc + v * twiddle(k * t % n, n, -1.0))
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn constant_signal_is_all_dc() {
        let x = dft(&[2.5; 12]).unwrap();
        assert!((x[0].re - 2.5).abs() < 1e-14 && x[0].im.abs() < 1e-14);
        assert!(x[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = [0.0; 8];
        x[0] = 1.0;
        for c in dft(&x).unwrap() {
            assert!((c.norm() - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert!(dft(&[]).is_err());
        assert!(inverse_dft(&[]).is_err());
    }

    #[test]
    fn radix2_agrees_with_direct_sum() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let fast = dft(&x).unwrap();
        for (a, b) in fast.iter().zip(direct(&x)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_odd_and_power_of_two() {
        for n in [1usize, 7, 90, 4096] {
            let x: Vec<f64> = (0..n).map(|i| math::sin(0.37 * i as f64) + (i % 5) as f64).collect();
            let back = inverse_dft_real(&dft(&x).unwrap()).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "n = {n}, err = {err}");
        }
    }
}
