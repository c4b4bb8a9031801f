//! Forward kernels. Each function is pure; the [`Tape`](super::Tape) records
//! them and supplies the matching adjoints.
//!
//! Two-dimensional tensors are `[rows, cols]`; a one-dimensional tensor is
//! treated as a single row where that makes sense (`concat_cols`, `softmax`).

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{Tensor, TensorError};
use crate::math;

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn require_2d(op: &'static str, a: &Tensor) -> Result<(usize, usize), TensorError> {
    match a.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(TensorError::Axis {
            op,
            axis: 1,
            shape: s.to_vec(),
        }),
    }
}

/// `[m, k] x [k, n] -> [m, n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (m, k) = require_2d("matmul", a)?;
    let (k2, n) = require_2d("matmul", b)?;
    if k != k2 {
        return Err(mismatch("matmul", a, b));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

/// Affine layer `x W^T + b` with `x: [batch, in]`, `W: [out, in]`, `b: [out]`.
pub fn linear(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor, TensorError> {
    let (rows, fan_in) = require_2d("linear", x)?;
    let (fan_out, w_in) = require_2d("linear", w)?;
    if fan_in != w_in {
        return Err(mismatch("linear", x, w));
    }
    if let Some(b) = b {
        if b.shape() != [fan_out] {
            return Err(mismatch("linear.bias", w, b));
        }
    }
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![0.0; rows * fan_out];
    for r in 0..rows {
        let xr = &xd[r * fan_in..(r + 1) * fan_in];
        let orow = &mut out[r * fan_out..(r + 1) * fan_out];
        for (o, ov) in orow.iter_mut().enumerate() {
            let wr = &wd[o * fan_in..(o + 1) * fan_in];
            *ov = dot(xr, wr);
        }
        if let Some(b) = b {
            for (ov, bv) in orow.iter_mut().zip(b.data()) {
                *ov += bv;
            }
        }
    }
    Ok(Tensor::from_parts(vec![rows, fan_out], out))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators; the summation order is fixed so results are
    // reproducible across runs.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn zip_with(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor, TensorError> {
    if !a.same_shape(b) {
        return Err(mismatch(op, a, b));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor::from_parts(a.shape().to_vec(), data))
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_with("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_with("sub", a, b, |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_with("mul", a, b, |x, y| x * y)
}

pub fn div(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_with("div", a, b, |x, y| x / y)
}

/// Adds a `[cols]` row to every row of `a`.
pub fn add_row(a: &Tensor, row: &Tensor) -> Result<Tensor, TensorError> {
    let cols = a.cols();
    if row.shape() != [cols] {
        return Err(mismatch("add_row", a, row));
    }
    let mut out = a.clone();
    for chunk in out.data_mut().chunks_mut(cols) {
        for (o, r) in chunk.iter_mut().zip(row.data()) {
            *o += r;
        }
    }
    Ok(out)
}

/// Scales row `i` of `a: [rows, cols]` by `col[i]` where `col: [rows, 1]`.
pub fn mul_col(a: &Tensor, col: &Tensor) -> Result<Tensor, TensorError> {
    let (rows, cols) = require_2d("mul_col", a)?;
    if col.shape() != [rows, 1] {
        return Err(mismatch("mul_col", a, col));
    }
    let mut out = a.clone();
    for (chunk, &s) in out.data_mut().chunks_mut(cols).zip(col.data()) {
        for o in chunk {
            *o *= s;
        }
    }
    Ok(out)
}

/// Column `j` of a `[rows, cols]` tensor as `[rows, 1]`.
pub fn column(a: &Tensor, j: usize) -> Result<Tensor, TensorError> {
    let (rows, cols) = require_2d("column", a)?;
    if j >= cols {
        return Err(TensorError::Axis {
            op: "column",
            axis: j,
            shape: a.shape().to_vec(),
        });
    }
    let data = (0..rows).map(|r| a.data()[r * cols + j]).collect();
    Ok(Tensor::from_parts(vec![rows, 1], data))
}

/// Concatenates along the trailing axis. All parts must share the leading
/// extent (vectors count as one row).
pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor, TensorError> {
    let first = parts.first().ok_or(TensorError::Empty { op: "concat" })?;
    let rows = first.rows();
    let one_d = first.shape().len() == 1;
    for p in parts {
        if p.rows() != rows || (p.shape().len() == 1) != one_d || p.shape().len() > 2 {
            return Err(mismatch("concat", first, p));
        }
    }
    let total: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(r));
        }
    }
    let shape = if one_d { vec![total] } else { vec![rows, total] };
    Ok(Tensor::from_parts(shape, data))
}

pub fn tanh(a: &Tensor) -> Tensor {
    a.map(math::tanh)
}

pub fn sigmoid(a: &Tensor) -> Tensor {
    a.map(math::sigmoid)
}

pub fn relu(a: &Tensor) -> Tensor {
    a.map(|x| if x > 0.0 { x } else { 0.0 })
}

/// `log(1 + e^x)`, stable for large `|x|`.
pub fn softplus(a: &Tensor) -> Tensor {
    a.map(math::softplus)
}

pub fn exp(a: &Tensor) -> Tensor {
    a.map(math::exp)
}

pub fn ln(a: &Tensor) -> Tensor {
    a.map(math::log)
}

pub fn sqrt(a: &Tensor) -> Tensor {
    a.map(math::sqrt)
}

pub fn square(a: &Tensor) -> Tensor {
    a.map(|x| x * x)
}

/// `scale * a + shift`.
pub fn affine(a: &Tensor, scale: f64, shift: f64) -> Tensor {
    a.map(|x| scale * x + shift)
}

pub fn sum_all(a: &Tensor) -> Tensor {
    Tensor::scalar(a.sum())
}

/// Splits `shape` around `axis` into `(outer, len, inner)`.
pub(crate) fn axis_split(
    op: &'static str,
    shape: &[usize],
    axis: usize,
) -> Result<(usize, usize, usize), TensorError> {
    if axis >= shape.len() {
        return Err(TensorError::Axis {
            op,
            axis,
            shape: shape.to_vec(),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

/// Softmax over `axis`; each slice along the axis sums to one.
pub fn softmax(a: &Tensor, axis: usize) -> Result<Tensor, TensorError> {
    let (outer, len, inner) = axis_split("softmax", a.shape(), axis)?;
    let src = a.data();
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| o * len * inner + k * inner + i;
            let mut m = f64::NEG_INFINITY;
            for k in 0..len {
                m = m.max(src[at(k)]);
            }
            let mut z = 0.0;
            for k in 0..len {
                let e = math::exp(src[at(k)] - m);
                out[at(k)] = e;
                z += e;
            }
            for k in 0..len {
                out[at(k)] /= z;
            }
        }
    }
    Ok(Tensor::from_parts(a.shape().to_vec(), out))
}
