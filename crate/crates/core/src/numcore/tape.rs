//! Wengert-list reverse-mode differentiation.
//!
//! Every operation appends one node holding its forward value, so node ids are
//! already in topological order and the backward sweep is a single reverse
//! scan. Tapes are single-owner; build one per forward pass.

use alloc::vec;
use alloc::vec::Vec;

use super::ops;
use super::tensor::{Tensor, TensorError};
use crate::math;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Column(Var, usize),
    Concat(Vec<Var>),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Square(Var),
    Affine(Var, f64),
    Softmax(Var, usize),
    SumAll(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every leaf.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a leaf. Leaves the output does not depend on get zeros.
    pub fn wrt(&self, v: Var) -> &Tensor {
        self.grads[v.0]
            .as_ref()
            .expect("gradients are retained for leaf nodes only")
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = match &op {
            Op::Leaf => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                self.needs(*a) || self.needs(*b)
            }
            Op::AddRow(a, b) | Op::MulCol(a, b) => self.needs(*a) || self.needs(*b),
            Op::Linear { x, w, b } => {
                self.needs(*x) || self.needs(*w) || b.is_some_and(|b| self.needs(b))
            }
            Op::Concat(parts) => parts.iter().any(|&p| self.needs(p)),
            Op::Column(a, _)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Softplus(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::Affine(a, _)
            | Op::Softmax(a, _)
            | Op::SumAll(a) => self.needs(*a),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Registers a differentiable input or parameter.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Registers data that no gradient is wanted for. Its gradient reads as zero.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `x W^T + b`, see [`ops::linear`].
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        let v = ops::linear(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        Ok(self.push(v, Op::Linear { x, w, b }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::sub(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::mul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::div(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Div(a, b)))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let v = ops::add_row(self.value(a), self.value(row))?;
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, TensorError> {
        let v = ops::mul_col(self.value(a), self.value(col))?;
        Ok(self.push(v, Op::MulCol(a, col)))
    }

    pub fn column(&mut self, a: Var, j: usize) -> Result<Var, TensorError> {
        let v = ops::column(self.value(a), j)?;
        Ok(self.push(v, Op::Column(a, j)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let refs: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ops::concat_cols(&refs)?;
        Ok(self.push(v, Op::Concat(parts.to_vec())))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = ops::tanh(self.value(a));
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = ops::sigmoid(self.value(a));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = ops::relu(self.value(a));
        self.push(v, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = ops::softplus(self.value(a));
        self.push(v, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = ops::exp(self.value(a));
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = ops::ln(self.value(a));
        self.push(v, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = ops::sqrt(self.value(a));
        self.push(v, Op::Sqrt(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = ops::square(self.value(a));
        self.push(v, Op::Square(a))
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let v = ops::affine(self.value(a), scale, shift);
        self.push(v, Op::Affine(a, scale))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        let v = ops::softmax(self.value(a), axis)?;
        Ok(self.push(v, Op::Softmax(a, axis)))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = ops::sum_all(self.value(a));
        self.push(v, Op::SumAll(a))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, output: Var) -> Result<Gradients, TensorError> {
        let out = &self.nodes[output.0].value;
        if out.len() != 1 {
            return Err(TensorError::NotScalar {
                op: "backward",
                shape: out.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::from_parts(out.shape().to_vec(), vec![1.0]));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) {
                if grads[i].is_none() {
                    grads[i] = Some(Tensor::zeros(node.value.shape()));
                }
            } else {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.needs(v) {
            return;
        }
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.nodes[v.0].value.shape()));
        }
        f(slot.as_mut().expect("just initialised").data_mut());
    }

    fn add_scaled(&self, grads: &mut [Option<Tensor>], v: Var, gd: &[f64], scale: f64) {
        self.acc(grads, v, |d| {
            for (dv, gv) in d.iter_mut().zip(gd) {
                *dv += scale * gv;
            }
        });
    }

    fn unary(
        &self,
        grads: &mut [Option<Tensor>],
        v: Var,
        gd: &[f64],
        local: impl Fn(usize, f64) -> f64,
    ) {
        let xd = self.value(v).data();
        self.acc(grads, v, |d| {
            for (i, dv) in d.iter_mut().enumerate() {
                *dv += gd[i] * local(i, xd[i]);
            }
        });
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = (av.shape()[0], av.shape()[1]);
                let n = bv.shape()[1];
                let (ad, bd) = (av.data(), bv.data());
                self.acc(grads, *a, |da| {
                    for i in 0..m {
                        for p in 0..k {
                            da[i * k + p] += ops::dot(&gd[i * n..(i + 1) * n], &bd[p * n..(p + 1) * n]);
                        }
                    }
                });
                self.acc(grads, *b, |db| {
                    for i in 0..m {
                        for p in 0..k {
                            let a_ip = ad[i * k + p];
                            for j in 0..n {
                                db[p * n + j] += a_ip * gd[i * n + j];
                            }
                        }
                    }
                });
            }
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (rows, fan_in) = (xv.shape()[0], xv.shape()[1]);
                let fan_out = wv.shape()[0];
                let (xd, wd) = (xv.data(), wv.data());
                self.acc(grads, *x, |dx| {
                    for r in 0..rows {
                        let dxr = &mut dx[r * fan_in..(r + 1) * fan_in];
                        for o in 0..fan_out {
                            let go = gd[r * fan_out + o];
                            if go == 0.0 {
                                continue;
                            }
                            let wr = &wd[o * fan_in..(o + 1) * fan_in];
                            for (d, wv) in dxr.iter_mut().zip(wr) {
                                *d += go * wv;
                            }
                        }
                    }
                });
                self.acc(grads, *w, |dw| {
                    for r in 0..rows {
                        let xr = &xd[r * fan_in..(r + 1) * fan_in];
                        for o in 0..fan_out {
                            let go = gd[r * fan_out + o];
                            if go == 0.0 {
                                continue;
                            }
                            let dwr = &mut dw[o * fan_in..(o + 1) * fan_in];
                            for (d, xv) in dwr.iter_mut().zip(xr) {
                                *d += go * xv;
                            }
                        }
                    }
                });
                if let Some(b) = b {
                    self.acc(grads, *b, |db| {
                        for r in 0..rows {
                            for (d, go) in db.iter_mut().zip(&gd[r * fan_out..(r + 1) * fan_out]) {
                                *d += go;
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                self.add_scaled(grads, *a, gd, 1.0);
                self.add_scaled(grads, *b, gd, 1.0);
            }
            Op::Sub(a, b) => {
                self.add_scaled(grads, *a, gd, 1.0);
                self.add_scaled(grads, *b, gd, -1.0);
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                self.acc(grads, *a, |da| {
                    for ((d, gv), bv) in da.iter_mut().zip(gd).zip(bd) {
                        *d += gv * bv;
                    }
                });
                self.acc(grads, *b, |db| {
                    for ((d, gv), av) in db.iter_mut().zip(gd).zip(ad) {
                        *d += gv * av;
                    }
                });
            }
            Op::Div(a, b) => {
                let bd = self.value(*b).data();
                self.acc(grads, *a, |da| {
                    for ((d, gv), bv) in da.iter_mut().zip(gd).zip(bd) {
                        *d += gv / bv;
                    }
                });
                self.acc(grads, *b, |db| {
                    for (((d, gv), bv), yv) in db.iter_mut().zip(gd).zip(bd).zip(y) {
                        *d -= gv * yv / bv;
                    }
                });
            }
            Op::AddRow(a, row) => {
                self.add_scaled(grads, *a, gd, 1.0);
                let cols = self.value(*row).len();
                self.acc(grads, *row, |dr| {
                    for chunk in gd.chunks(cols) {
                        for (d, gv) in dr.iter_mut().zip(chunk) {
                            *d += gv;
                        }
                    }
                });
            }
            Op::MulCol(a, col) => {
                let av = self.value(*a);
                let cols = av.cols();
                let cd = self.value(*col).data();
                self.acc(grads, *a, |da| {
                    for ((dchunk, gchunk), s) in da.chunks_mut(cols).zip(gd.chunks(cols)).zip(cd) {
                        for (d, gv) in dchunk.iter_mut().zip(gchunk) {
                            *d += gv * s;
                        }
                    }
                });
                let ad = av.data();
                self.acc(grads, *col, |dc| {
                    for (r, d) in dc.iter_mut().enumerate() {
                        *d += ops::dot(&gd[r * cols..(r + 1) * cols], &ad[r * cols..(r + 1) * cols]);
                    }
                });
            }
            Op::Column(a, j) => {
                let av = self.value(*a);
                let cols = av.cols();
                self.acc(grads, *a, |da| {
                    for (r, gv) in gd.iter().enumerate() {
                        da[r * cols + j] += gv;
                    }
                });
            }
            Op::Concat(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let w = pv.cols();
                    self.acc(grads, *p, |dp| {
                        for (r, dchunk) in dp.chunks_mut(w).enumerate() {
                            let src = &gd[r * total + offset..r * total + offset + w];
                            for (d, gv) in dchunk.iter_mut().zip(src) {
                                *d += gv;
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Tanh(a) => self.unary(grads, *a, gd, |i, _| 1.0 - y[i] * y[i]),
            Op::Sigmoid(a) => self.unary(grads, *a, gd, |i, _| y[i] * (1.0 - y[i])),
            Op::Relu(a) => self.unary(grads, *a, gd, |_, x| if x > 0.0 { 1.0 } else { 0.0 }),
            Op::Softplus(a) => self.unary(grads, *a, gd, |_, x| math::sigmoid(x)),
            Op::Exp(a) => self.unary(grads, *a, gd, |i, _| y[i]),
            Op::Ln(a) => self.unary(grads, *a, gd, |_, x| 1.0 / x),
            Op::Sqrt(a) => self.unary(grads, *a, gd, |i, _| 0.5 / y[i]),
            Op::Square(a) => self.unary(grads, *a, gd, |_, x| 2.0 * x),
            Op::Affine(a, scale) => self.add_scaled(grads, *a, gd, *scale),
            Op::Softmax(a, axis) => {
                let av = self.value(*a);
                let (outer, len, inner) =
                    ops::axis_split("softmax", av.shape(), *axis).expect("validated in forward");
                self.acc(grads, *a, |da| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |k: usize| o * len * inner + k * inner + i;
                            let s: f64 = (0..len).map(|k| gd[at(k)] * y[at(k)]).sum();
                            for k in 0..len {
                                da[at(k)] += y[at(k)] * (gd[at(k)] - s);
                            }
                        }
                    }
                });
            }
            Op::SumAll(a) => {
                let g0 = gd[0];
                self.acc(grads, *a, |da| {
                    for d in da.iter_mut() {
                        *d += g0;
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).data(), &[6.0]);
    }

    #[test]
    fn tanh_slope_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let y = t.tanh(x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).data(), &[1.0]);
    }

    #[test]
    fn unreachable_leaf_gets_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        let unused = t.leaf(Tensor::zeros(&[2, 2]));
        let s = t.sum_all(x);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(unused), &Tensor::zeros(&[2, 2]));
        assert_eq!(g.wrt(x).data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        let y = t.tanh(x);
        assert!(matches!(t.backward(y), Err(TensorError::NotScalar { .. })));
    }

    #[test]
    fn reused_node_accumulates() {
        // f = sum(x * x + 2x) -> df/dx = 2x + 2
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, -2.0]));
        let sq = t.mul(x, x).unwrap();
        let lin = t.affine(x, 2.0, 0.0);
        let s = t.add(sq, lin).unwrap();
        let f = t.sum_all(s);
        let g = t.backward(f).unwrap();
        assert_eq!(g.wrt(x).data(), &[4.0, -2.0]);
    }
}
