//! Reverse-mode computation record.
//!
//! Every op appends a node holding its forward value; node order is execution
//! order, so the backward sweep is a plain reverse iteration over the node list.

use super::kernels::{self, add_into, gemm_nn, gemm_nt, gemm_tn};
use super::{NumericsError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which axis a reduction collapses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    ScaleBy(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
    Exp(Var),
    Log(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    Relu(Var),
    QuickGelu(Var),
    SumAll(Var),
    Sum(Var, Axis),
    Mean(Var, Axis),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normed: Vec<f32>,
        inv_std: Vec<f32>,
    },
    L2NormalizeRows {
        x: Var,
        norms: Vec<f32>,
    },
    LogSoftmaxRows {
        x: Var,
        valid: Option<Vec<bool>>,
    },
    Attention {
        qkv: Var,
        batch: usize,
        seq: usize,
        heads: usize,
        probs: Vec<f32>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f32>>,
}

/// Ordered record of executed ops.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

const LAYER_NORM_EPS: f32 = 1e-5;
/// Rows with norm at or below this are rejected by [`Tape::l2_normalize_rows`].
pub const NORM_EPS: f32 = 1e-12;

fn dims2(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(
            value.all_finite() || !self.inputs_finite(&op),
            "non-finite forward value from finite inputs in {op:?}"
        );
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn inputs_finite(&self, op: &Op) -> bool {
        let inputs: Vec<Var> = match op {
            Op::Leaf => return false,
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::ScaleBy(a, b)
            | Op::AddRow(a, b)
            | Op::MulRow(a, b)
            | Op::MatMul(a, b)
            | Op::MatMulT(a, b) => vec![*a, *b],
            Op::ConcatRows(parts) => parts.clone(),
            Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Op::Scale(a, _)
            | Op::Transpose(a)
            | Op::GatherRows(a, _)
            | Op::Reshape(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Sigmoid(a)
            | Op::LogSigmoid(a)
            | Op::Relu(a)
            | Op::QuickGelu(a)
            | Op::SumAll(a)
            | Op::Sum(a, _)
            | Op::Mean(a, _)
            | Op::L2NormalizeRows { x: a, .. }
            | Op::LogSoftmaxRows { x: a, .. }
            | Op::Attention { qkv: a, .. } => vec![*a],
        };
        // log(0) and exp overflow are legitimate ways to leave the finite range
        if matches!(op, Op::Log(_) | Op::Exp(_)) {
            return false;
        }
        inputs.iter().all(|v| self.nodes[v.0].value.all_finite())
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf, if backward has reached it.
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Drops accumulated leaf gradients.
    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn binary_same_shape(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f32, f32) -> f32) -> Tensor {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "{name}: shape mismatch");
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape().to_vec(), data)
    }

    fn unary(&self, a: Var, f: impl Fn(f32) -> f32) -> Tensor {
        let va = self.value(a);
        Tensor::new(va.shape().to_vec(), va.data().iter().map(|&x| f(x)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let t = self.binary_same_shape(a, b, "add", |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        self.push(t, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let t = self.binary_same_shape(a, b, "sub", |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        self.push(t, Op::Sub(a, b), rg)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let t = self.binary_same_shape(a, b, "mul", |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        self.push(t, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Var {
        let t = self.unary(a, |x| x * s);
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, s), rg)
    }

    /// Multiplies every entry of `a` by the single-element tensor `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.value(s).len(), 1, "scale_by: scale must be a scalar");
        let sv = self.value(s).item();
        let t = self.unary(a, |x| x * sv);
        let rg = self.rg(a) || self.rg(s);
        self.push(t, Op::ScaleBy(a, s), rg)
    }

    /// `x[n×d] + b[d]` broadcast over rows.
    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let (vx, vb) = (self.value(x), self.value(b));
        let d = vx.cols();
        assert_eq!(vb.len(), d, "add_row: bias length mismatch");
        let data = vx
            .data()
            .chunks(d)
            .flat_map(|row| row.iter().zip(vb.data()).map(|(a, b)| a + b))
            .collect();
        let t = Tensor::new(vx.shape().to_vec(), data);
        let rg = self.rg(x) || self.rg(b);
        self.push(t, Op::AddRow(x, b), rg)
    }

    /// `x[n×d] ∘ g[d]` broadcast over rows.
    pub fn mul_row(&mut self, x: Var, g: Var) -> Var {
        let (vx, vg) = (self.value(x), self.value(g));
        let d = vx.cols();
        assert_eq!(vg.len(), d, "mul_row: gain length mismatch");
        let data = vx
            .data()
            .chunks(d)
            .flat_map(|row| row.iter().zip(vg.data()).map(|(a, b)| a * b))
            .collect();
        let t = Tensor::new(vx.shape().to_vec(), data);
        let rg = self.rg(x) || self.rg(g);
        self.push(t, Op::MulRow(x, g), rg)
    }

    /// `a[m×k] · b[k×n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let ((m, k), (k2, n)) = (dims2(self.value(a)), dims2(self.value(b)));
        assert_eq!(k, k2, "matmul: inner dims {k} vs {k2}");
        let data = gemm_nn(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::matrix(m, n, data), Op::MatMul(a, b), rg)
    }

    /// `a[m×k] · b[n×k]ᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let ((m, k), (n, k2)) = (dims2(self.value(a)), dims2(self.value(b)));
        assert_eq!(k, k2, "matmul_t: inner dims {k} vs {k2}");
        let data = gemm_nt(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::matrix(m, n, data), Op::MatMulT(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (m, n) = dims2(self.value(a));
        let data = kernels::transpose(self.value(a).data(), m, n);
        let rg = self.rg(a);
        self.push(Tensor::matrix(n, m, data), Op::Transpose(a), rg)
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows: no inputs");
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.cols(), cols, "concat_rows: column mismatch");
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(Tensor::matrix(rows, cols, data), Op::ConcatRows(parts.to_vec()), rg)
    }

    /// Row lookup; `indices` may repeat (embedding lookup).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Var {
        let v = self.value(a);
        let (rows, cols) = dims2(v);
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            assert!(i < rows, "gather_rows: index {i} out of {rows}");
            data.extend_from_slice(v.row(i));
        }
        let rg = self.rg(a);
        self.push(
            Tensor::matrix(indices.len(), cols, data),
            Op::GatherRows(a, indices.to_vec()),
            rg,
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = self.value(a);
        let t = Tensor::new(shape.to_vec(), v.data().to_vec());
        let rg = self.rg(a);
        self.push(t, Op::Reshape(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.unary(a, f32::exp);
        let rg = self.rg(a);
        self.push(t, Op::Exp(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let t = self.unary(a, f32::ln);
        let rg = self.rg(a);
        self.push(t, Op::Log(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.unary(a, kernels::sigmoid);
        let rg = self.rg(a);
        self.push(t, Op::Sigmoid(a), rg)
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let t = self.unary(a, kernels::log_sigmoid);
        let rg = self.rg(a);
        self.push(t, Op::LogSigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.unary(a, |x| x.max(0.0));
        let rg = self.rg(a);
        self.push(t, Op::Relu(a), rg)
    }

    /// `x · sigmoid(1.702 x)`
    pub fn quick_gelu(&mut self, a: Var) -> Var {
        let t = self.unary(a, |x| x * kernels::sigmoid(1.702 * x));
        let rg = self.rg(a);
        self.push(t, Op::QuickGelu(a), rg)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).data().iter().map(|&x| x as f64).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s as f32), Op::SumAll(a), rg)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f32;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    fn reduce(&self, a: Var, axis: Axis, mean: bool) -> Tensor {
        let v = self.value(a);
        let (r, c) = dims2(v);
        match axis {
            Axis::Rows => {
                let mut acc = vec![0.0f64; c];
                for row in v.data().chunks(c) {
                    for (s, &x) in acc.iter_mut().zip(row) {
                        *s += x as f64;
                    }
                }
                let div = if mean { r as f64 } else { 1.0 };
                Tensor::new(vec![c], acc.into_iter().map(|s| (s / div) as f32).collect())
            }
            Axis::Cols => {
                let div = if mean { c as f64 } else { 1.0 };
                let data = v
                    .data()
                    .chunks(c)
                    .map(|row| (row.iter().map(|&x| x as f64).sum::<f64>() / div) as f32)
                    .collect();
                Tensor::new(vec![r], data)
            }
        }
    }

    /// Sum over an axis of a matrix. `Axis::Rows` collapses rows (result has
    /// one entry per column); `Axis::Cols` collapses columns.
    pub fn sum(&mut self, a: Var, axis: Axis) -> Var {
        let t = self.reduce(a, axis, false);
        let rg = self.rg(a);
        self.push(t, Op::Sum(a, axis), rg)
    }

    pub fn mean(&mut self, a: Var, axis: Axis) -> Var {
        let t = self.reduce(a, axis, true);
        let rg = self.rg(a);
        self.push(t, Op::Mean(a, axis), rg)
    }

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let v = self.value(x);
        let (r, d) = dims2(v);
        assert_eq!(self.value(gain).len(), d, "layer_norm: gain length");
        assert_eq!(self.value(bias).len(), d, "layer_norm: bias length");
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut normed = vec![0.0f32; r * d];
        let mut inv_std = vec![0.0f32; r];
        let mut out = vec![0.0f32; r * d];
        for i in 0..r {
            let row = v.row(i);
            let mean = row.iter().map(|&x| x as f64).sum::<f64>() / d as f64;
            let var = row.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS as f64).sqrt();
            inv_std[i] = is as f32;
            for j in 0..d {
                let n = ((row[j] as f64 - mean) * is) as f32;
                normed[i * d + j] = n;
                out[i * d + j] = n * g[j] + b[j];
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out);
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        self.push(
            t,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
            rg,
        )
    }

    /// Scales each row to unit Euclidean norm.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var, NumericsError> {
        let v = self.value(x);
        let (r, d) = dims2(v);
        let mut norms = Vec::with_capacity(r);
        let mut out = vec![0.0f32; r * d];
        for i in 0..r {
            let row = v.row(i);
            let n = kernels::dot64(row, row).sqrt();
            if n <= NORM_EPS as f64 {
                return Err(NumericsError::ZeroRow { row: i });
            }
            norms.push(n as f32);
            for j in 0..d {
                out[i * d + j] = (row[j] as f64 / n) as f32;
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out);
        let rg = self.rg(x);
        Ok(self.push(t, Op::L2NormalizeRows { x, norms }, rg))
    }

    /// Row-wise log-softmax with max subtraction. When `valid` is given, only
    /// entries marked true take part; the rest read as 0 and get no gradient.
    /// Every row must have at least one valid entry.
    pub fn log_softmax_rows(&mut self, x: Var, valid: Option<Vec<bool>>) -> Var {
        let v = self.value(x);
        let (r, c) = dims2(v);
        if let Some(mask) = &valid {
            assert_eq!(mask.len(), r * c, "log_softmax_rows: mask size");
        }
        let is_valid = |i: usize| valid.as_ref().is_none_or(|m| m[i]);
        let mut out = vec![0.0f32; r * c];
        for i in 0..r {
            let row = v.row(i);
            let mut max = f64::NEG_INFINITY;
            for j in 0..c {
                if is_valid(i * c + j) {
                    max = max.max(row[j] as f64);
                }
            }
            assert!(max.is_finite(), "log_softmax_rows: row {i} has no valid entries");
            let mut sum = 0.0f64;
            for j in 0..c {
                if is_valid(i * c + j) {
                    sum += (row[j] as f64 - max).exp();
                }
            }
            let lse = max + sum.ln();
            for j in 0..c {
                if is_valid(i * c + j) {
                    out[i * c + j] = (row[j] as f64 - lse) as f32;
                }
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out);
        let rg = self.rg(x);
        self.push(t, Op::LogSoftmaxRows { x, valid }, rg)
    }

    /// Multi-head scaled dot-product attention over `batch` sequences of
    /// length `seq`. `qkv` is `[batch·seq × 3w]` with query, key and value
    /// blocks side by side; output is `[batch·seq × w]`. Keys whose entry in
    /// `key_valid` is false receive zero attention weight.
    pub fn attention(
        &mut self,
        qkv: Var,
        batch: usize,
        seq: usize,
        heads: usize,
        key_valid: Option<&[bool]>,
    ) -> Var {
        let v = self.value(qkv);
        let (rows, w3) = dims2(v);
        assert_eq!(rows, batch * seq, "attention: rows vs batch·seq");
        assert_eq!(w3 % 3, 0, "attention: qkv width not divisible by 3");
        let w = w3 / 3;
        assert_eq!(w % heads, 0, "attention: width not divisible by heads");
        if let Some(m) = key_valid {
            assert_eq!(m.len(), rows, "attention: key mask size");
        }
        let dh = w / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let data = v.data();
        let mut probs = vec![0.0f32; batch * heads * seq * seq];
        let mut out = vec![0.0f32; rows * w];
        let mut scores = vec![0.0f64; seq];
        for b in 0..batch {
            for h in 0..heads {
                let p_base = (b * heads + h) * seq * seq;
                for i in 0..seq {
                    let qi = &data[(b * seq + i) * w3 + h * dh..][..dh];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..seq {
                        let valid = key_valid.is_none_or(|m| m[b * seq + j]);
                        if valid {
                            let kj = &data[(b * seq + j) * w3 + w + h * dh..][..dh];
                            let s = kernels::dot64(qi, kj) * scale;
                            scores[j] = s;
                            max = max.max(s);
                        } else {
                            scores[j] = f64::NEG_INFINITY;
                        }
                    }
                    assert!(max.is_finite(), "attention: sequence {b} has no valid keys");
                    let mut sum = 0.0f64;
                    for s in scores.iter_mut() {
                        *s = if s.is_finite() { (*s - max).exp() } else { 0.0 };
                        sum += *s;
                    }
                    let mut acc = vec![0.0f64; dh];
                    for j in 0..seq {
                        let p = scores[j] / sum;
                        probs[p_base + i * seq + j] = p as f32;
                        if p != 0.0 {
                            let vj = &data[(b * seq + j) * w3 + 2 * w + h * dh..][..dh];
                            for (a, &x) in acc.iter_mut().zip(vj) {
                                *a += p * x as f64;
                            }
                        }
                    }
                    let o = &mut out[(b * seq + i) * w + h * dh..][..dh];
                    for (o, a) in o.iter_mut().zip(acc) {
                        *o = a as f32;
                    }
                }
            }
        }
        let rg = self.rg(qkv);
        self.push(
            Tensor::matrix(rows, w, out),
            Op::Attention {
                qkv,
                batch,
                seq,
                heads,
                probs,
            },
            rg,
        )
    }

    /// Runs the adjoint sweep from a scalar `loss` and adds dLoss/dLeaf into
    /// every trainable leaf's gradient. Calling it again accumulates.
    pub fn backward(&mut self, loss: Var) -> Result<(), NumericsError> {
        let n = self.value(loss).len();
        if n != 1 {
            return Err(NumericsError::NotScalar { len: n });
        }
        let mut adj: Vec<Option<Vec<f32>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[idx].op {
                let node = &mut self.nodes[idx];
                match &mut node.grad {
                    Some(acc) => add_into(acc, &g),
                    None => node.grad = Some(g),
                }
                continue;
            }
            self.propagate(idx, &g, &mut adj);
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f32], adj: &mut [Option<Vec<f32>>]) {
        let node = &self.nodes[idx];
        let mut send = |v: Var, grad: Vec<f32>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut adj[v.0] {
                Some(acc) => add_into(acc, &grad),
                slot @ None => *slot = Some(grad),
            }
        };
        let val = |v: Var| self.nodes[v.0].value.data();
        let out = node.value.data();
        match &node.op {
            Op::Leaf => unreachable!(),
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                send(*a, g.iter().zip(vb).map(|(g, y)| g * y).collect());
                send(*b, g.iter().zip(va).map(|(g, x)| g * x).collect());
            }
            Op::Scale(a, s) => send(*a, g.iter().map(|x| x * s).collect()),
            Op::ScaleBy(a, s) => {
                let sv = val(*s)[0];
                send(*a, g.iter().map(|x| x * sv).collect());
                let ds = kernels::dot64(g, val(*a)) as f32;
                send(*s, vec![ds]);
            }
            Op::AddRow(x, b) => {
                let d = self.nodes[b.0].value.len();
                send(*x, g.to_vec());
                let mut db = vec![0.0f64; d];
                for row in g.chunks(d) {
                    for (s, &v) in db.iter_mut().zip(row) {
                        *s += v as f64;
                    }
                }
                send(*b, db.into_iter().map(|v| v as f32).collect());
            }
            Op::MulRow(x, gain) => {
                let gv = val(*gain);
                let d = gv.len();
                let xv = val(*x);
                send(
                    *x,
                    g.chunks(d)
                        .flat_map(|row| row.iter().zip(gv).map(|(a, b)| a * b))
                        .collect(),
                );
                let mut dg = vec![0.0f64; d];
                for (grow, xrow) in g.chunks(d).zip(xv.chunks(d)) {
                    for j in 0..d {
                        dg[j] += grow[j] as f64 * xrow[j] as f64;
                    }
                }
                send(*gain, dg.into_iter().map(|v| v as f32).collect());
            }
            Op::MatMul(a, b) => {
                let ((m, k), (_, n)) = (dims2(&self.nodes[a.0].value), dims2(&self.nodes[b.0].value));
                if self.rg(*a) {
                    send(*a, gemm_nt(g, val(*b), m, n, k));
                }
                if self.rg(*b) {
                    send(*b, gemm_tn(val(*a), g, k, m, n));
                }
            }
            Op::MatMulT(a, b) => {
                let ((m, k), (n, _)) = (dims2(&self.nodes[a.0].value), dims2(&self.nodes[b.0].value));
                if self.rg(*a) {
                    send(*a, gemm_nn(g, val(*b), m, n, k));
                }
                if self.rg(*b) {
                    send(*b, gemm_tn(g, val(*a), n, m, k));
                }
            }
            Op::Transpose(a) => {
                let (m, n) = dims2(&self.nodes[a.0].value);
                send(*a, kernels::transpose(g, n, m));
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    send(*p, g[off..off + len].to_vec());
                    off += len;
                }
            }
            Op::GatherRows(a, indices) => {
                let src = &self.nodes[a.0].value;
                let cols = src.cols();
                let mut da = vec![0.0f32; src.len()];
                for (r, &i) in indices.iter().enumerate() {
                    add_into(&mut da[i * cols..(i + 1) * cols], &g[r * cols..(r + 1) * cols]);
                }
                send(*a, da);
            }
            Op::Reshape(a) => send(*a, g.to_vec()),
            Op::Exp(a) => send(*a, g.iter().zip(out).map(|(g, y)| g * y).collect()),
            Op::Log(a) => send(*a, g.iter().zip(val(*a)).map(|(g, x)| g / x).collect()),
            Op::Sigmoid(a) => send(*a, g.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect()),
            Op::LogSigmoid(a) => send(
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(g, &x)| g * kernels::sigmoid(-x))
                    .collect(),
            ),
            Op::Relu(a) => send(
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                    .collect(),
            ),
            Op::QuickGelu(a) => send(
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(g, &x)| {
                        let s = kernels::sigmoid(1.702 * x);
                        g * (s + 1.702 * x * s * (1.0 - s))
                    })
                    .collect(),
            ),
            Op::SumAll(a) => send(*a, vec![g[0]; self.nodes[a.0].value.len()]),
            Op::Sum(a, axis) | Op::Mean(a, axis) => {
                let (r, c) = dims2(&self.nodes[a.0].value);
                let div = match (&node.op, axis) {
                    (Op::Mean(..), Axis::Rows) => r as f32,
                    (Op::Mean(..), Axis::Cols) => c as f32,
                    _ => 1.0,
                };
                let mut da = vec![0.0f32; r * c];
                for i in 0..r {
                    for j in 0..c {
                        let gi = match axis {
                            Axis::Rows => g[j],
                            Axis::Cols => g[i],
                        };
                        da[i * c + j] = gi / div;
                    }
                }
                send(*a, da);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            } => {
                let d = val(*gain).len();
                let gv = val(*gain);
                let r = inv_std.len();
                let mut dx = vec![0.0f32; r * d];
                let mut dg = vec![0.0f64; d];
                let mut db = vec![0.0f64; d];
                for i in 0..r {
                    let grow = &g[i * d..(i + 1) * d];
                    let nrow = &normed[i * d..(i + 1) * d];
                    let mut sum_dn = 0.0f64;
                    let mut sum_dn_n = 0.0f64;
                    for j in 0..d {
                        let dn = grow[j] as f64 * gv[j] as f64;
                        sum_dn += dn;
                        sum_dn_n += dn * nrow[j] as f64;
                        dg[j] += grow[j] as f64 * nrow[j] as f64;
                        db[j] += grow[j] as f64;
                    }
                    let is = inv_std[i] as f64;
                    for j in 0..d {
                        let dn = grow[j] as f64 * gv[j] as f64;
                        dx[i * d + j] = (is * (dn - sum_dn / d as f64 - nrow[j] as f64 * sum_dn_n / d as f64)) as f32;
                    }
                }
                send(*x, dx);
                send(*gain, dg.into_iter().map(|v| v as f32).collect());
                send(*bias, db.into_iter().map(|v| v as f32).collect());
            }
            Op::L2NormalizeRows { x, norms } => {
                let d = node.value.cols();
                let mut dx = vec![0.0f32; out.len()];
                for (i, &n) in norms.iter().enumerate() {
                    let y = &out[i * d..(i + 1) * d];
                    let gr = &g[i * d..(i + 1) * d];
                    let gy = kernels::dot64(gr, y);
                    for j in 0..d {
                        dx[i * d + j] = ((gr[j] as f64 - y[j] as f64 * gy) / n as f64) as f32;
                    }
                }
                send(*x, dx);
            }
            Op::LogSoftmaxRows { x, valid } => {
                let c = node.value.cols();
                let is_valid = |i: usize| valid.as_ref().is_none_or(|m| m[i]);
                let mut dx = vec![0.0f32; out.len()];
                for i in 0..node.value.rows() {
                    let mut gsum = 0.0f64;
                    for j in 0..c {
                        if is_valid(i * c + j) {
                            gsum += g[i * c + j] as f64;
                        }
                    }
                    for j in 0..c {
                        let k = i * c + j;
                        if is_valid(k) {
                            let p = (out[k] as f64).exp();
                            dx[k] = (g[k] as f64 - p * gsum) as f32;
                        }
                    }
                }
                send(*x, dx);
            }
            Op::Attention {
                qkv,
                batch,
                seq,
                heads,
                probs,
            } => {
                let (batch, seq, heads) = (*batch, *seq, *heads);
                let data = val(*qkv);
                let w3 = self.nodes[qkv.0].value.cols();
                let w = w3 / 3;
                let dh = w / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let mut dqkv = vec![0.0f64; data.len()];
                let mut dp = vec![0.0f64; seq];
                for b in 0..batch {
                    for h in 0..heads {
                        let p_base = (b * heads + h) * seq * seq;
                        for i in 0..seq {
                            let go = &g[(b * seq + i) * w + h * dh..][..dh];
                            let prow = &probs[p_base + i * seq..][..seq];
                            // dP = dO · Vᵀ ; dV += Pᵀ dO
                            let mut dot_pd = 0.0f64;
                            for j in 0..seq {
                                let p = prow[j] as f64;
                                if p == 0.0 {
                                    dp[j] = 0.0;
                                    continue;
                                }
                                let v_off = (b * seq + j) * w3 + 2 * w + h * dh;
                                let vj = &data[v_off..][..dh];
                                dp[j] = kernels::dot64(go, vj);
                                dot_pd += p * dp[j];
                                for t in 0..dh {
                                    dqkv[v_off + t] += p * go[t] as f64;
                                }
                            }
                            let q_off = (b * seq + i) * w3 + h * dh;
                            for j in 0..seq {
                                let p = prow[j] as f64;
                                if p == 0.0 {
                                    continue;
                                }
                                let ds = p * (dp[j] - dot_pd) * scale;
                                let k_off = (b * seq + j) * w3 + w + h * dh;
                                for t in 0..dh {
                                    dqkv[q_off + t] += ds * data[k_off + t] as f64;
                                    dqkv[k_off + t] += ds * data[q_off + t] as f64;
                                }
                            }
                        }
                    }
                }
                send(*qkv, dqkv.into_iter().map(|v| v as f32).collect());
            }
        }
    }
}
