//! Reverse-mode tape over [`Tensor`] values.
//!
//! A [`Graph`] records each operation with its forward value; `backward`
//! replays the tape from a scalar root and returns one gradient slot per node.
//! Only the operations the summarizer needs are provided.

use alloc::vec;
use alloc::vec::Vec;

use crate::activations::{attention_weights, attention_weights_vjp, softmax_unchecked, softmax_vjp_raw, ActivationKind};
use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, normed: Tensor, inv_std: Vec<f64> },
    Attention { scores: Var, kind: ActivationKind, causal: bool },
    Concat(Vec<Var>),
    Gather { table: Var, ids: Vec<usize> },
    Mixture(MixtureInputs),
    Nll { probs: Var, targets: Vec<usize>, floor: f64 },
}

#[derive(Debug)]
struct MixtureInputs {
    logits: Var,
    copy: Var,
    p_gen: Var,
    gate: Var,
    source_ids: Vec<usize>,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Operation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; `None` if `v` does not reach the root.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.slots.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.slots.get_mut(v.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul_bt(self.value(b))?;
        Ok(self.push(out, Op::MatMulBt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.len() != x.cols() {
            bail!(Shape, "bias of {} for {} columns", r.len(), x.cols());
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (o, b) in out.row_slice_mut(i).iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        self.push(out, Op::Scale(a, s))
    }

    /// Multiplies `a` by the single value held in `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            bail!(Shape, "scale_by needs a single value, got {:?}", self.value(s).shape());
        }
        let k = self.value(s).data()[0];
        let out = self.value(a).scale(k);
        Ok(self.push(out, Op::ScaleBy(a, s)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// Row-wise layer normalization with learned gain and bias rows.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        const EPS: f64 = 1e-5;
        let xv = self.value(x);
        let n = xv.cols();
        if self.value(gain).len() != n || self.value(bias).len() != n {
            bail!(Shape, "layer norm parameters do not match {} columns", n);
        }
        let mut normed = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let row = normed.row_slice_mut(r);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / libm::sqrt(var + EPS);
            for v in row.iter_mut() {
                *v = (*v - mean) * is;
            }
            inv_std.push(is);
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut out = normed.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_slice_mut(r).iter_mut().enumerate() {
                *v = *v * g[j] + b[j];
            }
        }
        Ok(self.push(out, Op::LayerNorm { x, gain, bias, normed, inv_std }))
    }

    /// Softmax or sparsemax over each score row.
    pub fn attention(&mut self, scores: Var, kind: ActivationKind, causal: bool) -> Result<Var> {
        let out = attention_weights(self.value(scores), kind, causal)?;
        Ok(self.push(out, Op::Attention { scores, kind, causal }))
    }

    /// Column-wise concatenation of equal-height matrices.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else { bail!(Argument, "nothing to concatenate") };
        let rows = self.value(first).rows();
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            bail!(Shape, "concatenated parts differ in height");
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = vec![0.0; rows * total];
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            let c = t.cols();
            for r in 0..rows {
                out[r * total + offset..r * total + offset + c].copy_from_slice(t.row_slice(r));
            }
            offset += c;
        }
        Ok(self.push(Tensor::from_parts(vec![rows, total], out), Op::Concat(parts.to_vec())))
    }

    /// Rows of `table` selected by `ids`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if ids.is_empty() {
            bail!(Argument, "gather of no rows");
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            bail!(Argument, "row {} out of {}", bad, t.rows());
        }
        let c = t.cols();
        let mut out = Vec::with_capacity(ids.len() * c);
        for &i in ids {
            out.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::from_parts(vec![ids.len(), c], out);
        Ok(self.push(out, Op::Gather { table, ids: ids.to_vec() }))
    }

    /// Copy-mixture distribution over the extended vocabulary.
    ///
    /// Per row `t`: `P(w) = [p·softmax(logits_t)(w) + (1−p)·g·Σ_{i: src_i = w} copy_{t,i}] / [p + (1−p)·g]`,
    /// where `g` is the copy head's gate. With `g = 1` this is the plain
    /// pointer-generator mixture; with `g = 0` only the vocabulary part remains.
    pub fn copy_mixture(
        &mut self,
        logits: Var,
        copy: Var,
        p_gen: Var,
        gate: Var,
        source_ids: &[usize],
        extended_size: usize,
    ) -> Result<Var> {
        let (lv, cv, pv, gv) = (self.value(logits), self.value(copy), self.value(p_gen), self.value(gate));
        let (steps, vocab) = (lv.rows(), lv.cols());
        if cv.rows() != steps || pv.rows() != steps || pv.cols() != 1 {
            bail!(Shape, "copy mixture inputs disagree on step count");
        }
        if cv.cols() != source_ids.len() {
            bail!(Shape, "copy row covers {} positions, source has {}", cv.cols(), source_ids.len());
        }
        if extended_size < vocab || source_ids.iter().any(|&i| i >= extended_size) {
            bail!(Argument, "source id outside the extended vocabulary");
        }
        if gv.len() != 1 {
            bail!(Shape, "copy gate must be a single value");
        }
        let g = gv.data()[0];
        let mut out = vec![0.0; steps * extended_size];
        for t in 0..steps {
            let p = pv.data()[t];
            if !(0.0..=1.0).contains(&p) {
                bail!(Internal, "p_gen {} outside [0, 1]", p);
            }
            let q = softmax_unchecked(lv.row_slice(t));
            let row = &mut out[t * extended_size..(t + 1) * extended_size];
            if g == 0.0 {
                row[..vocab].copy_from_slice(&q);
                continue;
            }
            let denom = p + (1.0 - p) * g;
            let copy_w = (1.0 - p) * g;
            for (w, qw) in q.iter().enumerate() {
                row[w] = p * qw;
            }
            for (i, &src) in source_ids.iter().enumerate() {
                row[src] += copy_w * cv.at(t, i);
            }
            for v in row.iter_mut() {
                *v /= denom;
            }
        }
        let out = Tensor::from_parts(vec![steps, extended_size], out);
        let inputs = MixtureInputs { logits, copy, p_gen, gate, source_ids: source_ids.to_vec() };
        Ok(self.push(out, Op::Mixture(inputs)))
    }

    /// Mean over rows of `−ln max(P[t, target_t], floor)`.
    pub fn nll(&mut self, probs: Var, targets: &[usize], floor: f64) -> Result<Var> {
        let p = self.value(probs);
        if targets.len() != p.rows() {
            bail!(Shape, "{} targets for {} steps", targets.len(), p.rows());
        }
        if targets.is_empty() {
            bail!(Argument, "no target steps");
        }
        let mut total = 0.0;
        for (t, &y) in targets.iter().enumerate() {
            if y >= p.cols() {
                bail!(Data, "target id {} outside extended vocabulary of {}", y, p.cols());
            }
            total -= libm::log(p.at(t, y).max(floor));
        }
        let out = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(out, Op::Nll { probs, targets: targets.to_vec(), floor }))
    }

    /// Reverse sweep from a single-valued `root`.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut slots: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        slots[root.0] = Some(Tensor::full(self.value(root).shape(), 1.0));
        for idx in (0..=root.0).rev() {
            let Some(grad) = slots[idx].take() else { continue };
            self.propagate(idx, &grad, &mut slots);
            slots[idx] = Some(grad);
        }
        Gradients { slots }
    }

    fn propagate(&self, idx: usize, grad: &Tensor, slots: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, g: Tensor| match &mut slots[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, grad.matmul_bt(bv).expect("shapes fixed at forward"));
                acc(*b, av.matmul_at(grad).expect("shapes fixed at forward"));
            }
            Op::MatMulBt(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, grad.matmul(bv).expect("shapes fixed at forward"));
                acc(*b, grad.matmul_at(av).expect("shapes fixed at forward"));
            }
            Op::Add(a, b) => {
                acc(*a, grad.clone());
                acc(*b, grad.clone());
            }
            Op::AddRow(a, row) => {
                acc(*a, grad.clone());
                let mut r = Tensor::zeros(self.value(*row).shape());
                for i in 0..grad.rows() {
                    for (o, g) in r.data_mut().iter_mut().zip(grad.row_slice(i)) {
                        *o += g;
                    }
                }
                acc(*row, r);
            }
            Op::Scale(a, s) => acc(*a, grad.scale(*s)),
            Op::ScaleBy(a, s) => {
                let k = self.value(*s).data()[0];
                let av = self.value(*a);
                let ds: f64 = av.data().iter().zip(grad.data()).map(|(x, g)| x * g).sum();
                acc(*a, grad.scale(k));
                acc(*s, Tensor::full(self.value(*s).shape(), ds));
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                let data = av.data().iter().zip(grad.data()).map(|(&x, &g)| if x > 0.0 { g } else { 0.0 }).collect();
                acc(*a, Tensor::from_parts(av.shape().to_vec(), data));
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let data = y.data().iter().zip(grad.data()).map(|(&s, &g)| g * s * (1.0 - s)).collect();
                acc(*a, Tensor::from_parts(y.shape().to_vec(), data));
            }
            Op::LayerNorm { x, gain, bias, normed, inv_std } => {
                let g = self.value(*gain).data();
                let n = normed.cols();
                let mut dx = Tensor::zeros(normed.shape());
                let mut dgain = Tensor::zeros(self.value(*gain).shape());
                let mut dbias = Tensor::zeros(self.value(*bias).shape());
                for (r, &inv) in inv_std.iter().enumerate() {
                    let xh = normed.row_slice(r);
                    let dy = grad.row_slice(r);
                    let mut mean_d = 0.0;
                    let mut mean_dx = 0.0;
                    for j in 0..n {
                        let d = dy[j] * g[j];
                        mean_d += d;
                        mean_dx += d * xh[j];
                        dgain.data_mut()[j] += dy[j] * xh[j];
                        dbias.data_mut()[j] += dy[j];
                    }
                    mean_d /= n as f64;
                    mean_dx /= n as f64;
                    let out = dx.row_slice_mut(r);
                    for j in 0..n {
                        out[j] = inv * (dy[j] * g[j] - mean_d - xh[j] * mean_dx);
                    }
                }
                acc(*x, dx);
                acc(*gain, dgain);
                acc(*bias, dbias);
            }
            Op::Attention { scores, kind, causal } => {
                acc(*scores, attention_weights_vjp(&node.value, grad, *kind, *causal));
            }
            Op::Concat(parts) => {
                let total = grad.cols();
                let mut offset = 0;
                for &p in parts {
                    let shape = self.value(p).shape().to_vec();
                    let c = self.value(p).cols();
                    let mut part = Vec::with_capacity(grad.rows() * c);
                    for r in 0..grad.rows() {
                        part.extend_from_slice(&grad.data()[r * total + offset..r * total + offset + c]);
                    }
                    acc(p, Tensor::from_parts(shape, part));
                    offset += c;
                }
            }
            Op::Gather { table, ids } => {
                let mut dt = Tensor::zeros(self.value(*table).shape());
                for (r, &i) in ids.iter().enumerate() {
                    for (o, g) in dt.row_slice_mut(i).iter_mut().zip(grad.row_slice(r)) {
                        *o += g;
                    }
                }
                acc(*table, dt);
            }
            Op::Mixture(m) => self.mixture_backward(m, &node.value, grad, &mut acc),
            Op::Nll { probs, targets, floor } => {
                let p = self.value(*probs);
                let upstream = grad.data()[0] / targets.len() as f64;
                let mut dp = Tensor::zeros(p.shape());
                for (t, &y) in targets.iter().enumerate() {
                    let v = p.at(t, y);
                    if v > *floor {
                        let c = p.cols();
                        dp.data_mut()[t * c + y] = -upstream / v;
                    }
                }
                acc(*probs, dp);
            }
        }
    }

    fn mixture_backward(&self, m: &MixtureInputs, probs: &Tensor, grad: &Tensor, acc: &mut impl FnMut(Var, Tensor)) {
        let (lv, cv, pv) = (self.value(m.logits), self.value(m.copy), self.value(m.p_gen));
        let g = self.value(m.gate).data()[0];
        let (steps, vocab, ext) = (lv.rows(), lv.cols(), probs.cols());
        let mut dlogits = Tensor::zeros(lv.shape());
        let mut dcopy = Tensor::zeros(cv.shape());
        let mut dp = Tensor::zeros(pv.shape());
        let mut dg = 0.0;
        let mut copied = vec![0.0; ext];
        for t in 0..steps {
            let p = pv.data()[t];
            let q = softmax_unchecked(lv.row_slice(t));
            let denom = p + (1.0 - p) * g;
            let prow = probs.row_slice(t);
            let grow = grad.row_slice(t);
            let dnum: Vec<f64> = grow.iter().map(|d| d / denom).collect();
            let ddenom = -grow.iter().zip(prow).map(|(d, v)| d * v).sum::<f64>() / denom;
            copied.iter_mut().for_each(|c| *c = 0.0);
            for (i, &src) in m.source_ids.iter().enumerate() {
                copied[src] += cv.at(t, i);
            }
            let dq: Vec<f64> = dnum[..vocab].iter().map(|d| p * d).collect();
            dlogits.row_slice_mut(t).copy_from_slice(&softmax_vjp_raw(&q, &dq));
            for (i, &src) in m.source_ids.iter().enumerate() {
                dcopy.row_slice_mut(t)[i] = (1.0 - p) * g * dnum[src];
            }
            let mut dpt = ddenom * (1.0 - g);
            let mut dgt = ddenom * (1.0 - p);
            for w in 0..ext {
                let qw = if w < vocab { q[w] } else { 0.0 };
                dpt += dnum[w] * (qw - g * copied[w]);
                dgt += dnum[w] * (1.0 - p) * copied[w];
            }
            dp.data_mut()[t] = dpt;
            dg += dgt;
        }
        acc(m.logits, dlogits);
        acc(m.copy, dcopy);
        acc(m.p_gen, dp);
        acc(m.gate, Tensor::full(self.value(m.gate).shape(), dg));
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
