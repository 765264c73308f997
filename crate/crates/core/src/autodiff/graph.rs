//! Dynamic reverse-mode tape. Each forward pass records nodes in execution
//! order; [`Graph::backward`] walks them in reverse.

use rayon::prelude::*;

use super::kernels::{axpy, dot, sum, ConvGeom};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Conv3d { x: Var, w: Var, b: Var, geom: ConvGeom },
    Relu(Var),
    Softmax(Var),
    GlobalAvgPool(Var),
    Concat(Vec<Var>),
    Add(Var, Var),
    Gather { x: Var, rows: Vec<usize> },
    RowDot(Var, Var),
    MaskedMse { pred: Var, target: Var, mask: Vec<T> },
    Rmse { pred: Var, target: Var },
    WeightedSum { x: Var, weights: Vec<T> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// `sqrt(mse + RMSE_EPS)` keeps the RMSE gradient finite at zero error.
pub const RMSE_EPS: f64 = 1e-12;

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(what: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape(format!("{what}: incompatible shapes {a:?} and {b:?}"))
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A constant leaf.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf whose gradient is tracked.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `x [N, in] * w[out, in]^T + b[out]`
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || bs != [ws[0]] {
            return Err(Error::Shape(format!(
                "linear: input {xs:?}, weight {ws:?}, bias {bs:?}"
            )));
        }
        let (n, fin, fout) = (xs[0], xs[1], ws[0]);
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = vec![T::zero(); n * fout];
        for (row, orow) in xv.chunks_exact(fin).zip(out.chunks_exact_mut(fout)) {
            for (o, slot) in orow.iter_mut().enumerate() {
                *slot = dot(row, &wv[o * fin..(o + 1) * fin]) + bv[o];
            }
        }
        let needs = self.needs(&[x, w, b]);
        Ok(self.push(Tensor::new(vec![n, fout], out)?, Op::Linear { x, w, b }, needs))
    }

    /// Cross-correlation of `x [N, C, D, H, W]` with `w [K, C, kd, kh, kw]`.
    pub fn conv3d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x).to_vec(), self.shape(w).to_vec(), self.shape(b).to_vec());
        if xs.len() != 5 || ws.len() != 5 || xs[1] != ws[1] || bs != [ws[0]] || stride == 0 {
            return Err(Error::Shape(format!(
                "conv3d: input {xs:?}, weight {ws:?}, bias {bs:?}, stride {stride}"
            )));
        }
        let mut output = [0; 3];
        for a in 0..3 {
            let padded = xs[2 + a] + 2 * pad;
            if ws[2 + a] > padded {
                return Err(shape_err("conv3d kernel larger than padded input", &xs, &ws));
            }
            output[a] = (padded - ws[2 + a]) / stride + 1;
        }
        let geom = ConvGeom {
            in_channels: xs[1],
            out_channels: ws[0],
            input: [xs[2], xs[3], xs[4]],
            kernel: [ws[2], ws[3], ws[4]],
            output,
            stride,
            pad,
        };
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let in_len = geom.input_len();
        let out_len = geom.out_channels * geom.positions();
        let mut out = vec![T::zero(); xs[0] * out_len];
        out.par_chunks_mut(out_len).zip(xv.par_chunks(in_len)).for_each_init(
            || vec![T::zero(); geom.rows() * geom.positions()],
            |col, (o, xin)| {
                geom.im2col(xin, col);
                geom.forward(col, wv, bv, o);
            },
        );
        let shape = vec![xs[0], geom.out_channels, output[0], output[1], output[2]];
        let needs = self.needs(&[x, w, b]);
        Ok(self.push(Tensor::new(shape, out)?, Op::Conv3d { x, w, b, geom }, needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = v.data().iter().map(|&a| a.max(T::zero())).collect();
        let t = Tensor::new(v.shape().to_vec(), out).expect("same shape");
        let needs = self.needs(&[x]);
        self.push(t, Op::Relu(x), needs)
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let k = *v
            .shape()
            .last()
            .ok_or_else(|| Error::Shape("softmax of a scalar".into()))?;
        let mut out = v.data().to_vec();
        for row in out.chunks_exact_mut(k) {
            let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            for e in row.iter_mut() {
                *e = (*e - m).exp();
            }
            let s: T = row.iter().copied().sum();
            for e in row.iter_mut() {
                *e = *e / s;
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let needs = self.needs(&[x]);
        Ok(self.push(t, Op::Softmax(x), needs))
    }

    /// Mean over D, H, W: `[N, C, D, H, W] -> [N, C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 5 {
            return Err(Error::Shape(format!("global_avg_pool expects rank 5, got {s:?}")));
        }
        let (n, c) = (s[0], s[1]);
        let vol: usize = s[2..].iter().product();
        let inv = T::of(1.0 / vol as f64);
        let out = self.value(x).data().chunks_exact(vol).map(|ch| sum(ch) * inv).collect();
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor::new(vec![n, c], out)?, Op::GlobalAvgPool(x), needs))
    }

    /// Concatenation of rank-2 tensors along the feature axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self
            .shape(*parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?)
            .to_vec();
        if first.len() != 2 {
            return Err(Error::Shape(format!("concat expects rank 2, got {first:?}")));
        }
        let n = first[0];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != n {
                return Err(shape_err("concat", &first, s));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let needs = self.needs(parts);
        Ok(self.push(Tensor::new(vec![n, total], out)?, Op::Concat(parts.to_vec()), needs))
    }

    /// Elementwise sum of two same-shape tensors (residual connections).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let t = Tensor::new(self.shape(a).to_vec(), out)?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), needs))
    }

    /// Selects rows of a rank-2 tensor (repeats allowed).
    pub fn gather(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(Error::Shape(format!("gather expects rank 2, got {s:?}")));
        }
        let w = s[1];
        let mut out = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            if r >= s[0] {
                return Err(Error::Shape(format!("gather row {r} out of range for {s:?}")));
            }
            out.extend_from_slice(&self.value(x).data()[r * w..(r + 1) * w]);
        }
        let needs = self.needs(&[x]);
        Ok(self.push(
            Tensor::new(vec![rows.len(), w], out)?,
            Op::Gather { x, rows: rows.to_vec() },
            needs,
        ))
    }

    /// Row-wise inner product `[N, K] . [N, K] -> [N, 1]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 || self.shape(b) != s.as_slice() {
            return Err(shape_err("row_dot", &s, self.shape(b)));
        }
        let k = s[1];
        let out = self
            .value(a)
            .data()
            .chunks_exact(k)
            .zip(self.value(b).data().chunks_exact(k))
            .map(|(x, y)| dot(x, y))
            .collect();
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(vec![s[0], 1], out)?, Op::RowDot(a, b), needs))
    }

    fn check_pair(&self, what: &str, a: Var, b: Var) -> Result<()> {
        if self.value(a).len() != self.value(b).len() || self.shape(a) != self.shape(b) {
            return Err(shape_err(what, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let mask = vec![T::one(); self.value(pred).len()];
        self.masked_mse(pred, target, mask)
    }

    /// Mean of squared errors over entries with nonzero mask weight.
    pub fn masked_mse(&mut self, pred: Var, target: Var, mask: Vec<T>) -> Result<Var> {
        self.check_pair("mse", pred, target)?;
        if mask.len() != self.value(pred).len() {
            return Err(Error::Shape(format!(
                "mse mask of {} for {} entries",
                mask.len(),
                self.value(pred).len()
            )));
        }
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let mut num = T::zero();
        let mut den = T::zero();
        for ((&a, &b), &m) in p.iter().zip(t).zip(&mask) {
            num += m * (a - b) * (a - b);
            den += m;
        }
        let v = if den > T::zero() { num / den } else { T::zero() };
        let needs = self.needs(&[pred, target]);
        Ok(self.push(Tensor::scalar(v), Op::MaskedMse { pred, target, mask }, needs))
    }

    pub fn rmse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.check_pair("rmse", pred, target)?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let n = T::of(p.len() as f64);
        let m: T = p.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n;
        let v = (m + T::of(RMSE_EPS)).sqrt();
        let needs = self.needs(&[pred, target]);
        Ok(self.push(Tensor::scalar(v), Op::Rmse { pred, target }, needs))
    }

    /// `sum_i weights[i] * x[i]`, a scalar.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<T>) -> Result<Var> {
        if weights.len() != self.value(x).len() {
            return Err(Error::Shape(format!(
                "weighted_sum: {} weights for {} entries",
                weights.len(),
                self.value(x).len()
            )));
        }
        let v = dot(self.value(x).data(), &weights);
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor::scalar(v), Op::WeightedSum { x, weights }, needs))
    }

    /// Gradients of the scalar `loss` with respect to every node that
    /// needs one.
    pub fn backward(&self, loss: Var) -> Grads<T> {
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one(); self.nodes[loss.0].value.len()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backward_node(node, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        Grads { grads }
    }

    fn backward_node(&self, node: &Node<T>, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| nodes[v.0].value.data();
        let wants = |v: Var| nodes[v.0].needs_grad;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if nodes[v.0].needs_grad {
                let g = grads[v.0].get_or_insert_with(|| vec![T::zero(); nodes[v.0].value.len()]);
                f(g);
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xv, wv) = (val(*x), val(*w));
                let fout = nodes[w.0].value.shape()[0];
                let fin = nodes[w.0].value.shape()[1];
                acc(*x, &mut |gx| {
                    for (grow, gyrow) in gx.chunks_exact_mut(fin).zip(gy.chunks_exact(fout)) {
                        for (o, &g) in gyrow.iter().enumerate() {
                            axpy(g, &wv[o * fin..(o + 1) * fin], grow);
                        }
                    }
                });
                acc(*w, &mut |gw| {
                    for (xrow, gyrow) in xv.chunks_exact(fin).zip(gy.chunks_exact(fout)) {
                        for (o, &g) in gyrow.iter().enumerate() {
                            axpy(g, xrow, &mut gw[o * fin..(o + 1) * fin]);
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for gyrow in gy.chunks_exact(fout) {
                        for (s, &g) in gb.iter_mut().zip(gyrow) {
                            *s += g;
                        }
                    }
                });
            }
            Op::Conv3d { x, w, b, geom } => {
                let geom = *geom;
                let (xv, wv) = (val(*x), val(*w));
                let rows = geom.rows();
                let npos = geom.positions();
                let in_len = geom.input_len();
                let out_len = geom.out_channels * npos;
                let need_x = wants(*x);
                // per-sample contributions, reduced below in sample order
                let per_sample: Vec<(Option<Vec<T>>, Vec<T>, Vec<T>)> = gy
                    .par_chunks(out_len)
                    .zip(xv.par_chunks(in_len))
                    .map(|(g, xin)| {
                        let mut col = vec![T::zero(); rows * npos];
                        geom.im2col(xin, &mut col);
                        let mut gw = vec![T::zero(); geom.out_channels * rows];
                        let mut gb = vec![T::zero(); geom.out_channels];
                        for k in 0..geom.out_channels {
                            let gk = &g[k * npos..(k + 1) * npos];
                            gb[k] = sum(gk);
                            for r in 0..rows {
                                gw[k * rows + r] = dot(gk, &col[r * npos..(r + 1) * npos]);
                            }
                        }
                        let gx = need_x.then(|| {
                            col.fill(T::zero());
                            for r in 0..rows {
                                let crow = &mut col[r * npos..(r + 1) * npos];
                                for k in 0..geom.out_channels {
                                    axpy(wv[k * rows + r], &g[k * npos..(k + 1) * npos], crow);
                                }
                            }
                            let mut gx = vec![T::zero(); in_len];
                            geom.col2im(&col, &mut gx);
                            gx
                        });
                        (gx, gw, gb)
                    })
                    .collect();
                acc(*w, &mut |gw| {
                    for (_, s, _) in &per_sample {
                        for (a, &b) in gw.iter_mut().zip(s) {
                            *a += b;
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for (_, _, s) in &per_sample {
                        for (a, &b) in gb.iter_mut().zip(s) {
                            *a += b;
                        }
                    }
                });
                acc(*x, &mut |gx| {
                    for (chunk, (s, _, _)) in gx.chunks_exact_mut(in_len).zip(&per_sample) {
                        if let Some(s) = s {
                            for (a, &b) in chunk.iter_mut().zip(s) {
                                *a += b;
                            }
                        }
                    }
                });
            }
            Op::Relu(x) => {
                let out = node.value.data();
                acc(*x, &mut |gx| {
                    for ((g, &o), &d) in gx.iter_mut().zip(out).zip(gy) {
                        if o > T::zero() {
                            *g += d;
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let k = *node.value.shape().last().unwrap();
                acc(*x, &mut |gx| {
                    for ((grow, yrow), gyrow) in gx.chunks_exact_mut(k).zip(y.chunks_exact(k)).zip(gy.chunks_exact(k)) {
                        let s = dot(yrow, gyrow);
                        for ((g, &yi), &gi) in grow.iter_mut().zip(yrow).zip(gyrow) {
                            *g += yi * (gi - s);
                        }
                    }
                });
            }
            Op::GlobalAvgPool(x) => {
                let s = nodes[x.0].value.shape();
                let vol: usize = s[2..].iter().product();
                let inv = T::of(1.0 / vol as f64);
                acc(*x, &mut |gx| {
                    for (chunk, &g) in gx.chunks_exact_mut(vol).zip(gy) {
                        let d = g * inv;
                        for e in chunk {
                            *e += d;
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let n = node.value.shape()[0];
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let w = nodes[p.0].value.shape()[1];
                    acc(p, &mut |gp| {
                        for r in 0..n {
                            for (a, &b) in gp[r * w..(r + 1) * w].iter_mut().zip(&gy[r * total + offset..]) {
                                *a += b;
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    acc(v, &mut |g| {
                        for (s, &d) in g.iter_mut().zip(gy) {
                            *s += d;
                        }
                    });
                }
            }
            Op::Gather { x, rows } => {
                let w = nodes[x.0].value.shape()[1];
                acc(*x, &mut |gx| {
                    for (i, &r) in rows.iter().enumerate() {
                        for (a, &b) in gx[r * w..(r + 1) * w].iter_mut().zip(&gy[i * w..(i + 1) * w]) {
                            *a += b;
                        }
                    }
                });
            }
            Op::RowDot(a, b) => {
                let k = nodes[a.0].value.shape()[1];
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for ((grow, brow), &g) in ga.chunks_exact_mut(k).zip(bv.chunks_exact(k)).zip(gy) {
                        axpy(g, brow, grow);
                    }
                });
                acc(*b, &mut |gb| {
                    for ((grow, arow), &g) in gb.chunks_exact_mut(k).zip(av.chunks_exact(k)).zip(gy) {
                        axpy(g, arow, grow);
                    }
                });
            }
            Op::MaskedMse { pred, target, mask } => {
                let den: T = mask.iter().copied().sum();
                if den > T::zero() {
                    let (p, t) = (val(*pred), val(*target));
                    let scale = gy[0] * T::of(2.0) / den;
                    acc(*pred, &mut |g| {
                        for (((s, &a), &b), &m) in g.iter_mut().zip(p).zip(t).zip(mask) {
                            *s += scale * m * (a - b);
                        }
                    });
                    acc(*target, &mut |g| {
                        for (((s, &a), &b), &m) in g.iter_mut().zip(p).zip(t).zip(mask) {
                            *s -= scale * m * (a - b);
                        }
                    });
                }
            }
            Op::Rmse { pred, target } => {
                let (p, t) = (val(*pred), val(*target));
                // d sqrt(m + eps) = dm / (2 sqrt(m + eps)), dm/dp = 2 (p - t) / n
                let scale = gy[0] / (node.value.item() * T::of(p.len() as f64));
                acc(*pred, &mut |g| {
                    for ((s, &a), &b) in g.iter_mut().zip(p).zip(t) {
                        *s += scale * (a - b);
                    }
                });
                acc(*target, &mut |g| {
                    for ((s, &a), &b) in g.iter_mut().zip(p).zip(t) {
                        *s -= scale * (a - b);
                    }
                });
            }
            Op::WeightedSum { x, weights } => {
                acc(*x, &mut |g| axpy(gy[0], weights, g));
            }
        }
    }
}

/// Result of [`Graph::backward`].
pub struct Grads<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
