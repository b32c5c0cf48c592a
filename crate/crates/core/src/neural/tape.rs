// SPDX-License-Identifier: Apache-2.0
//! Reverse-mode differentiation over a linear tape of tensor operations.

use std::collections::HashMap;
use std::sync::Arc;

use super::tensor::{Scalar, Tensor};

/// Named parameter tensors in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Arc<Tensor<T>>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn insert(&mut self, name: &str, t: Tensor<T>) {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.tensors.push(Arc::new(t));
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> &Tensor<T> {
        let i = self.id(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        &self.tensors[i]
    }

    pub fn by_id(&self, id: usize) -> &Tensor<T> {
        &self.tensors[id]
    }

    pub fn by_id_mut(&mut self, id: usize) -> &mut Tensor<T> {
        Arc::make_mut(&mut self.tensors[id])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter().map(|t| &**t))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }
}

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Elu(Var),
    LeakyRelu(Var, T),
    GatherRows(Var, Arc<Vec<usize>>),
    ScatterAddRows(Var, Arc<Vec<usize>>),
    SegmentSoftmax(Var, Arc<Vec<usize>>, usize),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    MeanRows(Var),
    MaskedLogSoftmax(Var, Vec<bool>),
    Pick(Var, usize),
    Sum(Var),
}

pub const MASK_SCORE: f64 = -1e9;

pub struct Tape<'p, T> {
    params: &'p ParamStore<T>,
    param_vars: Vec<Option<Var>>,
    values: Vec<Arc<Tensor<T>>>,
    ops: Vec<Op<T>>,
}

/// Gradients per parameter id; `None` for parameters the loss ignores.
pub type Grads<T> = Vec<Option<Tensor<T>>>;

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Tape<'p, T> {
        Tape {
            params,
            param_vars: vec![None; params.len()],
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.values.push(Arc::new(value));
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.values[v.0]
    }

    pub fn shared_value(&self, v: Var) -> Arc<Tensor<T>> {
        self.values[v.0].clone()
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn constant_shared(&mut self, t: Arc<Tensor<T>>) -> Var {
        self.values.push(t);
        self.ops.push(Op::Leaf);
        Var(self.values.len() - 1)
    }

    /// The parameter as a differentiable leaf; one leaf per tape.
    pub fn param(&mut self, name: &str) -> Var {
        let id = self
            .params
            .id(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        if let Some(v) = self.param_vars[id] {
            return v;
        }
        self.values.push(self.params.tensors[id].clone());
        self.ops.push(Op::Param(id));
        let v = Var(self.values.len() - 1);
        self.param_vars[id] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (x, r) = (self.value(a), self.value(row));
        assert_eq!(r.rows(), 1);
        assert_eq!(r.cols(), x.cols());
        let n = x.cols();
        let mut out = x.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o = *o + r.data()[i % n];
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// Scales row `i` of `a` by `col[i]`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (x, c) = (self.value(a), self.value(col));
        assert_eq!(c.cols(), 1);
        assert_eq!(c.rows(), x.rows());
        let n = x.cols();
        let mut out = x.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o = *o * c.data()[i / n];
        }
        self.push(out, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let v = self.value(a).map(|x| x * k);
        self.push(v, Op::Scale(a, k))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { x.exp_m1() });
        self.push(v, Op::Elu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { x * slope });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Arc<Vec<usize>>) -> Var {
        let x = self.value(a);
        let n = x.cols();
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx.iter() {
            data.extend_from_slice(x.row(i));
        }
        let v = Tensor::matrix(idx.len(), n, data);
        self.push(v, Op::GatherRows(a, idx))
    }

    /// Row `k` of `a` is added into output row `idx[k]`, in `k` order.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Arc<Vec<usize>>, out_rows: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.rows(), idx.len());
        let n = x.cols();
        let mut out = Tensor::zeros(&[out_rows, n]);
        for (k, &i) in idx.iter().enumerate() {
            let src = x.row(k);
            for (o, &s) in out.data_mut()[i * n..(i + 1) * n].iter_mut().zip(src) {
                *o = *o + s;
            }
        }
        self.push(out, Op::ScatterAddRows(a, idx))
    }

    /// Softmax of a column vector within each segment `seg[k]`.
    pub fn segment_softmax(&mut self, a: Var, seg: Arc<Vec<usize>>, segments: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.cols(), 1);
        assert_eq!(x.rows(), seg.len());
        let mut max = vec![T::neg_infinity(); segments];
        for (k, &s) in seg.iter().enumerate() {
            max[s] = max[s].max(x.data()[k]);
        }
        let e: Vec<T> = seg.iter().enumerate().map(|(k, &s)| (x.data()[k] - max[s]).exp()).collect();
        let mut total = vec![T::zero(); segments];
        for (k, &s) in seg.iter().enumerate() {
            total[s] = total[s] + e[k];
        }
        let data = seg.iter().enumerate().map(|(k, &s)| e[k] / total[s]).collect();
        let v = Tensor::matrix(seg.len(), 1, data);
        self.push(v, Op::SegmentSoftmax(a, seg, segments))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let x = self.value(p);
                assert_eq!(x.rows(), rows);
                data.extend_from_slice(x.row(r));
            }
        }
        let v = Tensor::matrix(rows, total, data);
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let x = self.value(a);
        let mut data = Vec::with_capacity(x.rows() * (end - start));
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row(r)[start..end]);
        }
        let v = Tensor::matrix(x.rows(), end - start, data);
        self.push(v, Op::SliceCols(a, start, end))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let (m, n) = (x.rows(), x.cols());
        let inv = T::one() / T::from_usize(m).unwrap();
        let mut data = vec![T::zero(); n];
        for r in 0..m {
            for (d, &v) in data.iter_mut().zip(x.row(r)) {
                *d = *d + v;
            }
        }
        for d in &mut data {
            *d = *d * inv;
        }
        self.push(Tensor::matrix(1, n, data), Op::MeanRows(a))
    }

    /// Log-softmax over all elements; entries with `available[i] == false`
    /// are replaced by a large negative score first.
    pub fn masked_log_softmax(&mut self, a: Var, available: Vec<bool>) -> Var {
        let x = self.value(a);
        assert_eq!(x.len(), available.len());
        let v = Tensor::new(x.shape().to_vec(), masked_log_softmax(x.data(), &available));
        self.push(v, Op::MaskedLogSoftmax(a, available))
    }

    pub fn pick(&mut self, a: Var, i: usize) -> Var {
        let v = Tensor::scalar(self.value(a).data()[i]);
        self.push(v, Op::Pick(a, i))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn sum_all(&mut self, parts: &[Var]) -> Var {
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = self.add(acc, p);
        }
        acc
    }

    /// Gradients of the scalar `out` with respect to every parameter leaf.
    pub fn backward(&self, out: Var) -> Grads<T> {
        assert_eq!(self.value(out).len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.values.len()];
        grads[out.0] = Some(Tensor::full(self.value(out).shape(), T::one()));
        let mut param_grads: Grads<T> = vec![None; self.params.len()];

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let acc = |grads: &mut Vec<Option<Tensor<T>>>, v: Var, d: Tensor<T>| match &mut grads[v.0] {
                Some(t) => t.add_assign(&d),
                slot @ None => *slot = Some(d),
            };
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Param(id) => param_grads[*id] = Some(g),
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b));
                    let db = self.value(*a).t_matmul(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let n = g.cols();
                    let mut dr = vec![T::zero(); n];
                    for (k, &x) in g.data().iter().enumerate() {
                        dr[k % n] = dr[k % n] + x;
                    }
                    acc(&mut grads, *row, Tensor::matrix(1, n, dr));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = g.zip(self.value(*b), |x, y| x * y);
                    let db = g.zip(self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MulCol(a, col) => {
                    let (x, c) = (self.value(*a), self.value(*col));
                    let n = x.cols();
                    let mut da = g.clone();
                    let mut dc = vec![T::zero(); c.rows()];
                    for (k, d) in da.data_mut().iter_mut().enumerate() {
                        dc[k / n] = dc[k / n] + *d * x.data()[k];
                        *d = *d * c.data()[k / n];
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *col, Tensor::matrix(c.rows(), 1, dc));
                }
                Op::Scale(a, k) => acc(&mut grads, *a, g.map(|x| x * *k)),
                Op::Tanh(a) => {
                    let d = g.zip(&self.values[i], |x, y| x * (T::one() - y * y));
                    acc(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = g.zip(&self.values[i], |x, y| x * y * (T::one() - y));
                    acc(&mut grads, *a, d);
                }
                Op::Elu(a) => {
                    let d = g.zip(&self.values[i], |x, y| if y > T::zero() { x } else { x * (y + T::one()) });
                    acc(&mut grads, *a, d);
                }
                Op::LeakyRelu(a, s) => {
                    let d = g.zip(self.value(*a), |x, y| if y > T::zero() { x } else { x * *s });
                    acc(&mut grads, *a, d);
                }
                Op::GatherRows(a, idx) => {
                    let x = self.value(*a);
                    let n = x.cols();
                    let mut d = Tensor::zeros(x.shape());
                    for (k, &r) in idx.iter().enumerate() {
                        for (o, &s) in d.data_mut()[r * n..(r + 1) * n].iter_mut().zip(g.row(k)) {
                            *o = *o + s;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ScatterAddRows(a, idx) => {
                    let n = g.cols();
                    let mut data = Vec::with_capacity(idx.len() * n);
                    for &r in idx.iter() {
                        data.extend_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, Tensor::matrix(idx.len(), n, data));
                }
                Op::SegmentSoftmax(a, seg, segments) => {
                    let y = &self.values[i];
                    let mut dot = vec![T::zero(); *segments];
                    for (k, &s) in seg.iter().enumerate() {
                        dot[s] = dot[s] + y.data()[k] * g.data()[k];
                    }
                    let data = seg
                        .iter()
                        .enumerate()
                        .map(|(k, &s)| y.data()[k] * (g.data()[k] - dot[s]))
                        .collect();
                    acc(&mut grads, *a, Tensor::matrix(seg.len(), 1, data));
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut data = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.row(r)[start..start + w]);
                        }
                        acc(&mut grads, p, Tensor::matrix(g.rows(), w, data));
                        start += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let x = self.value(*a);
                    let mut d = Tensor::zeros(x.shape());
                    let n = x.cols();
                    for r in 0..x.rows() {
                        d.data_mut()[r * n + start..r * n + end].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::MeanRows(a) => {
                    let x = self.value(*a);
                    let inv = T::one() / T::from_usize(x.rows()).unwrap();
                    let data = (0..x.len()).map(|k| g.data()[k % x.cols()] * inv).collect();
                    acc(&mut grads, *a, Tensor::new(x.shape().to_vec(), data));
                }
                Op::MaskedLogSoftmax(a, avail) => {
                    let y = &self.values[i];
                    let total: T = g.data().iter().copied().sum();
                    let data = (0..y.len())
                        .map(|k| {
                            if avail[k] {
                                g.data()[k] - y.data()[k].exp() * total
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    acc(&mut grads, *a, Tensor::new(y.shape().to_vec(), data));
                }
                Op::Pick(a, k) => {
                    let mut d = Tensor::zeros(self.value(*a).shape());
                    d.data_mut()[*k] = g.data()[0];
                    acc(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let d = Tensor::full(self.value(*a).shape(), g.data()[0]);
                    acc(&mut grads, *a, d);
                }
            }
        }
        param_grads
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Log-softmax with unavailable entries forced to a large negative score.
pub fn masked_log_softmax<T: Scalar>(scores: &[T], available: &[bool]) -> Vec<T> {
    let mask = T::lit(MASK_SCORE);
    let s: Vec<T> = scores
        .iter()
        .zip(available)
        .map(|(&x, &a)| if a { x } else { mask })
        .collect();
    let max = s.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = s.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
    s.iter().map(|&x| x - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_log_softmax_is_a_distribution() {
        let lp = masked_log_softmax(&[0.3f64, -2.0, 1.5, 0.0], &[true, false, true, true]);
        let total: f64 = lp.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(lp[1].exp(), 0.0);
        let one = masked_log_softmax(&[4.0f64, 1.0], &[false, true]);
        assert_eq!(one[1], 0.0);
    }

    #[test]
    fn backward_of_simple_expression() {
        let mut store = ParamStore::<f64>::default();
        store.insert("w", Tensor::matrix(1, 2, vec![2.0, -1.0]));
        let tape_store = store.clone();
        let mut tape = Tape::new(&tape_store);
        let w = tape.param("w");
        let x = tape.constant(Tensor::matrix(2, 1, vec![3.0, 4.0]));
        let y = tape.matmul(w, x);
        let z = tape.tanh(y);
        let g = tape.backward(z);
        let t = (2.0f64 * 3.0 - 4.0).tanh();
        let d = 1.0 - t * t;
        assert_eq!(g[0].as_ref().unwrap().data(), &[3.0 * d, 4.0 * d]);
    }
}
