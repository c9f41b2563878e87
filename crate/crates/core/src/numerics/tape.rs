//! Reverse-mode differentiation over a linear tape of recorded operations.
//!
//! Every value is a row-major matrix (vectors are single rows). The primitive
//! set is closed: matmul (plain and transposed-right), add/sub/mul with row
//! or scalar broadcasting, scale, tanh, sigmoid, softmax, fused
//! softmax + cross-entropy, column concat, row stacking, row mean, column
//! slice, embedding lookup, layer norm and full sum. Shape misuse panics;
//! data-dependent failures (out-of-range ids) return errors.
//!
//! Parameters are read in place from a borrowed [`ParamStore`]; their
//! gradients are accumulated into a [`Grads`] buffer by [`Tape::backward_into`].

use crate::error::{Error, Result};
use crate::numerics::ops::softmax_in_place;
use crate::numerics::real::{axpy, dot};
use crate::numerics::{Grads, ParamId, ParamStore, Real};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Embed { table: ParamId, row: usize },
    MatMul(Var, Var),
    Linear(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    SoftmaxXent { logits: Var, target: usize },
    ConcatCols(Var, Var),
    StackRows(Vec<Var>),
    MeanRows(Var),
    SliceCols { x: Var, start: usize },
    LayerNorm { x: Var, gain: Var, bias: Var },
    Sum(Var),
}

#[derive(Debug)]
struct Node<T> {
    rows: usize,
    cols: usize,
    value: Vec<T>,
    /// Op-specific saved state (softmax probabilities, layer-norm moments).
    aux: Vec<T>,
    op: Op,
    requires_grad: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    Row,
    Scalar,
}

fn bcast(a: (usize, usize), b: (usize, usize)) -> Bcast {
    if a == b {
        Bcast::Same
    } else if b == (1, 1) {
        Bcast::Scalar
    } else if b.0 == 1 && b.1 == a.1 {
        Bcast::Row
    } else {
        panic!("cannot broadcast {b:?} onto {a:?}")
    }
}

#[inline]
fn bidx(mode: Bcast, i: usize, cols: usize) -> usize {
    match mode {
        Bcast::Same => i,
        Bcast::Row => i % cols,
        Bcast::Scalar => 0,
    }
}

pub struct Tape<'p, T: Real> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<Var>>,
    #[cfg(test)]
    pub(crate) tanh_backward_fault: Option<f64>,
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(256),
            param_nodes: vec![None; params.len()],
            #[cfg(test)]
            tanh_backward_fault: None,
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<T>, op: Op, requires_grad: bool) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node { rows, cols, value, aux: Vec::new(), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[T] {
        let n = &self.nodes[v.0];
        match n.op {
            Op::Param(id) => self.params.get(id).data(),
            _ => &n.value,
        }
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> T {
        assert_eq!(self.shape(v), (1, 1), "scalar() on non-scalar node");
        self.value(v)[0]
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<T>) -> Var {
        assert_eq!(rows * cols, data.len(), "constant shape {rows}x{cols} vs {} values", data.len());
        self.push(rows, cols, data, Op::Constant, false)
    }

    pub fn row(&mut self, data: Vec<T>) -> Var {
        let n = data.len();
        self.constant(1, n, data)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(rows, cols, vec![T::zero(); rows * cols])
    }

    /// Trainable parameter leaf; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let (r, c) = self.params.get(id).matrix_dims();
        let v = self.push(r, c, Vec::new(), Op::Param(id), true);
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// Row `row` of the embedding table `table` as a 1×E node.
    pub fn embed(&mut self, table: ParamId, row: usize) -> Result<Var> {
        let t = self.params.get(table);
        let (rows, cols) = t.matrix_dims();
        if row >= rows {
            return Err(Error::InvalidArgument(format!(
                "id {row} out of range for {} ({rows} rows)",
                self.params.name(table)
            )));
        }
        let value = t.row(row).to_vec();
        Ok(self.push(1, cols, value, Op::Embed { table, row }, true))
    }

    /// `a (m×k) · b (k×n)`
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
        let mut out = vec![T::zero(); m * n];
        {
            let (av, bv) = (self.value(a), self.value(b));
            for i in 0..m {
                let orow = &mut out[i * n..(i + 1) * n];
                for kk in 0..k {
                    axpy(av[i * k + kk], &bv[kk * n..(kk + 1) * n], orow);
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(m, n, out, Op::MatMul(a, b), rg)
    }

    /// `a (m×k) · w (n×k)ᵀ`, the affine map with weights stored `(out, in)`.
    pub fn linear(&mut self, a: Var, w: Var) -> Var {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(w);
        assert_eq!(k, k2, "linear input dim {k} vs weight cols {k2}");
        let mut out = vec![T::zero(); m * n];
        {
            let (av, wv) = (self.value(a), self.value(w));
            for i in 0..m {
                let arow = &av[i * k..(i + 1) * k];
                for j in 0..n {
                    out[i * n + j] = dot(arow, &wv[j * k..(j + 1) * k]);
                }
            }
        }
        let rg = self.rg(a) || self.rg(w);
        self.push(m, n, out, Op::Linear(a, w), rg)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let mode = bcast(sa, sb);
        let out = {
            let (av, bv) = (self.value(a), self.value(b));
            av.iter().enumerate().map(|(i, &x)| f(x, bv[bidx(mode, i, sa.1)])).collect()
        };
        let rg = self.rg(a) || self.rg(b);
        self.push(sa.0, sa.1, out, op, rg)
    }

    /// Elementwise sum; `b` may be a row (broadcast over rows) or a scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product with the same broadcasting rules as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let (r, cols) = self.shape(a);
        let ct = T::from_f64(c);
        let out = self.value(a).iter().map(|&x| x * ct).collect();
        let rg = self.rg(a);
        self.push(r, cols, out, Op::Scale(a, c), rg)
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let rg = self.rg(a);
        self.push(r, c, out, op, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, T::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| T::one() / (T::one() + (-x).exp()), Op::Sigmoid(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(c) {
            softmax_in_place(row);
        }
        let rg = self.rg(a);
        self.push(r, c, out, Op::Softmax(a), rg)
    }

    /// `-log softmax(logits)[target]` for a single row of logits.
    pub fn softmax_xent(&mut self, logits: Var, target: usize) -> Result<Var> {
        let (r, c) = self.shape(logits);
        assert_eq!(r, 1, "softmax_xent expects one row of logits");
        if target >= c {
            return Err(Error::InvalidArgument(format!("target id {target} out of range ({c} classes)")));
        }
        let lv = self.value(logits);
        let max = lv.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = lv.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
        let loss = lse - lv[target];
        let probs: Vec<T> = lv.iter().map(|&x| (x - lse).exp()).collect();
        let rg = self.rg(logits);
        let v = self.push(1, 1, vec![loss], Op::SoftmaxXent { logits, target }, rg);
        self.nodes[v.0].aux = probs;
        Ok(v)
    }

    /// `[a | b]` for matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        assert_eq!(ra, rb, "concat_cols row counts {ra} vs {rb}");
        let mut out = Vec::with_capacity(ra * (ca + cb));
        {
            let (av, bv) = (self.value(a), self.value(b));
            for i in 0..ra {
                out.extend_from_slice(&av[i * ca..(i + 1) * ca]);
                out.extend_from_slice(&bv[i * cb..(i + 1) * cb]);
            }
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(ra, ca + cb, out, Op::ConcatCols(a, b), rg)
    }

    /// Vertical concatenation of nodes with equal column counts.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "stack_rows of nothing");
        let cols = self.shape(parts[0]).1;
        let mut rows = 0;
        let mut out = Vec::new();
        let mut rg = false;
        for &p in parts {
            let (r, c) = self.shape(p);
            assert_eq!(c, cols, "stack_rows column counts {c} vs {cols}");
            rows += r;
            out.extend_from_slice(self.value(p));
            rg |= self.rg(p);
        }
        self.push(rows, cols, out, Op::StackRows(parts.to_vec()), rg)
    }

    /// Column-wise mean over rows, giving one row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut out = vec![T::zero(); c];
        for row in self.value(a).chunks(c) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        let inv = T::one() / T::from_f64(r as f64);
        out.iter_mut().for_each(|x| *x *= inv);
        let rg = self.rg(a);
        self.push(1, c, out, Op::MeanRows(a), rg)
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(start + len <= c, "slice {start}+{len} beyond {c} columns");
        let av = self.value(a);
        let out = (0..r).flat_map(|i| av[i * c + start..i * c + start + len].iter().copied()).collect();
        let rg = self.rg(a);
        self.push(r, len, out, Op::SliceCols { x: a, start }, rg)
    }

    /// Row-wise layer normalization with a learnable gain and bias (both 1×n).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(gain), (1, c), "layer_norm gain shape");
        assert_eq!(self.shape(bias), (1, c), "layer_norm bias shape");
        let epsv = T::from_f64(eps);
        let mut out = Vec::with_capacity(r * c);
        let mut aux = Vec::with_capacity(2 * r);
        {
            let (xv, gv, bv) = (self.value(x), self.value(gain), self.value(bias));
            for row in xv.chunks(c) {
                let (mean, inv_std) = crate::numerics::ops::moments(row, epsv);
                aux.push(mean);
                aux.push(inv_std);
                out.extend(row.iter().zip(gv).zip(bv).map(|((&xi, &g), &b)| g * (xi - mean) * inv_std + b));
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        let v = self.push(r, c, out, Op::LayerNorm { x, gain, bias }, rg);
        self.nodes[v.0].aux = aux;
        v
    }

    /// Sum of all entries as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        let rg = self.rg(a);
        self.push(1, 1, vec![s], Op::Sum(a), rg)
    }

    /// Gradients of the scalar `loss` with respect to every parameter it reaches.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>> {
        let mut grads = Grads::new(self.params);
        self.backward_into(loss, T::one(), &mut grads)?;
        Ok(grads)
    }

    /// Adds `seed · ∂loss/∂θ` into `grads` for every reachable parameter θ.
    pub fn backward_into(&self, loss: Var, seed: T, grads: &mut Grads<T>) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::Shape(format!("backward needs a scalar loss, got {r}x{c}")));
        }
        let mut g: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        g[loss.0] = Some(vec![seed]);

        for i in (0..=loss.0).rev() {
            let Some(gi) = g[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let slot = grads.slot(*id, gi.len());
                    axpy(T::one(), &gi, slot);
                }
                Op::Embed { table, row } => {
                    let t = self.params.get(*table);
                    let cols = t.matrix_dims().1;
                    let slot = grads.slot(*table, t.len());
                    axpy(T::one(), &gi, &mut slot[row * cols..(row + 1) * cols]);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.rg(*a) {
                        let ga = acc(&mut g, *a, m * k);
                        for i in 0..m {
                            let grow = &gi[i * n..(i + 1) * n];
                            for kk in 0..k {
                                ga[i * k + kk] += dot(grow, &bv[kk * n..(kk + 1) * n]);
                            }
                        }
                    }
                    if self.rg(*b) {
                        let gb = acc(&mut g, *b, k * n);
                        for i in 0..m {
                            let grow = &gi[i * n..(i + 1) * n];
                            for kk in 0..k {
                                axpy(av[i * k + kk], grow, &mut gb[kk * n..(kk + 1) * n]);
                            }
                        }
                    }
                }
                Op::Linear(a, w) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    let (av, wv) = (self.value(*a), self.value(*w));
                    if self.rg(*a) {
                        let ga = acc(&mut g, *a, m * k);
                        for i in 0..m {
                            let garow = &mut ga[i * k..(i + 1) * k];
                            for j in 0..n {
                                axpy(gi[i * n + j], &wv[j * k..(j + 1) * k], garow);
                            }
                        }
                    }
                    if self.rg(*w) {
                        let gw = acc(&mut g, *w, n * k);
                        for i in 0..m {
                            let arow = &av[i * k..(i + 1) * k];
                            for j in 0..n {
                                axpy(gi[i * n + j], arow, &mut gw[j * k..(j + 1) * k]);
                            }
                        }
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -T::one() } else { T::one() };
                    if self.rg(*a) {
                        axpy(T::one(), &gi, acc(&mut g, *a, gi.len()));
                    }
                    if self.rg(*b) {
                        let mode = bcast(self.shape(*a), self.shape(*b));
                        let nb = self.value(*b).len();
                        let gb = acc(&mut g, *b, nb);
                        for (idx, &x) in gi.iter().enumerate() {
                            gb[bidx(mode, idx, node.cols)] += sign * x;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let mode = bcast(self.shape(*a), self.shape(*b));
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.rg(*a) {
                        let ga = acc(&mut g, *a, gi.len());
                        for (idx, &x) in gi.iter().enumerate() {
                            ga[idx] += x * bv[bidx(mode, idx, node.cols)];
                        }
                    }
                    if self.rg(*b) {
                        let gb = acc(&mut g, *b, bv.len());
                        for (idx, &x) in gi.iter().enumerate() {
                            gb[bidx(mode, idx, node.cols)] += x * av[idx];
                        }
                    }
                }
                Op::Scale(a, c) => {
                    axpy(T::from_f64(*c), &gi, acc(&mut g, *a, gi.len()));
                }
                Op::Tanh(a) => {
                    #[cfg(test)]
                    let fault = T::from_f64(self.tanh_backward_fault.unwrap_or(1.0));
                    #[cfg(not(test))]
                    let fault = T::one();
                    let ga = acc(&mut g, *a, gi.len());
                    for ((d, &x), &y) in ga.iter_mut().zip(&gi).zip(&node.value) {
                        *d += fault * x * (T::one() - y * y);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut g, *a, gi.len());
                    for ((d, &x), &y) in ga.iter_mut().zip(&gi).zip(&node.value) {
                        *d += x * y * (T::one() - y);
                    }
                }
                Op::Softmax(a) => {
                    let c = node.cols;
                    let ga = acc(&mut g, *a, gi.len());
                    for ((grow, yrow), darow) in gi.chunks(c).zip(node.value.chunks(c)).zip(ga.chunks_mut(c)) {
                        let inner = dot(grow, yrow);
                        for ((d, &x), &y) in darow.iter_mut().zip(grow).zip(yrow) {
                            *d += y * (x - inner);
                        }
                    }
                }
                Op::SoftmaxXent { logits, target } => {
                    let ga = acc(&mut g, *logits, node.aux.len());
                    let s = gi[0];
                    for (d, &p) in ga.iter_mut().zip(&node.aux) {
                        *d += s * p;
                    }
                    ga[*target] -= s;
                }
                Op::ConcatCols(a, b) => {
                    let (r, ca) = self.shape(*a);
                    let cb = self.shape(*b).1;
                    let c = ca + cb;
                    if self.rg(*a) {
                        let ga = acc(&mut g, *a, r * ca);
                        for i in 0..r {
                            axpy(T::one(), &gi[i * c..i * c + ca], &mut ga[i * ca..(i + 1) * ca]);
                        }
                    }
                    if self.rg(*b) {
                        let gb = acc(&mut g, *b, r * cb);
                        for i in 0..r {
                            axpy(T::one(), &gi[i * c + ca..(i + 1) * c], &mut gb[i * cb..(i + 1) * cb]);
                        }
                    }
                }
                Op::StackRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        if self.rg(p) {
                            axpy(T::one(), &gi[off..off + n], acc(&mut g, p, n));
                        }
                        off += n;
                    }
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.shape(*a);
                    let inv = T::one() / T::from_f64(r as f64);
                    let ga = acc(&mut g, *a, r * c);
                    for row in ga.chunks_mut(c) {
                        axpy(inv, &gi, row);
                    }
                }
                Op::SliceCols { x, start } => {
                    let (r, c) = self.shape(*x);
                    let len = node.cols;
                    let gx = acc(&mut g, *x, r * c);
                    for i in 0..r {
                        axpy(T::one(), &gi[i * len..(i + 1) * len], &mut gx[i * c + start..i * c + start + len]);
                    }
                }
                Op::LayerNorm { x, gain, bias } => {
                    let c = node.cols;
                    let r = node.rows;
                    let n = T::from_f64(c as f64);
                    let (xv, gv) = (self.value(*x), self.value(*gain));
                    let mut dgain = vec![T::zero(); c];
                    let mut dbias = vec![T::zero(); c];
                    let mut dx = vec![T::zero(); r * c];
                    let mut xhat = vec![T::zero(); c];
                    let mut dxhat = vec![T::zero(); c];
                    for i in 0..r {
                        let (mean, inv_std) = (node.aux[2 * i], node.aux[2 * i + 1]);
                        let grow = &gi[i * c..(i + 1) * c];
                        for j in 0..c {
                            xhat[j] = (xv[i * c + j] - mean) * inv_std;
                            dgain[j] += grow[j] * xhat[j];
                            dbias[j] += grow[j];
                            dxhat[j] = grow[j] * gv[j];
                        }
                        let m1 = dxhat.iter().copied().sum::<T>() / n;
                        let m2 = dot(&dxhat, &xhat) / n;
                        for j in 0..c {
                            dx[i * c + j] = inv_std * (dxhat[j] - m1 - xhat[j] * m2);
                        }
                    }
                    if self.rg(*x) {
                        axpy(T::one(), &dx, acc(&mut g, *x, r * c));
                    }
                    if self.rg(*gain) {
                        axpy(T::one(), &dgain, acc(&mut g, *gain, c));
                    }
                    if self.rg(*bias) {
                        axpy(T::one(), &dbias, acc(&mut g, *bias, c));
                    }
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    let s = gi[0];
                    acc(&mut g, *a, n).iter_mut().for_each(|d| *d += s);
                }
            }
        }
        Ok(())
    }
}

/// Gradient accumulator for node `v`, zero-initialized on first use.
fn acc<T: Real>(g: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut [T] {
    g[v.0].get_or_insert_with(|| vec![T::zero(); len])
}
