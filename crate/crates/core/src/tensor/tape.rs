use std::sync::Arc;

use super::Tensor;
use crate::{Error, Result, Scalar};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRowBias(Var, Var),
    Relu(Var),
    LeakyRelu(Var, T),
    Sigmoid(Var),
    Sum(Var),
    GatherRows {
        x: Var,
        index: Arc<[usize]>,
    },
    SegmentSoftmax {
        x: Var,
        segments: Arc<[usize]>,
        n_segments: usize,
    },
    HeadDot {
        z: Var,
        a: Var,
    },
    EdgeAggregate {
        alpha: Var,
        z: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
    },
    HeadMean {
        x: Var,
        heads: usize,
    },
    WeightedBce {
        p: Var,
        labels: Arc<[u8]>,
        w_normal: T,
        w_anomalous: T,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records primitive operations in execution order so gradients can be
/// propagated back through them in exact reverse order.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Lower clamp for the arguments of the logarithms in the loss.
pub const LOG_CLAMP: f64 = 1e-12;

fn check_finite<T: Scalar>(op: &'static str, data: &[T]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

/// `c[m x n] += a[m x k] * b[k x n]`
fn gemm_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + aip * bv;
            }
        }
    }
}

/// Four interleaved partial sums, combined pairwise at the end.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] = acc[j] + x[j] * y[j];
        }
    }
    for (j, (&x, &y)) in ra.iter().zip(rb).enumerate() {
        acc[j] = acc[j] + x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Gradients are tracked when the tensor's
    /// `requires_grad` flag is set.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        let needs_grad = value.requires_grad();
        self.push(value, Op::Leaf, needs_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        check_finite(name, value.data())?;
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push(value, op, needs_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{m}x{k}] * [{k2}x{n}]")));
        }
        let mut c = vec![T::zero(); m * n];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut c, m, k, n);
        let out = Tensor::new(&[m, n], c)?;
        self.record("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::new(self.value(a).shape(), data)?;
        self.record("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::new(self.value(a).shape(), data)?;
        self.record("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// `x[m x n] + bias[n]`, bias broadcast over rows.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        if self.value(bias).len() != n {
            return Err(Error::shape(
                "add_row_bias",
                format!("{n} columns, bias of {}", self.value(bias).len()),
            ));
        }
        let b = self.value(bias).data();
        let mut data = self.value(x).data().to_vec();
        for row in data.chunks_exact_mut(n) {
            for (v, &bv) in row.iter_mut().zip(b) {
                *v = *v + bv;
            }
        }
        let out = Tensor::new(&[m, n], data)?;
        self.record("add_row_bias", out, Op::AddRowBias(x, bias), &[x, bias])
    }

    fn map(&mut self, name: &'static str, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Result<Var> {
        let src = self.value(x);
        let out = Tensor::new(src.shape(), src.data().iter().map(|&v| f(v)).collect())?;
        self.record(name, out, op, &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map("relu", x, Op::Relu(x), |v| v.max(T::zero()))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Result<Var> {
        self.map("leaky_relu", x, Op::LeakyRelu(x, slope), |v| if v > T::zero() { v } else { v * slope })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map("sigmoid", x, Op::Sigmoid(x), |v| {
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().copied().sum();
        self.record("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    /// `out[e, :] = x[index[e], :]`
    pub fn gather_rows(&mut self, x: Var, index: Arc<[usize]>) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if let Some(&i) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::shape("gather_rows", format!("row {i} of {rows}")));
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            data.extend_from_slice(&src[i * cols..(i + 1) * cols]);
        }
        let out = Tensor::new(&[index.len(), cols], data)?;
        self.record("gather_rows", out, Op::GatherRows { x, index }, &[x])
    }

    /// Softmax of each column of `x[E x H]` within groups of rows sharing
    /// a segment id. The segment maximum is subtracted before
    /// exponentiation.
    pub fn segment_softmax(&mut self, x: Var, segments: Arc<[usize]>, n_segments: usize) -> Result<Var> {
        let (e, h) = self.value(x).dims2()?;
        if segments.len() != e {
            return Err(Error::shape(
                "segment_softmax",
                format!("{e} logits, {} segment ids", segments.len()),
            ));
        }
        if let Some(&s) = segments.iter().find(|&&s| s >= n_segments) {
            return Err(Error::shape("segment_softmax", format!("segment {s} of {n_segments}")));
        }
        let out = Tensor::new(self.value(x).shape(), segment_softmax_values(self.value(x).data(), &segments, n_segments, h))?;
        self.record(
            "segment_softmax",
            out,
            Op::SegmentSoftmax {
                x,
                segments,
                n_segments,
            },
            &[x],
        )
    }

    /// Per-head projection: `z[N x H*D]`, `a[H x D]` gives
    /// `s[n, h] = z[n, h*D..(h+1)*D] . a[h, :]`.
    pub fn head_dot(&mut self, z: Var, a: Var) -> Result<Var> {
        let (n, width) = self.value(z).dims2()?;
        let (heads, d) = self.value(a).dims2()?;
        if heads * d != width {
            return Err(Error::shape("head_dot", format!("width {width} vs {heads} heads x {d}")));
        }
        let (zv, av) = (self.value(z).data(), self.value(a).data());
        let mut data = Vec::with_capacity(n * heads);
        for row in zv.chunks_exact(width) {
            for (zh, ah) in row.chunks_exact(d).zip(av.chunks_exact(d)) {
                data.push(dot(zh, ah));
            }
        }
        let out = Tensor::new(&[n, heads], data)?;
        self.record("head_dot", out, Op::HeadDot { z, a }, &[z, a])
    }

    /// Attention-weighted message passing. For every edge `e` and head
    /// `h`: `out[dst[e], h-block] += alpha[e, h] * z[src[e], h-block]`.
    /// Accumulation is sequential in edge order.
    pub fn edge_aggregate(&mut self, alpha: Var, z: Var, src: Arc<[usize]>, dst: Arc<[usize]>) -> Result<Var> {
        let (e, heads) = self.value(alpha).dims2()?;
        let (n, width) = self.value(z).dims2()?;
        if src.len() != e || dst.len() != e {
            return Err(Error::shape("edge_aggregate", "edge index length"));
        }
        if width % heads != 0 {
            return Err(Error::shape("edge_aggregate", format!("width {width} not divisible by {heads} heads")));
        }
        if src.iter().chain(dst.iter()).any(|&i| i >= n) {
            return Err(Error::shape("edge_aggregate", "edge endpoint out of range"));
        }
        let d = width / heads;
        let (av, zv) = (self.value(alpha).data(), self.value(z).data());
        let mut out = vec![T::zero(); n * width];
        for k in 0..e {
            let (s, t) = (src[k], dst[k]);
            let zrow = &zv[s * width..(s + 1) * width];
            let orow = &mut out[t * width..(t + 1) * width];
            for h in 0..heads {
                let a = av[k * heads + h];
                for (o, &zz) in orow[h * d..(h + 1) * d].iter_mut().zip(&zrow[h * d..(h + 1) * d]) {
                    *o = *o + a * zz;
                }
            }
        }
        let out = Tensor::new(&[n, width], out)?;
        self.record("edge_aggregate", out, Op::EdgeAggregate { alpha, z, src, dst }, &[alpha, z])
    }

    /// Average of `heads` equal-width column blocks.
    pub fn head_mean(&mut self, x: Var, heads: usize) -> Result<Var> {
        let (n, width) = self.value(x).dims2()?;
        if heads == 0 || width % heads != 0 {
            return Err(Error::shape("head_mean", format!("width {width}, {heads} heads")));
        }
        let d = width / heads;
        let inv = T::one() / T::of(heads as f64);
        let mut data = vec![T::zero(); n * d];
        for (row, orow) in self.value(x).data().chunks_exact(width).zip(data.chunks_exact_mut(d)) {
            for block in row.chunks_exact(d) {
                for (o, &v) in orow.iter_mut().zip(block) {
                    *o = *o + v;
                }
            }
            for o in orow.iter_mut() {
                *o = *o * inv;
            }
        }
        let out = Tensor::new(&[n, d], data)?;
        self.record("head_mean", out, Op::HeadMean { x, heads }, &[x])
    }

    /// Class-weighted binary cross-entropy of probabilities against 0/1
    /// labels, averaged over points. Log arguments are clamped at
    /// [`LOG_CLAMP`].
    pub fn weighted_bce(&mut self, p: Var, labels: Arc<[u8]>, w_normal: T, w_anomalous: T) -> Result<Var> {
        let pv = self.value(p).data();
        if pv.len() != labels.len() {
            return Err(Error::shape(
                "weighted_bce",
                format!("{} probabilities, {} labels", pv.len(), labels.len()),
            ));
        }
        let loss = bce_value(pv, &labels, w_normal, w_anomalous);
        self.record(
            "weighted_bce",
            Tensor::scalar(loss),
            Op::WeightedBce {
                p,
                labels,
                w_normal,
                w_anomalous,
            },
            &[p],
        )
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if !self.wants(v) {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().expect("matrix");
                let n = self.value(*b).dims2().expect("matrix").1;
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |da| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            da[i * k + p] = da[i * k + p] + dot(grow, &bv[p * n..(p + 1) * n]);
                        }
                    }
                });
                acc(*b, &mut |db| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == T::zero() {
                                continue;
                            }
                            for (d, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d = *d + aip * gv;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    acc(*v, &mut |d| d.iter_mut().zip(g).for_each(|(d, &gv)| *d = *d + gv));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * bv[i];
                    }
                });
                acc(*b, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * av[i];
                    }
                });
            }
            Op::AddRowBias(x, bias) => {
                let n = self.value(*bias).len();
                acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(d, &gv)| *d = *d + gv));
                acc(*bias, &mut |d| {
                    for row in g.chunks_exact(n) {
                        for (dv, &gv) in d.iter_mut().zip(row) {
                            *dv = *dv + gv;
                        }
                    }
                });
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        if xv[i] > T::zero() {
                            d[i] = d[i] + g[i];
                        }
                    }
                });
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        let s = if xv[i] > T::zero() { T::one() } else { *slope };
                        d[i] = d[i] + g[i] * s;
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * y[i] * (T::one() - y[i]);
                    }
                });
            }
            Op::Sum(x) => {
                acc(*x, &mut |d| d.iter_mut().for_each(|d| *d = *d + g[0]));
            }
            Op::GatherRows { x, index } => {
                let cols = self.value(*x).dims2().expect("matrix").1;
                acc(*x, &mut |d| {
                    for (e, &i) in index.iter().enumerate() {
                        for (dv, &gv) in d[i * cols..(i + 1) * cols].iter_mut().zip(&g[e * cols..(e + 1) * cols]) {
                            *dv = *dv + gv;
                        }
                    }
                });
            }
            Op::SegmentSoftmax {
                x,
                segments,
                n_segments,
            } => {
                let h = node.value.dims2().expect("matrix").1;
                let y = node.value.data();
                let mut inner = vec![T::zero(); n_segments * h];
                for (e, &s) in segments.iter().enumerate() {
                    for c in 0..h {
                        inner[s * h + c] = inner[s * h + c] + y[e * h + c] * g[e * h + c];
                    }
                }
                acc(*x, &mut |d| {
                    for (e, &s) in segments.iter().enumerate() {
                        for c in 0..h {
                            let i = e * h + c;
                            d[i] = d[i] + y[i] * (g[i] - inner[s * h + c]);
                        }
                    }
                });
            }
            Op::HeadDot { z, a } => {
                let (heads, dh) = self.value(*a).dims2().expect("matrix");
                let width = heads * dh;
                let (zv, av) = (self.value(*z).data(), self.value(*a).data());
                acc(*z, &mut |d| {
                    for (n, drow) in d.chunks_exact_mut(width).enumerate() {
                        for h in 0..heads {
                            let gh = g[n * heads + h];
                            for (dv, &a) in drow[h * dh..(h + 1) * dh].iter_mut().zip(&av[h * dh..(h + 1) * dh]) {
                                *dv = *dv + gh * a;
                            }
                        }
                    }
                });
                acc(*a, &mut |d| {
                    for (n, zrow) in zv.chunks_exact(width).enumerate() {
                        for h in 0..heads {
                            let gh = g[n * heads + h];
                            for (dv, &zz) in d[h * dh..(h + 1) * dh].iter_mut().zip(&zrow[h * dh..(h + 1) * dh]) {
                                *dv = *dv + gh * zz;
                            }
                        }
                    }
                });
            }
            Op::EdgeAggregate { alpha, z, src, dst } => {
                let heads = self.value(*alpha).dims2().expect("matrix").1;
                let width = self.value(*z).dims2().expect("matrix").1;
                let dh = width / heads;
                let (alv, zv) = (self.value(*alpha).data(), self.value(*z).data());
                acc(*alpha, &mut |d| {
                    for k in 0..src.len() {
                        let zrow = &zv[src[k] * width..(src[k] + 1) * width];
                        let grow = &g[dst[k] * width..(dst[k] + 1) * width];
                        for h in 0..heads {
                            let r = h * dh..(h + 1) * dh;
                            d[k * heads + h] = d[k * heads + h] + dot(&grow[r.clone()], &zrow[r]);
                        }
                    }
                });
                acc(*z, &mut |d| {
                    for k in 0..src.len() {
                        let grow = &g[dst[k] * width..(dst[k] + 1) * width];
                        let drow = &mut d[src[k] * width..(src[k] + 1) * width];
                        for h in 0..heads {
                            let a = alv[k * heads + h];
                            for (dv, &gv) in drow[h * dh..(h + 1) * dh].iter_mut().zip(&grow[h * dh..(h + 1) * dh]) {
                                *dv = *dv + a * gv;
                            }
                        }
                    }
                });
            }
            Op::HeadMean { x, heads } => {
                let width = self.value(*x).dims2().expect("matrix").1;
                let dh = width / heads;
                let inv = T::one() / T::of(*heads as f64);
                acc(*x, &mut |d| {
                    for (drow, grow) in d.chunks_exact_mut(width).zip(g.chunks_exact(dh)) {
                        for block in drow.chunks_exact_mut(dh) {
                            for (dv, &gv) in block.iter_mut().zip(grow) {
                                *dv = *dv + gv * inv;
                            }
                        }
                    }
                });
            }
            Op::WeightedBce {
                p,
                labels,
                w_normal,
                w_anomalous,
            } => {
                let pv = self.value(*p).data();
                let eps = T::of(LOG_CLAMP);
                let scale = g[0] / T::of(pv.len() as f64);
                acc(*p, &mut |d| {
                    for i in 0..d.len() {
                        let q = pv[i];
                        let grad = if labels[i] == 1 {
                            if q > eps { -*w_anomalous / q } else { T::zero() }
                        } else if T::one() - q > eps {
                            *w_normal / (T::one() - q)
                        } else {
                            T::zero()
                        };
                        d[i] = d[i] + scale * grad;
                    }
                });
            }
        }
    }
}

fn segment_softmax_values<T: Scalar>(x: &[T], segments: &[usize], n_segments: usize, h: usize) -> Vec<T> {
    let mut max = vec![T::neg_infinity(); n_segments * h];
    for (e, &s) in segments.iter().enumerate() {
        for c in 0..h {
            let m = &mut max[s * h + c];
            *m = m.max(x[e * h + c]);
        }
    }
    let mut out = vec![T::zero(); x.len()];
    let mut denom = vec![T::zero(); n_segments * h];
    for (e, &s) in segments.iter().enumerate() {
        for c in 0..h {
            let v = (x[e * h + c] - max[s * h + c]).exp();
            out[e * h + c] = v;
            denom[s * h + c] = denom[s * h + c] + v;
        }
    }
    for (e, &s) in segments.iter().enumerate() {
        for c in 0..h {
            out[e * h + c] = out[e * h + c] / denom[s * h + c];
        }
    }
    out
}

pub(crate) fn bce_value<T: Scalar>(p: &[T], labels: &[u8], w_normal: T, w_anomalous: T) -> T {
    let eps = T::of(LOG_CLAMP);
    let total = p.iter().zip(labels).fold(T::zero(), |acc, (&q, &y)| {
        acc + if y == 1 {
            w_anomalous * q.max(eps).ln()
        } else {
            w_normal * (T::one() - q).max(eps).ln()
        }
    });
    -total / T::of(p.len().max(1) as f64)
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to `v`, or `None` when `v` does not reach a
    /// tracked input or does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Like [`get`](Self::get) with an all-zero fallback of length `len`.
    pub fn get_or_zeros(&self, v: Var, len: usize) -> Vec<T> {
        self.get(v).map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); len])
    }
}
