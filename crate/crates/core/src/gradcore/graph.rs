//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! Every op appends a node holding its forward value; nodes only refer to
//! earlier nodes, so a reverse sweep over the tape is a valid topological
//! order for backpropagation. A graph is single-use: `backward` may run once.

use super::tensor::{Parameter, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMulT {
        x: usize,
        w: usize,
    },
    AddBias {
        x: usize,
        b: usize,
    },
    Relu {
        x: usize,
    },
    ScaleUnits {
        x: usize,
        s: usize,
        active: Vec<bool>,
    },
    Conv2d {
        x: usize,
        w: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool2 {
        x: usize,
        argmax: Vec<usize>,
    },
    Reshape {
        x: usize,
    },
    Slice {
        x: usize,
        start: usize,
    },
    Sum {
        x: usize,
    },
    L1 {
        x: usize,
        active: Vec<bool>,
    },
    Scale {
        x: usize,
        c: f64,
    },
    Add {
        a: usize,
        b: usize,
    },
    CrossEntropy {
        logits: usize,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

fn mismatch(op: &'static str, expected: &[usize], actual: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        expected: expected.to_vec(),
        actual: actual.to_vec(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(
        &mut self,
        name: &'static str,
        value: Tensor,
        op: Op,
        parents: &[usize],
    ) -> Result<Var> {
        value.ensure_finite(name)?;
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        Ok(self.push(value, op, requires_grad))
    }

    /// Records a constant input; no gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a differentiable leaf.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a parameter leaf. Frozen parameters behave like inputs.
    pub fn param(&mut self, param: &Parameter) -> Var {
        self.push(param.value().clone(), Op::Leaf, param.trainable())
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the loss w.r.t. `v`, available after [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds the gradient recorded for `v` into `param`. Missing gradients
    /// (frozen leaves, disconnected nodes) add nothing.
    pub fn accumulate_into(&self, v: Var, param: &mut Parameter) -> Result<()> {
        match self.grad(v) {
            Some(g) => param.accumulate(g),
            None => Ok(()),
        }
    }

    /// `x · wᵀ` for `x: [B, I]`, `w: [O, I]`.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(mismatch("matmul_t", ws, xs));
        }
        let (b, i, o) = (xs[0], xs[1], ws[0]);
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut out = vec![0.0; b * o];
        for r in 0..b {
            let xr = &xv[r * i..(r + 1) * i];
            for c in 0..o {
                let wr = &wv[c * i..(c + 1) * i];
                out[r * o + c] = xr.iter().zip(wr).map(|(a, b)| a * b).sum();
            }
        }
        let value = Tensor::new(vec![b, o], out)?;
        self.push_checked("matmul_t", value, Op::MatMulT { x: x.0, w: w.0 }, &[x.0, w.0])
    }

    /// Adds `b: [C]` along axis 1 of `x: [B, C, ...]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let bs = self.value(b).shape();
        if xs.len() < 2 || bs != [xs[1]] {
            return Err(mismatch("add_bias", &xs[1..2.min(xs.len())], bs));
        }
        let channels = xs[1];
        let inner: usize = xs[2..].iter().product();
        let bv = self.value(b).data().to_vec();
        let mut out = self.value(x).clone();
        for (idx, v) in out.data_mut().iter_mut().enumerate() {
            *v += bv[(idx / inner) % channels];
        }
        self.push_checked("add_bias", out, Op::AddBias { x: x.0, b: b.0 }, &[x.0, b.0])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push_checked("relu", out, Op::Relu { x: x.0 }, &[x.0])
    }

    /// Multiplies every unit (axis 1) of `x: [B, U, ...]` by its score
    /// `s: [U]`. Units with `active[u] == false` are multiplied by zero and
    /// receive no score gradient. An empty `active` marks every unit active.
    pub fn scale_units(&mut self, x: Var, s: Var, active: &[bool]) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ss = self.value(s).shape();
        if xs.len() < 2 || ss != [xs[1]] || !(active.is_empty() || active.len() == xs[1]) {
            return Err(mismatch("scale_units", &xs[1..2.min(xs.len())], ss));
        }
        let units = xs[1];
        let inner: usize = xs[2..].iter().product();
        let factors: Vec<f64> = self
            .value(s)
            .data()
            .iter()
            .enumerate()
            .map(|(u, &v)| if active.is_empty() || active[u] { v } else { 0.0 })
            .collect();
        let mut out = self.value(x).clone();
        for (idx, v) in out.data_mut().iter_mut().enumerate() {
            *v *= factors[(idx / inner) % units];
        }
        let active = if active.is_empty() {
            vec![true; units]
        } else {
            active.to_vec()
        };
        self.push_checked(
            "scale_units",
            out,
            Op::ScaleUnits {
                x: x.0,
                s: s.0,
                active,
            },
            &[x.0, s.0],
        )
    }

    /// Direct 2-D convolution, `x: [B, C, H, W]`, `w: [O, C, KH, KW]`,
    /// zero padding on every side.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, padding: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || stride == 0 {
            return Err(mismatch("conv2d", &ws, &xs));
        }
        let geom = ConvGeom::new(&xs, &ws, stride, padding)
            .ok_or_else(|| mismatch("conv2d", &ws, &xs))?;
        let out = geom.forward(self.value(x).data(), self.value(w).data());
        let value = Tensor::new(vec![geom.b, geom.o, geom.ho, geom.wo], out)?;
        self.push_checked(
            "conv2d",
            value,
            Op::Conv2d {
                x: x.0,
                w: w.0,
                stride,
                padding,
            },
            &[x.0, w.0],
        )
    }

    /// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 4 || xs[2] < 2 || xs[3] < 2 {
            return Err(mismatch("max_pool2", &[0, 0, 2, 2], &xs));
        }
        let (b, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (ho, wo) = (h / 2, w / 2);
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(b * c * ho * wo);
        let mut argmax = Vec::with_capacity(b * c * ho * wo);
        for plane in 0..b * c {
            let base = plane * h * w;
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut best = base + (2 * oh) * w + 2 * ow;
                    for (dh, dw) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oh + dh) * w + 2 * ow + dw;
                        if xv[idx] > xv[best] {
                            best = idx;
                        }
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new(vec![b, c, ho, wo], out)?;
        self.push_checked("max_pool2", value, Op::MaxPool2 { x: x.0, argmax }, &[x.0])
    }

    /// Collapses everything after the leading axis.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let shape = vec![t.rows(), t.row_len()];
        if t.shape() == shape.as_slice() {
            return Ok(x);
        }
        let value = t.clone().reshape(shape)?;
        Ok(self.push(
            value,
            Op::Reshape { x: x.0 },
            self.nodes[x.0].requires_grad,
        ))
    }

    /// Contiguous sub-range of a 1-D variable.
    pub fn slice(&mut self, x: Var, range: std::ops::Range<usize>) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 1 || range.end > xv.len() || range.is_empty() {
            return Err(mismatch("slice", &[range.end], xv.shape()));
        }
        if range.start == 0 && range.end == xv.len() {
            return Ok(x);
        }
        let value = Tensor::new(vec![range.len()], xv.data()[range.clone()].to_vec())?;
        Ok(self.push(
            value,
            Op::Slice {
                x: x.0,
                start: range.start,
            },
            self.nodes[x.0].requires_grad,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total: f64 = self.value(x).data().iter().sum();
        self.push_checked("sum", Tensor::scalar(total), Op::Sum { x: x.0 }, &[x.0])
    }

    /// `Σ |x_i|` over entries with `active[i]`; empty `active` means all.
    pub fn l1(&mut self, x: Var, active: &[bool]) -> Result<Var> {
        let xv = self.value(x).data();
        if !(active.is_empty() || active.len() == xv.len()) {
            return Err(mismatch("l1", &[xv.len()], &[active.len()]));
        }
        let active = if active.is_empty() {
            vec![true; xv.len()]
        } else {
            active.to_vec()
        };
        let total: f64 = xv
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(v, _)| v.abs())
            .sum();
        self.push_checked("l1", Tensor::scalar(total), Op::L1 { x: x.0, active }, &[x.0])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v *= c;
        }
        self.push_checked("scale", out, Op::Scale { x: x.0, c }, &[x.0])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch("add", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        self.push_checked("add", value, Op::Add { a: a.0, b: b.0 }, &[a.0, b.0])
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lt = self.value(logits);
        if lt.rank() != 2 || lt.rows() != labels.len() {
            return Err(mismatch("cross_entropy", &[labels.len(), 0], lt.shape()));
        }
        let classes = lt.shape()[1];
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                num_classes: classes,
            });
        }
        let mut probs = Vec::with_capacity(lt.len());
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = lt.row(r);
            let (lse, p) = log_softmax_parts(row);
            total += lse - row[y];
            probs.extend(p);
        }
        let loss = total / labels.len() as f64;
        let op = Op::CrossEntropy {
            logits: logits.0,
            labels: labels.to_vec(),
            probs,
        };
        self.push_checked("cross_entropy", Tensor::scalar(loss), op, &[logits.0])
    }

    /// Backpropagates from the scalar `loss`. Callable once per graph.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        let loss_shape = self.value(loss).shape();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(loss_shape.to_vec()));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &dy, &mut grads)?;
            grads[idx] = Some(dy);
        }
        self.grads = grads;
        Ok(())
    }

    fn wants(&self, idx: usize) -> bool {
        self.nodes[idx].requires_grad
    }

    fn propagate(&self, idx: usize, dy: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMulT { x, w } => {
                let xv = &self.nodes[*x].value;
                let wv = &self.nodes[*w].value;
                let (b, i, o) = (xv.shape()[0], xv.shape()[1], wv.shape()[0]);
                let g = dy.data();
                if self.wants(*x) {
                    let mut dx = vec![0.0; b * i];
                    for r in 0..b {
                        let dxr = &mut dx[r * i..(r + 1) * i];
                        for c in 0..o {
                            let gv = g[r * o + c];
                            if gv == 0.0 {
                                continue;
                            }
                            let wr = &wv.data()[c * i..(c + 1) * i];
                            for (d, wv) in dxr.iter_mut().zip(wr) {
                                *d += gv * wv;
                            }
                        }
                    }
                    accumulate(grads, *x, xv.shape(), dx)?;
                }
                if self.wants(*w) {
                    let mut dw = vec![0.0; o * i];
                    for r in 0..b {
                        let xr = &xv.data()[r * i..(r + 1) * i];
                        for c in 0..o {
                            let gv = g[r * o + c];
                            if gv == 0.0 {
                                continue;
                            }
                            for (d, xv) in dw[c * i..(c + 1) * i].iter_mut().zip(xr) {
                                *d += gv * xv;
                            }
                        }
                    }
                    accumulate(grads, *w, wv.shape(), dw)?;
                }
            }
            Op::AddBias { x, b } => {
                if self.wants(*x) {
                    accumulate(grads, *x, dy.shape(), dy.data().to_vec())?;
                }
                if self.wants(*b) {
                    let shape = dy.shape();
                    let channels = shape[1];
                    let inner: usize = shape[2..].iter().product();
                    let mut db = vec![0.0; channels];
                    for (k, g) in dy.data().iter().enumerate() {
                        db[(k / inner) % channels] += g;
                    }
                    accumulate(grads, *b, &[channels], db)?;
                }
            }
            Op::Relu { x } => {
                if self.wants(*x) {
                    let xv = self.nodes[*x].value.data();
                    let dx = dy
                        .data()
                        .iter()
                        .zip(xv)
                        .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(grads, *x, dy.shape(), dx)?;
                }
            }
            Op::ScaleUnits { x, s, active } => {
                let xv = &self.nodes[*x].value;
                let sv = self.nodes[*s].value.data();
                let units = sv.len();
                let inner: usize = xv.shape()[2..].iter().product();
                if self.wants(*x) {
                    let dx = dy
                        .data()
                        .iter()
                        .enumerate()
                        .map(|(k, g)| {
                            let u = (k / inner) % units;
                            if active[u] {
                                g * sv[u]
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    accumulate(grads, *x, xv.shape(), dx)?;
                }
                if self.wants(*s) {
                    let mut ds = vec![0.0; units];
                    for (k, (g, v)) in dy.data().iter().zip(xv.data()).enumerate() {
                        ds[(k / inner) % units] += g * v;
                    }
                    for (d, &a) in ds.iter_mut().zip(active) {
                        if !a {
                            *d = 0.0;
                        }
                    }
                    accumulate(grads, *s, &[units], ds)?;
                }
            }
            Op::Conv2d {
                x,
                w,
                stride,
                padding,
            } => {
                let xv = &self.nodes[*x].value;
                let wv = &self.nodes[*w].value;
                let geom = ConvGeom::new(xv.shape(), wv.shape(), *stride, *padding)
                    .expect("geometry validated in forward");
                if self.wants(*x) {
                    let dx = geom.backward_input(dy.data(), wv.data());
                    accumulate(grads, *x, xv.shape(), dx)?;
                }
                if self.wants(*w) {
                    let dw = geom.backward_weight(dy.data(), xv.data());
                    accumulate(grads, *w, wv.shape(), dw)?;
                }
            }
            Op::MaxPool2 { x, argmax } => {
                if self.wants(*x) {
                    let xv = &self.nodes[*x].value;
                    let mut dx = vec![0.0; xv.len()];
                    for (g, &src) in dy.data().iter().zip(argmax) {
                        dx[src] += g;
                    }
                    accumulate(grads, *x, xv.shape(), dx)?;
                }
            }
            Op::Reshape { x } => {
                if self.wants(*x) {
                    let shape = self.nodes[*x].value.shape();
                    accumulate(grads, *x, shape, dy.data().to_vec())?;
                }
            }
            Op::Slice { x, start } => {
                if self.wants(*x) {
                    let shape = self.nodes[*x].value.shape();
                    let mut dx = vec![0.0; shape[0]];
                    dx[*start..*start + dy.len()].copy_from_slice(dy.data());
                    accumulate(grads, *x, shape, dx)?;
                }
            }
            Op::Sum { x } => {
                if self.wants(*x) {
                    let shape = self.nodes[*x].value.shape();
                    let n = self.nodes[*x].value.len();
                    accumulate(grads, *x, shape, vec![dy.item(); n])?;
                }
            }
            Op::L1 { x, active } => {
                if self.wants(*x) {
                    let xv = &self.nodes[*x].value;
                    let g = dy.item();
                    let dx = xv
                        .data()
                        .iter()
                        .zip(active)
                        .map(|(v, &a)| if a { g * sign(*v) } else { 0.0 })
                        .collect();
                    accumulate(grads, *x, xv.shape(), dx)?;
                }
            }
            Op::Scale { x, c } => {
                if self.wants(*x) {
                    let dx = dy.data().iter().map(|g| g * c).collect();
                    accumulate(grads, *x, dy.shape(), dx)?;
                }
            }
            Op::Add { a, b } => {
                for p in [*a, *b] {
                    if self.wants(p) {
                        accumulate(grads, p, dy.shape(), dy.data().to_vec())?;
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                if self.wants(*logits) {
                    let shape = self.nodes[*logits].value.shape();
                    let classes = shape[1];
                    let scale = dy.item() / labels.len() as f64;
                    let mut dl: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                    for (r, &y) in labels.iter().enumerate() {
                        dl[r * classes + y] -= scale;
                    }
                    accumulate(grads, *logits, shape, dl)?;
                }
            }
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn accumulate(grads: &mut [Option<Tensor>], idx: usize, shape: &[usize], delta: Vec<f64>) -> Result<()> {
    match &mut grads[idx] {
        Some(g) => {
            for (a, d) in g.data_mut().iter_mut().zip(delta) {
                *a += d;
            }
        }
        slot @ None => *slot = Some(Tensor::new(shape.to_vec(), delta)?),
    }
    Ok(())
}

/// Returns `(logsumexp(row), softmax(row))`, computed with max-subtraction.
pub(crate) fn log_softmax_parts(row: &[f64]) -> (f64, Vec<f64>) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let lse = max + z.ln();
    (lse, exps.into_iter().map(|e| e / z).collect())
}

struct ConvGeom {
    b: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    padding: usize,
}

impl ConvGeom {
    fn new(xs: &[usize], ws: &[usize], stride: usize, padding: usize) -> Option<Self> {
        let (b, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (o, kh, kw) = (ws[0], ws[2], ws[3]);
        let (hp, wp) = (h + 2 * padding, w + 2 * padding);
        if hp < kh || wp < kw || stride == 0 {
            return None;
        }
        Some(Self {
            b,
            c,
            h,
            w,
            o,
            kh,
            kw,
            ho: (hp - kh) / stride + 1,
            wo: (wp - kw) / stride + 1,
            stride,
            padding,
        })
    }

    /// Input coordinate for output position `out` and kernel offset `k`,
    /// or `None` when it falls in the zero padding.
    #[inline]
    fn src(&self, out: usize, k: usize, limit: usize) -> Option<usize> {
        let pos = (out * self.stride + k).checked_sub(self.padding)?;
        (pos < limit).then_some(pos)
    }

    fn forward(&self, x: &[f64], wt: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.b * self.o * self.ho * self.wo];
        for bi in 0..self.b {
            for oc in 0..self.o {
                let plane = &mut out[(bi * self.o + oc) * self.ho * self.wo..][..self.ho * self.wo];
                for ic in 0..self.c {
                    let xin = &x[(bi * self.c + ic) * self.h * self.w..][..self.h * self.w];
                    for i in 0..self.kh {
                        for j in 0..self.kw {
                            let wv = wt[((oc * self.c + ic) * self.kh + i) * self.kw + j];
                            for oh in 0..self.ho {
                                let Some(ih) = self.src(oh, i, self.h) else {
                                    continue;
                                };
                                for ow in 0..self.wo {
                                    if let Some(iw) = self.src(ow, j, self.w) {
                                        plane[oh * self.wo + ow] += wv * xin[ih * self.w + iw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn backward_input(&self, dy: &[f64], wt: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.b * self.c * self.h * self.w];
        for bi in 0..self.b {
            for oc in 0..self.o {
                let gplane = &dy[(bi * self.o + oc) * self.ho * self.wo..][..self.ho * self.wo];
                for ic in 0..self.c {
                    let dxin = &mut dx[(bi * self.c + ic) * self.h * self.w..][..self.h * self.w];
                    for i in 0..self.kh {
                        for j in 0..self.kw {
                            let wv = wt[((oc * self.c + ic) * self.kh + i) * self.kw + j];
                            for oh in 0..self.ho {
                                let Some(ih) = self.src(oh, i, self.h) else {
                                    continue;
                                };
                                for ow in 0..self.wo {
                                    if let Some(iw) = self.src(ow, j, self.w) {
                                        dxin[ih * self.w + iw] += wv * gplane[oh * self.wo + ow];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    fn backward_weight(&self, dy: &[f64], x: &[f64]) -> Vec<f64> {
        let mut dw = vec![0.0; self.o * self.c * self.kh * self.kw];
        for bi in 0..self.b {
            for oc in 0..self.o {
                let gplane = &dy[(bi * self.o + oc) * self.ho * self.wo..][..self.ho * self.wo];
                for ic in 0..self.c {
                    let xin = &x[(bi * self.c + ic) * self.h * self.w..][..self.h * self.w];
                    for i in 0..self.kh {
                        for j in 0..self.kw {
                            let mut acc = 0.0;
                            for oh in 0..self.ho {
                                let Some(ih) = self.src(oh, i, self.h) else {
                                    continue;
                                };
                                for ow in 0..self.wo {
                                    if let Some(iw) = self.src(ow, j, self.w) {
                                        acc += gplane[oh * self.wo + ow] * xin[ih * self.w + iw];
                                    }
                                }
                            }
                            dw[((oc * self.c + ic) * self.kh + i) * self.kw + j] += acc;
                        }
                    }
                }
            }
        }
        dw
    }
}
