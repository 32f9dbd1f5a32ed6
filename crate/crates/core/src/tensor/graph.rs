use std::borrow::Cow;

use rand::Rng as _;

use super::kernels::{self, matmul_nt_acc, matmul_tn_acc};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Score assigned to masked attention keys before normalization. Masked
/// weights are then forced to exactly zero.
pub const MASK_FILL: f64 = -1e9;

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Concat(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    StackRows(Vec<Var>),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    Sum(Var),
    BceLogits {
        logits: Var,
        targets: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node<'p> {
    value: Cow<'p, [f64]>,
    shape: Vec<usize>,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
    param: Option<ParamId>,
}

/// Tape of executed operations. Values are recorded in execution order, so
/// node indices are already a topological order and backward is a reverse
/// scan.
///
/// A graph built with [`Graph::training`] owns the dropout RNG; an eval graph
/// treats dropout as identity.
#[derive(Debug)]
pub struct Graph<'p> {
    nodes: Vec<Node<'p>>,
    bound: Vec<Option<Var>>,
    rng: Option<Rng>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn cols(shape: &[usize]) -> usize {
    *shape.last().unwrap()
}

fn rows(shape: &[usize]) -> usize {
    shape.iter().product::<usize>() / cols(shape)
}

impl<'p> Graph<'p> {
    /// Eval-mode graph.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            bound: Vec::new(),
            rng: None,
        }
    }

    /// Training-mode graph; dropout masks are drawn from `rng`.
    pub fn training(rng: Rng) -> Self {
        Self {
            nodes: Vec::new(),
            bound: Vec::new(),
            rng: Some(rng),
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, [f64]>, shape: Vec<usize>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(value.len(), shape.iter().product::<usize>());
        self.nodes.push(Node {
            value,
            shape,
            op,
            requires_grad,
            grad: None,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn op(&mut self, value: Vec<f64>, shape: Vec<usize>, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), shape, op, rg)
    }

    /// Binds a registry parameter as a leaf, borrowing its storage. Binding the
    /// same id twice returns the same handle.
    pub fn param(&mut self, store: &'p ParamStore, id: ParamId) -> Var {
        if let Some(Some(v)) = self.bound.get(id.0) {
            return *v;
        }
        let t = store.value(id);
        let var = self.push(
            Cow::Borrowed(t.data()),
            t.shape().to_vec(),
            Op::Leaf,
            store.is_trainable(id),
        );
        self.nodes[var.0].param = Some(id);
        if self.bound.len() <= id.0 {
            self.bound.resize(id.0 + 1, None);
        }
        self.bound[id.0] = Some(var);
        var
    }

    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        let shape = t.shape().to_vec();
        self.push(Cow::Owned(t.into_data()), shape, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.to_vec()).expect("recorded shapes are valid")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Gradients of every bound parameter reached by backward.
    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.nodes.iter().filter_map(|n| Some((n.param?, n.grad.as_deref()?)))
    }

    // ---- primitives ---------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = kernels::matmul(self.value(a), self.value(b), m, k, n);
        Ok(self.op(out, vec![m, n], Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 {
            return Err(Error::shape("transpose", s, &[2]));
        }
        let (r, c) = (s[0], s[1]);
        let v = self.value(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v[i * c + j];
            }
        }
        Ok(self.op(out, vec![c, r], Op::Transpose(x), &[x]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("add", self.shape(a), self.shape(b)));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.op(out, shape, Op::Add(a, b), &[a, b]))
    }

    /// Adds a bias vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let c = cols(self.shape(x));
        if self.value(bias).len() != c {
            return Err(Error::shape("add_row", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias);
        let out = self
            .value(x)
            .chunks(c)
            .flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y))
            .collect();
        let shape = self.shape(x).to_vec();
        Ok(self.op(out, shape, Op::AddRow(x, bias), &[x, bias]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("mul", self.shape(a), self.shape(b)));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.op(out, shape, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).iter().map(|v| v * s).collect();
        let shape = self.shape(x).to_vec();
        self.op(out, shape, Op::Scale(x, s), &[x])
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        self.op(out, shape, op, &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, kernels::sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, kernels::gelu, Op::Gelu(x))
    }

    /// Row-wise softmax over the last dimension. `keep[j] == false` masks
    /// column `j` in every row: its weight is exactly zero and the remaining
    /// weights renormalize. A row with every column masked yields zeros.
    pub fn softmax_lastdim(&mut self, x: Var, keep: Option<&[bool]>) -> Result<Var> {
        let c = cols(self.shape(x));
        if let Some(k) = keep {
            if k.len() != c {
                return Err(Error::shape("softmax mask", self.shape(x), &[k.len()]));
            }
        }
        let kept = |j: usize| keep.is_none_or(|k| k[j]);
        let mut out = Vec::with_capacity(self.value(x).len());
        let mut all_masked = false;
        for row in self.value(x).chunks(c) {
            let filled: Vec<f64> = (0..c).map(|j| if kept(j) { row[j] } else { MASK_FILL }).collect();
            if (0..c).all(|j| !kept(j)) {
                all_masked = true;
                out.extend(std::iter::repeat_n(0.0, c));
                continue;
            }
            let max = filled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = (0..c)
                .map(|j| if kept(j) { (filled[j] - max).exp() } else { 0.0 })
                .collect();
            let z: f64 = exps.iter().sum();
            out.extend(exps.iter().map(|e| e / z));
        }
        if all_masked {
            log::warn!("softmax: row with every position masked, returning zeros");
        }
        let shape = self.shape(x).to_vec();
        Ok(self.op(out, shape, Op::Softmax(x), &[x]))
    }

    /// Normalizes each row over the last dimension, then applies gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let d = cols(self.shape(x));
        if self.value(gain).len() != d || self.value(bias).len() != d {
            return Err(Error::shape("layer_norm", self.shape(x), self.shape(gain)));
        }
        if eps <= 0.0 {
            return Err(Error::config("layer_norm eps must be positive"));
        }
        let n_rows = rows(self.shape(x));
        let (g, b) = (self.value(gain), self.value(bias));
        let mut out = Vec::with_capacity(n_rows * d);
        let mut xhat = Vec::with_capacity(n_rows * d);
        let mut rstd = Vec::with_capacity(n_rows);
        for row in self.value(x).chunks(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd.push(r);
            for j in 0..d {
                let h = (row[j] - mean) * r;
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.op(
            out,
            shape,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            &[x, gain, bias],
        ))
    }

    /// Inverted dropout. Identity in eval graphs and when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("dropout probability {p} outside [0, 1)")));
        }
        if p == 0.0 {
            return Ok(x);
        }
        let Some(rng) = self.rng.as_mut() else {
            return Ok(x);
        };
        let n = self.nodes[x.0].value.len();
        let keep_scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep_scale })
            .collect();
        let out = self.value(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.op(out, shape, Op::Dropout { x, mask }, &[x]))
    }

    /// Concatenates along the last dimension; all operands share row count.
    pub fn concat_lastdim(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::config("concat of nothing"))?;
        let r = rows(self.shape(first));
        let lead = self.shape(first)[..self.shape(first).len() - 1].to_vec();
        for &p in parts {
            let s = self.shape(p);
            if s[..s.len() - 1] != lead[..] {
                return Err(Error::shape("concat_lastdim", self.shape(first), s));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|&p| cols(self.shape(p))).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p)[i * w..(i + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        Ok(self.op(out, shape, Op::Concat(parts.to_vec()), parts))
    }

    /// Columns `start..start+len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || len == 0 || start + len > s[1] {
            return Err(Error::shape("slice_cols", s, &[start, len]));
        }
        let (r, c) = (s[0], s[1]);
        let v = self.value(x);
        let out = (0..r)
            .flat_map(|i| v[i * c + start..i * c + start + len].iter().copied())
            .collect();
        Ok(self.op(out, vec![r, len], Op::SliceCols { x, start }, &[x]))
    }

    /// Rows `start..start+len` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || len == 0 || start + len > s[0] {
            return Err(Error::shape("slice_rows", s, &[start, len]));
        }
        let c = s[1];
        let out = self.value(x)[start * c..(start + len) * c].to_vec();
        Ok(self.op(out, vec![len, c], Op::SliceRows { x, start }, &[x]))
    }

    /// Stacks matrices with a shared column count on top of each other.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::config("stack of nothing"))?;
        let c = cols(self.shape(first));
        let mut out = Vec::new();
        let mut r = 0;
        for &p in parts {
            if self.shape(p).len() != 2 || cols(self.shape(p)) != c {
                return Err(Error::shape("stack_rows", self.shape(first), self.shape(p)));
            }
            r += self.shape(p)[0];
            out.extend_from_slice(self.value(p));
        }
        Ok(self.op(out, vec![r, c], Op::StackRows(parts.to_vec()), parts))
    }

    /// Row gather from a `V × d` table.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape(table);
        if s.len() != 2 {
            return Err(Error::shape("embedding_lookup", s, &[2]));
        }
        let (v, d) = (s[0], s[1]);
        if let Some(&bad) = ids.iter().find(|&&id| id >= v) {
            return Err(Error::Index { id: bad, size: v });
        }
        if ids.is_empty() {
            return Err(Error::config("embedding lookup with no ids"));
        }
        let t = self.value(table);
        let out = ids
            .iter()
            .flat_map(|&id| t[id * d..(id + 1) * d].iter().copied())
            .collect();
        Ok(self.op(
            out,
            vec![ids.len(), d],
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.op(vec![s], vec![1], Op::Sum(x), &[x])
    }

    /// Binary cross-entropy from logits: sum over the label columns, mean
    /// over the rows, computed in the stable logit form.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        if self.shape(logits) != targets.shape() {
            return Err(Error::shape("bce_with_logits", self.shape(logits), targets.shape()));
        }
        if let Some(bad) = targets.data().iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::Data(format!("BCE target {bad} is not binary")));
        }
        let b = rows(self.shape(logits)) as f64;
        let total: f64 = self
            .value(logits)
            .iter()
            .zip(targets.data())
            .map(|(&z, &y)| kernels::bce_with_logit(z, y))
            .sum();
        Ok(self.op(
            vec![total / b],
            vec![1],
            Op::BceLogits {
                logits,
                targets: targets.data().to_vec(),
            },
            &[logits],
        ))
    }

    // ---- reverse pass -------------------------------------------------

    /// Propagates d(loss)/d(node) back through the tape. Leaf gradients are
    /// added to whatever a previous backward left there.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::NonScalarLoss(self.nodes[loss.0].shape.clone()));
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut leaves = Vec::new();

        fn slot<'a>(grads: &'a mut [Option<Vec<f64>>], nodes: &[Node<'_>], v: Var) -> Option<&'a mut Vec<f64>> {
            if !nodes[v.0].requires_grad {
                return None;
            }
            Some(grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]))
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let y = &node.value;
            match &node.op {
                Op::Leaf => leaves.push((i, g)),
                Op::MatMul(a, b) => {
                    let (m, k) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                    let n = nodes[b.0].shape[1];
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        matmul_nt_acc(&g, &nodes[b.0].value, m, n, k, da);
                    }
                    if let Some(db) = slot(&mut grads, nodes, *b) {
                        matmul_tn_acc(&nodes[a.0].value, &g, m, k, n, db);
                    }
                }
                Op::Transpose(x) => {
                    let (r, c) = (nodes[x.0].shape[0], nodes[x.0].shape[1]);
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for i in 0..r {
                            for j in 0..c {
                                dx[i * c + j] += g[j * r + i];
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if let Some(d) = slot(&mut grads, nodes, v) {
                            d.iter_mut().zip(&g).for_each(|(d, g)| *d += g);
                        }
                    }
                }
                Op::AddRow(x, bias) => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        dx.iter_mut().zip(&g).for_each(|(d, g)| *d += g);
                    }
                    let c = cols(&node.shape);
                    if let Some(db) = slot(&mut grads, nodes, *bias) {
                        for row in g.chunks(c) {
                            db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        for j in 0..g.len() {
                            da[j] += g[j] * bv[j];
                        }
                    }
                    if let Some(db) = slot(&mut grads, nodes, *b) {
                        for j in 0..g.len() {
                            db[j] += g[j] * av[j];
                        }
                    }
                }
                Op::Scale(x, s) => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        dx.iter_mut().zip(&g).for_each(|(d, g)| *d += g * s);
                    }
                }
                Op::Sigmoid(x) => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for j in 0..g.len() {
                            dx[j] += g[j] * y[j] * (1.0 - y[j]);
                        }
                    }
                }
                Op::Tanh(x) => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for j in 0..g.len() {
                            dx[j] += g[j] * (1.0 - y[j] * y[j]);
                        }
                    }
                }
                Op::Gelu(x) => {
                    let xv = &nodes[x.0].value;
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for j in 0..g.len() {
                            dx[j] += g[j] * kernels::gelu_grad(xv[j]);
                        }
                    }
                }
                Op::Softmax(x) => {
                    let c = cols(&node.shape);
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for ((yr, gr), dr) in y.chunks(c).zip(g.chunks(c)).zip(dx.chunks_mut(c)) {
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for j in 0..c {
                                dr[j] += yr[j] * (gr[j] - dot);
                            }
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    rstd,
                } => {
                    let d = cols(&node.shape);
                    let gv = &nodes[gain.0].value;
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for (r, ((gr, hr), dr)) in g.chunks(d).zip(xhat.chunks(d)).zip(dx.chunks_mut(d)).enumerate() {
                            let dxhat: Vec<f64> = gr.iter().zip(gv.iter()).map(|(a, b)| a * b).collect();
                            let s1: f64 = dxhat.iter().sum();
                            let s2: f64 = dxhat.iter().zip(hr).map(|(a, b)| a * b).sum();
                            let k = rstd[r] / d as f64;
                            for j in 0..d {
                                dr[j] += k * (d as f64 * dxhat[j] - s1 - hr[j] * s2);
                            }
                        }
                    }
                    if let Some(dg) = slot(&mut grads, nodes, *gain) {
                        for (gr, hr) in g.chunks(d).zip(xhat.chunks(d)) {
                            for j in 0..d {
                                dg[j] += gr[j] * hr[j];
                            }
                        }
                    }
                    if let Some(db) = slot(&mut grads, nodes, *bias) {
                        for gr in g.chunks(d) {
                            db.iter_mut().zip(gr).for_each(|(d, g)| *d += g);
                        }
                    }
                }
                Op::Dropout { x, mask } => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for j in 0..g.len() {
                            dx[j] += g[j] * mask[j];
                        }
                    }
                }
                Op::Concat(parts) => {
                    let total = cols(&node.shape);
                    let r = rows(&node.shape);
                    let mut offset = 0;
                    for p in parts {
                        let w = cols(&nodes[p.0].shape);
                        if let Some(dp) = slot(&mut grads, nodes, *p) {
                            for i in 0..r {
                                for j in 0..w {
                                    dp[i * w + j] += g[i * total + offset + j];
                                }
                            }
                        }
                        offset += w;
                    }
                }
                Op::SliceCols { x, start } => {
                    let (r, len) = (node.shape[0], node.shape[1]);
                    let c = nodes[x.0].shape[1];
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for i in 0..r {
                            for j in 0..len {
                                dx[i * c + start + j] += g[i * len + j];
                            }
                        }
                    }
                }
                Op::SliceRows { x, start } => {
                    let c = node.shape[1];
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        dx[start * c..start * c + g.len()]
                            .iter_mut()
                            .zip(&g)
                            .for_each(|(d, g)| *d += g);
                    }
                }
                Op::StackRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = nodes[p.0].value.len();
                        if let Some(dp) = slot(&mut grads, nodes, *p) {
                            dp.iter_mut().zip(&g[offset..offset + n]).for_each(|(d, g)| *d += g);
                        }
                        offset += n;
                    }
                }
                Op::Gather { table, ids } => {
                    let d = node.shape[1];
                    if let Some(dt) = slot(&mut grads, nodes, *table) {
                        for (r, &id) in ids.iter().enumerate() {
                            for j in 0..d {
                                dt[id * d + j] += g[r * d + j];
                            }
                        }
                    }
                }
                Op::Sum(x) => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        dx.iter_mut().for_each(|d| *d += g[0]);
                    }
                }
                Op::BceLogits { logits, targets } => {
                    let b = rows(&nodes[logits.0].shape) as f64;
                    let z = &nodes[logits.0].value;
                    if let Some(dz) = slot(&mut grads, nodes, *logits) {
                        for j in 0..dz.len() {
                            dz[j] += g[0] * (kernels::sigmoid(z[j]) - targets[j]) / b;
                        }
                    }
                }
            }
        }

        for (i, g) in leaves {
            match &mut self.nodes[i].grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, g)| *a += g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }
}
