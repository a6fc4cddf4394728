use std::cell::{Cell, RefCell};
use std::fmt;

use super::kernels::{self, normal_cdf, normal_pdf};
use super::Tensor;
use crate::error::{Error, Result};

/// Storage precision of recorded values.
///
/// `F32` rounds every recorded value through `f32`; arithmetic inside an op
/// still runs in `f64`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// Layer normalization flavour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NormMode {
    /// Subtract the mean, divide by the standard deviation, scale and offset.
    #[default]
    Standard,
    /// Divide by the root mean square and scale; no centring, no offset.
    Rms,
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    AddColumn(usize, usize),
    Transpose(usize),
    Scale(usize, f64),
    MaskFill(usize, Vec<bool>),
    SoftmaxColumns(usize),
    Relu(usize),
    Gelu(usize),
    Norm {
        x: usize,
        gamma: usize,
        beta: Option<usize>,
        normalized: Tensor,
        inv_scale: Vec<f64>,
    },
    ConcatRows(Vec<usize>),
    GatherColumns(usize, Vec<usize>),
    NegLogPick(usize, Vec<(usize, usize)>),
    Sum(usize),
    Log(usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of one forward computation.
///
/// A tape serves exactly one backward pass; create a fresh one per
/// forward/backward cycle and drop it afterwards. It is single-threaded.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
    precision: Precision,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .field("consumed", &self.consumed.get())
            .field("precision", &self.precision)
            .finish()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

/// Result of [`Tape::backward`]: gradients of the loss w.r.t. every leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the loss does not depend on it.
    pub fn get(&self, var: Var<'_>) -> Tensor {
        match &self.grads[var.id] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.id];
                Tensor::zeros(r, c)
            }
        }
    }

    /// Moves the gradient out, leaving zeros behind.
    pub fn take(&mut self, var: Var<'_>) -> Tensor {
        self.grads[var.id].take().unwrap_or_else(|| {
            let (r, c) = self.shapes[var.id];
            Tensor::zeros(r, c)
        })
    }
}

fn check_values(op: &'static str, t: &Tensor, allow_neg_inf: bool) -> Result<()> {
    let ok = t
        .data()
        .iter()
        .all(|v| v.is_finite() || (allow_neg_inf && *v == f64::NEG_INFINITY));
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::with_precision(Precision::F64)
    }

    pub fn with_precision(precision: Precision) -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
            precision,
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a leaf that receives a gradient.
    pub fn param(&self, value: &Tensor) -> Result<Var<'_>> {
        self.leaf(value.clone(), true)
    }

    /// Registers a leaf treated as a constant.
    pub fn constant(&self, value: &Tensor) -> Result<Var<'_>> {
        self.leaf(value.clone(), false)
    }

    fn leaf(&self, value: Tensor, requires_grad: bool) -> Result<Var<'_>> {
        check_values("leaf", &value, false)?;
        self.push(value, Op::Leaf, requires_grad)
    }

    fn push(&self, mut value: Tensor, op: Op, requires_grad: bool) -> Result<Var<'_>> {
        if self.consumed.get() {
            return Err(Error::TapeConsumed);
        }
        if self.precision == Precision::F32 {
            for v in value.data_mut() {
                *v = *v as f32 as f64;
            }
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Visits every node at most once, in reverse recording order, and marks
    /// the tape consumed; a second call fails with [`Error::TapeConsumed`].
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.check_owner(loss)?;
        if self.consumed.get() {
            return Err(Error::TapeConsumed);
        }
        let loss_shape = loss.shape();
        if loss_shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}×{}",
                loss_shape.0, loss_shape.1
            )));
        }
        self.consumed.set(true);

        let nodes = self.nodes.borrow();
        let shapes: Vec<_> = nodes.iter().map(|n| n.value.shape()).collect();
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::scalar(1.0));

        let acc = |grads: &mut Vec<Option<Tensor>>, id: usize, g: Tensor| {
            if !nodes[id].requires_grad {
                return;
            }
            match &mut grads[id] {
                Some(existing) => {
                    for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                        *e += v;
                    }
                }
                slot => *slot = Some(g),
            }
        };

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            let y = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].requires_grad {
                        acc(&mut grads, *a, kernels::matmul_nt(&g, bv));
                    }
                    if nodes[*b].requires_grad {
                        acc(&mut grads, *b, kernels::matmul_tn(av, &g));
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    acc(&mut grads, *a, zip_map(&g, bv, |gi, bi| gi * bi));
                    acc(&mut grads, *b, zip_map(&g, av, |gi, ai| gi * ai));
                }
                Op::AddColumn(m, b) => {
                    let (rows, cols) = g.shape();
                    let db: Vec<f64> = (0..rows)
                        .map(|r| g.data()[r * cols..(r + 1) * cols].iter().sum())
                        .collect();
                    acc(&mut grads, *b, Tensor::column_vector(&db));
                    acc(&mut grads, *m, g);
                }
                Op::Transpose(a) => acc(&mut grads, *a, kernels::transpose(&g)),
                Op::Scale(a, c) => acc(&mut grads, *a, map(&g, |v| v * c)),
                Op::MaskFill(a, keep) => {
                    let mut d = g;
                    for (v, &k) in d.data_mut().iter_mut().zip(keep) {
                        if !k {
                            *v = 0.0;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SoftmaxColumns(a) => {
                    let (rows, cols) = y.shape();
                    let mut d = Tensor::zeros(rows, cols);
                    for c in 0..cols {
                        let dot: f64 = (0..rows).map(|r| y.get(r, c) * g.get(r, c)).sum();
                        for r in 0..rows {
                            d.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let x = &nodes[*a].value;
                    acc(
                        &mut grads,
                        *a,
                        zip_map(&g, x, |gi, xi| if xi > 0.0 { gi } else { 0.0 }),
                    );
                }
                Op::Gelu(a) => {
                    let x = &nodes[*a].value;
                    acc(
                        &mut grads,
                        *a,
                        zip_map(&g, x, |gi, xi| gi * (normal_cdf(xi) + xi * normal_pdf(xi))),
                    );
                }
                Op::Norm {
                    x,
                    gamma,
                    beta,
                    normalized,
                    inv_scale,
                } => {
                    let (d, cols) = g.shape();
                    let gam = &nodes[*gamma].value;
                    let centred = beta.is_some();
                    let mut dx = Tensor::zeros(d, cols);
                    let mut dgamma = vec![0.0; d];
                    let mut dbeta = vec![0.0; d];
                    for c in 0..cols {
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for r in 0..d {
                            let gi = g.get(r, c);
                            let h = normalized.get(r, c);
                            dgamma[r] += gi * h;
                            dbeta[r] += gi;
                            let dh = gi * gam.data()[r];
                            mean_dh += dh;
                            mean_dh_h += dh * h;
                        }
                        mean_dh /= d as f64;
                        mean_dh_h /= d as f64;
                        for r in 0..d {
                            let dh = g.get(r, c) * gam.data()[r];
                            let h = normalized.get(r, c);
                            let centre = if centred { mean_dh } else { 0.0 };
                            dx.set(r, c, inv_scale[c] * (dh - centre - h * mean_dh_h));
                        }
                    }
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *gamma, Tensor::column_vector(&dgamma));
                    if let Some(b) = beta {
                        acc(&mut grads, *b, Tensor::column_vector(&dbeta));
                    }
                }
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let rows = nodes[p].value.rows();
                        let slice = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                        offset += rows;
                        acc(&mut grads, p, Tensor::new(rows, cols, slice).expect("concat"));
                    }
                }
                Op::GatherColumns(w, idx) => {
                    let wv = &nodes[*w].value;
                    let mut dw = Tensor::zeros(wv.rows(), wv.cols());
                    for (j, &src) in idx.iter().enumerate() {
                        for r in 0..wv.rows() {
                            let cur = dw.get(r, src);
                            dw.set(r, src, cur + g.get(r, j));
                        }
                    }
                    acc(&mut grads, *w, dw);
                }
                Op::NegLogPick(p, picks) => {
                    let pv = &nodes[*p].value;
                    let scale = g.data()[0];
                    let mut dp = Tensor::zeros(pv.rows(), pv.cols());
                    for &(r, c) in picks {
                        let cur = dp.get(r, c);
                        dp.set(r, c, cur - scale / pv.get(r, c));
                    }
                    acc(&mut grads, *p, dp);
                }
                Op::Sum(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    acc(&mut grads, *a, Tensor::filled(r, c, g.data()[0]));
                }
                Op::Log(a) => {
                    let x = &nodes[*a].value;
                    acc(&mut grads, *a, zip_map(&g, x, |gi, xi| gi / xi));
                }
            }
        }

        for (id, node) in nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[id] = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }

    fn check_owner(&self, v: Var<'_>) -> Result<()> {
        if std::ptr::eq(self, v.tape) {
            Ok(())
        } else {
            Err(Error::Contract("variable belongs to a different tape".into()))
        }
    }
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = a.data().iter().map(|&v| f(v)).collect();
    Tensor::new(a.rows(), a.cols(), data).expect("map")
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.rows(), a.cols(), data).expect("zip_map")
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    /// Copy of the recorded value.
    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    /// The single entry of a scalar.
    pub fn item(&self) -> Result<f64> {
        self.tape.nodes.borrow()[self.id].value.item()
    }

    fn with<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    fn same_tape(&self, other: Var<'_>) -> Result<()> {
        self.tape.check_owner(other)
    }

    fn record(self, value: Tensor, op: Op, parents: &[usize], allow_neg_inf: bool, name: &'static str) -> Result<Var<'t>> {
        check_values(name, &value, allow_neg_inf)?;
        let rg = parents.iter().any(|&p| self.tape.requires_grad(p));
        self.tape.push(value, op, rg)
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(rhs)?;
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[rhs.id].value);
            if a.cols() != b.rows() {
                return Err(Error::Shape {
                    op: "matmul",
                    left: a.shape(),
                    right: b.shape(),
                });
            }
            kernels::matmul(a, b)
        };
        self.record(value, Op::MatMul(self.id, rhs.id), &[self.id, rhs.id], false, "matmul")
    }

    fn elementwise(self, rhs: Var<'t>, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_tape(rhs)?;
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[rhs.id].value);
        if a.shape() != b.shape() {
            return Err(Error::Shape {
                op: name,
                left: a.shape(),
                right: b.shape(),
            });
        }
        Ok(zip_map(a, b, f))
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let value = self.elementwise(rhs, "add", |a, b| a + b)?;
        self.record(value, Op::Add(self.id, rhs.id), &[self.id, rhs.id], false, "add")
    }

    /// Elementwise product.
    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let value = self.elementwise(rhs, "mul", |a, b| a * b)?;
        self.record(value, Op::Mul(self.id, rhs.id), &[self.id, rhs.id], false, "mul")
    }

    /// `self + b·1ᵀ` for a column `b` with as many rows as `self`.
    pub fn add_column(self, b: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(b)?;
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (m, bv) = (&nodes[self.id].value, &nodes[b.id].value);
            if bv.cols() != 1 || bv.rows() != m.rows() {
                return Err(Error::Shape {
                    op: "add_column",
                    left: m.shape(),
                    right: bv.shape(),
                });
            }
            let cols = m.cols();
            let data = m
                .data()
                .iter()
                .enumerate()
                .map(|(i, v)| v + bv.data()[i / cols])
                .collect();
            Tensor::new(m.rows(), cols, data)?
        };
        self.record(value, Op::AddColumn(self.id, b.id), &[self.id, b.id], false, "add_column")
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let value = self.with(kernels::transpose);
        self.record(value, Op::Transpose(self.id), &[self.id], true, "transpose")
    }

    /// Multiplies by a constant. `-∞` entries pass through for positive `c`.
    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        let value = self.with(|a| map(a, |v| v * c));
        self.record(value, Op::Scale(self.id, c), &[self.id], c > 0.0, "scale")
    }

    /// Sets entries whose `keep` flag is false to `-∞`. `keep` is row-major.
    pub fn mask_fill(self, keep: &[bool]) -> Result<Var<'t>> {
        let value = self.with(|a| {
            if keep.len() != a.len() {
                return Err(Error::Contract(format!(
                    "mask has {} entries for a {}×{} tensor",
                    keep.len(),
                    a.rows(),
                    a.cols()
                )));
            }
            let mut out = a.clone();
            for (v, &k) in out.data_mut().iter_mut().zip(keep) {
                if !k {
                    *v = f64::NEG_INFINITY;
                }
            }
            Ok(out)
        })?;
        self.record(value, Op::MaskFill(self.id, keep.to_vec()), &[self.id], true, "mask_fill")
    }

    /// Column-wise softmax: `out[:,c] = exp(A[:,c]) / Σ_t exp(A[t,c])`.
    ///
    /// The column maximum is subtracted before exponentiating; `-∞` entries
    /// map to exactly zero. A column that is entirely `-∞` is an error.
    pub fn softmax_columns(self) -> Result<Var<'t>> {
        let value = self.with(softmax_columns_value)?;
        self.record(value, Op::SoftmaxColumns(self.id), &[self.id], false, "softmax_columns")
    }

    pub fn relu(self) -> Result<Var<'t>> {
        let value = self.with(|a| map(a, |v| v.max(0.0)));
        self.record(value, Op::Relu(self.id), &[self.id], false, "relu")
    }

    /// `x·Φ(x)` elementwise, Φ the standard normal CDF.
    pub fn gelu(self) -> Result<Var<'t>> {
        let value = self.with(|a| map(a, |v| v * normal_cdf(v)));
        self.record(value, Op::Gelu(self.id), &[self.id], false, "gelu")
    }

    pub fn ln(self) -> Result<Var<'t>> {
        let value = self.with(|a| map(a, f64::ln));
        self.record(value, Op::Log(self.id), &[self.id], false, "ln")
    }

    /// Normalizes every column independently.
    ///
    /// `Standard`: `(x − m)/√(v + ε) ⊙ γ + β`; `Rms`: `x/√(mean(x²) + ε) ⊙ γ`.
    /// `beta` must be given for `Standard` and omitted for `Rms`.
    pub fn layer_norm_columns(self, gamma: Var<'t>, beta: Option<Var<'t>>, mode: NormMode, eps: f64) -> Result<Var<'t>> {
        self.same_tape(gamma)?;
        if let Some(b) = beta {
            self.same_tape(b)?;
        }
        if (mode == NormMode::Standard) != beta.is_some() {
            return Err(Error::Contract(
                "standard layer norm takes an offset, RMS norm does not".into(),
            ));
        }
        let (value, normalized, inv_scale) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let g = &nodes[gamma.id].value;
            let (d, cols) = x.shape();
            if g.shape() != (d, 1) {
                return Err(Error::Shape {
                    op: "layer_norm",
                    left: x.shape(),
                    right: g.shape(),
                });
            }
            let bv = match beta {
                Some(b) => {
                    let bv = &nodes[b.id].value;
                    if bv.shape() != (d, 1) {
                        return Err(Error::Shape {
                            op: "layer_norm",
                            left: x.shape(),
                            right: bv.shape(),
                        });
                    }
                    Some(bv.data())
                }
                None => None,
            };
            let mut normalized = Tensor::zeros(d, cols);
            let mut out = Tensor::zeros(d, cols);
            let mut inv_scale = Vec::with_capacity(cols);
            for c in 0..cols {
                let col = x.column(c);
                let mean = match mode {
                    NormMode::Standard => col.iter().sum::<f64>() / d as f64,
                    NormMode::Rms => 0.0,
                };
                let second = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
                let inv = 1.0 / (second + eps).sqrt();
                inv_scale.push(inv);
                for r in 0..d {
                    let h = (col[r] - mean) * inv;
                    normalized.set(r, c, h);
                    let offset = bv.map_or(0.0, |b| b[r]);
                    out.set(r, c, h * g.data()[r] + offset);
                }
            }
            (out, normalized, inv_scale)
        };
        let mut parents = vec![self.id, gamma.id];
        if let Some(b) = beta {
            parents.push(b.id);
        }
        let op = Op::Norm {
            x: self.id,
            gamma: gamma.id,
            beta: beta.map(|b| b.id),
            normalized,
            inv_scale,
        };
        self.record(value, op, &parents, false, "layer_norm")
    }

    /// Stacks tensors with equal column counts vertically.
    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        for p in parts {
            first.same_tape(*p)?;
        }
        let value = {
            let nodes = first.tape.nodes.borrow();
            let cols = nodes[first.id].value.cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for p in parts {
                let v = &nodes[p.id].value;
                if v.cols() != cols {
                    return Err(Error::Shape {
                        op: "concat_rows",
                        left: nodes[first.id].value.shape(),
                        right: v.shape(),
                    });
                }
                rows += v.rows();
                data.extend_from_slice(v.data());
            }
            Tensor::new(rows, cols, data)?
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        first.record(value, Op::ConcatRows(ids.clone()), &ids, false, "concat_rows")
    }

    /// Columns of `self` picked by zero-based index, in the given order.
    pub fn gather_columns(self, indices: &[usize]) -> Result<Var<'t>> {
        let value = self.with(|w| {
            let mut out = Tensor::zeros(w.rows(), indices.len());
            for (j, &src) in indices.iter().enumerate() {
                if src >= w.cols() {
                    return Err(Error::Contract(format!(
                        "column {src} out of range for {} columns",
                        w.cols()
                    )));
                }
                for r in 0..w.rows() {
                    out.set(r, j, w.get(r, src));
                }
            }
            Ok(out)
        })?;
        self.record(
            value,
            Op::GatherColumns(self.id, indices.to_vec()),
            &[self.id],
            false,
            "gather_columns",
        )
    }

    /// `−Σ ln self[r, c]` over zero-based `(row, col)` picks; an empty pick
    /// list gives zero.
    pub fn neg_log_pick(self, picks: &[(usize, usize)]) -> Result<Var<'t>> {
        let value = self.with(|p| {
            let mut total = 0.0;
            for &(r, c) in picks {
                if r >= p.rows() || c >= p.cols() {
                    return Err(Error::Contract(format!(
                        "pick ({r}, {c}) outside {}×{}",
                        p.rows(),
                        p.cols()
                    )));
                }
                total -= p.get(r, c).ln();
            }
            Ok(Tensor::scalar(total))
        })?;
        self.record(value, Op::NegLogPick(self.id, picks.to_vec()), &[self.id], false, "neg_log_pick")
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(self) -> Result<Var<'t>> {
        let value = self.with(|a| Tensor::scalar(a.data().iter().sum()));
        self.record(value, Op::Sum(self.id), &[self.id], false, "sum")
    }
}

pub(crate) fn softmax_columns_value(a: &Tensor) -> Result<Tensor> {
    let (rows, cols) = a.shape();
    let mut out = Tensor::zeros(rows, cols);
    for c in 0..cols {
        let max = (0..rows).map(|r| a.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateColumn { column: c });
        }
        if max.is_nan() || max == f64::INFINITY {
            return Err(Error::NonFinite { op: "softmax_columns" });
        }
        let mut total = 0.0;
        for r in 0..rows {
            let e = (a.get(r, c) - max).exp();
            out.set(r, c, e);
            total += e;
        }
        for r in 0..rows {
            let v = out.get(r, c) / total;
            out.set(r, c, v);
        }
    }
    Ok(out)
}
