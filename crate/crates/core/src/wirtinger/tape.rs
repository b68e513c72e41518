//! Define-by-run reverse-mode tape over real-coordinate buffers.
//!
//! Primitives are layer-granular (convolution, activation, pooling, dense,
//! softmax cross-entropy) rather than scalar-granular, which keeps tapes a
//! dozen nodes long and puts all arithmetic in tight loops. Complex data is a
//! layout convention: a complex sequence stores per-channel `(re, im)` planes,
//! and the complex ops couple the planes with the corresponding real
//! arithmetic. The backward pass therefore yields plain real-plane gradients,
//! which for an interleaved complex-pair parameter are exactly twice the
//! `(re, im)` components of the conjugate Wirtinger derivative dL/dzbar.

use crate::activations::{self, ActivationId};
use crate::wirtinger::params::{Grads, ParamStore};
use crate::{Error, Result};

pub type NodeId = usize;

/// Buffer shape. Sequences carry `planes` = 2 for complex channels, 1 for
/// real channels; layout is `[batch][ch][plane][t]`, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Feat { b: usize, d: usize },
    Seq { b: usize, c: usize, planes: usize, t: usize },
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Feat { b, d } => b * d,
            Shape::Seq { b, c, planes, t } => b * c * planes * t,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvCfg {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub t_in: usize,
    pub t_out: usize,
}

#[derive(Debug)]
enum Op {
    Param { entry: usize },
    Const,
    CConv(ConvCfg),
    RConv(ConvCfg),
    /// Activation over complex pairs (a pair activation reinterprets an even
    /// real channel stack as complex pairs) or elementwise real ReLU.
    Act { id: ActivationId, channels: usize, clamped: usize },
    Gap,
    Dense { in_dim: usize, out_dim: usize },
    Relu,
    Add,
    SumSquares,
    MeanAll,
    SceMean { labels: Vec<u8>, classes: usize },
}

struct Node {
    op: Op,
    shape: Shape,
    inputs: Vec<NodeId>,
    value: Vec<f64>,
}

/// Operation tape; values are computed eagerly on construction.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.nodes[id].shape
    }

    /// Total ComplexTanh pole-clamp events across activation nodes.
    pub fn clamp_events(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n.op {
                Op::Act { clamped, .. } => clamped,
                _ => 0,
            })
            .sum()
    }

    fn push(&mut self, op: Op, shape: Shape, inputs: Vec<NodeId>, value: Vec<f64>) -> NodeId {
        debug_assert_eq!(shape.len(), value.len());
        self.nodes.push(Node { op, shape, inputs, value });
        self.nodes.len() - 1
    }

    /// Leaf referencing a parameter window (copied onto the tape).
    pub fn param(&mut self, store: &ParamStore, entry: usize) -> NodeId {
        let w = store.window(entry);
        let shape = Shape::Feat { b: 1, d: w.len() };
        self.push(Op::Param { entry }, shape, vec![], w.to_vec())
    }

    pub fn constant(&mut self, shape: Shape, data: Vec<f64>) -> NodeId {
        assert_eq!(shape.len(), data.len(), "constant data does not match shape");
        self.push(Op::Const, shape, vec![], data)
    }

    pub fn cconv(&mut self, x: NodeId, w: NodeId, b: NodeId, cfg: ConvCfg) -> Result<NodeId> {
        let xs = self.nodes[x].shape;
        let (batch, c, planes, t) = match xs {
            Shape::Seq { b, c, planes, t } => (b, c, planes, t),
            _ => return Err(Error::Shape("cconv input must be a sequence".into())),
        };
        if planes != 2 || c != cfg.in_ch {
            return Err(Error::Shape(format!(
                "cconv expects {} complex input channels, got {c} ({planes} planes)",
                cfg.in_ch
            )));
        }
        if t < cfg.k {
            return Err(Error::Shape(format!("sequence length {t} shorter than kernel {}", cfg.k)));
        }
        let t_out = (t - cfg.k) / cfg.stride + 1;
        let cfg = ConvCfg { t_in: t, t_out, ..cfg };
        if self.nodes[w].value.len() != cfg.out_ch * cfg.in_ch * cfg.k * 2
            || self.nodes[b].value.len() != cfg.out_ch * 2
        {
            return Err(Error::Shape("cconv weight/bias length mismatch".into()));
        }
        let shape = Shape::Seq { b: batch, c: cfg.out_ch, planes: 2, t: t_out };
        let mut out = vec![0.0; shape.len()];
        cconv_fwd(
            &self.nodes[x].value,
            &self.nodes[w].value,
            &self.nodes[b].value,
            &mut out,
            batch,
            cfg,
        );
        Ok(self.push(Op::CConv(cfg), shape, vec![x, w, b], out))
    }

    pub fn rconv(&mut self, x: NodeId, w: NodeId, b: NodeId, cfg: ConvCfg) -> Result<NodeId> {
        let xs = self.nodes[x].shape;
        let (batch, c, planes, t) = match xs {
            Shape::Seq { b, c, planes, t } => (b, c, planes, t),
            _ => return Err(Error::Shape("rconv input must be a sequence".into())),
        };
        if planes != 1 || c != cfg.in_ch {
            return Err(Error::Shape(format!(
                "rconv expects {} real input channels, got {c} ({planes} planes)",
                cfg.in_ch
            )));
        }
        if t < cfg.k {
            return Err(Error::Shape(format!("sequence length {t} shorter than kernel {}", cfg.k)));
        }
        let t_out = (t - cfg.k) / cfg.stride + 1;
        let cfg = ConvCfg { t_in: t, t_out, ..cfg };
        if self.nodes[w].value.len() != cfg.out_ch * cfg.in_ch * cfg.k
            || self.nodes[b].value.len() != cfg.out_ch
        {
            return Err(Error::Shape("rconv weight/bias length mismatch".into()));
        }
        let shape = Shape::Seq { b: batch, c: cfg.out_ch, planes: 1, t: t_out };
        let mut out = vec![0.0; shape.len()];
        rconv_fwd(
            &self.nodes[x].value,
            &self.nodes[w].value,
            &self.nodes[b].value,
            &mut out,
            batch,
            cfg,
        );
        Ok(self.push(Op::RConv(cfg), shape, vec![x, w, b], out))
    }

    /// Apply an activation. Complex activations need a `planes == 2` input,
    /// or `pairs = true` to treat an even real channel stack as `(re, im)`
    /// pairs. ModReLU takes its per-channel bias as a parameter node.
    pub fn act(
        &mut self,
        x: NodeId,
        id: ActivationId,
        bias: Option<NodeId>,
        pairs: bool,
    ) -> Result<NodeId> {
        let shape = self.nodes[x].shape;
        let (channels, t) = match shape {
            Shape::Seq { c, planes: 2, t, .. } if id != ActivationId::RealRelu && !pairs => (c, t),
            Shape::Seq { c, planes: 1, t, .. } if pairs && id != ActivationId::RealRelu => {
                if c % 2 != 0 {
                    return Err(Error::Shape("pair activation needs an even channel count".into()));
                }
                (c / 2, t)
            }
            Shape::Seq { c, planes: 1, t, .. } if id == ActivationId::RealRelu => (c, t),
            _ => {
                return Err(Error::Shape(format!(
                    "activation {id} incompatible with input shape {shape:?}"
                )))
            }
        };
        if id.has_bias() != bias.is_some() {
            return Err(Error::Contract("activation bias present iff modrelu".into()));
        }
        let xv = &self.nodes[x].value;
        let mut out = vec![0.0; xv.len()];
        let mut clamped = 0usize;
        if id == ActivationId::RealRelu {
            for (o, v) in out.iter_mut().zip(xv) {
                *o = v.max(0.0);
            }
        } else {
            let bvals = bias.map(|bn| self.nodes[bn].value.clone());
            let n_pairs = xv.len() / (2 * t);
            for p in 0..n_pairs {
                let ch = p % channels;
                let bv = bvals.as_ref().map(|bv| bv[ch]);
                let base = p * 2 * t;
                act_row_fwd(id, bv, &xv[base..base + 2 * t], &mut out[base..base + 2 * t], t, &mut clamped);
            }
        }
        let mut inputs = vec![x];
        if let Some(bn) = bias {
            inputs.push(bn);
        }
        Ok(self.push(Op::Act { id, channels, clamped }, shape, inputs, out))
    }

    /// Global average pool over time, flattening `[ch][plane]` into features.
    pub fn gap(&mut self, x: NodeId) -> Result<NodeId> {
        let (b, c, planes, t) = match self.nodes[x].shape {
            Shape::Seq { b, c, planes, t } => (b, c, planes, t),
            _ => return Err(Error::Shape("gap input must be a sequence".into())),
        };
        if t == 0 {
            return Err(Error::Shape("gap over empty sequence".into()));
        }
        let d = c * planes;
        let xv = &self.nodes[x].value;
        let mut out = vec![0.0; b * d];
        for (row, o) in out.iter_mut().enumerate() {
            let base = row * t;
            *o = xv[base..base + t].iter().sum::<f64>() / t as f64;
        }
        Ok(self.push(Op::Gap, Shape::Feat { b, d }, vec![x], out))
    }

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (batch, in_dim) = match self.nodes[x].shape {
            Shape::Feat { b, d } => (b, d),
            _ => return Err(Error::Shape("dense input must be a feature matrix".into())),
        };
        let out_dim = self.nodes[b].value.len();
        if self.nodes[w].value.len() != out_dim * in_dim {
            return Err(Error::Shape(format!(
                "dense weight length {} != {out_dim}x{in_dim}",
                self.nodes[w].value.len()
            )));
        }
        let mut out = vec![0.0; batch * out_dim];
        let xv = &self.nodes[x].value;
        let wv = &self.nodes[w].value;
        let bv = &self.nodes[b].value;
        for bi in 0..batch {
            let xrow = &xv[bi * in_dim..(bi + 1) * in_dim];
            let orow = &mut out[bi * out_dim..(bi + 1) * out_dim];
            for (o, ov) in orow.iter_mut().enumerate() {
                let wrow = &wv[o * in_dim..(o + 1) * in_dim];
                let mut acc = bv[o];
                for i in 0..in_dim {
                    acc += wrow[i] * xrow[i];
                }
                *ov = acc;
            }
        }
        Ok(self.push(
            Op::Dense { in_dim, out_dim },
            Shape::Feat { b: batch, d: out_dim },
            vec![x, w, b],
            out,
        ))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let shape = self.nodes[x].shape;
        let out = self.nodes[x].value.iter().map(|v| v.max(0.0)).collect();
        Ok(self.push(Op::Relu, shape, vec![x], out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.nodes[a].shape != self.nodes[b].shape {
            return Err(Error::Shape("add operands must share a shape".into()));
        }
        let out = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Op::Add, self.nodes[a].shape, vec![a, b], out))
    }

    /// Sum of squares of every element (the squared L2 norm).
    pub fn sum_squares(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.nodes[x].value.iter().map(|v| v * v).sum();
        self.push(Op::SumSquares, Shape::Scalar, vec![x], vec![s])
    }

    /// Mean over every element.
    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = self.nodes[x].value.len().max(1);
        let s: f64 = self.nodes[x].value.iter().sum::<f64>() / n as f64;
        self.push(Op::MeanAll, Shape::Scalar, vec![x], vec![s])
    }

    /// Mean softmax cross-entropy of logits against integer labels.
    pub fn sce_mean(&mut self, logits: NodeId, labels: &[u8]) -> Result<NodeId> {
        let (batch, classes) = match self.nodes[logits].shape {
            Shape::Feat { b, d } => (b, d),
            _ => return Err(Error::Shape("loss input must be logits".into())),
        };
        if labels.len() != batch {
            return Err(Error::Shape("label count must match batch".into()));
        }
        if classes < 2 {
            return Err(Error::Shape("need at least 2 classes".into()));
        }
        let lv = &self.nodes[logits].value;
        let mut total = 0.0;
        for (bi, &label) in labels.iter().enumerate() {
            let row = &lv[bi * classes..(bi + 1) * classes];
            total += cross_entropy_row(row, label as usize);
        }
        let loss = total / batch as f64;
        Ok(self.push(
            Op::SceMean { labels: labels.to_vec(), classes },
            Shape::Scalar,
            vec![logits],
            vec![loss],
        ))
    }

    /// Reverse pass from the final node, which must be a real scalar loss.
    /// Returns the gradient of the loss w.r.t. every real parameter
    /// coordinate, accumulated across all `param` nodes.
    pub fn backward(&self, store: &ParamStore) -> Result<Grads> {
        let last = self
            .nodes
            .last()
            .ok_or_else(|| Error::Contract("backward on an empty tape".into()))?;
        if last.shape != Shape::Scalar {
            return Err(Error::Contract(
                "loss must be a single real scalar (non-scalar or complex-valued output)".into(),
            ));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Vec<f64>> = self.nodes.iter().map(|nd| vec![0.0; nd.value.len()]).collect();
        grads[n - 1][0] = 1.0;
        let mut out = Grads::zeros(store);
        for id in (0..n).rev() {
            let node = &self.nodes[id];
            // Split so node `id`'s grad is readable while inputs are written.
            let (before, rest) = grads.split_at_mut(id);
            let g = &rest[0];
            match &node.op {
                Op::Param { entry } => {
                    let e = store.entry(*entry);
                    for (dst, src) in out.flat[e.offset..e.offset + e.len].iter_mut().zip(g) {
                        *dst += src;
                    }
                }
                Op::Const => {}
                Op::CConv(cfg) => {
                    let [x, w, b] = [node.inputs[0], node.inputs[1], node.inputs[2]];
                    let batch = match node.shape {
                        Shape::Seq { b, .. } => b,
                        _ => unreachable!(),
                    };
                    let xv = &self.nodes[x].value;
                    let wv = &self.nodes[w].value;
                    // b < w < x is not guaranteed by id order alone, but all
                    // inputs precede `id`, so index into `before`.
                    cconv_bwd(xv, wv, g, batch, *cfg, &mut before[x], &mut DwDb { dw: None, db: None });
                    let (dw_slice, db_slice) = two_muts(before, w, b);
                    cconv_bwd(
                        xv,
                        wv,
                        g,
                        batch,
                        *cfg,
                        &mut Vec::new(),
                        &mut DwDb { dw: Some(dw_slice), db: Some(db_slice) },
                    );
                }
                Op::RConv(cfg) => {
                    let [x, w, b] = [node.inputs[0], node.inputs[1], node.inputs[2]];
                    let batch = match node.shape {
                        Shape::Seq { b, .. } => b,
                        _ => unreachable!(),
                    };
                    let xv = &self.nodes[x].value;
                    let wv = &self.nodes[w].value;
                    rconv_bwd_dx(wv, g, batch, *cfg, &mut before[x]);
                    let (dw_slice, db_slice) = two_muts(before, w, b);
                    rconv_bwd_dwdb(xv, g, batch, *cfg, dw_slice, db_slice);
                }
                Op::Act { id: act_id, channels, .. } => {
                    let x = node.inputs[0];
                    let xv = &self.nodes[x].value;
                    if *act_id == ActivationId::RealRelu {
                        let dx = &mut before[x];
                        for i in 0..xv.len() {
                            if xv[i] > 0.0 {
                                dx[i] += g[i];
                            }
                        }
                    } else {
                        let t = match self.nodes[x].shape {
                            Shape::Seq { t, .. } => t,
                            _ => unreachable!(),
                        };
                        let bias_node = node.inputs.get(1).copied();
                        let bvals = bias_node.map(|bn| self.nodes[bn].value.clone());
                        let n_pairs = xv.len() / (2 * t);
                        // Bias grads accumulate separately to avoid aliasing x.
                        let mut db = vec![0.0; bvals.as_ref().map_or(0, |b| b.len())];
                        {
                            let dx = &mut before[x];
                            for p in 0..n_pairs {
                                let ch = p % channels;
                                let bv = bvals.as_ref().map(|b| b[ch]);
                                let base = p * 2 * t;
                                let dbch = if db.is_empty() { None } else { Some(&mut db[ch]) };
                                act_row_bwd(
                                    *act_id,
                                    bv,
                                    &xv[base..base + 2 * t],
                                    &g[base..base + 2 * t],
                                    &mut dx[base..base + 2 * t],
                                    t,
                                    dbch,
                                );
                            }
                        }
                        if let Some(bn) = bias_node {
                            for (dst, src) in before[bn].iter_mut().zip(&db) {
                                *dst += src;
                            }
                        }
                    }
                }
                Op::Gap => {
                    let x = node.inputs[0];
                    let t = match self.nodes[x].shape {
                        Shape::Seq { t, .. } => t,
                        _ => unreachable!(),
                    };
                    let dx = &mut before[x];
                    let inv = 1.0 / t as f64;
                    for (row, gv) in g.iter().enumerate() {
                        let base = row * t;
                        let add = gv * inv;
                        for v in &mut dx[base..base + t] {
                            *v += add;
                        }
                    }
                }
                Op::Dense { in_dim, out_dim } => {
                    let [x, w, b] = [node.inputs[0], node.inputs[1], node.inputs[2]];
                    let batch = g.len() / out_dim;
                    let xv = &self.nodes[x].value;
                    let wv = &self.nodes[w].value;
                    {
                        let dx = &mut before[x];
                        for bi in 0..batch {
                            let grow = &g[bi * out_dim..(bi + 1) * out_dim];
                            let dxrow = &mut dx[bi * in_dim..(bi + 1) * in_dim];
                            for (o, gv) in grow.iter().enumerate() {
                                let wrow = &wv[o * in_dim..(o + 1) * in_dim];
                                for i in 0..*in_dim {
                                    dxrow[i] += gv * wrow[i];
                                }
                            }
                        }
                    }
                    let (dw, db) = two_muts(before, w, b);
                    for bi in 0..batch {
                        let grow = &g[bi * out_dim..(bi + 1) * out_dim];
                        let xrow = &xv[bi * in_dim..(bi + 1) * in_dim];
                        for (o, gv) in grow.iter().enumerate() {
                            db[o] += gv;
                            let dwrow = &mut dw[o * in_dim..(o + 1) * in_dim];
                            for i in 0..*in_dim {
                                dwrow[i] += gv * xrow[i];
                            }
                        }
                    }
                }
                Op::Relu => {
                    let x = node.inputs[0];
                    let xv = &self.nodes[x].value;
                    let dx = &mut before[x];
                    for i in 0..xv.len() {
                        if xv[i] > 0.0 {
                            dx[i] += g[i];
                        }
                    }
                }
                Op::Add => {
                    let (a, b) = (node.inputs[0], node.inputs[1]);
                    if a == b {
                        for (dst, src) in before[a].iter_mut().zip(g) {
                            *dst += 2.0 * src;
                        }
                    } else {
                        let (da, db) = two_muts(before, a, b);
                        for ((x, y), src) in da.iter_mut().zip(db.iter_mut()).zip(g) {
                            *x += src;
                            *y += src;
                        }
                    }
                }
                Op::SumSquares => {
                    let x = node.inputs[0];
                    let xv = &self.nodes[x].value;
                    let gv = g[0];
                    for (dst, v) in before[x].iter_mut().zip(xv) {
                        *dst += 2.0 * v * gv;
                    }
                }
                Op::MeanAll => {
                    let x = node.inputs[0];
                    let n = self.nodes[x].value.len().max(1);
                    let gv = g[0] / n as f64;
                    for dst in before[x].iter_mut() {
                        *dst += gv;
                    }
                }
                Op::SceMean { labels, classes } => {
                    let x = node.inputs[0];
                    let xv = &self.nodes[x].value;
                    let batch = labels.len();
                    let gv = g[0] / batch as f64;
                    let dx = &mut before[x];
                    let mut probs = vec![0.0; *classes];
                    for (bi, &label) in labels.iter().enumerate() {
                        let row = &xv[bi * classes..(bi + 1) * classes];
                        softmax_into(row, &mut probs);
                        let drow = &mut dx[bi * classes..(bi + 1) * classes];
                        for c in 0..*classes {
                            let indicator = if c == label as usize { 1.0 } else { 0.0 };
                            drow[c] += gv * (probs[c] - indicator);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Disjoint mutable borrows of two gradient buffers.
fn two_muts(grads: &mut [Vec<f64>], a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = grads.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = grads.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

/// `-log softmax(row)[label]` with the usual max-shift for stability.
pub fn cross_entropy_row(row: &[f64], label: usize) -> f64 {
    let m = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - row[label]
}

fn softmax_into(row: &[f64], out: &mut [f64]) {
    let m = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        let e = (v - m).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn act_row_fwd(
    id: ActivationId,
    bias: Option<f64>,
    x: &[f64],
    out: &mut [f64],
    t: usize,
    clamped: &mut usize,
) {
    let (xr, xi) = x.split_at(t);
    let (or_, oi_) = out.split_at_mut(t);
    for i in 0..t {
        let (v, cl) = activations::apply_checked(id, crate::Cplx::new(xr[i], xi[i]), bias);
        if cl {
            *clamped += 1;
        }
        or_[i] = v.re;
        oi_[i] = v.im;
    }
}

fn act_row_bwd(
    id: ActivationId,
    bias: Option<f64>,
    x: &[f64],
    g: &[f64],
    dx: &mut [f64],
    t: usize,
    mut db: Option<&mut f64>,
) {
    let (xr, xi) = x.split_at(t);
    let (gr, gi) = g.split_at(t);
    let (dxr, dxi) = dx.split_at_mut(t);
    for i in 0..t {
        let j = activations::jacobian(id, crate::Cplx::new(xr[i], xi[i]), bias);
        dxr[i] += j.rr * gr[i] + j.ir * gi[i];
        dxi[i] += j.ri * gr[i] + j.ii * gi[i];
        if let Some(db) = db.as_deref_mut() {
            *db += j.br * gr[i] + j.bi * gi[i];
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution kernels (shared with the layer-level witnesses).
//
// Strided convs run on polyphase planes: phase p of a stride-s sequence is
// the contiguous subsequence x[m*s + p], so x[t*s + j] = phase_{j%s}[t + j/s]
// and every inner loop walks contiguous memory regardless of stride.
// ---------------------------------------------------------------------------

/// Phase-plane length for a stride-`s` decomposition of `t_in` samples.
#[inline]
fn phase_len(t_in: usize, stride: usize) -> usize {
    t_in.div_ceil(stride)
}

/// Scatter `row` into `stride` phase planes of width `lp`.
#[inline]
fn deinterleave(row: &[f64], stride: usize, lp: usize, out: &mut [f64]) {
    for (p, plane) in out.chunks_exact_mut(lp).enumerate().take(stride) {
        let mut idx = p;
        for v in plane.iter_mut() {
            if idx < row.len() {
                *v = row[idx];
            } else {
                *v = 0.0;
            }
            idx += stride;
        }
    }
}

/// Add phase planes back into `row` (inverse of [`deinterleave`], accumulating).
#[inline]
fn interleave_add(planes: &[f64], stride: usize, lp: usize, row: &mut [f64]) {
    for (p, plane) in planes.chunks_exact(lp).enumerate().take(stride) {
        let mut idx = p;
        for v in plane.iter() {
            if idx < row.len() {
                row[idx] += v;
            }
            idx += stride;
        }
    }
}

/// `or += wr*xr - wi*xi; oi += wr*xi + wi*xr` over equal-length slices.
#[inline]
fn caxpy(or_: &mut [f64], oi_: &mut [f64], xr: &[f64], xi: &[f64], wr: f64, wi: f64) {
    let n = or_.len();
    let (xr, xi) = (&xr[..n], &xi[..n]);
    let oi_ = &mut oi_[..n];
    for t in 0..n {
        or_[t] += wr * xr[t] - wi * xi[t];
        oi_[t] += wr * xi[t] + wi * xr[t];
    }
}

/// Conjugate form used by input gradients: `(dr, di) += conj(w) * (gr, gi)`.
#[inline]
fn caxpy_conj(dr: &mut [f64], di: &mut [f64], gr: &[f64], gi: &[f64], wr: f64, wi: f64) {
    let n = dr.len();
    let (gr, gi) = (&gr[..n], &gi[..n]);
    let di = &mut di[..n];
    for t in 0..n {
        dr[t] += wr * gr[t] + wi * gi[t];
        di[t] += wr * gi[t] - wi * gr[t];
    }
}

/// `y += a * x`.
#[inline]
fn axpy(y: &mut [f64], x: &[f64], a: f64) {
    let n = y.len();
    let x = &x[..n];
    for t in 0..n {
        y[t] += a * x[t];
    }
}

/// Four-accumulator dot product (keeps the reduction vectorizable).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let quads = n / 4;
    for q in 0..quads {
        let i = 4 * q;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * quads..n {
        s += a[i] * b[i];
    }
    s
}

/// Paired dots for complex weight grads: `(g . conj(x))` componentwise.
#[inline]
fn cdot_conj(gr: &[f64], gi: &[f64], xr: &[f64], xi: &[f64], n: usize) -> (f64, f64) {
    let (gr, gi, xr, xi) = (&gr[..n], &gi[..n], &xr[..n], &xi[..n]);
    let mut ar = [0.0f64; 4];
    let mut ai = [0.0f64; 4];
    let quads = n / 4;
    for q in 0..quads {
        let i = 4 * q;
        for l in 0..4 {
            ar[l] += gr[i + l] * xr[i + l] + gi[i + l] * xi[i + l];
            ai[l] += gi[i + l] * xr[i + l] - gr[i + l] * xi[i + l];
        }
    }
    let mut sr = (ar[0] + ar[1]) + (ar[2] + ar[3]);
    let mut si = (ai[0] + ai[1]) + (ai[2] + ai[3]);
    for i in 4 * quads..n {
        sr += gr[i] * xr[i] + gi[i] * xi[i];
        si += gi[i] * xr[i] - gr[i] * xi[i];
    }
    (sr, si)
}

/// Complex valid-mode conv over plane layout `[b][c][2][t]`, interleaved
/// `(re, im)` weight pairs. Each tap applies the complex product
/// `(ax - by, ay + bx)`.
pub fn cconv_fwd(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64], batch: usize, cfg: ConvCfg) {
    let ConvCfg { in_ch, out_ch, k, stride, t_in, t_out } = cfg;
    let lp = phase_len(t_in, stride);
    // Phase scratch holds every input channel of one batch element:
    // [ic][plane][phase][lp].
    let mut phases = if stride > 1 { vec![0.0; in_ch * 2 * stride * lp] } else { Vec::new() };
    for bi in 0..batch {
        if stride > 1 {
            for ic in 0..in_ch {
                let xb = (bi * in_ch + ic) * 2 * t_in;
                let dst = &mut phases[ic * 2 * stride * lp..(ic + 1) * 2 * stride * lp];
                let (dr, di) = dst.split_at_mut(stride * lp);
                deinterleave(&x[xb..xb + t_in], stride, lp, dr);
                deinterleave(&x[xb + t_in..xb + 2 * t_in], stride, lp, di);
            }
        }
        for oc in 0..out_ch {
            let base = (bi * out_ch + oc) * 2 * t_out;
            let (or_, oi_) = out[base..base + 2 * t_out].split_at_mut(t_out);
            or_.fill(b[oc * 2]);
            oi_.fill(b[oc * 2 + 1]);
            for ic in 0..in_ch {
                for j in 0..k {
                    let wr = w[((oc * in_ch + ic) * k + j) * 2];
                    let wi = w[((oc * in_ch + ic) * k + j) * 2 + 1];
                    if stride == 1 {
                        let xb = (bi * in_ch + ic) * 2 * t_in;
                        let (xr, xi) = x[xb..xb + 2 * t_in].split_at(t_in);
                        caxpy(or_, oi_, &xr[j..], &xi[j..], wr, wi);
                    } else {
                        let (p, o) = (j % stride, j / stride);
                        let pb = ic * 2 * stride * lp;
                        let xr = &phases[pb + p * lp + o..pb + (p + 1) * lp];
                        let xi = &phases[pb + (stride + p) * lp + o..pb + (stride + p + 1) * lp];
                        caxpy(or_, oi_, xr, xi, wr, wi);
                    }
                }
            }
        }
    }
}

struct DwDb<'a> {
    dw: Option<&'a mut [f64]>,
    db: Option<&'a mut [f64]>,
}

/// Backward for the complex conv. Pass a non-empty `dx` to accumulate input
/// gradients, and/or `dw`/`db` slices for parameter gradients.
fn cconv_bwd(
    x: &[f64],
    w: &[f64],
    gy: &[f64],
    batch: usize,
    cfg: ConvCfg,
    dx: &mut Vec<f64>,
    acc: &mut DwDb,
) {
    let ConvCfg { in_ch, out_ch, k, stride, t_in, t_out } = cfg;
    let lp = phase_len(t_in, stride);
    if let Some(db) = acc.db.as_deref_mut() {
        for bi in 0..batch {
            for oc in 0..out_ch {
                let gb = (bi * out_ch + oc) * 2 * t_out;
                let (gr, gi) = gy[gb..gb + 2 * t_out].split_at(t_out);
                db[oc * 2] += gr.iter().sum::<f64>();
                db[oc * 2 + 1] += gi.iter().sum::<f64>();
            }
        }
    }
    if !dx.is_empty() {
        // dL/dx = conj(w) . g per tap, accumulated over phase planes.
        let mut scratch = if stride > 1 { vec![0.0; 2 * stride * lp] } else { Vec::new() };
        for bi in 0..batch {
            for ic in 0..in_ch {
                let xb = (bi * in_ch + ic) * 2 * t_in;
                if stride > 1 {
                    scratch.fill(0.0);
                }
                for oc in 0..out_ch {
                    let gb = (bi * out_ch + oc) * 2 * t_out;
                    let (gr, gi) = gy[gb..gb + 2 * t_out].split_at(t_out);
                    for j in 0..k {
                        let wr = w[((oc * in_ch + ic) * k + j) * 2];
                        let wi = w[((oc * in_ch + ic) * k + j) * 2 + 1];
                        if stride == 1 {
                            let (dxr, dxi) = dx[xb..xb + 2 * t_in].split_at_mut(t_in);
                            caxpy_conj(&mut dxr[j..j + t_out], &mut dxi[j..j + t_out], gr, gi, wr, wi);
                        } else {
                            let (p, o) = (j % stride, j / stride);
                            let (sr, si) = scratch.split_at_mut(stride * lp);
                            caxpy_conj(
                                &mut sr[p * lp + o..p * lp + o + t_out],
                                &mut si[p * lp + o..p * lp + o + t_out],
                                gr,
                                gi,
                                wr,
                                wi,
                            );
                        }
                    }
                }
                if stride > 1 {
                    let (sr, si) = scratch.split_at(stride * lp);
                    let (dxr, dxi) = dx[xb..xb + 2 * t_in].split_at_mut(t_in);
                    interleave_add(sr, stride, lp, dxr);
                    interleave_add(si, stride, lp, dxi);
                }
            }
        }
    }
    if let Some(dw) = acc.dw.as_deref_mut() {
        // dL/dw = g . conj(x) per tap; contiguous dots over phase planes.
        let mut phases = if stride > 1 { vec![0.0; 2 * stride * lp] } else { Vec::new() };
        for bi in 0..batch {
            for ic in 0..in_ch {
                let xb = (bi * in_ch + ic) * 2 * t_in;
                let (xr_full, xi_full) = x[xb..xb + 2 * t_in].split_at(t_in);
                if stride > 1 {
                    let (pr, pi) = phases.split_at_mut(stride * lp);
                    deinterleave(xr_full, stride, lp, pr);
                    deinterleave(xi_full, stride, lp, pi);
                }
                for oc in 0..out_ch {
                    let gb = (bi * out_ch + oc) * 2 * t_out;
                    let (gr, gi) = gy[gb..gb + 2 * t_out].split_at(t_out);
                    for j in 0..k {
                        let (ar, ai) = if stride == 1 {
                            cdot_conj(gr, gi, &xr_full[j..], &xi_full[j..], t_out)
                        } else {
                            let (p, o) = (j % stride, j / stride);
                            let (pr, pi) = phases.split_at(stride * lp);
                            cdot_conj(gr, gi, &pr[p * lp + o..], &pi[p * lp + o..], t_out)
                        };
                        dw[((oc * in_ch + ic) * k + j) * 2] += ar;
                        dw[((oc * in_ch + ic) * k + j) * 2 + 1] += ai;
                    }
                }
            }
        }
    }
}

/// Real valid-mode conv over plane layout `[b][c][t]`.
pub fn rconv_fwd(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64], batch: usize, cfg: ConvCfg) {
    let ConvCfg { in_ch, out_ch, k, stride, t_in, t_out } = cfg;
    let lp = phase_len(t_in, stride);
    let mut phases = if stride > 1 { vec![0.0; in_ch * stride * lp] } else { Vec::new() };
    for bi in 0..batch {
        if stride > 1 {
            for ic in 0..in_ch {
                let xb = (bi * in_ch + ic) * t_in;
                deinterleave(&x[xb..xb + t_in], stride, lp, &mut phases[ic * stride * lp..(ic + 1) * stride * lp]);
            }
        }
        for oc in 0..out_ch {
            let ob = (bi * out_ch + oc) * t_out;
            let orow = &mut out[ob..ob + t_out];
            orow.fill(b[oc]);
            for ic in 0..in_ch {
                for j in 0..k {
                    let wv = w[(oc * in_ch + ic) * k + j];
                    if stride == 1 {
                        let xb = (bi * in_ch + ic) * t_in;
                        axpy(orow, &x[xb + j..xb + t_in], wv);
                    } else {
                        let (p, o) = (j % stride, j / stride);
                        let pb = ic * stride * lp;
                        axpy(orow, &phases[pb + p * lp + o..pb + (p + 1) * lp], wv);
                    }
                }
            }
        }
    }
}

fn rconv_bwd_dx(w: &[f64], gy: &[f64], batch: usize, cfg: ConvCfg, dx: &mut [f64]) {
    let ConvCfg { in_ch, out_ch, k, stride, t_in, t_out } = cfg;
    let lp = phase_len(t_in, stride);
    let mut scratch = if stride > 1 { vec![0.0; stride * lp] } else { Vec::new() };
    for bi in 0..batch {
        for ic in 0..in_ch {
            let xb = (bi * in_ch + ic) * t_in;
            if stride > 1 {
                scratch.fill(0.0);
            }
            for oc in 0..out_ch {
                let gb = (bi * out_ch + oc) * t_out;
                let grow = &gy[gb..gb + t_out];
                for j in 0..k {
                    let wv = w[(oc * in_ch + ic) * k + j];
                    if stride == 1 {
                        axpy(&mut dx[xb + j..xb + j + t_out], grow, wv);
                    } else {
                        let (p, o) = (j % stride, j / stride);
                        axpy(&mut scratch[p * lp + o..p * lp + o + t_out], grow, wv);
                    }
                }
            }
            if stride > 1 {
                interleave_add(&scratch, stride, lp, &mut dx[xb..xb + t_in]);
            }
        }
    }
}

fn rconv_bwd_dwdb(x: &[f64], gy: &[f64], batch: usize, cfg: ConvCfg, dw: &mut [f64], db: &mut [f64]) {
    let ConvCfg { in_ch, out_ch, k, stride, t_in, t_out } = cfg;
    let lp = phase_len(t_in, stride);
    for bi in 0..batch {
        for oc in 0..out_ch {
            let gb = (bi * out_ch + oc) * t_out;
            let grow = &gy[gb..gb + t_out];
            db[oc] += grow.iter().sum::<f64>();
        }
    }
    let mut phases = if stride > 1 { vec![0.0; stride * lp] } else { Vec::new() };
    for bi in 0..batch {
        for ic in 0..in_ch {
            let xb = (bi * in_ch + ic) * t_in;
            let xrow = &x[xb..xb + t_in];
            if stride > 1 {
                deinterleave(xrow, stride, lp, &mut phases);
            }
            for oc in 0..out_ch {
                let gb = (bi * out_ch + oc) * t_out;
                let grow = &gy[gb..gb + t_out];
                for j in 0..k {
                    let acc = if stride == 1 {
                        dot(grow, &xrow[j..j + t_out])
                    } else {
                        let (p, o) = (j % stride, j / stride);
                        dot(grow, &phases[p * lp + o..p * lp + o + t_out])
                    };
                    dw[(oc * in_ch + ic) * k + j] += acc;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wirtinger::params::ParamKind;
    use approx::assert_abs_diff_eq;

    fn store_with(pairs: &[(&str, ParamKind, Vec<f64>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (name, kind, vals) in pairs {
            let mut it = vals.iter().copied();
            s.push(name, *kind, vals.len(), || it.next().unwrap()).unwrap();
        }
        s
    }

    #[test]
    fn modulus_squared_gradient() {
        // L(w) = |w|^2 at w = 1+2i has real-plane gradient (2, 4).
        let store = store_with(&[("w", ParamKind::ComplexPair, vec![1.0, 2.0])]);
        let mut tape = Tape::new();
        let w = tape.param(&store, 0);
        tape.sum_squares(w);
        let g = tape.backward(&store).unwrap();
        assert_eq!(g.flat, vec![2.0, 4.0]);
    }

    #[test]
    fn real_part_gradient() {
        // L(w) = Re(w): dense with constant weights (1, 0).
        let store = store_with(&[("w", ParamKind::ComplexPair, vec![-0.3, 1.7])]);
        let mut tape = Tape::new();
        let w = tape.param(&store, 0);
        let pick = tape.constant(Shape::Feat { b: 1, d: 2 }, vec![1.0, 0.0]);
        let zero = tape.constant(Shape::Feat { b: 1, d: 1 }, vec![0.0]);
        let y = tape.dense(w, pick, zero).unwrap();
        tape.mean_all(y);
        let g = tape.backward(&store).unwrap();
        assert_eq!(g.flat, vec![1.0, 0.0]);
    }

    #[test]
    fn identity_and_rotation_conv() {
        // k=1 complex conv with weight 1 reproduces the input; weight i
        // rotates (1, 0) to (0, 1).
        let cfg = ConvCfg { in_ch: 1, out_ch: 1, k: 1, stride: 1, t_in: 4, t_out: 4 };
        let x = vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5, 0.0, 1.0];
        let mut out = vec![0.0; 8];
        cconv_fwd(&x, &[1.0, 0.0], &[0.0, 0.0], &mut out, 1, cfg);
        assert_eq!(out, x);
        let x = vec![1.0, 1.0, 0.0, 0.0]; // (1, 0) twice, t=2
        let cfg = ConvCfg { in_ch: 1, out_ch: 1, k: 1, stride: 1, t_in: 2, t_out: 2 };
        let mut out = vec![0.0; 4];
        cconv_fwd(&x, &[0.0, 1.0], &[0.0, 0.0], &mut out, 1, cfg);
        assert_eq!(out, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn strided_conv_matches_subsampled_dense_conv() {
        let t_in = 13;
        let k = 5;
        let x: Vec<f64> = (0..2 * t_in).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..2 * k).map(|i| (i as f64 * 0.11).cos()).collect();
        let b = vec![0.2, -0.1];
        let cfg1 = ConvCfg { in_ch: 1, out_ch: 1, k, stride: 1, t_in, t_out: t_in - k + 1 };
        let mut dense = vec![0.0; 2 * cfg1.t_out];
        cconv_fwd(&x, &w, &b, &mut dense, 1, cfg1);
        let cfg2 = ConvCfg { in_ch: 1, out_ch: 1, k, stride: 2, t_in, t_out: (t_in - k) / 2 + 1 };
        let mut strided = vec![0.0; 2 * cfg2.t_out];
        cconv_fwd(&x, &w, &b, &mut strided, 1, cfg2);
        for t in 0..cfg2.t_out {
            assert_abs_diff_eq!(strided[t], dense[2 * t], epsilon = 1e-15);
            assert_abs_diff_eq!(strided[cfg2.t_out + t], dense[cfg1.t_out + 2 * t], epsilon = 1e-15);
        }
    }

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        for classes in [2usize, 3, 5, 10] {
            let store = ParamStore::new();
            let mut tape = Tape::new();
            let logits = tape.constant(Shape::Feat { b: 1, d: classes }, vec![0.7; classes]);
            let l = tape.sce_mean(logits, &[1]).unwrap();
            assert_abs_diff_eq!(tape.value(l)[0], (classes as f64).ln(), epsilon = 1e-12);
            drop(store);
        }
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let store = store_with(&[("w", ParamKind::Real, vec![1.0, 2.0])]);
        let mut tape = Tape::new();
        tape.param(&store, 0);
        let err = tape.backward(&store);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn conv_rejects_short_sequences() {
        let store = store_with(&[
            ("w", ParamKind::ComplexPair, vec![0.0; 10]),
            ("b", ParamKind::ComplexPair, vec![0.0; 2]),
        ]);
        let mut tape = Tape::new();
        let x = tape.constant(Shape::Seq { b: 1, c: 1, planes: 2, t: 3 }, vec![0.0; 6]);
        let w = tape.param(&store, 0);
        let b = tape.param(&store, 1);
        let cfg = ConvCfg { in_ch: 1, out_ch: 1, k: 5, stride: 1, t_in: 0, t_out: 0 };
        assert!(matches!(tape.cconv(x, w, b, cfg), Err(Error::Shape(_))));
    }

    /// End-to-end finite-difference check of every op in a small complex
    /// model: cconv -> siglog -> cconv -> modrelu -> gap -> dense -> relu ->
    /// dense -> cross-entropy.
    #[test]
    fn full_tape_matches_finite_differences() {
        use crate::seeds;
        use rand::Rng;
        let mut rng = seeds::stream(11, &[seeds::tag("tape-fd")]);
        let t = 12;
        let (cin, w1, w2, classes) = (2usize, 3usize, 3usize, 3usize);
        let mut store = ParamStore::new();
        store.push("conv1.weight", ParamKind::ComplexPair, w1 * cin * 3 * 2, || rng.random_range(-0.4..0.4)).unwrap();
        store.push("conv1.bias", ParamKind::ComplexPair, w1 * 2, || rng.random_range(-0.1..0.1)).unwrap();
        store.push("conv2.weight", ParamKind::ComplexPair, w2 * w1 * 3 * 2, || rng.random_range(-0.4..0.4)).unwrap();
        store.push("conv2.bias", ParamKind::ComplexPair, w2 * 2, || rng.random_range(-0.1..0.1)).unwrap();
        store.push("act2.bias", ParamKind::Real, w2, || 0.3).unwrap();
        store.push("head.weight", ParamKind::Real, 4 * (2 * w2), || rng.random_range(-0.4..0.4)).unwrap();
        store.push("head.bias", ParamKind::Real, 4, || 0.05).unwrap();
        store.push("head.out.weight", ParamKind::Real, classes * 4, || rng.random_range(-0.4..0.4)).unwrap();
        store.push("head.out.bias", ParamKind::Real, classes, || 0.0).unwrap();

        let batch = 4;
        let x: Vec<f64> = (0..batch * cin * 2 * t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<u8> = (0..batch).map(|i| (i % classes) as u8).collect();

        let loss_of = |store: &ParamStore| -> f64 {
            let mut tape = Tape::new();
            let xn = tape.constant(Shape::Seq { b: batch, c: cin, planes: 2, t }, x.clone());
            let w = tape.param(store, 0);
            let b = tape.param(store, 1);
            let cfg = ConvCfg { in_ch: cin, out_ch: w1, k: 3, stride: 1, t_in: 0, t_out: 0 };
            let c1 = tape.cconv(xn, w, b, cfg).unwrap();
            let a1 = tape.act(c1, ActivationId::Siglog, None, false).unwrap();
            let w = tape.param(store, 2);
            let b = tape.param(store, 3);
            let cfg = ConvCfg { in_ch: w1, out_ch: w2, k: 3, stride: 2, t_in: 0, t_out: 0 };
            let c2 = tape.cconv(a1, w, b, cfg).unwrap();
            let ab = tape.param(store, 4);
            let a2 = tape.act(c2, ActivationId::Modrelu, Some(ab), false).unwrap();
            let p = tape.gap(a2).unwrap();
            let w = tape.param(store, 5);
            let b = tape.param(store, 6);
            let h = tape.dense(p, w, b).unwrap();
            let r = tape.relu(h).unwrap();
            let w = tape.param(store, 7);
            let b = tape.param(store, 8);
            let o = tape.dense(r, w, b).unwrap();
            let l = tape.sce_mean(o, &labels).unwrap();
            tape.value(l)[0]
        };

        // Analytic gradient.
        let mut tape = Tape::new();
        let xn = tape.constant(Shape::Seq { b: batch, c: cin, planes: 2, t }, x.clone());
        let w = tape.param(&store, 0);
        let b = tape.param(&store, 1);
        let cfg = ConvCfg { in_ch: cin, out_ch: w1, k: 3, stride: 1, t_in: 0, t_out: 0 };
        let c1 = tape.cconv(xn, w, b, cfg).unwrap();
        let a1 = tape.act(c1, ActivationId::Siglog, None, false).unwrap();
        let w = tape.param(&store, 2);
        let b = tape.param(&store, 3);
        let cfg = ConvCfg { in_ch: w1, out_ch: w2, k: 3, stride: 2, t_in: 0, t_out: 0 };
        let c2 = tape.cconv(a1, w, b, cfg).unwrap();
        let ab = tape.param(&store, 4);
        let a2 = tape.act(c2, ActivationId::Modrelu, Some(ab), false).unwrap();
        let p = tape.gap(a2).unwrap();
        let w = tape.param(&store, 5);
        let b = tape.param(&store, 6);
        let h = tape.dense(p, w, b).unwrap();
        let r = tape.relu(h).unwrap();
        let w = tape.param(&store, 7);
        let b = tape.param(&store, 8);
        let o = tape.dense(r, w, b).unwrap();
        tape.sce_mean(o, &labels).unwrap();
        let analytic = tape.backward(&store).unwrap();

        let err = crate::wirtinger::finite_diff_check(&mut store, &analytic.flat, 1e-4, loss_of);
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn backward_is_bit_deterministic() {
        let mut rng = crate::seeds::stream(3, &[1]);
        use rand::Rng;
        let vals: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let store = store_with(&[("w", ParamKind::Real, vals)]);
        let run = || {
            let mut tape = Tape::new();
            let w = tape.param(&store, 0);
            tape.sum_squares(w);
            tape.backward(&store).unwrap().flat
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        use rand::Rng;
        let mut rng = crate::seeds::stream(9, &[2]);
        let vals: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let store = store_with(&[("w", ParamKind::Real, vals)]);
        let c1: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c2: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();

        let single = |c: &[f64]| {
            let mut tape = Tape::new();
            let w = tape.param(&store, 0);
            let cn = tape.constant(Shape::Feat { b: 1, d: 6 }, c.to_vec());
            let s = tape.add(w, cn).unwrap();
            tape.sum_squares(s);
            tape.backward(&store).unwrap().flat
        };
        let g1 = single(&c1);
        let g2 = single(&c2);

        let mut tape = Tape::new();
        let w = tape.param(&store, 0);
        let cn1 = tape.constant(Shape::Feat { b: 1, d: 6 }, c1.clone());
        let cn2 = tape.constant(Shape::Feat { b: 1, d: 6 }, c2.clone());
        let s1 = tape.add(w, cn1).unwrap();
        let s2 = tape.add(w, cn2).unwrap();
        let l1 = tape.sum_squares(s1);
        let l2 = tape.sum_squares(s2);
        tape.add(l1, l2).unwrap();
        let gsum = tape.backward(&store).unwrap().flat;
        for i in 0..6 {
            assert_abs_diff_eq!(gsum[i], g1[i] + g2[i], epsilon = 1e-12);
        }
    }
}
