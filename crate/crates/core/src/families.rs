//! The model-family suite: native complex, stacked real, parameter-matched
//! real, FLOP-matched real, and coordinate-specialized real models, all built
//! on the same two-block convolutional reference architecture with exact
//! parameter and multiply-accumulate accounting.
//!
//! Reference architecture: conv(k=5, stride 2) -> activation -> conv(k=5,
//! stride 2) -> activation -> global average pool -> dense -> ReLU -> dense.
//! Complex families convert pooled features to real by `(re, im)`
//! concatenation. The first head dense carries the instrumented
//! `head.weight`/`head.bias` names.

use crate::activations::ActivationId;
use crate::seeds;
use crate::views::ViewId;
use crate::wirtinger::{ConvCfg, NodeId, ParamKind, ParamStore, Shape, Tape};
use crate::{Error, Result};
use rand_distr::{Distribution, Normal};

pub const KERNEL: usize = 5;
pub const STRIDE: usize = 2;
pub const HEAD_HIDDEN: usize = 64;
pub const WIDTH_MIN: usize = 4;
pub const WIDTH_MAX: usize = 1024;
/// Build-time tolerance for the parameter-matched baseline.
pub const PARAM_MATCH_TOL: f64 = 0.05;
/// Build-time tolerance for the FLOP-matched baseline.
pub const FLOP_MATCH_TOL: f64 = 0.10;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Complex,
    RealStacked,
    RealParamMatched,
    RealFlopMatched,
    RealPolar,
    RealPhase,
    RealMagnitude,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Complex => "complex",
            Family::RealStacked => "real_stacked",
            Family::RealParamMatched => "real_param_matched",
            Family::RealFlopMatched => "real_flop_matched",
            Family::RealPolar => "real_polar",
            Family::RealPhase => "real_phase",
            Family::RealMagnitude => "real_magnitude",
        }
    }

    /// The coordinate view this family trains on.
    pub fn default_view(self) -> ViewId {
        match self {
            Family::Complex => ViewId::ComplexNative,
            Family::RealStacked | Family::RealParamMatched | Family::RealFlopMatched => {
                ViewId::Cartesian
            }
            Family::RealPolar => ViewId::Polar,
            Family::RealPhase => ViewId::PhaseOnly,
            Family::RealMagnitude => ViewId::MagnitudeOnly,
        }
    }

    /// The three width/compute capacity controls.
    pub const CAPACITY_REAL: [Family; 3] =
        [Family::RealStacked, Family::RealParamMatched, Family::RealFlopMatched];
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "complex" => Family::Complex,
            "real_stacked" => Family::RealStacked,
            "real_param_matched" => Family::RealParamMatched,
            "real_flop_matched" => Family::RealFlopMatched,
            "real_polar" => Family::RealPolar,
            "real_phase" => Family::RealPhase,
            "real_magnitude" => Family::RealMagnitude,
            _ => return Err(Error::Config(format!("unknown family `{s}`"))),
        })
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub view: ViewId,
    pub activation: ActivationId,
    pub width: usize,
}

impl FamilySpec {
    /// Family with its canonical view.
    pub fn new(family: Family, activation: ActivationId, width: usize) -> Self {
        FamilySpec { family, view: family.default_view(), activation, width }
    }

    pub fn validate(&self) -> Result<()> {
        if self.view != self.family.default_view() {
            return Err(Error::Config(format!(
                "family {} requires view {}, got {}",
                self.family,
                self.family.default_view(),
                self.view
            )));
        }
        let complex = self.family == Family::Complex;
        if complex && self.activation == ActivationId::RealRelu {
            return Err(Error::Config("complex family needs a complex activation".into()));
        }
        if !complex && self.activation != ActivationId::RealRelu && self.width % 2 != 0 {
            return Err(Error::Config(
                "pair activation on a real family needs an even width".into(),
            ));
        }
        if self.width < WIDTH_MIN || self.width > WIDTH_MAX {
            return Err(Error::Config(format!(
                "width {} outside [{WIDTH_MIN}, {WIDTH_MAX}]",
                self.width
            )));
        }
        Ok(())
    }

    /// Matched baselines chase the complex model the sweep actually runs, so
    /// the target count includes the complex activation's parameters.
    fn activation_for_target(&self) -> ActivationId {
        if self.activation == ActivationId::RealRelu {
            ActivationId::Crelu
        } else {
            self.activation
        }
    }
}

/// Shape of the raw complex dataset a model trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DataShape {
    /// Complex input channels before view application.
    pub in_ch: usize,
    pub t: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CostReport {
    /// Real scalars (a complex weight counts 2).
    pub param_count: usize,
    /// Multiply-accumulate units per forward pass; one complex tap = 4 real
    /// MACs (the naive form actually executed; no Karatsuba).
    pub flops_per_forward: u64,
}

struct Entries {
    conv1_w: usize,
    conv1_b: usize,
    act1_b: Option<usize>,
    conv2_w: usize,
    conv2_b: usize,
    act2_b: Option<usize>,
    head_w: usize,
    head_b: usize,
    out_w: usize,
    out_b: usize,
}

/// A built model instance: architecture dims plus its parameter store.
pub struct Model {
    pub spec: FamilySpec,
    pub complex: bool,
    /// Real family running a complex activation on adjacent channel pairs.
    pub pair_act: bool,
    /// Input channels after view application (complex channels if complex).
    pub in_ch: usize,
    /// Resolved conv width (differs from `spec.width` for matched families).
    pub width: usize,
    pub t: usize,
    pub classes: usize,
    pub store: ParamStore,
    entries: Entries,
}

/// Output handles of a training forward pass.
pub struct ForwardOut {
    pub loss: NodeId,
    pub logits: NodeId,
    /// Activation ids with their pre-activation node, for kink probing.
    pub act_inputs: Vec<(ActivationId, NodeId)>,
}

fn t_after(t: usize) -> (usize, usize) {
    let t1 = (t - KERNEL) / STRIDE + 1;
    let t2 = (t1 - KERNEL) / STRIDE + 1;
    (t1, t2)
}

/// Closed-form real-scalar count for a family at a given conv width.
pub fn closed_form_params(
    family: Family,
    activation: ActivationId,
    width: usize,
    shape: DataShape,
) -> usize {
    let h = HEAD_HIDDEN;
    if family == Family::Complex {
        let ic = shape.in_ch;
        let conv1 = 2 * (ic * width * KERNEL + width);
        let conv2 = 2 * (width * width * KERNEL + width);
        let act = if activation.has_bias() { 2 * width } else { 0 };
        let head = (2 * width) * h + h + h * shape.classes + shape.classes;
        conv1 + conv2 + act + head
    } else {
        let ic = shape.in_ch * family.default_view().channel_multiplier();
        let conv1 = ic * width * KERNEL + width;
        let conv2 = width * width * KERNEL + width;
        let act = if activation.has_bias() { width } else { 0 };
        let head = width * h + h + h * shape.classes + shape.classes;
        conv1 + conv2 + act + head
    }
}

/// Closed-form multiply-accumulate count per forward pass.
pub fn closed_form_flops(family: Family, width: usize, shape: DataShape) -> u64 {
    let (t1, t2) = t_after(shape.t);
    let h = HEAD_HIDDEN as u64;
    let w = width as u64;
    if family == Family::Complex {
        let ic = shape.in_ch as u64;
        let conv1 = 4 * ic * w * KERNEL as u64 * t1 as u64;
        let conv2 = 4 * w * w * KERNEL as u64 * t2 as u64;
        let head = 2 * w * h + h * shape.classes as u64;
        conv1 + conv2 + head
    } else {
        let ic = (shape.in_ch * family.default_view().channel_multiplier()) as u64;
        let conv1 = ic * w * KERNEL as u64 * t1 as u64;
        let conv2 = w * w * KERNEL as u64 * t2 as u64;
        let head = w * h + h * shape.classes as u64;
        conv1 + conv2 + head
    }
}

/// Real parameters of a plain real dense layer `in -> out` with bias.
pub fn dense_params(in_dim: usize, out_dim: usize) -> usize {
    in_dim * out_dim + out_dim
}

/// Real parameters of a complex dense layer `in -> out` with bias.
pub fn complex_dense_params(in_dim: usize, out_dim: usize) -> usize {
    2 * dense_params(in_dim, out_dim)
}

/// Width whose cost is closest to `target`, ties to the smaller width.
/// `cost_fn` must be monotone in width.
pub fn match_width(target: f64, cost_fn: impl Fn(usize) -> f64) -> Result<usize> {
    let lo = cost_fn(WIDTH_MIN);
    let hi = cost_fn(WIDTH_MAX);
    if target < lo.min(hi) || target > lo.max(hi) {
        return Err(Error::Config(format!(
            "match target {target} outside achievable range [{}, {}]",
            lo.min(hi),
            lo.max(hi)
        )));
    }
    let mut best = WIDTH_MIN;
    let mut best_err = f64::INFINITY;
    for w in WIDTH_MIN..=WIDTH_MAX {
        let err = (cost_fn(w) - target).abs();
        if err < best_err {
            best_err = err;
            best = w;
        }
    }
    Ok(best)
}

/// Resolve the conv width a family actually uses at this trial width.
pub fn resolved_width(spec: &FamilySpec, shape: DataShape) -> Result<usize> {
    match spec.family {
        Family::RealParamMatched => {
            let target = closed_form_params(
                Family::Complex,
                spec.activation_for_target(),
                spec.width,
                shape,
            ) as f64;
            let cost = |w: usize| {
                closed_form_params(Family::RealParamMatched, ActivationId::RealRelu, w, shape) as f64
            };
            let w = match_width(target, cost)?;
            let got = cost(w);
            if (got - target).abs() / target > PARAM_MATCH_TOL {
                return Err(Error::Config(format!(
                    "parameter match misses target by {:.1}%",
                    100.0 * (got - target).abs() / target
                )));
            }
            Ok(w)
        }
        Family::RealFlopMatched => {
            let target = closed_form_flops(Family::Complex, spec.width, shape) as f64;
            let cost = |w: usize| closed_form_flops(Family::RealFlopMatched, w, shape) as f64;
            let w = match_width(target, cost)?;
            let got = cost(w);
            if (got - target).abs() / target > FLOP_MATCH_TOL {
                return Err(Error::Config(format!(
                    "FLOP match misses target by {:.1}%",
                    100.0 * (got - target).abs() / target
                )));
            }
            Ok(w)
        }
        _ => Ok(spec.width),
    }
}

/// Build a model instance with deterministic initialization from `seed`.
///
/// Complex weights draw independent `(re, im)` coordinates with variance
/// `1/(fan_in * k)` per real coordinate; real convs use the same
/// per-coordinate rule, and dense layers use `1/fan_in`.
pub fn build(spec: &FamilySpec, shape: DataShape, seed: u64) -> Result<Model> {
    spec.validate()?;
    if shape.t < 2 * KERNEL + 3 {
        return Err(Error::Shape(format!(
            "sequence length {} too short for two conv blocks",
            shape.t
        )));
    }
    if shape.classes < 2 {
        return Err(Error::Shape("need at least two classes".into()));
    }
    let complex = spec.family == Family::Complex;
    let width = resolved_width(spec, shape)?;
    let in_ch = if complex { shape.in_ch } else { shape.in_ch * spec.view.channel_multiplier() };
    let pair_act = !complex && spec.activation != ActivationId::RealRelu;

    let mut rng = seeds::stream(seed, &[seeds::tag("model-init"), seeds::tag(spec.family.name())]);
    let mut store = ParamStore::new();
    let mut normal = |rng: &mut rand_chacha::ChaCha8Rng, std: f64| {
        Normal::new(0.0, std).unwrap().sample(rng)
    };

    let (kind, mult) = if complex { (ParamKind::ComplexPair, 2) } else { (ParamKind::Real, 1) };
    let act_channels = if complex { width } else { width / 2 };
    let std1 = (1.0 / (in_ch * KERNEL) as f64).sqrt();
    let conv1_w =
        store.push("conv1.weight", kind, mult * width * in_ch * KERNEL, || normal(&mut rng, std1))?;
    let conv1_b = store.push("conv1.bias", kind, mult * width, || 0.0)?;
    let act1_b = if spec.activation.has_bias() {
        Some(store.push("act1.bias", ParamKind::Real, act_channels, || 0.0)?)
    } else {
        None
    };
    let std2 = (1.0 / (width * KERNEL) as f64).sqrt();
    let conv2_w =
        store.push("conv2.weight", kind, mult * width * width * KERNEL, || normal(&mut rng, std2))?;
    let conv2_b = store.push("conv2.bias", kind, mult * width, || 0.0)?;
    let act2_b = if spec.activation.has_bias() {
        Some(store.push("act2.bias", ParamKind::Real, act_channels, || 0.0)?)
    } else {
        None
    };
    let feat = if complex { 2 * width } else { width };
    let std_h = (1.0 / feat as f64).sqrt();
    let head_w =
        store.push("head.weight", ParamKind::Real, HEAD_HIDDEN * feat, || normal(&mut rng, std_h))?;
    let head_b = store.push("head.bias", ParamKind::Real, HEAD_HIDDEN, || 0.0)?;
    let std_o = (1.0 / HEAD_HIDDEN as f64).sqrt();
    let out_w = store.push("head.out.weight", ParamKind::Real, shape.classes * HEAD_HIDDEN, || {
        normal(&mut rng, std_o)
    })?;
    let out_b = store.push("head.out.bias", ParamKind::Real, shape.classes, || 0.0)?;

    Ok(Model {
        spec: *spec,
        complex,
        pair_act,
        in_ch,
        width,
        t: shape.t,
        classes: shape.classes,
        store,
        entries: Entries {
            conv1_w,
            conv1_b,
            act1_b,
            conv2_w,
            conv2_b,
            act2_b,
            head_w,
            head_b,
            out_w,
            out_b,
        },
    })
}

impl Model {
    /// Exact real-scalar count from the store layout.
    pub fn count_params(&self) -> usize {
        self.store.len()
    }

    pub fn cost(&self) -> CostReport {
        CostReport {
            param_count: self.count_params(),
            flops_per_forward: closed_form_flops(
                self.spec.family,
                self.width,
                DataShape { in_ch: self.in_ch_raw(), t: self.t, classes: self.classes },
            ),
        }
    }

    fn in_ch_raw(&self) -> usize {
        if self.complex {
            self.in_ch
        } else {
            self.in_ch / self.spec.view.channel_multiplier()
        }
    }

    pub fn head_weight_entry(&self) -> usize {
        self.entries.head_w
    }

    fn input_shape(&self, batch: usize) -> Shape {
        if self.complex {
            Shape::Seq { b: batch, c: self.in_ch, planes: 2, t: self.t }
        } else {
            Shape::Seq { b: batch, c: self.in_ch, planes: 1, t: self.t }
        }
    }

    /// Forward to logits; shared by training and evaluation.
    pub fn forward_logits(
        &self,
        tape: &mut Tape,
        x: Vec<f64>,
        batch: usize,
    ) -> Result<(NodeId, Vec<(ActivationId, NodeId)>)> {
        let e = &self.entries;
        let xn = tape.constant(self.input_shape(batch), x);
        let w = tape.param(&self.store, e.conv1_w);
        let b = tape.param(&self.store, e.conv1_b);
        let cfg = ConvCfg {
            in_ch: self.in_ch,
            out_ch: self.width,
            k: KERNEL,
            stride: STRIDE,
            t_in: 0,
            t_out: 0,
        };
        let c1 = if self.complex { tape.cconv(xn, w, b, cfg)? } else { tape.rconv(xn, w, b, cfg)? };
        let mut act_inputs = vec![(self.spec.activation, c1)];
        let ab = e.act1_b.map(|i| tape.param(&self.store, i));
        let a1 = tape.act(c1, self.spec.activation, ab, self.pair_act)?;
        let w = tape.param(&self.store, e.conv2_w);
        let b = tape.param(&self.store, e.conv2_b);
        let cfg = ConvCfg {
            in_ch: self.width,
            out_ch: self.width,
            k: KERNEL,
            stride: STRIDE,
            t_in: 0,
            t_out: 0,
        };
        let c2 = if self.complex { tape.cconv(a1, w, b, cfg)? } else { tape.rconv(a1, w, b, cfg)? };
        act_inputs.push((self.spec.activation, c2));
        let ab = e.act2_b.map(|i| tape.param(&self.store, i));
        let a2 = tape.act(c2, self.spec.activation, ab, self.pair_act)?;
        let pooled = tape.gap(a2)?;
        let w = tape.param(&self.store, e.head_w);
        let b = tape.param(&self.store, e.head_b);
        let h = tape.dense(pooled, w, b)?;
        act_inputs.push((ActivationId::RealRelu, h));
        let r = tape.relu(h)?;
        let w = tape.param(&self.store, e.out_w);
        let b = tape.param(&self.store, e.out_b);
        let logits = tape.dense(r, w, b)?;
        Ok((logits, act_inputs))
    }

    /// Forward plus mean cross-entropy loss.
    pub fn forward_loss(
        &self,
        tape: &mut Tape,
        x: Vec<f64>,
        labels: &[u8],
        batch: usize,
    ) -> Result<ForwardOut> {
        let (logits, act_inputs) = self.forward_logits(tape, x, batch)?;
        let loss = tape.sce_mean(logits, labels)?;
        Ok(ForwardOut { loss, logits, act_inputs })
    }

    /// Equivalence-witness forward for a complex model: the same weights
    /// expanded into `[[a, -b], [b, a]]` blocks and run through the generic
    /// real conv on the stacked `(re, im)` input, with pair activations and
    /// the identical head. Logits must match `forward_logits` on the
    /// complex-native view of the same data.
    pub fn constrained_witness_logits(
        &self,
        tape: &mut Tape,
        x_stacked: Vec<f64>,
        batch: usize,
    ) -> Result<NodeId> {
        assert!(self.complex, "witness only applies to the complex family");
        let e = &self.entries;
        let expand = |w: &[f64], out_ch: usize, in_ch: usize| -> Vec<f64> {
            // (re, im) interleaved complex taps -> 2x2 blocks.
            let mut real = vec![0.0; (2 * out_ch) * (2 * in_ch) * KERNEL];
            let rin = 2 * in_ch;
            for oc in 0..out_ch {
                for ic in 0..in_ch {
                    for j in 0..KERNEL {
                        let a = w[((oc * in_ch + ic) * KERNEL + j) * 2];
                        let b = w[((oc * in_ch + ic) * KERNEL + j) * 2 + 1];
                        real[((2 * oc) * rin + 2 * ic) * KERNEL + j] = a;
                        real[((2 * oc) * rin + 2 * ic + 1) * KERNEL + j] = -b;
                        real[((2 * oc + 1) * rin + 2 * ic) * KERNEL + j] = b;
                        real[((2 * oc + 1) * rin + 2 * ic + 1) * KERNEL + j] = a;
                    }
                }
            }
            real
        };
        let shape = Shape::Seq { b: batch, c: 2 * self.in_ch, planes: 1, t: self.t };
        let xn = tape.constant(shape, x_stacked);
        let w1 = expand(self.store.window(e.conv1_w), self.width, self.in_ch);
        let b1 = self.store.window(e.conv1_b).to_vec();
        let wn = tape.constant(Shape::Feat { b: 1, d: w1.len() }, w1);
        let bn = tape.constant(Shape::Feat { b: 1, d: b1.len() }, b1);
        let cfg = ConvCfg {
            in_ch: 2 * self.in_ch,
            out_ch: 2 * self.width,
            k: KERNEL,
            stride: STRIDE,
            t_in: 0,
            t_out: 0,
        };
        let c1 = tape.rconv(xn, wn, bn, cfg)?;
        let ab = e.act1_b.map(|i| tape.param(&self.store, i));
        let a1 = tape.act(c1, self.spec.activation, ab, true)?;
        let w2 = expand(self.store.window(e.conv2_w), self.width, self.width);
        let b2 = self.store.window(e.conv2_b).to_vec();
        let wn = tape.constant(Shape::Feat { b: 1, d: w2.len() }, w2);
        let bn = tape.constant(Shape::Feat { b: 1, d: b2.len() }, b2);
        let cfg = ConvCfg {
            in_ch: 2 * self.width,
            out_ch: 2 * self.width,
            k: KERNEL,
            stride: STRIDE,
            t_in: 0,
            t_out: 0,
        };
        let c2 = tape.rconv(a1, wn, bn, cfg)?;
        let ab = e.act2_b.map(|i| tape.param(&self.store, i));
        let a2 = tape.act(c2, self.spec.activation, ab, true)?;
        let pooled = tape.gap(a2)?;
        let w = tape.param(&self.store, e.head_w);
        let b = tape.param(&self.store, e.head_b);
        let h = tape.dense(pooled, w, b)?;
        let r = tape.relu(h)?;
        let w = tape.param(&self.store, e.out_w);
        let b = tape.param(&self.store, e.out_b);
        tape.dense(r, w, b)
    }
}
