//! AdamW optimization of any family on any dataset with per-step telemetry
//! and dead-seed detection.
//!
//! Telemetry semantics: the record for step `k` holds the loss and gradient
//! evaluated at the parameters *after* the k-th update (the same gradient the
//! next update consumes), so instability injected by update 1 is visible in
//! the step-1 record. Records are dense up to [`TELEMETRY_CAP`] steps, then
//! every 10th step.

use crate::dataset::{ComplexSeq, LabeledDataset, Split};
use crate::families::{CostReport, Model};
use crate::seeds;
use crate::views::{apply_view, ViewId, Viewed};
use crate::wirtinger::{Grads, ParamStore, Tape};
use crate::{Error, Result};
use rand::seq::SliceRandom;

pub const TELEMETRY_CAP: usize = 200;
pub const SPARSE_EVERY: usize = 10;
/// Final-window length used by the dead-seed detector.
pub const DEAD_WINDOW: usize = 20;
/// Minimum recorded steps before a run can be declared dead.
pub const DEAD_MIN_STEPS: usize = 40;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
            weight_decay: 0.01,
            batch_size: 64,
            steps: 400,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        if self.steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// AdamW state: bias-corrected first/second moments over the flat parameter
/// vector. The step counter lives in the [`ParamStore`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// One decoupled-weight-decay Adam update:
/// `m = b1*m + (1-b1)*g`, `v = b2*v + (1-b2)*g^2`, bias-corrected, then
/// `theta -= lr * mhat / (sqrt(vhat) + eps) + lr * wd * theta`.
pub fn adamw_step(
    store: &mut ParamStore,
    grads: &Grads,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Diverged(store.step + 1));
    }
    store.step += 1;
    let t = store.step as i32;
    let (b1, b2) = cfg.betas;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let values = store.values_mut();
    for i in 0..values.len() {
        let g = grads.flat[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        values[i] -= cfg.lr * (mhat / (vhat.sqrt() + cfg.eps) + cfg.weight_decay * values[i]);
    }
    Ok(())
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    crate::wirtinger::cross_entropy_row(logits, label)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TelemetryRecord {
    pub step: usize,
    pub loss: f64,
    pub total_grad_norm: f64,
    pub head_weight_grad_norm: f64,
    pub max_param_abs: f64,
    /// One norm per named parameter group, in store layout order.
    pub per_param_grad_norm: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TelemetryTrace {
    pub param_names: Vec<String>,
    pub records: Vec<TelemetryRecord>,
    /// ComplexTanh pole-clamp events observed during training.
    pub clamp_events: usize,
}

impl TelemetryTrace {
    /// Write the per-run CSV: step, loss, total/head norms, max |param|,
    /// then one column per named parameter group.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "step,loss,total_grad_norm,head_weight_grad_norm,max_param_abs")?;
        for name in &self.param_names {
            write!(f, ",{name}")?;
        }
        writeln!(f)?;
        for r in &self.records {
            write!(
                f,
                "{},{},{},{},{}",
                r.step, r.loss, r.total_grad_norm, r.head_weight_grad_norm, r.max_param_abs
            )?;
            for v in &r.per_param_grad_norm {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunResult {
    pub final_train_loss: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub dead: bool,
    pub dead_reason: Option<String>,
    pub cost: CostReport,
}

/// A dataset split materialized under one coordinate view.
#[derive(Debug, Clone)]
pub struct ViewSplit {
    pub complex: bool,
    pub ch: usize,
    pub t: usize,
    pub n: usize,
    pub sample_len: usize,
    pub data: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Materialize one split of a complex dataset under `view`.
pub fn materialize(view: ViewId, split: &[ComplexSeq], ch: usize, t: usize) -> ViewSplit {
    let mut data = Vec::new();
    let mut labels = Vec::with_capacity(split.len());
    let mut meta: Option<Viewed> = None;
    for seq in split {
        let viewed = apply_view(view, &seq.samples, ch, t);
        data.extend_from_slice(&viewed.data);
        labels.push(seq.label);
        meta = Some(viewed);
    }
    let meta = meta.unwrap_or_else(|| apply_view(view, &[], 0, 0));
    let sample_len = if meta.complex { meta.ch * 2 * meta.t } else { meta.ch * meta.t };
    ViewSplit {
        complex: meta.complex,
        ch: meta.ch,
        t: meta.t,
        n: split.len(),
        sample_len,
        data,
        labels,
    }
}

impl ViewSplit {
    fn gather(&self, idxs: &[usize]) -> (Vec<f64>, Vec<u8>) {
        let mut x = Vec::with_capacity(idxs.len() * self.sample_len);
        let mut y = Vec::with_capacity(idxs.len());
        for &i in idxs {
            x.extend_from_slice(&self.data[i * self.sample_len..(i + 1) * self.sample_len]);
            y.push(self.labels[i]);
        }
        (x, y)
    }
}

/// All three splits under the model's view.
pub struct ViewBundle {
    pub train: ViewSplit,
    pub val: ViewSplit,
    pub test: ViewSplit,
}

pub fn materialize_bundle(view: ViewId, ds: &LabeledDataset) -> ViewBundle {
    let (ch, t) = (ds.header.ch, ds.header.t);
    ViewBundle {
        train: materialize(view, ds.split(Split::Train), ch, t),
        val: materialize(view, ds.split(Split::Val), ch, t),
        test: materialize(view, ds.split(Split::Test), ch, t),
    }
}

/// Accuracy of argmax predictions over a split, evaluated in chunks.
/// NaN logits never win the argmax, so diverged models score only where
/// class 0 is correct.
pub fn evaluate(model: &Model, split: &ViewSplit) -> Result<f64> {
    if split.n == 0 {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    let chunk = 256;
    let mut i = 0;
    while i < split.n {
        let hi = (i + chunk).min(split.n);
        let idxs: Vec<usize> = (i..hi).collect();
        let (x, y) = split.gather(&idxs);
        let mut tape = Tape::new();
        let (logits, _) = model.forward_logits(&mut tape, x, idxs.len())?;
        let lv = tape.value(logits);
        for (bi, &label) in y.iter().enumerate() {
            let row = &lv[bi * model.classes..(bi + 1) * model.classes];
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (c, &v) in row.iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            if best == label as usize {
                correct += 1;
            }
        }
        i = hi;
    }
    Ok(correct as f64 / split.n as f64)
}

/// Dead iff the final [`DEAD_WINDOW`] recorded steps sit at the uniform-
/// prediction loss `ln(classes)` (within 0.02) with mean total gradient norm
/// <= 1e-3, and test accuracy is within 0.05 of chance. Requires at least
/// [`DEAD_MIN_STEPS`] recorded steps.
pub fn detect_dead(trace: &TelemetryTrace, test_accuracy: f64, num_classes: usize) -> bool {
    if trace.records.len() < DEAD_MIN_STEPS {
        return false;
    }
    let tail = &trace.records[trace.records.len() - DEAD_WINDOW..];
    let uniform = (num_classes as f64).ln();
    let mean_dev =
        tail.iter().map(|r| (r.loss - uniform).abs()).sum::<f64>() / tail.len() as f64;
    let mean_grad = tail.iter().map(|r| r.total_grad_norm).sum::<f64>() / tail.len() as f64;
    let chance = 1.0 / num_classes as f64;
    mean_dev <= 0.02 && mean_grad <= 1e-3 && test_accuracy <= chance + 0.05
}

fn record_from(
    step: usize,
    loss: f64,
    grads: &Grads,
    store: &ParamStore,
    head_entry: usize,
) -> TelemetryRecord {
    let per: Vec<f64> = (0..store.layout().len()).map(|i| grads.entry_norm(store, i)).collect();
    TelemetryRecord {
        step,
        loss,
        total_grad_norm: grads.l2_norm(),
        head_weight_grad_norm: grads.entry_norm(store, head_entry),
        max_param_abs: store.max_abs(),
        per_param_grad_norm: per,
    }
}

/// Deterministic minibatch index stream: reshuffled each epoch.
struct BatchStream {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl BatchStream {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut s = BatchStream {
            order: (0..n).collect(),
            pos: 0,
            batch: batch.min(n),
            rng: seeds::stream(seed, &[seeds::tag("batches")]),
        };
        s.order.shuffle(&mut s.rng);
        s
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.pos + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let out = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        out
    }
}

/// Train `model` on `bundle` under `cfg`. Deterministic given (cfg, data,
/// model seed). Divergence (non-finite loss or gradient) halts the loop and
/// marks the run dead with `reason = "diverged"`.
pub fn train_run(
    model: &mut Model,
    bundle: &ViewBundle,
    cfg: &TrainConfig,
) -> Result<(RunResult, TelemetryTrace)> {
    cfg.validate()?;
    if bundle.train.n == 0 {
        return Err(Error::Config("empty training split".into()));
    }
    if bundle.train.complex != model.complex || bundle.train.ch != model.in_ch {
        return Err(Error::Config(format!(
            "view/model mismatch: data {}ch complex={}, model {}ch complex={}",
            bundle.train.ch, bundle.train.complex, model.in_ch, model.complex
        )));
    }
    let head_entry = model.head_weight_entry();
    let param_names: Vec<String> =
        model.store.layout().iter().map(|e| e.name.clone()).collect();
    let mut trace =
        TelemetryTrace { param_names, records: Vec::new(), clamp_events: 0 };
    let mut state = AdamState::new(model.store.len());
    let mut stream = BatchStream::new(bundle.train.n, cfg.batch_size, cfg.seed);

    let fb = |model: &Model, idxs: &[usize], trace_clamps: &mut usize| -> Result<(f64, Grads)> {
        let (x, y) = bundle.train.gather(idxs);
        let mut tape = Tape::new();
        let out = model.forward_loss(&mut tape, x, &y, idxs.len())?;
        let loss = tape.value(out.loss)[0];
        let grads = tape.backward(&model.store)?;
        *trace_clamps += tape.clamp_events();
        Ok((loss, grads))
    };

    let mut diverged = false;
    let idxs = stream.next_batch();
    let (mut loss_prev, mut grads_prev) = fb(model, &idxs, &mut trace.clamp_events)?;
    let mut last_loss = loss_prev;
    for step in 1..=cfg.steps {
        if !loss_prev.is_finite() {
            diverged = true;
            break;
        }
        match adamw_step(&mut model.store, &grads_prev, &mut state, cfg) {
            Ok(()) => {}
            Err(Error::Diverged(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        let idxs = stream.next_batch();
        let (loss, grads) = fb(model, &idxs, &mut trace.clamp_events)?;
        if step <= TELEMETRY_CAP || step % SPARSE_EVERY == 0 || step == cfg.steps {
            trace.records.push(record_from(step, loss, &grads, &model.store, head_entry));
        }
        last_loss = loss;
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        loss_prev = loss;
        grads_prev = grads;
    }

    if trace.clamp_events > 0 {
        eprintln!(
            "warning: ctanh pole clamp fired {} times during training",
            trace.clamp_events
        );
    }

    let val_accuracy = evaluate(model, &bundle.val)?;
    let test_accuracy = evaluate(model, &bundle.test)?;
    let dead_detected = detect_dead(&trace, test_accuracy, model.classes);
    let dead = diverged || dead_detected;
    let dead_reason = if diverged {
        Some("diverged".to_string())
    } else if dead_detected {
        Some("uniform_collapse".to_string())
    } else {
        None
    };
    Ok((
        RunResult {
            final_train_loss: last_loss,
            val_accuracy,
            test_accuracy,
            dead,
            dead_reason,
            cost: model.cost(),
        },
        trace,
    ))
}
