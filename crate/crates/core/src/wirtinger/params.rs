//! Flat real parameter vector with complex-pair bookkeeping.
//!
//! All optimization happens on real coordinates. Complex parameters occupy
//! even-length windows of interleaved `(re, im)` pairs; the complex structure
//! is bookkeeping the layers interpret, never something the optimizer sees.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Real,
    ComplexPair,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub kind: ParamKind,
    pub offset: usize,
    pub len: usize,
}

/// Flat real-coordinate parameter vector plus a named window layout.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    values: Vec<f64>,
    layout: Vec<ParamEntry>,
    /// Optimizer step counter (incremented by AdamW).
    pub step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a named window filled by `init`, returning its entry index.
    pub fn push(
        &mut self,
        name: &str,
        kind: ParamKind,
        len: usize,
        mut init: impl FnMut() -> f64,
    ) -> Result<usize> {
        if self.layout.iter().any(|e| e.name == name) {
            return Err(Error::Contract(format!("duplicate parameter name `{name}`")));
        }
        if kind == ParamKind::ComplexPair && len % 2 != 0 {
            return Err(Error::Contract(format!(
                "complex-pair window `{name}` must have even length, got {len}"
            )));
        }
        let offset = self.values.len();
        self.values.extend(std::iter::repeat_with(&mut init).take(len));
        self.layout.push(ParamEntry { name: name.to_string(), kind, offset, len });
        Ok(self.layout.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &[ParamEntry] {
        &self.layout
    }

    pub fn entry(&self, idx: usize) -> &ParamEntry {
        &self.layout[idx]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.layout.iter().position(|e| e.name == name)
    }

    pub fn window(&self, idx: usize) -> &[f64] {
        let e = &self.layout[idx];
        &self.values[e.offset..e.offset + e.len]
    }

    /// Largest absolute parameter value (0 for an empty store).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Gradient vector aligned with a [`ParamStore`]'s flat layout.
#[derive(Debug, Clone)]
pub struct Grads {
    pub flat: Vec<f64>,
}

impl Grads {
    pub fn zeros(store: &ParamStore) -> Self {
        Grads { flat: vec![0.0; store.len()] }
    }

    pub fn l2_norm(&self) -> f64 {
        self.flat.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// L2 norm of one named window.
    pub fn entry_norm(&self, store: &ParamStore, idx: usize) -> f64 {
        let e = store.entry(idx);
        self.flat[e.offset..e.offset + e.len].iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().all(|g| g.is_finite())
    }
}
