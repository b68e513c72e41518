//! Numerical laboratory for comparing complex-valued and real-valued 1-D
//! convolutional classifiers on phase/amplitude-bearing synthetic signals.
//!
//! The crate is organized around the experiment pipeline: complex arithmetic
//! and its real 2x2 embedding ([`cnum`]), reverse-mode autodiff over a flat
//! real parameter vector ([`wirtinger`]), complex activations with holomorphy
//! diagnostics ([`activations`]), convolution layers and the constrained
//! stacked-real equivalence witness ([`layers`]), coordinate views ([`views`]),
//! the model family suite ([`families`]), three synthetic data generators
//! ([`rfgen`], [`qmgen`], [`eeggen`]), the AdamW training loop with per-step
//! telemetry ([`train`]), and the sweep/selection protocol ([`protocol`],
//! [`suites`]).

pub mod activations;
pub mod cnum;
pub mod dataset;
pub mod eeggen;
pub mod families;
pub mod layers;
pub mod manifest;
pub mod protocol;
pub mod qmgen;
pub mod report;
pub mod rfgen;
pub mod seeds;
pub mod suites;
pub mod train;
pub mod views;
pub mod wirtinger;

pub use cnum::Cplx;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("flagged sample: {0}")]
    FlaggedSample(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("stats error: {0}")]
    Stats(String),
    #[error("run diverged at step {0}: non-finite gradient or loss")]
    Diverged(u64),
    #[error("protocol error: missing cells: {0:?}")]
    IncompleteGrid(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
