//! Coordinate-view transforms from complex sequences to the real-baseline
//! input representations.
//!
//! Views are dataset-level pure transforms applied before batching, so each
//! family trains on a fixed materialized representation.

use crate::cnum::Cplx;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewId {
    ComplexNative,
    Cartesian,
    Polar,
    PhaseOnly,
    MagnitudeOnly,
}

impl ViewId {
    pub fn name(self) -> &'static str {
        match self {
            ViewId::ComplexNative => "complex_native",
            ViewId::Cartesian => "cartesian",
            ViewId::Polar => "polar",
            ViewId::PhaseOnly => "phase_only",
            ViewId::MagnitudeOnly => "magnitude_only",
        }
    }

    /// Real channels produced per complex channel (complex_native keeps its
    /// single complex channel).
    pub fn channel_multiplier(self) -> usize {
        match self {
            ViewId::ComplexNative => 1,
            ViewId::Cartesian | ViewId::PhaseOnly => 2,
            ViewId::Polar => 3,
            ViewId::MagnitudeOnly => 1,
        }
    }
}

impl std::str::FromStr for ViewId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "complex_native" => ViewId::ComplexNative,
            "cartesian" => ViewId::Cartesian,
            "polar" => ViewId::Polar,
            "phase_only" => ViewId::PhaseOnly,
            "magnitude_only" => ViewId::MagnitudeOnly,
            _ => return Err(Error::Config(format!("unknown view `{s}`"))),
        })
    }
}

impl std::fmt::Display for ViewId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One sample after view application. Complex output keeps plane layout
/// `[ch][2][t]`; real views produce `[ch * multiplier][t]`.
#[derive(Debug, Clone)]
pub struct Viewed {
    pub complex: bool,
    pub ch: usize,
    pub t: usize,
    pub data: Vec<f64>,
}

/// `(cos, sin)` of the phase with the zero-input convention `(1, 0)`.
fn phase_unit(z: Cplx) -> (f64, f64) {
    let m = z.abs();
    if m == 0.0 {
        (1.0, 0.0)
    } else {
        (z.re / m, z.im / m)
    }
}

/// Apply a coordinate view to a `[ch x t]` complex sample (channel-major).
pub fn apply_view(view: ViewId, z: &[Cplx], ch: usize, t: usize) -> Viewed {
    assert_eq!(z.len(), ch * t, "sample length must be ch*t");
    match view {
        ViewId::ComplexNative => {
            let mut data = vec![0.0; ch * 2 * t];
            for c in 0..ch {
                for i in 0..t {
                    let v = z[c * t + i];
                    data[(c * 2) * t + i] = v.re;
                    data[(c * 2 + 1) * t + i] = v.im;
                }
            }
            Viewed { complex: true, ch, t, data }
        }
        ViewId::Cartesian => {
            // Stacked-real layout (re1, im1, re2, im2, ...).
            let mut data = vec![0.0; ch * 2 * t];
            for c in 0..ch {
                for i in 0..t {
                    let v = z[c * t + i];
                    data[(c * 2) * t + i] = v.re;
                    data[(c * 2 + 1) * t + i] = v.im;
                }
            }
            Viewed { complex: false, ch: ch * 2, t, data }
        }
        ViewId::Polar => {
            let mut data = vec![0.0; ch * 3 * t];
            for c in 0..ch {
                for i in 0..t {
                    let v = z[c * t + i];
                    let (cs, sn) = phase_unit(v);
                    data[(c * 3) * t + i] = v.abs();
                    data[(c * 3 + 1) * t + i] = cs;
                    data[(c * 3 + 2) * t + i] = sn;
                }
            }
            Viewed { complex: false, ch: ch * 3, t, data }
        }
        ViewId::PhaseOnly => {
            let mut data = vec![0.0; ch * 2 * t];
            for c in 0..ch {
                for i in 0..t {
                    let (cs, sn) = phase_unit(z[c * t + i]);
                    data[(c * 2) * t + i] = cs;
                    data[(c * 2 + 1) * t + i] = sn;
                }
            }
            Viewed { complex: false, ch: ch * 2, t, data }
        }
        ViewId::MagnitudeOnly => {
            let mut data = vec![0.0; ch * t];
            for c in 0..ch {
                for i in 0..t {
                    data[c * t + i] = z[c * t + i].abs();
                }
            }
            Viewed { complex: false, ch, t, data }
        }
    }
}
