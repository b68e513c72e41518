//! Quantum-wavefunction pilot generator: Gaussian-wavepacket momentum
//! classification, a five-potential inverse task behind a short split-step
//! evolution, and global-phase stress factors. Units are hbar = m = 1.
//!
//! The grid is x in [-8, 8] with 96 points. Momentum classes use
//! k in {-6, -2, 2, 6} (so max |k| dx = 1 < pi/2, safely unaliased), the
//! envelope is randomized independently of the class, and the phase offset is
//! uniform, which leaves the magnitude view with no class information.

use crate::cnum::{cmul, Cplx};
use crate::dataset::{ComplexSeq, DatasetHeader, LabeledDataset, FORMAT_VERSION};
use crate::seeds;
use crate::{Error, Result};
use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

pub const N_GRID: usize = 96;
pub const X_MIN: f64 = -8.0;
pub const X_MAX: f64 = 8.0;
pub const DX: f64 = (X_MAX - X_MIN) / N_GRID as f64;
/// Momentum classes `{-3k, -k, k, 3k}` with `kappa = 2`.
pub const MOMENTUM_CLASSES: [f64; 4] = [-6.0, -2.0, 2.0, 6.0];
/// Potentials are clamped to this magnitude so the splitting guard holds at
/// full strength.
pub const V_CAP: f64 = 12.0;
pub const DEFAULT_DT: f64 = 0.04;
pub const DEFAULT_STEPS: usize = 10;
/// Fixed unseen global phase applied to val/test in the shift conditions.
pub const DEFAULT_GLOBAL_PHASE: f64 = 1.7;

pub fn grid_x() -> Vec<f64> {
    (0..N_GRID).map(|i| X_MIN + DX * i as f64).collect()
}

/// One normalized wavefunction sample on the grid.
#[derive(Debug, Clone)]
pub struct Wavefunction {
    pub psi: Vec<Cplx>,
    pub dx: f64,
    pub label: u8,
}

impl Wavefunction {
    /// `sum |psi|^2 dx`, which generation keeps at 1.
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for z in self.psi.iter_mut() {
                *z = z.scale(1.0 / n);
            }
        }
    }

    /// Position expectation value.
    pub fn mean_x(&self) -> f64 {
        let x = grid_x();
        self.psi
            .iter()
            .zip(&x)
            .map(|(z, &xi)| z.norm_sqr() * xi)
            .sum::<f64>()
            * self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    Free,
    Harmonic,
    LinearRamp,
    SquareBarrier,
    DoubleWell,
}

impl PotentialFamily {
    pub const ALL: [PotentialFamily; 5] = [
        PotentialFamily::Free,
        PotentialFamily::Harmonic,
        PotentialFamily::LinearRamp,
        PotentialFamily::SquareBarrier,
        PotentialFamily::DoubleWell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PotentialFamily::Free => "free",
            PotentialFamily::Harmonic => "harmonic",
            PotentialFamily::LinearRamp => "linear_ramp",
            PotentialFamily::SquareBarrier => "square_barrier",
            PotentialFamily::DoubleWell => "double_well",
        }
    }

    /// Evaluate the potential on the grid with per-sample random strengths,
    /// clamped to `[-V_CAP, V_CAP]` so it stays bounded on the domain.
    pub fn sample_values(self, rng: &mut impl Rng) -> Vec<f64> {
        let x = grid_x();
        let v: Vec<f64> = match self {
            PotentialFamily::Free => vec![0.0; N_GRID],
            PotentialFamily::Harmonic => {
                let omega: f64 = rng.random_range(0.4..0.8);
                x.iter().map(|&xi| 0.5 * omega * omega * xi * xi).collect()
            }
            PotentialFamily::LinearRamp => {
                let slope = rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                x.iter().map(|&xi| slope * xi).collect()
            }
            PotentialFamily::SquareBarrier => {
                let h: f64 = rng.random_range(2.0..6.0);
                let c: f64 = rng.random_range(-2.0..2.0);
                let w: f64 = rng.random_range(1.0..2.5);
                x.iter()
                    .map(|&xi| if (xi - c).abs() <= w / 2.0 { h } else { 0.0 })
                    .collect()
            }
            PotentialFamily::DoubleWell => {
                let h: f64 = rng.random_range(1.0..3.0);
                let b: f64 = rng.random_range(1.5..3.0);
                x.iter().map(|&xi| h * ((xi / b).powi(2) - 1.0).powi(2)).collect()
            }
        };
        v.into_iter().map(|vi| vi.clamp(-V_CAP, V_CAP)).collect()
    }
}

/// Gaussian wavepacket `A(x) exp(i k x + i phi0)` with class-independent
/// randomized envelope; `k_class` indexes [`MOMENTUM_CLASSES`].
pub fn gen_wavepacket(k_class: usize, rng: &mut impl Rng) -> Wavefunction {
    assert!(k_class < MOMENTUM_CLASSES.len());
    let k = MOMENTUM_CLASSES[k_class];
    let x0: f64 = rng.random_range(-1.5..1.5);
    let sigma: f64 = rng.random_range(0.8..1.6);
    let phi0: f64 = rng.random_range(0.0..2.0 * PI);
    let psi = grid_x()
        .iter()
        .map(|&x| {
            let a = (-(x - x0) * (x - x0) / (4.0 * sigma * sigma)).exp();
            cmul(Cplx::new(a, 0.0), Cplx::cis(k * x + phi0))
        })
        .collect();
    let mut wf = Wavefunction { psi, dx: DX, label: k_class as u8 };
    wf.normalize();
    wf
}

/// Strang-split unitary evolution: half potential phase, full kinetic phase
/// in frequency space, half potential phase, repeated `steps` times. Errors
/// if the phase-accuracy guard `dt * max|V| <= 1` fails.
pub fn split_step_evolve(wf: &mut Wavefunction, v: &[f64], dt: f64, steps: usize) -> Result<()> {
    if v.len() != wf.psi.len() {
        return Err(Error::Shape("potential grid mismatch".into()));
    }
    let vmax = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if dt * vmax > 1.0 {
        return Err(Error::Config(format!(
            "stability guard violated: dt*max|V| = {:.3} > 1",
            dt * vmax
        )));
    }
    let n = wf.psi.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    // Standard DFT frequency ordering: k_j = 2 pi j / (n dx) for j < n/2,
    // negative for j >= n/2.
    let ks: Vec<f64> = (0..n)
        .map(|j| {
            let j = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
            2.0 * PI * j / (n as f64 * wf.dx)
        })
        .collect();
    let half_v: Vec<Cplx> = v.iter().map(|&vi| Cplx::cis(-vi * dt / 2.0)).collect();
    let kin: Vec<Cplx> = ks.iter().map(|&k| Cplx::cis(-k * k / 2.0 * dt)).collect();
    let mut buf: Vec<Complex64> = Vec::with_capacity(n);
    for _ in 0..steps {
        for (z, h) in wf.psi.iter_mut().zip(&half_v) {
            *z = cmul(*z, *h);
        }
        buf.clear();
        buf.extend(wf.psi.iter().map(|z| Complex64::new(z.re, z.im)));
        fft.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(&kin) {
            let z = cmul(Cplx::new(b.re, b.im), *g);
            *b = Complex64::new(z.re, z.im);
        }
        ifft.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (z, b) in wf.psi.iter_mut().zip(&buf) {
            *z = cmul(Cplx::new(b.re * scale, b.im * scale), Cplx::ONE);
        }
        for (z, h) in wf.psi.iter_mut().zip(&half_v) {
            *z = cmul(*z, *h);
        }
    }
    Ok(())
}

/// Multiply the whole wavefunction by `e^{i phi}`; magnitudes are untouched.
pub fn global_phase(wf: &mut Wavefunction, phi: f64) {
    let r = Cplx::cis(phi);
    for z in wf.psi.iter_mut() {
        *z = cmul(r, *z);
    }
}

/// Analytic momentum-class oracle, independent of any neural model: least-
/// squares slope of the unwrapped phase over the envelope's bulk, snapped to
/// the nearest momentum class.
pub fn phase_slope_classify(wf: &Wavefunction) -> usize {
    let peak = wf.psi.iter().map(|z| z.abs()).fold(0.0f64, f64::max);
    let x = grid_x();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut phase_prev = 0.0f64;
    let mut unwrapped = 0.0f64;
    let mut started = false;
    for (z, &xi) in wf.psi.iter().zip(&x) {
        if z.abs() < 0.2 * peak {
            continue;
        }
        let p = z.arg();
        if started {
            let mut d = p - phase_prev;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            unwrapped += d;
        } else {
            started = true;
        }
        phase_prev = p;
        pts.push((xi, unwrapped));
    }
    // Least-squares slope.
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    MOMENTUM_CLASSES
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - slope).abs().total_cmp(&(b.1 - slope).abs()))
        .map(|(i, _)| i)
        .unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumTask {
    Momentum,
    PotentialInverse,
    GlobalShift,
    GlobalAug,
}

impl QuantumTask {
    pub const ALL: [QuantumTask; 4] = [
        QuantumTask::Momentum,
        QuantumTask::PotentialInverse,
        QuantumTask::GlobalShift,
        QuantumTask::GlobalAug,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuantumTask::Momentum => "momentum",
            QuantumTask::PotentialInverse => "potential_inverse",
            QuantumTask::GlobalShift => "global_shift",
            QuantumTask::GlobalAug => "global_aug",
        }
    }

    pub fn classes(self) -> usize {
        match self {
            QuantumTask::Momentum => 4,
            _ => 5,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            QuantumTask::Momentum => {
                MOMENTUM_CLASSES.iter().map(|k| format!("k={k}")).collect()
            }
            _ => PotentialFamily::ALL.iter().map(|p| p.name().to_string()).collect(),
        }
    }
}

impl std::str::FromStr for QuantumTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        QuantumTask::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown quantum condition `{s}`")))
    }
}

/// One potential-inverse sample: a random packet evolved under a random
/// draw from the labeled potential family.
fn gen_potential_sample(label: usize, rng: &mut impl Rng) -> Result<Wavefunction> {
    // Initial packet randomized independently of the class, with small
    // momentum so evolution stays on the grid.
    let x0: f64 = rng.random_range(-1.5..1.5);
    let sigma: f64 = rng.random_range(0.7..1.3);
    let k0: f64 = rng.random_range(-1.0..1.0);
    let phi0: f64 = rng.random_range(0.0..2.0 * PI);
    let psi = grid_x()
        .iter()
        .map(|&x| {
            let a = (-(x - x0) * (x - x0) / (4.0 * sigma * sigma)).exp();
            cmul(Cplx::new(a, 0.0), Cplx::cis(k0 * x + phi0))
        })
        .collect();
    let mut wf = Wavefunction { psi, dx: DX, label: label as u8 };
    wf.normalize();
    let v = PotentialFamily::ALL[label].sample_values(rng);
    split_step_evolve(&mut wf, &v, DEFAULT_DT, DEFAULT_STEPS)?;
    Ok(wf)
}

/// Per-class split sizes matching the pilot preset (128/32/32).
pub fn default_sizes() -> crate::rfgen::SplitSizes {
    crate::rfgen::SplitSizes { train: 128, val: 32, test: 32 }
}

/// Class-balanced deterministic dataset for one quantum task.
pub fn make_quantum_dataset(
    task: QuantumTask,
    seed: u64,
    sizes: crate::rfgen::SplitSizes,
) -> Result<LabeledDataset> {
    let classes = task.classes();
    let mut splits: Vec<Vec<ComplexSeq>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for (split_id, &n_per_class) in [sizes.train, sizes.val, sizes.test].iter().enumerate() {
        let is_train = split_id == 0;
        for label in 0..classes {
            for i in 0..n_per_class {
                let mut rng = seeds::stream(
                    seed,
                    &[
                        seeds::tag("quantum"),
                        seeds::tag(task.name()),
                        split_id as u64,
                        label as u64,
                        i as u64,
                    ],
                );
                let mut wf = match task {
                    QuantumTask::Momentum => gen_wavepacket(label, &mut rng),
                    _ => gen_potential_sample(label, &mut rng)?,
                };
                match task {
                    QuantumTask::GlobalShift => {
                        if !is_train {
                            global_phase(&mut wf, DEFAULT_GLOBAL_PHASE);
                        }
                    }
                    QuantumTask::GlobalAug => {
                        if is_train {
                            let phi = rng.random_range(0.0..2.0 * PI);
                            global_phase(&mut wf, phi);
                        } else {
                            global_phase(&mut wf, DEFAULT_GLOBAL_PHASE);
                        }
                    }
                    _ => {}
                }
                splits[split_id].push(ComplexSeq::quantized(wf.psi, label as u8));
            }
        }
    }
    let test = splits.pop().unwrap();
    let val = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(LabeledDataset {
        header: DatasetHeader {
            format_version: FORMAT_VERSION,
            domain: "quantum".into(),
            condition: task.name().into(),
            class_names: task.class_names(),
            ch: 1,
            t: N_GRID,
            n_train: train.len(),
            n_val: val.len(),
            n_test: test.len(),
            seed,
            meta: serde_json::json!({
                "task": task.name(),
                "potentials": PotentialFamily::ALL.iter().map(|p| p.name()).collect::<Vec<_>>(),
                "dt": DEFAULT_DT,
                "steps": DEFAULT_STEPS,
                "n_grid": N_GRID,
                "momentum_classes": MOMENTUM_CLASSES,
                "global_phase": DEFAULT_GLOBAL_PHASE,
            }),
        },
        train,
        val,
        test,
    })
}
