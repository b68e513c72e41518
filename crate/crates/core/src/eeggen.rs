//! Synthetic EEG analytic-signal generator: phase-locking, amplitude-event,
//! and phase-amplitude-coupling tasks plus reference-phase stress factors.
//!
//! Signals are generated directly in analytic form (complex oscillations with
//! envelopes); no Hilbert transform in the loop. Every task has four classes
//! and a designated nuisance axis that is class-independent by construction:
//! amplitudes for phase locking, phases for amplitude events, and both
//! marginals for coupling.

use crate::cnum::{cmul, Cplx};
use crate::dataset::{ComplexSeq, DatasetHeader, LabeledDataset, FORMAT_VERSION};
use crate::seeds;
use crate::{Error, Result};
use rand::Rng;
use std::f64::consts::PI;

pub const CHANNELS: usize = 4;
pub const T: usize = 64;
pub const CLASSES: usize = 4;
/// Class-coded angles `{0, pi/2, pi, 3pi/2}` shared by the lag and coupling
/// tasks.
pub fn class_angle(label: usize) -> f64 {
    label as f64 * PI / 2.0
}

/// Phase jitter (radians) on the lag task.
pub const LOCKING_JITTER: f64 = 0.15;
/// PAC coupling depth.
pub const PAC_KAPPA: f64 = 0.8;
/// Slow / fast cycles per window for the coupling task.
pub const PAC_SLOW_CYCLES: f64 = 2.0;
pub const PAC_FAST_CYCLES: f64 = 11.0;
/// Fixed unseen reference phase for the shift conditions.
pub const DEFAULT_REFERENCE_PHASE: f64 = 2.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EegTask {
    PhaseLocking,
    AmplitudeEvent,
    Pac,
    ReferenceShift,
    ReferenceAug,
}

impl EegTask {
    pub const ALL: [EegTask; 5] = [
        EegTask::PhaseLocking,
        EegTask::AmplitudeEvent,
        EegTask::Pac,
        EegTask::ReferenceShift,
        EegTask::ReferenceAug,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EegTask::PhaseLocking => "phase_locking",
            EegTask::AmplitudeEvent => "amplitude_event",
            EegTask::Pac => "pac",
            EegTask::ReferenceShift => "reference_shift",
            EegTask::ReferenceAug => "reference_aug",
        }
    }
}

impl std::str::FromStr for EegTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EegTask::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown eeg condition `{s}`")))
    }
}

/// One labeled 4-channel analytic-signal sample, `[4][64]` channel-major.
pub type EegSample = ComplexSeq;

fn envelope(rng: &mut impl Rng) -> Vec<f64> {
    // Slowly varying positive envelope, class-independent.
    let depth: f64 = rng.random_range(0.2..0.5);
    let cycles: f64 = rng.random_range(0.5..1.5);
    let phase: f64 = rng.random_range(0.0..2.0 * PI);
    (0..T)
        .map(|t| 1.0 + depth * (2.0 * PI * cycles * t as f64 / T as f64 + phase).sin())
        .collect()
}

fn oscillation(amp: &[f64], omega: f64, phi: f64) -> Vec<Cplx> {
    (0..T)
        .map(|t| cmul(Cplx::new(amp[t], 0.0), Cplx::cis(omega * t as f64 + phi)))
        .collect()
}

fn distractor(rng: &mut impl Rng) -> Vec<Cplx> {
    let omega = 2.0 * PI * rng.random_range(2.0..9.0) / T as f64;
    let phi = rng.random_range(0.0..2.0 * PI);
    let amp = envelope(rng);
    oscillation(&amp, omega, phi)
}

/// Channel 1 lags channel 0 by the class angle (plus jitter); amplitudes are
/// randomized independently of the class.
pub fn gen_phase_locking(label: usize, jitter: f64, rng: &mut impl Rng) -> EegSample {
    let omega = 2.0 * PI * 6.0 / T as f64;
    let phi_ref = rng.random_range(0.0..2.0 * PI);
    let lag = class_angle(label);
    let a0 = envelope(rng);
    let a1 = envelope(rng);
    let mut data = Vec::with_capacity(CHANNELS * T);
    data.extend(oscillation(&a0, omega, phi_ref));
    let ch1: Vec<Cplx> = (0..T)
        .map(|t| {
            let j = if jitter > 0.0 { rng.random_range(-jitter..jitter) } else { 0.0 };
            cmul(Cplx::new(a1[t], 0.0), Cplx::cis(omega * t as f64 + phi_ref + lag + j))
        })
        .collect();
    data.extend(ch1);
    data.extend(distractor(rng));
    data.extend(distractor(rng));
    ComplexSeq::quantized(data, label as u8)
}

/// The labeled channel carries a Gaussian-envelope amplitude burst (peak at
/// least 2x baseline); phases are randomized independently of the class.
pub fn gen_amplitude_event(label: usize, rng: &mut impl Rng) -> EegSample {
    let mut data = Vec::with_capacity(CHANNELS * T);
    for ch in 0..CHANNELS {
        let omega = 2.0 * PI * rng.random_range(4.0..8.0) / T as f64;
        let phi = rng.random_range(0.0..2.0 * PI);
        let mut amp = envelope(rng);
        if ch == label {
            let h: f64 = rng.random_range(1.8..2.8);
            let t0: f64 = rng.random_range(12.0..52.0);
            let w: f64 = rng.random_range(3.0..6.0);
            for (t, a) in amp.iter_mut().enumerate() {
                *a += h * (-(t as f64 - t0) * (t as f64 - t0) / (2.0 * w * w)).exp();
            }
        }
        data.extend(oscillation(&amp, omega, phi));
    }
    ComplexSeq::quantized(data, label as u8)
}

/// Fast-channel amplitude is modulated by the slow channel's phase through
/// `A_fast(t) = a0 (1 + kappa cos(theta_slow(t) + offset))`; the class sets
/// the offset. Marginal amplitude and phase statistics are class-matched
/// because the slow phase is uniform.
pub fn gen_pac(label: usize, rng: &mut impl Rng) -> EegSample {
    let omega_s = 2.0 * PI * PAC_SLOW_CYCLES / T as f64;
    let omega_f = 2.0 * PI * PAC_FAST_CYCLES / T as f64;
    let phi_s = rng.random_range(0.0..2.0 * PI);
    let phi_f = rng.random_range(0.0..2.0 * PI);
    let offset = class_angle(label);
    let a_slow: f64 = rng.random_range(0.8..1.2);
    let a_fast: f64 = rng.random_range(0.8..1.2);
    let mut data = Vec::with_capacity(CHANNELS * T);
    // Slow carrier exposes theta_slow.
    data.extend((0..T).map(|t| {
        cmul(Cplx::new(a_slow, 0.0), Cplx::cis(omega_s * t as f64 + phi_s))
    }));
    // Fast channel with phase-locked envelope.
    data.extend((0..T).map(|t| {
        let a = a_fast * (1.0 + PAC_KAPPA * (omega_s * t as f64 + phi_s + offset).cos());
        cmul(Cplx::new(a, 0.0), Cplx::cis(omega_f * t as f64 + phi_f))
    }));
    data.extend(distractor(rng));
    data.extend(distractor(rng));
    ComplexSeq::quantized(data, label as u8)
}

/// Multiply all channels by `e^{i phi}`; inter-channel phase differences and
/// magnitudes are untouched.
pub fn reference_shift(sample: &mut EegSample, phi: f64) {
    let r = Cplx::cis(phi);
    for z in sample.samples.iter_mut() {
        *z = cmul(r, *z);
    }
}

// ---------------------------------------------------------------------------
// Analytic oracles (model-independent classifiers used by tests and the
// nuisance-axis checks).
// ---------------------------------------------------------------------------

/// Circular mean of `theta_1 - theta_0`, snapped to the nearest class lag.
pub fn phase_lag_classify(sample: &EegSample) -> usize {
    let mut acc = Cplx::ZERO;
    for t in 0..T {
        let d = sample.samples[T + t].arg() - sample.samples[t].arg();
        acc = acc + Cplx::cis(d);
    }
    let lag = acc.arg().rem_euclid(2.0 * PI);
    (0..CLASSES)
        .min_by(|&a, &b| {
            let da = angular_dist(lag, class_angle(a));
            let db = angular_dist(lag, class_angle(b));
            da.total_cmp(&db)
        })
        .unwrap()
}

fn angular_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Channel with the largest peak magnitude.
pub fn amplitude_argmax_classify(sample: &EegSample) -> usize {
    (0..CHANNELS)
        .max_by(|&a, &b| {
            let pa = sample.samples[a * T..(a + 1) * T].iter().map(|z| z.abs()).fold(0.0, f64::max);
            let pb = sample.samples[b * T..(b + 1) * T].iter().map(|z| z.abs()).fold(0.0, f64::max);
            pa.total_cmp(&pb)
        })
        .unwrap()
}

/// Phase-binned amplitude means, scored against each candidate offset.
pub fn pac_offset_classify(sample: &EegSample) -> usize {
    const BINS: usize = 8;
    let mut sums = [0.0f64; BINS];
    let mut counts = [0usize; BINS];
    for t in 0..T {
        let theta = sample.samples[t].arg().rem_euclid(2.0 * PI);
        let bin = ((theta / (2.0 * PI) * BINS as f64) as usize).min(BINS - 1);
        sums[bin] += sample.samples[T + t].abs();
        counts[bin] += 1;
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for cls in 0..CLASSES {
        let offset = class_angle(cls);
        let mut score = 0.0;
        for b in 0..BINS {
            if counts[b] > 0 {
                let center = (b as f64 + 0.5) * 2.0 * PI / BINS as f64;
                // Envelope peaks where theta + offset = 0 (mod 2 pi).
                score += (sums[b] / counts[b] as f64) * (center + offset).cos();
            }
        }
        if score > best_score {
            best_score = score;
            best = cls;
        }
    }
    best
}

/// Per-class split sizes matching the pilot preset (128/32/32).
pub fn default_sizes() -> crate::rfgen::SplitSizes {
    crate::rfgen::SplitSizes { train: 128, val: 32, test: 32 }
}

/// Class-balanced deterministic dataset for one EEG task. The reference
/// conditions reuse the phase-locking generator with a fixed shift on
/// val/test (shift) or a fresh random shift per training sample (aug).
pub fn make_eeg_dataset(
    task: EegTask,
    seed: u64,
    sizes: crate::rfgen::SplitSizes,
) -> Result<LabeledDataset> {
    let mut splits: Vec<Vec<ComplexSeq>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for (split_id, &n_per_class) in [sizes.train, sizes.val, sizes.test].iter().enumerate() {
        let is_train = split_id == 0;
        for label in 0..CLASSES {
            for i in 0..n_per_class {
                let mut rng = seeds::stream(
                    seed,
                    &[
                        seeds::tag("eeg"),
                        seeds::tag(task.name()),
                        split_id as u64,
                        label as u64,
                        i as u64,
                    ],
                );
                let mut sample = match task {
                    EegTask::PhaseLocking | EegTask::ReferenceShift | EegTask::ReferenceAug => {
                        gen_phase_locking(label, LOCKING_JITTER, &mut rng)
                    }
                    EegTask::AmplitudeEvent => gen_amplitude_event(label, &mut rng),
                    EegTask::Pac => gen_pac(label, &mut rng),
                };
                match task {
                    EegTask::ReferenceShift => {
                        if !is_train {
                            reference_shift(&mut sample, DEFAULT_REFERENCE_PHASE);
                        }
                    }
                    EegTask::ReferenceAug => {
                        if is_train {
                            let phi = rng.random_range(0.0..2.0 * PI);
                            reference_shift(&mut sample, phi);
                        } else {
                            reference_shift(&mut sample, DEFAULT_REFERENCE_PHASE);
                        }
                    }
                    _ => {}
                }
                // Re-quantize after any shift so files and memory agree.
                let sample = ComplexSeq::quantized(sample.samples, sample.label);
                splits[split_id].push(sample);
            }
        }
    }
    let test = splits.pop().unwrap();
    let val = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(LabeledDataset {
        header: DatasetHeader {
            format_version: FORMAT_VERSION,
            domain: "eeg".into(),
            condition: task.name().into(),
            class_names: (0..CLASSES).map(|c| format!("class{c}")).collect(),
            ch: CHANNELS,
            t: T,
            n_train: train.len(),
            n_val: val.len(),
            n_test: test.len(),
            seed,
            meta: serde_json::json!({
                "task": task.name(),
                "locking_jitter": LOCKING_JITTER,
                "pac_kappa": PAC_KAPPA,
                "slow_cycles": PAC_SLOW_CYCLES,
                "fast_cycles": PAC_FAST_CYCLES,
                "reference_phase": DEFAULT_REFERENCE_PHASE,
            }),
        },
        train,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_lag_without_jitter_aligns_channels() {
        let mut rng = seeds::stream(1, &[seeds::tag("pl")]);
        let s = gen_phase_locking(0, 0.0, &mut rng);
        for t in 0..T {
            let d = angular_dist(
                s.samples[T + t].arg().rem_euclid(2.0 * PI),
                s.samples[t].arg().rem_euclid(2.0 * PI),
            );
            assert!(d < 1e-5, "lag {d} at t={t}");
        }
    }

    #[test]
    fn lag_oracle_is_exact_without_jitter_and_strong_with() {
        let mut rng = seeds::stream(2, &[seeds::tag("pl2")]);
        for label in 0..CLASSES {
            for _ in 0..8 {
                let clean = gen_phase_locking(label, 0.0, &mut rng);
                assert_eq!(phase_lag_classify(&clean), label);
                let noisy = gen_phase_locking(label, LOCKING_JITTER, &mut rng);
                assert_eq!(phase_lag_classify(&noisy), label);
            }
        }
    }

    #[test]
    fn burst_oracle_recovers_the_channel_and_peak_dominates() {
        let mut rng = seeds::stream(3, &[seeds::tag("ae")]);
        for label in 0..CLASSES {
            for _ in 0..8 {
                let s = gen_amplitude_event(label, &mut rng);
                assert_eq!(amplitude_argmax_classify(&s), label);
                let peak = s.samples[label * T..(label + 1) * T]
                    .iter()
                    .map(|z| z.abs())
                    .fold(0.0, f64::max);
                // Peak envelope at least 2x the nominal baseline of 1.
                assert!(peak >= 2.0, "peak {peak}");
            }
        }
    }

    #[test]
    fn pac_oracle_recovers_the_offset() {
        let mut rng = seeds::stream(4, &[seeds::tag("pac")]);
        for label in 0..CLASSES {
            for _ in 0..8 {
                let s = gen_pac(label, &mut rng);
                assert_eq!(pac_offset_classify(&s), label);
            }
        }
    }

    #[test]
    fn pac_marginals_are_class_matched() {
        // Mean fast-channel amplitude is offset-independent because the slow
        // phase is uniform.
        let mut rng = seeds::stream(5, &[seeds::tag("pac2")]);
        let mut means = [0.0f64; CLASSES];
        let n = 200;
        for label in 0..CLASSES {
            for _ in 0..n {
                let s = gen_pac(label, &mut rng);
                means[label] += s.samples[T..2 * T].iter().map(|z| z.abs()).sum::<f64>()
                    / T as f64
                    / n as f64;
            }
        }
        for l in 1..CLASSES {
            assert!((means[l] - means[0]).abs() < 0.05, "means {means:?}");
        }
    }

    #[test]
    fn reference_shift_preserves_lag_and_magnitudes() {
        let mut rng = seeds::stream(6, &[seeds::tag("rs")]);
        let mut s = gen_phase_locking(2, 0.0, &mut rng);
        let mags: Vec<f64> = s.samples.iter().map(|z| z.abs()).collect();
        let before = phase_lag_classify(&s);
        reference_shift(&mut s, 2.3);
        assert_eq!(phase_lag_classify(&s), before);
        for (z, m) in s.samples.iter().zip(mags) {
            assert_abs_diff_eq!(z.abs(), m, epsilon = 1e-12);
        }
        let copy = s.clone();
        reference_shift(&mut s, 0.0);
        assert_eq!(s.samples[0].re, copy.samples[0].re);
    }

    #[test]
    fn datasets_are_deterministic_and_balanced() {
        let sizes = crate::rfgen::SplitSizes { train: 8, val: 4, test: 4 };
        let a = make_eeg_dataset(EegTask::Pac, 7, sizes).unwrap();
        let b = make_eeg_dataset(EegTask::Pac, 7, sizes).unwrap();
        assert_eq!(a.train.len(), 32);
        assert_eq!(a.header.ch, 4);
        assert_eq!(a.header.t, 64);
        for (x, y) in a.train.iter().zip(&b.train) {
            for (u, v) in x.samples.iter().zip(&y.samples) {
                assert_eq!(u.re.to_bits(), v.re.to_bits());
            }
        }
        let mut counts = [0usize; CLASSES];
        for s in &a.train {
            counts[s.label as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c == 8));
    }
}
