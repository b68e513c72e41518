//! Synthetic RF modulation tasks: PSK/QAM constellations at symbol rate under
//! AWGN, with normalization and carrier-rotation stress factors.
//!
//! No pulse shaping, carrier offset, or multipath; symbol-rate sampling under
//! AWGN is the whole channel model. Fixed rotations hit only val/test (the
//! train distribution keeps the reference phase), and per-sample random
//! rotation is a train-time augmentation evaluated against the same fixed
//! rotation, so the augmented and fixed-rotation rows share a test
//! distribution.

use crate::cnum::{cmul, Cplx};
use crate::dataset::{ComplexSeq, DatasetHeader, LabeledDataset, FORMAT_VERSION};
use crate::seeds;
use crate::{Error, Result};
use rand::Rng;
use std::f64::consts::PI;

pub const DEFAULT_T: usize = 128;
pub const DEFAULT_FIXED_ROTATION: f64 = PI / 3.0;
/// The SNR grid the replication task cycles through.
pub const SNR_SET_DB: [f64; 8] = [-10.0, -6.0, -2.0, 2.0, 6.0, 10.0, 14.0, 18.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Psk8,
    Qam16,
    Qam32,
    Qam64,
}

impl Modulation {
    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Psk8 => "8psk",
            Modulation::Qam16 => "qam16",
            Modulation::Qam32 => "qam32",
            Modulation::Qam64 => "qam64",
        }
    }

    /// Constellation points at exactly unit mean power.
    pub fn constellation(self) -> Vec<Cplx> {
        match self {
            Modulation::Bpsk => psk(2),
            Modulation::Qpsk => psk(4),
            Modulation::Psk8 => psk(8),
            Modulation::Qam16 => square_qam(&[-3.0, -1.0, 1.0, 3.0]),
            Modulation::Qam32 => cross_qam32(),
            Modulation::Qam64 => square_qam(&[-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]),
        }
    }
}

fn psk(m: usize) -> Vec<Cplx> {
    (0..m).map(|i| Cplx::cis(2.0 * PI * i as f64 / m as f64)).collect()
}

fn square_qam(levels: &[f64]) -> Vec<Cplx> {
    let pts: Vec<Cplx> = levels
        .iter()
        .flat_map(|&x| levels.iter().map(move |&y| Cplx::new(x, y)))
        .collect();
    unit_power_scale(pts)
}

/// 6x6 grid minus the four corners.
fn cross_qam32() -> Vec<Cplx> {
    let levels = [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0];
    let pts: Vec<Cplx> = levels
        .iter()
        .flat_map(|&x| levels.iter().map(move |&y| Cplx::new(x, y)))
        .filter(|z| !(z.re.abs() == 5.0 && z.im.abs() == 5.0))
        .collect();
    unit_power_scale(pts)
}

fn unit_power_scale(pts: Vec<Cplx>) -> Vec<Cplx> {
    let p = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / pts.len() as f64;
    let s = 1.0 / p.sqrt();
    pts.into_iter().map(|z| z.scale(s)).collect()
}

/// i.i.d. uniform constellation draws.
pub fn gen_symbols(m: Modulation, n: usize, rng: &mut impl Rng) -> Vec<Cplx> {
    let c = m.constellation();
    (0..n).map(|_| c[rng.random_range(0..c.len())]).collect()
}

/// Add circular complex Gaussian noise with total variance `10^(-snr/10)`
/// (signal power 1 enforced upstream); the variance splits evenly across the
/// re/im components.
pub fn add_awgn(x: &mut [Cplx], snr_db: f64, rng: &mut impl Rng) {
    let var = 10f64.powf(-snr_db / 10.0);
    let std = (var / 2.0).sqrt();
    let normal = rand_distr::Normal::new(0.0, std).unwrap();
    use rand_distr::Distribution;
    for z in x.iter_mut() {
        *z = *z + Cplx::new(normal.sample(rng), normal.sample(rng));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    UnitPower,
    UnitMagnitude,
}

/// `unit_power` rescales the sequence to mean |x|^2 = 1; `unit_magnitude`
/// projects every sample onto the unit circle (zeros stay zero).
pub fn normalize(x: &mut [Cplx], mode: Normalization) -> Result<()> {
    match mode {
        Normalization::UnitPower => {
            let p = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len().max(1) as f64;
            if p == 0.0 {
                return Err(Error::DegenerateInput("all-zero sequence".into()));
            }
            let s = 1.0 / p.sqrt();
            for z in x.iter_mut() {
                *z = z.scale(s);
            }
        }
        Normalization::UnitMagnitude => {
            if x.iter().all(|z| z.abs() == 0.0) {
                return Err(Error::DegenerateInput("all-zero sequence".into()));
            }
            for z in x.iter_mut() {
                let m = z.abs();
                if m > 0.0 {
                    *z = z.scale(1.0 / m);
                }
            }
        }
    }
    Ok(())
}

/// Global carrier-phase rotation `x_t <- e^{i phi} x_t`.
pub fn rotate(x: &mut [Cplx], phi: f64) {
    let r = Cplx::cis(phi);
    for z in x.iter_mut() {
        *z = cmul(r, *z);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    None,
    /// Fixed rotation applied to val/test only (train stays unrotated).
    Fixed(f64),
    /// Fresh uniform rotation per training sample; val/test carry `eval_phi`.
    RandomPerSample { eval_phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfTask {
    PskOnly,
    QamOnly,
    Mixed,
    LowSnrPsk,
    HighSnrPsk,
    UnitMagMixed,
    FixedRotationPsk,
    RotationAugPsk,
    AwgnReplication,
}

impl RfTask {
    pub const ALL: [RfTask; 9] = [
        RfTask::PskOnly,
        RfTask::QamOnly,
        RfTask::Mixed,
        RfTask::LowSnrPsk,
        RfTask::HighSnrPsk,
        RfTask::UnitMagMixed,
        RfTask::FixedRotationPsk,
        RfTask::RotationAugPsk,
        RfTask::AwgnReplication,
    ];

    /// The eight stress-table conditions (replication is its own suite).
    pub const STRESS: [RfTask; 8] = [
        RfTask::PskOnly,
        RfTask::QamOnly,
        RfTask::Mixed,
        RfTask::LowSnrPsk,
        RfTask::HighSnrPsk,
        RfTask::UnitMagMixed,
        RfTask::FixedRotationPsk,
        RfTask::RotationAugPsk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RfTask::PskOnly => "psk_only",
            RfTask::QamOnly => "qam_only",
            RfTask::Mixed => "mixed",
            RfTask::LowSnrPsk => "low_snr_psk",
            RfTask::HighSnrPsk => "high_snr_psk",
            RfTask::UnitMagMixed => "unit_mag_mixed",
            RfTask::FixedRotationPsk => "fixed_rotation_psk",
            RfTask::RotationAugPsk => "rotation_aug_psk",
            RfTask::AwgnReplication => "awgn_replication",
        }
    }

    pub fn classes(self) -> Vec<Modulation> {
        use Modulation::*;
        match self {
            RfTask::PskOnly
            | RfTask::LowSnrPsk
            | RfTask::HighSnrPsk
            | RfTask::FixedRotationPsk
            | RfTask::RotationAugPsk
            | RfTask::AwgnReplication => vec![Bpsk, Qpsk, Psk8],
            RfTask::QamOnly => vec![Qam16, Qam32, Qam64],
            RfTask::Mixed | RfTask::UnitMagMixed => vec![Bpsk, Qpsk, Psk8, Qam16, Qam64],
        }
    }
}

impl std::str::FromStr for RfTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RfTask::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown rf condition `{s}`")))
    }
}

/// Fully specified generation condition for one RF dataset.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RfCondition {
    pub task: RfTask,
    /// SNR levels cycled round-robin across each class's samples.
    pub snr_db: Vec<f64>,
    pub normalization: Normalization,
    pub rotation: Rotation,
    pub t: usize,
    pub seed: u64,
}

impl RfCondition {
    /// Paper-aligned defaults: SNR 10 dB for the main tasks, -6/18 dB for the
    /// low/high regimes, pi/3 fixed rotation, the full 8-level SNR grid for
    /// the replication task.
    pub fn preset(task: RfTask, seed: u64) -> Self {
        let snr_db = match task {
            RfTask::LowSnrPsk => vec![-6.0],
            RfTask::HighSnrPsk => vec![18.0],
            RfTask::AwgnReplication => SNR_SET_DB.to_vec(),
            _ => vec![10.0],
        };
        let normalization = match task {
            RfTask::UnitMagMixed => Normalization::UnitMagnitude,
            _ => Normalization::UnitPower,
        };
        let rotation = match task {
            RfTask::FixedRotationPsk => Rotation::Fixed(DEFAULT_FIXED_ROTATION),
            RfTask::RotationAugPsk => {
                Rotation::RandomPerSample { eval_phi: DEFAULT_FIXED_ROTATION }
            }
            _ => Rotation::None,
        };
        RfCondition { task, snr_db, normalization, rotation, t: DEFAULT_T, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::Config("need at least one SNR level".into()));
        }
        for &s in &self.snr_db {
            if !(-10.0..=18.0).contains(&s) {
                return Err(Error::Config(format!("snr {s} dB outside [-10, 18]")));
            }
        }
        if self.t < 16 {
            return Err(Error::Config("sequence length too short".into()));
        }
        Ok(())
    }
}

/// Per-class sample counts for the three splits.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes { train: 256, val: 64, test: 64 }
    }
}

/// Class-balanced, deterministically seeded dataset for one condition.
/// Identical (condition, seed) produce bit-identical datasets.
pub fn make_dataset(cond: &RfCondition, sizes: SplitSizes) -> Result<LabeledDataset> {
    cond.validate()?;
    let classes = cond.task.classes();
    let mut splits: Vec<Vec<ComplexSeq>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for (split_id, &n_per_class) in [sizes.train, sizes.val, sizes.test].iter().enumerate() {
        let is_train = split_id == 0;
        for (label, &modulation) in classes.iter().enumerate() {
            for i in 0..n_per_class {
                let mut rng = seeds::stream(
                    cond.seed,
                    &[
                        seeds::tag("rf"),
                        seeds::tag(cond.task.name()),
                        split_id as u64,
                        label as u64,
                        i as u64,
                    ],
                );
                let mut x = gen_symbols(modulation, cond.t, &mut rng);
                match cond.rotation {
                    Rotation::None => {}
                    Rotation::Fixed(phi) => {
                        if !is_train {
                            rotate(&mut x, phi);
                        }
                    }
                    Rotation::RandomPerSample { eval_phi } => {
                        if is_train {
                            let phi = rng.random_range(0.0..2.0 * PI);
                            rotate(&mut x, phi);
                        } else {
                            rotate(&mut x, eval_phi);
                        }
                    }
                }
                let snr = cond.snr_db[i % cond.snr_db.len()];
                add_awgn(&mut x, snr, &mut rng);
                normalize(&mut x, cond.normalization)?;
                splits[split_id].push(ComplexSeq::quantized(x, label as u8));
            }
        }
    }
    let test = splits.pop().unwrap();
    let val = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(LabeledDataset {
        header: DatasetHeader {
            format_version: FORMAT_VERSION,
            domain: "rf".into(),
            condition: cond.task.name().into(),
            class_names: classes.iter().map(|m| m.name().to_string()).collect(),
            ch: 1,
            t: cond.t,
            n_train: train.len(),
            n_val: val.len(),
            n_test: test.len(),
            seed: cond.seed,
            meta: serde_json::to_value(cond).map_err(|e| Error::Format(e.to_string()))?,
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
    fn bpsk_is_plus_minus_one() {
        let c = Modulation::Bpsk.constellation();
        assert_eq!(c.len(), 2);
        assert!((c[0] - Cplx::ONE).abs() < 1e-15);
        assert!((c[1] - Cplx::new(-1.0, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn psk8_lives_on_the_unit_circle() {
        for z in Modulation::Psk8.constellation() {
            assert_abs_diff_eq!(z.abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn qam16_rings_match_enumeration() {
        // Oracle: {±1, ±3}^2 / sqrt(10) has magnitudes {√2, √10, √18}/√10.
        let c = Modulation::Qam16.constellation();
        assert_eq!(c.len(), 16);
        let mut mags: Vec<f64> = c.iter().map(|z| z.abs()).collect();
        mags.sort_by(f64::total_cmp);
        mags.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let want = [(2.0f64 / 10.0).sqrt(), 1.0, (18.0f64 / 10.0).sqrt()];
        assert_eq!(mags.len(), 3);
        for (m, w) in mags.iter().zip(want) {
            assert_abs_diff_eq!(*m, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn every_constellation_has_unit_mean_power() {
        for m in [
            Modulation::Bpsk,
            Modulation::Qpsk,
            Modulation::Psk8,
            Modulation::Qam16,
            Modulation::Qam32,
            Modulation::Qam64,
        ] {
            let c = m.constellation();
            let p = c.iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        }
        assert_eq!(Modulation::Qam32.constellation().len(), 32);
        assert_eq!(Modulation::Qam64.constellation().len(), 64);
    }

    #[test]
    fn awgn_hits_the_requested_snr() {
        let mut rng = seeds::stream(5, &[seeds::tag("awgn-test")]);
        for snr in [0.0, 10.0] {
            let n = 100_000;
            let clean = vec![Cplx::ONE; n];
            let mut noisy = clean.clone();
            add_awgn(&mut noisy, snr, &mut rng);
            let noise_p = noisy
                .iter()
                .zip(&clean)
                .map(|(a, b)| (*a - *b).norm_sqr())
                .sum::<f64>()
                / n as f64;
            let measured_snr = -10.0 * noise_p.log10();
            assert!((measured_snr - snr).abs() <= 0.2, "snr {snr}: measured {measured_snr}");
        }
    }

    #[test]
    fn normalization_modes() {
        let mut rng = seeds::stream(9, &[seeds::tag("norm-test")]);
        let mut x = gen_symbols(Modulation::Qam16, 64, &mut rng);
        add_awgn(&mut x, 10.0, &mut rng);
        let mut um = x.clone();
        normalize(&mut um, Normalization::UnitMagnitude).unwrap();
        for z in &um {
            assert_abs_diff_eq!(z.abs(), 1.0, epsilon = 1e-12);
        }
        // unit_power is scale invariant.
        let mut a = x.clone();
        normalize(&mut a, Normalization::UnitPower).unwrap();
        let mut b: Vec<Cplx> = x.iter().map(|z| z.scale(3.7)).collect();
        normalize(&mut b, Normalization::UnitPower).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_abs_diff_eq!(u.re, v.re, epsilon = 1e-12);
            assert_abs_diff_eq!(u.im, v.im, epsilon = 1e-12);
        }
        let mut zeros = vec![Cplx::ZERO; 4];
        assert!(matches!(
            normalize(&mut zeros, Normalization::UnitPower),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn rotation_behaviour() {
        let mut x = vec![Cplx::ONE, Cplx::new(-1.0, 0.0)];
        let before = x.clone();
        rotate(&mut x, 0.0);
        assert_eq!(x[0], before[0]);
        // phi = pi swaps the BPSK points.
        rotate(&mut x, PI);
        assert!((x[0] - Cplx::new(-1.0, 0.0)).abs() < 1e-12);
        assert!((x[1] - Cplx::ONE).abs() < 1e-12);
        // Magnitudes preserved under arbitrary rotation.
        let mut rng = seeds::stream(2, &[seeds::tag("rot")]);
        let mut y = gen_symbols(Modulation::Qam64, 32, &mut rng);
        let mags: Vec<f64> = y.iter().map(|z| z.abs()).collect();
        rotate(&mut y, 1.234);
        for (z, m) in y.iter().zip(mags) {
            assert_abs_diff_eq!(z.abs(), m, epsilon = 1e-12);
        }
    }

    #[test]
    fn datasets_are_deterministic_balanced_and_disjoint() {
        let cond = RfCondition::preset(RfTask::PskOnly, 42);
        let sizes = SplitSizes { train: 12, val: 6, test: 6 };
        let a = make_dataset(&cond, sizes).unwrap();
        let b = make_dataset(&cond, sizes).unwrap();
        assert_eq!(a.train.len(), 36);
        assert_eq!(a.val.len(), 18);
        for (x, y) in a.train.iter().zip(&b.train) {
            assert_eq!(x.label, y.label);
            for (u, v) in x.samples.iter().zip(&y.samples) {
                assert_eq!(u.re.to_bits(), v.re.to_bits());
                assert_eq!(u.im.to_bits(), v.im.to_bits());
            }
        }
        // Exact class balance per split.
        for split in [&a.train, &a.val, &a.test] {
            let mut counts = [0usize; 3];
            for s in split.iter() {
                counts[s.label as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == counts[0]));
        }
        // Train and val draws differ (disjoint streams).
        assert!(a.train[0].samples[0].re != a.val[0].samples[0].re);
    }

    #[test]
    fn psk_magnitude_view_is_class_uninformative() {
        // Unit-power PSK at 10 dB: per-class mean magnitudes coincide.
        let cond = RfCondition::preset(RfTask::PskOnly, 3);
        let ds = make_dataset(&cond, SplitSizes { train: 64, val: 8, test: 8 }).unwrap();
        let mut mean = [0.0f64; 3];
        let mut count = [0usize; 3];
        for s in &ds.train {
            mean[s.label as usize] +=
                s.samples.iter().map(|z| z.abs()).sum::<f64>() / s.samples.len() as f64;
            count[s.label as usize] += 1;
        }
        for l in 0..3 {
            mean[l] /= count[l] as f64;
        }
        assert!((mean[0] - mean[1]).abs() < 0.01);
        assert!((mean[1] - mean[2]).abs() < 0.01);
    }

    #[test]
    fn fixed_rotation_hits_eval_splits_only() {
        let mut cond = RfCondition::preset(RfTask::FixedRotationPsk, 11);
        cond.snr_db = vec![18.0];
        let sizes = SplitSizes { train: 8, val: 8, test: 8 };
        let rotated = make_dataset(&cond, sizes).unwrap();
        cond.rotation = Rotation::None;
        let plain = make_dataset(&cond, sizes).unwrap();
        // Train identical; test differs by the rotation.
        for (a, b) in rotated.train.iter().zip(&plain.train) {
            assert_eq!(a.samples[0].re.to_bits(), b.samples[0].re.to_bits());
        }
        let mut any_diff = false;
        for (a, b) in rotated.test.iter().zip(&plain.test) {
            if a.samples[0].re != b.samples[0].re {
                any_diff = true;
            }
        }
        assert!(any_diff);
    }
}
