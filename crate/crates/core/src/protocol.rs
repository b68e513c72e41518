//! Experiment protocol: the 16-trial search space, matched-shared-trial vs
//! independent per-family selection, paired-t reporting, dead-seed tallies,
//! and the learning-rate/activation factorial.
//!
//! Matched-shared-trial selection evaluates every family at the complex
//! family's best-validation trial (a robustness probe); independent selection
//! lets each family pick its own trial (a peak-performance estimate). The
//! anchor equals the complex family's independent choice by construction, so
//! the complex score is identical under both rules.

use crate::activations::ActivationId;
use crate::families::{self, DataShape, Family, FamilySpec};
use crate::rfgen::{self, RfCondition, RfTask, SplitSizes};
use crate::seeds;
use crate::train::{self, TrainConfig};
use crate::{Error, Result};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// One hyperparameter assignment in the shared search box.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trial {
    pub index: usize,
    pub lr: f64,
    pub width: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
}

/// Learning rate above which the first-step instability appears.
pub const UNSTABLE_LR: f64 = 2.2e-2;
/// The stable-regime ceiling the box must also cover.
pub const STABLE_LR: f64 = 3e-3;
pub const N_TRIALS: usize = 16;
pub const LR_RANGE: (f64, f64) = (1e-3, 5e-2);
pub const WIDTH_CHOICES: [usize; 4] = [16, 32, 64, 96];
pub const BATCH_CHOICES: [usize; 2] = [32, 64];
pub const WD_CHOICES: [f64; 3] = [0.0, 0.01, 0.05];

/// The shared 16-trial search box; identical across families within a sweep.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SearchSpace {
    pub master_seed: u64,
    pub trials: Vec<Trial>,
}

/// Deterministic 16-trial sample: lr log-uniform in `LR_RANGE`, width/batch/
/// weight-decay from their choice sets. Resamples (deterministically) until
/// the realized lr set covers both the unstable (>= 2.2e-2) and stable
/// (<= 3e-3) regimes, so the selection-rule contrast is expressible.
pub fn build_search_space(master_seed: u64) -> SearchSpace {
    let (lo, hi) = LR_RANGE;
    let (llo, lhi) = (lo.log10(), hi.log10());
    for attempt in 0u64.. {
        let mut rng = seeds::stream(master_seed, &[seeds::tag("search-space"), attempt]);
        let trials: Vec<Trial> = (0..N_TRIALS)
            .map(|index| Trial {
                index,
                lr: 10f64.powf(rng.random_range(llo..lhi)),
                width: WIDTH_CHOICES[rng.random_range(0..WIDTH_CHOICES.len())],
                batch_size: BATCH_CHOICES[rng.random_range(0..BATCH_CHOICES.len())],
                weight_decay: WD_CHOICES[rng.random_range(0..WD_CHOICES.len())],
            })
            .collect();
        let has_unstable = trials.iter().any(|t| t.lr >= UNSTABLE_LR);
        let has_stable = trials.iter().any(|t| t.lr <= STABLE_LR);
        if has_unstable && has_stable {
            return SearchSpace { master_seed, trials };
        }
    }
    unreachable!("resampling terminates");
}

/// One cell of a sweep grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRecord {
    pub condition: String,
    pub family: Family,
    pub activation: ActivationId,
    pub trial: usize,
    pub seed: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub dead: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    MatchedShared,
    Independent,
}

impl SelectionRule {
    pub fn name(self) -> &'static str {
        match self {
            SelectionRule::MatchedShared => "matched_shared",
            SelectionRule::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FamilySelection {
    pub family: Family,
    pub chosen_trial: usize,
    pub mean_val_accuracy: f64,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub dead: usize,
    pub total: usize,
}

/// Complex-minus-baseline paired difference with its t interval.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GapRow {
    pub family: Family,
    pub mean_diff: f64,
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SelectionReport {
    pub rule: SelectionRule,
    pub anchor_trial: usize,
    pub families: Vec<FamilySelection>,
    pub gaps: Vec<GapRow>,
    pub complex_test_accuracy: f64,
    pub best_real: Family,
    pub best_real_test_accuracy: f64,
    /// complex - best real, in accuracy points.
    pub gap: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Paired t interval: mean +- t_{0.975, n-1} * s / sqrt(n).
pub fn paired_ci(diffs: &[f64]) -> Result<(f64, f64)> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Stats(format!("paired CI needs >= 2 matched seeds, got {n}")));
    }
    let m = mean(diffs);
    let s = std_dev(diffs);
    if s == 0.0 {
        return Ok((m, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Stats(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((m, t * s / (n as f64).sqrt()))
}

/// Apply a selection rule to a complete sweep grid. The grid must cover every
/// (family, trial, seed) cell exactly once; holes are a protocol error that
/// lists the missing cells.
pub fn select(records: &[SweepRecord], rule: SelectionRule) -> Result<SelectionReport> {
    use std::collections::{BTreeMap, BTreeSet};
    if records.is_empty() {
        return Err(Error::IncompleteGrid(vec!["empty record set".into()]));
    }
    let families: BTreeSet<Family> = records.iter().map(|r| r.family).collect();
    let trials: BTreeSet<usize> = records.iter().map(|r| r.trial).collect();
    let seed_set: BTreeSet<usize> = records.iter().map(|r| r.seed).collect();
    if !families.contains(&Family::Complex) {
        return Err(Error::IncompleteGrid(vec!["complex family missing".into()]));
    }
    let mut grid: BTreeMap<(Family, usize, usize), &SweepRecord> = BTreeMap::new();
    for r in records {
        if grid.insert((r.family, r.trial, r.seed), r).is_some() {
            return Err(Error::IncompleteGrid(vec![format!(
                "duplicate cell family={} trial={} seed={}",
                r.family, r.trial, r.seed
            )]));
        }
    }
    let mut missing = Vec::new();
    for &f in &families {
        for &t in &trials {
            for &s in &seed_set {
                if !grid.contains_key(&(f, t, s)) {
                    missing.push(format!("family={f} trial={t} seed={s}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(missing));
    }

    let seeds_sorted: Vec<usize> = seed_set.iter().copied().collect();
    let mean_val = |f: Family, t: usize| -> f64 {
        mean(&seeds_sorted.iter().map(|&s| grid[&(f, t, s)].val_accuracy).collect::<Vec<_>>())
    };
    // Argmax over trials by mean validation accuracy; iteration is in
    // ascending trial order, so strict improvement ties toward lower index.
    let best_trial = |f: Family| -> usize {
        let mut best = *trials.iter().next().unwrap();
        let mut best_v = mean_val(f, best);
        for &t in &trials {
            let v = mean_val(f, t);
            if v > best_v {
                best_v = v;
                best = t;
            }
        }
        best
    };

    let anchor = best_trial(Family::Complex);
    let mut fam_rows = Vec::new();
    let mut gaps = Vec::new();
    let chosen_of = |f: Family| -> usize {
        match rule {
            SelectionRule::MatchedShared => anchor,
            SelectionRule::Independent => best_trial(f),
        }
    };
    let complex_tests: Vec<f64> = seeds_sorted
        .iter()
        .map(|&s| grid[&(Family::Complex, anchor, s)].test_accuracy)
        .collect();
    for &f in &families {
        let t = chosen_of(f);
        let tests: Vec<f64> =
            seeds_sorted.iter().map(|&s| grid[&(f, t, s)].test_accuracy).collect();
        let dead = seeds_sorted.iter().filter(|&&s| grid[&(f, t, s)].dead).count();
        fam_rows.push(FamilySelection {
            family: f,
            chosen_trial: t,
            mean_val_accuracy: mean_val(f, t),
            mean_test_accuracy: mean(&tests),
            std_test_accuracy: std_dev(&tests),
            dead,
            total: seeds_sorted.len(),
        });
        if f != Family::Complex && seeds_sorted.len() >= 2 {
            let diffs: Vec<f64> =
                complex_tests.iter().zip(&tests).map(|(c, b)| c - b).collect();
            let (m, hw) = paired_ci(&diffs)?;
            gaps.push(GapRow { family: f, mean_diff: m, ci_half_width: hw });
        }
    }
    let complex_row = fam_rows.iter().find(|r| r.family == Family::Complex).unwrap();
    let complex_score = complex_row.mean_test_accuracy;
    let best_real = fam_rows
        .iter()
        .filter(|r| r.family != Family::Complex)
        .max_by(|a, b| a.mean_test_accuracy.total_cmp(&b.mean_test_accuracy))
        .ok_or_else(|| Error::IncompleteGrid(vec!["no real baselines in grid".into()]))?;
    Ok(SelectionReport {
        rule,
        anchor_trial: anchor,
        complex_test_accuracy: complex_score,
        best_real: best_real.family,
        best_real_test_accuracy: best_real.mean_test_accuracy,
        gap: complex_score - best_real.mean_test_accuracy,
        families: fam_rows,
        gaps,
    })
}

/// Dead count over the capacity real families at a fixed trial, restricted to
/// the first `n_seeds` telemetry seeds: the `x/9` tally.
pub fn dead_tally(
    records: &[SweepRecord],
    families: &[Family],
    trial: usize,
    n_seeds: usize,
) -> (usize, usize) {
    let mut dead = 0;
    let mut total = 0;
    for r in records {
        if families.contains(&r.family) && r.trial == trial && r.seed < n_seeds {
            total += 1;
            if r.dead {
                dead += 1;
            }
        }
    }
    (dead, total)
}

// ---------------------------------------------------------------------------
// Learning-rate x activation factorial.
// ---------------------------------------------------------------------------

/// Base configuration shared by the four factorial cells. Learning rates are
/// the published pair {0.0236, 0.0024}; everything else is held fixed.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FactorialConfig {
    pub lr_high: f64,
    pub lr_low: f64,
    pub width: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub steps: usize,
    pub seeds: usize,
    pub dataset_seed: u64,
    pub train_per_class: usize,
    pub eval_per_class: usize,
}

impl Default for FactorialConfig {
    fn default() -> Self {
        FactorialConfig {
            lr_high: 0.0236,
            lr_low: 0.0024,
            width: 64,
            batch_size: 64,
            weight_decay: 0.01,
            steps: 200,
            seeds: 3,
            dataset_seed: 1,
            train_per_class: 192,
            eval_per_class: 64,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FactorialCell {
    pub activation: ActivationId,
    pub lr: f64,
    pub dead: usize,
    pub total: usize,
    pub max_step1_head_grad: f64,
    pub mean_test_accuracy: f64,
}

/// Run the 2x2 {CReLU, ZReLU} x {high, low} factorial over the three real
/// capacity families and three seeds per cell, on synthetic AWGN PSK data.
/// The activation under test is applied to the real baselines on adjacent
/// `(re, im)` channel pairs (for CReLU this reduces exactly to plain ReLU).
pub fn factorial(cfg: &FactorialConfig) -> Result<Vec<FactorialCell>> {
    use rayon::prelude::*;
    let shape_sizes = SplitSizes {
        train: cfg.train_per_class,
        val: cfg.eval_per_class,
        test: cfg.eval_per_class,
    };
    // One dataset per seed, shared across all four cells.
    let datasets: Vec<_> = (0..cfg.seeds)
        .map(|s| {
            let cond = RfCondition::preset(
                RfTask::AwgnReplication,
                seeds::derive(cfg.dataset_seed, &[seeds::tag("factorial-data"), s as u64]),
            );
            rfgen::make_dataset(&cond, shape_sizes)
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(ActivationId, f64)> = vec![
        (ActivationId::Crelu, cfg.lr_high),
        (ActivationId::Crelu, cfg.lr_low),
        (ActivationId::Zrelu, cfg.lr_low),
        (ActivationId::Zrelu, cfg.lr_high),
    ];
    let jobs: Vec<(usize, Family, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| {
            Family::CAPACITY_REAL.iter().flat_map(move |&f| {
                (0..cfg.seeds).map(move |s| (ci, f, s))
            })
        })
        .collect();
    let results: Vec<(usize, bool, f64, f64)> = jobs
        .par_iter()
        .map(|&(ci, family, seed)| {
            let (act, lr) = cells[ci];
            let ds = &datasets[seed];
            let shape = DataShape {
                in_ch: ds.header.ch,
                t: ds.header.t,
                classes: ds.classes(),
            };
            let spec = FamilySpec::new(family, act, cfg.width);
            let mut model = families::build(
                &spec,
                shape,
                seeds::derive(cfg.dataset_seed, &[
                    seeds::tag("factorial-model"),
                    ci as u64,
                    seeds::tag(family.name()),
                    seed as u64,
                ]),
            )?;
            let bundle = train::materialize_bundle(spec.view, ds);
            let tc = TrainConfig {
                lr,
                weight_decay: cfg.weight_decay,
                batch_size: cfg.batch_size,
                steps: cfg.steps,
                seed: seeds::derive(cfg.dataset_seed, &[
                    seeds::tag("factorial-train"),
                    ci as u64,
                    seeds::tag(family.name()),
                    seed as u64,
                ]),
                ..Default::default()
            };
            let (res, trace) = train::train_run(&mut model, &bundle, &tc)?;
            let step1 = trace
                .records
                .first()
                .map(|r| r.head_weight_grad_norm)
                .unwrap_or(f64::NAN);
            Ok((ci, res.dead, step1, res.test_accuracy))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (ci, (act, lr)) in cells.iter().enumerate() {
        let rows: Vec<_> = results.iter().filter(|r| r.0 == ci).collect();
        out.push(FactorialCell {
            activation: *act,
            lr: *lr,
            dead: rows.iter().filter(|r| r.1).count(),
            total: rows.len(),
            max_step1_head_grad: rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max),
            mean_test_accuracy: mean(&rows.iter().map(|r| r.3).collect::<Vec<_>>()),
        });
    }
    Ok(out)
}
