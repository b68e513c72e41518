//! Named experiment suites: the RF stress grid, the quantum and EEG pilots,
//! the synthetic replication sweep with both selection rules, the
//! learning-rate/activation factorial, and the activation trilemma scan.
//!
//! Every suite is an embarrassingly parallel grid of independent runs with
//! per-run RNG streams; records are sorted before writing so output bytes do
//! not depend on scheduling.

use crate::activations::{self, ActivationId, TrilemmaReport};
use crate::dataset::LabeledDataset;
use crate::eeggen::{self, EegTask};
use crate::families::{self, DataShape, Family, FamilySpec};
use crate::protocol::{
    self, FactorialCell, FactorialConfig, SelectionReport, SelectionRule, SweepRecord,
};
use crate::qmgen::{self, QuantumTask};
use crate::report;
use crate::rfgen::{self, RfCondition, RfTask, SplitSizes};
use crate::seeds;
use crate::train::{self, TrainConfig};
use crate::views::ViewId;
use crate::{Error, Result};
use rayon::prelude::*;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteId {
    RfStress,
    QuantumPilot,
    EegPilot,
    Replication,
    Factorial,
    Trilemma,
}

impl SuiteId {
    pub const ALL: [SuiteId; 6] = [
        SuiteId::RfStress,
        SuiteId::QuantumPilot,
        SuiteId::EegPilot,
        SuiteId::Replication,
        SuiteId::Factorial,
        SuiteId::Trilemma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteId::RfStress => "rf_stress",
            SuiteId::QuantumPilot => "quantum_pilot",
            SuiteId::EegPilot => "eeg_pilot",
            SuiteId::Replication => "replication",
            SuiteId::Factorial => "factorial",
            SuiteId::Trilemma => "trilemma",
        }
    }
}

impl std::str::FromStr for SuiteId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SuiteId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// Stress-suite preset (fixed default trial, six seeds).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RfStressPreset {
    pub seeds: usize,
    pub steps: usize,
    pub lr: f64,
    pub width: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    pub activation: ActivationId,
}

impl Default for RfStressPreset {
    fn default() -> Self {
        RfStressPreset {
            seeds: 6,
            steps: 400,
            lr: 5e-3,
            width: 32,
            batch_size: 64,
            weight_decay: 0.01,
            train_per_class: 256,
            eval_per_class: 64,
            activation: ActivationId::Crelu,
        }
    }
}

/// Pilot presets (three seeds, paper-fixed step counts).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PilotPreset {
    pub seeds: usize,
    pub steps: usize,
    pub lr: f64,
    pub width: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    pub activation: ActivationId,
}

impl PilotPreset {
    fn quantum_default() -> Self {
        PilotPreset {
            seeds: 3,
            steps: 140,
            lr: 5e-3,
            width: 32,
            batch_size: 64,
            weight_decay: 0.01,
            train_per_class: 128,
            eval_per_class: 32,
            activation: ActivationId::Crelu,
        }
    }

    fn eeg_default() -> Self {
        PilotPreset { steps: 120, ..Self::quantum_default() }
    }
}

impl Default for PilotPreset {
    fn default() -> Self {
        Self::quantum_default()
    }
}

/// Replication sweep preset: the full 16-trial box over the capacity
/// families on AWGN-only PSK data, three telemetry seeds, 200 steps.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ReplicationPreset {
    pub seeds: usize,
    pub steps: usize,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    pub activation: ActivationId,
}

impl Default for ReplicationPreset {
    fn default() -> Self {
        ReplicationPreset {
            seeds: 3,
            steps: 200,
            train_per_class: 192,
            eval_per_class: 64,
            activation: ActivationId::Crelu,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrilemmaPreset {
    pub grid_n: usize,
    pub init_seeds: Vec<u64>,
}

impl Default for TrilemmaPreset {
    fn default() -> Self {
        TrilemmaPreset { grid_n: activations::TRILEMMA_GRID_N, init_seeds: vec![0, 1, 2] }
    }
}

/// Resolved laboratory configuration: one JSON document, flag overrides win.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LabConfig {
    pub master_seed: u64,
    pub rf: RfStressPreset,
    pub quantum: PilotPreset,
    pub eeg: PilotPreset,
    pub replication: ReplicationPreset,
    pub factorial: FactorialConfig,
    pub trilemma: TrilemmaPreset,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            master_seed: 42,
            rf: RfStressPreset::default(),
            quantum: PilotPreset::quantum_default(),
            eeg: PilotPreset::eeg_default(),
            replication: ReplicationPreset::default(),
            factorial: FactorialConfig::default(),
            trilemma: TrilemmaPreset::default(),
        }
    }
}

/// Families in the stress/pilot comparison tables.
pub const RF_FAMILIES: [Family; 4] =
    [Family::Complex, Family::RealStacked, Family::RealPhase, Family::RealMagnitude];
pub const PILOT_FAMILIES: [Family; 5] = [
    Family::Complex,
    Family::RealStacked,
    Family::RealPhase,
    Family::RealPolar,
    Family::RealMagnitude,
];
pub const SWEEP_FAMILIES: [Family; 4] = [
    Family::Complex,
    Family::RealStacked,
    Family::RealParamMatched,
    Family::RealFlopMatched,
];

fn family_activation(family: Family, complex_act: ActivationId) -> ActivationId {
    if family == Family::Complex {
        complex_act
    } else {
        ActivationId::RealRelu
    }
}

struct RunSpec {
    condition: String,
    family: Family,
    activation: ActivationId,
    trial: usize,
    seed: usize,
    width: usize,
    tc: TrainConfig,
    model_seed: u64,
}

/// Train one grid cell and write its artifacts under `out`.
fn run_cell(ds: &LabeledDataset, spec: &RunSpec, out: Option<&Path>) -> Result<SweepRecord> {
    let shape = DataShape { in_ch: ds.header.ch, t: ds.header.t, classes: ds.classes() };
    let fam_spec = FamilySpec::new(spec.family, spec.activation, spec.width);
    let mut model = families::build(&fam_spec, shape, spec.model_seed)?;
    let bundle = train::materialize_bundle(fam_spec.view, ds);
    let (res, trace) = train::train_run(&mut model, &bundle, &spec.tc)?;
    if let Some(out) = out {
        let dir = out
            .join("runs")
            .join(&spec.condition)
            .join(spec.family.name())
            .join(format!("trial{}_seed{}", spec.trial, spec.seed));
        trace.write_csv(&dir.join("telemetry.csv"))?;
        let result_json = serde_json::json!({
            "condition": spec.condition,
            "family": spec.family.name(),
            "activation": spec.activation.name(),
            "view": fam_spec.view.name(),
            "trial": spec.trial,
            "seed": spec.seed,
            "train_config": spec.tc,
            "result": res,
        });
        std::fs::create_dir_all(&dir)?;
        std::fs::write(
            dir.join("result.json"),
            serde_json::to_string_pretty(&result_json).map_err(|e| Error::Format(e.to_string()))?,
        )?;
    }
    Ok(SweepRecord {
        condition: spec.condition.clone(),
        family: spec.family,
        activation: spec.activation,
        trial: spec.trial,
        seed: spec.seed,
        val_accuracy: res.val_accuracy,
        test_accuracy: res.test_accuracy,
        dead: res.dead,
    })
}

/// RF stress grid: eight conditions x four families x `seeds` seeds at the
/// fixed default trial. Returns all records, sorted.
pub fn run_rf_stress(cfg: &LabConfig, out: Option<&Path>) -> Result<Vec<SweepRecord>> {
    let p = &cfg.rf;
    let sizes =
        SplitSizes { train: p.train_per_class, val: p.eval_per_class, test: p.eval_per_class };
    let cells: Vec<(RfTask, usize)> = RfTask::STRESS
        .iter()
        .flat_map(|&t| (0..p.seeds).map(move |s| (t, s)))
        .collect();
    let mut records: Vec<SweepRecord> = cells
        .par_iter()
        .map(|&(task, seed)| {
            let data_seed = seeds::derive(
                cfg.master_seed,
                &[seeds::tag("rf-data"), seeds::tag(task.name()), seed as u64],
            );
            let cond = RfCondition::preset(task, data_seed);
            let ds = rfgen::make_dataset(&cond, sizes)?;
            let mut out_records = Vec::new();
            for family in RF_FAMILIES {
                let spec = RunSpec {
                    condition: task.name().to_string(),
                    family,
                    activation: family_activation(family, p.activation),
                    trial: 0,
                    seed,
                    width: p.width,
                    tc: TrainConfig {
                        lr: p.lr,
                        weight_decay: p.weight_decay,
                        batch_size: p.batch_size,
                        steps: p.steps,
                        seed: seeds::derive(
                            cfg.master_seed,
                            &[
                                seeds::tag("rf-train"),
                                seeds::tag(task.name()),
                                seeds::tag(family.name()),
                                seed as u64,
                            ],
                        ),
                        ..Default::default()
                    },
                    model_seed: seeds::derive(
                        cfg.master_seed,
                        &[
                            seeds::tag("rf-model"),
                            seeds::tag(task.name()),
                            seeds::tag(family.name()),
                            seed as u64,
                        ],
                    ),
                };
                out_records.push(run_cell(&ds, &spec, out)?);
            }
            Ok(out_records)
        })
        .collect::<Result<Vec<Vec<SweepRecord>>>>()?
        .into_iter()
        .flatten()
        .collect();
    records.sort_by(|a, b| {
        (a.condition.as_str(), a.family.name(), a.seed).cmp(&(
            b.condition.as_str(),
            b.family.name(),
            b.seed,
        ))
    });
    if let Some(out) = out {
        report::write_records_csv(&out.join(report::RECORDS_FILE), &records)?;
        let table = out.join("report").join("rf_stress_accuracy.csv");
        report::write_condition_table(&table, &records, 0)?;
        report::csv_to_markdown(&table, &out.join("report").join("rf_stress_accuracy.md"))?;
        let ci = out.join("report").join("rf_stress_paired_ci.csv");
        report::write_ci_table(&ci, &records, 0)?;
    }
    Ok(records)
}

fn run_pilot_grid<F>(
    cfg: &LabConfig,
    preset: &PilotPreset,
    conditions: &[&str],
    domain_tag: &str,
    make: F,
    out: Option<&Path>,
) -> Result<Vec<SweepRecord>>
where
    F: Fn(&str, u64) -> Result<LabeledDataset> + Sync,
{
    let cells: Vec<(&str, usize)> = conditions
        .iter()
        .flat_map(|&c| (0..preset.seeds).map(move |s| (c, s)))
        .collect();
    let mut records: Vec<SweepRecord> = cells
        .par_iter()
        .map(|&(cond_name, seed)| {
            let data_seed = seeds::derive(
                cfg.master_seed,
                &[seeds::tag(domain_tag), seeds::tag(cond_name), seed as u64],
            );
            let ds = make(cond_name, data_seed)?;
            let mut out_records = Vec::new();
            for family in PILOT_FAMILIES {
                let spec = RunSpec {
                    condition: cond_name.to_string(),
                    family,
                    activation: family_activation(family, preset.activation),
                    trial: 0,
                    seed,
                    width: preset.width,
                    tc: TrainConfig {
                        lr: preset.lr,
                        weight_decay: preset.weight_decay,
                        batch_size: preset.batch_size,
                        steps: preset.steps,
                        seed: seeds::derive(
                            cfg.master_seed,
                            &[
                                seeds::tag(domain_tag),
                                seeds::tag("train"),
                                seeds::tag(cond_name),
                                seeds::tag(family.name()),
                                seed as u64,
                            ],
                        ),
                        ..Default::default()
                    },
                    model_seed: seeds::derive(
                        cfg.master_seed,
                        &[
                            seeds::tag(domain_tag),
                            seeds::tag("model"),
                            seeds::tag(cond_name),
                            seeds::tag(family.name()),
                            seed as u64,
                        ],
                    ),
                };
                out_records.push(run_cell(&ds, &spec, out)?);
            }
            Ok(out_records)
        })
        .collect::<Result<Vec<Vec<SweepRecord>>>>()?
        .into_iter()
        .flatten()
        .collect();
    records.sort_by(|a, b| {
        (a.condition.as_str(), a.family.name(), a.seed).cmp(&(
            b.condition.as_str(),
            b.family.name(),
            b.seed,
        ))
    });
    if let Some(out) = out {
        report::write_records_csv(&out.join(report::RECORDS_FILE), &records)?;
        let table = out.join("report").join(format!("{domain_tag}_accuracy.csv"));
        report::write_condition_table(&table, &records, 0)?;
        report::csv_to_markdown(
            &table,
            &out.join("report").join(format!("{domain_tag}_accuracy.md")),
        )?;
    }
    Ok(records)
}

/// Quantum pilot: four tasks x five families x three seeds.
pub fn run_quantum_pilot(cfg: &LabConfig, out: Option<&Path>) -> Result<Vec<SweepRecord>> {
    let p = &cfg.quantum;
    let sizes =
        SplitSizes { train: p.train_per_class, val: p.eval_per_class, test: p.eval_per_class };
    let names: Vec<&str> = QuantumTask::ALL.iter().map(|t| t.name()).collect();
    run_pilot_grid(
        cfg,
        p,
        &names,
        "quantum",
        |name, seed| {
            let task: QuantumTask = name.parse()?;
            qmgen::make_quantum_dataset(task, seed, sizes)
        },
        out,
    )
}

/// EEG pilot: five tasks x five families x three seeds.
pub fn run_eeg_pilot(cfg: &LabConfig, out: Option<&Path>) -> Result<Vec<SweepRecord>> {
    let p = &cfg.eeg;
    let sizes =
        SplitSizes { train: p.train_per_class, val: p.eval_per_class, test: p.eval_per_class };
    let names: Vec<&str> = EegTask::ALL.iter().map(|t| t.name()).collect();
    run_pilot_grid(
        cfg,
        p,
        &names,
        "eeg",
        |name, seed| {
            let task: EegTask = name.parse()?;
            eeggen::make_eeg_dataset(task, seed, sizes)
        },
        out,
    )
}

/// Replication sweep: 16 trials x four families x `seeds` seeds on AWGN-only
/// PSK data, then both selection rules over the complete grid.
pub fn run_replication(
    cfg: &LabConfig,
    out: Option<&Path>,
) -> Result<(Vec<SweepRecord>, SelectionReport, SelectionReport)> {
    let p = &cfg.replication;
    let space = protocol::build_search_space(cfg.master_seed);
    let sizes =
        SplitSizes { train: p.train_per_class, val: p.eval_per_class, test: p.eval_per_class };
    // One dataset per seed, shared across trials and families.
    let datasets: Vec<LabeledDataset> = (0..p.seeds)
        .map(|s| {
            let cond = RfCondition::preset(
                RfTask::AwgnReplication,
                seeds::derive(cfg.master_seed, &[seeds::tag("repl-data"), s as u64]),
            );
            rfgen::make_dataset(&cond, sizes)
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, Family, usize)> = space
        .trials
        .iter()
        .flat_map(|t| {
            SWEEP_FAMILIES
                .iter()
                .flat_map(move |&f| (0..p.seeds).map(move |s| (t.index, f, s)))
        })
        .collect();
    let mut records: Vec<SweepRecord> = cells
        .par_iter()
        .map(|&(trial_idx, family, seed)| {
            let trial = space.trials[trial_idx];
            let spec = RunSpec {
                condition: "awgn_replication".to_string(),
                family,
                activation: family_activation(family, p.activation),
                trial: trial_idx,
                seed,
                width: trial.width,
                tc: TrainConfig {
                    lr: trial.lr,
                    weight_decay: trial.weight_decay,
                    batch_size: trial.batch_size,
                    steps: p.steps,
                    seed: seeds::derive(
                        cfg.master_seed,
                        &[
                            seeds::tag("repl-train"),
                            trial_idx as u64,
                            seeds::tag(family.name()),
                            seed as u64,
                        ],
                    ),
                    ..Default::default()
                },
                model_seed: seeds::derive(
                    cfg.master_seed,
                    &[
                        seeds::tag("repl-model"),
                        trial_idx as u64,
                        seeds::tag(family.name()),
                        seed as u64,
                    ],
                ),
            };
            run_cell(&datasets[seed], &spec, out)
        })
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| {
        (a.family.name(), a.trial, a.seed).cmp(&(b.family.name(), b.trial, b.seed))
    });
    let matched = protocol::select(&records, SelectionRule::MatchedShared)?;
    let independent = protocol::select(&records, SelectionRule::Independent)?;
    if let Some(out) = out {
        report::write_records_csv(&out.join(report::RECORDS_FILE), &records)?;
        std::fs::write(
            out.join("search_space.json"),
            serde_json::to_string_pretty(&space).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        report::write_selection_json(&out.join("selection_matched.json"), &matched)?;
        report::write_selection_json(&out.join("selection_independent.json"), &independent)?;
        let contrast = out.join("report").join("selection_contrast.csv");
        report::write_selection_contrast_csv(&contrast, &matched, &independent)?;
        report::csv_to_markdown(
            &contrast,
            &out.join("report").join("selection_contrast.md"),
        )?;
    }
    Ok((records, matched, independent))
}

/// The 2x2 learning-rate/activation factorial (Table-9-shaped).
pub fn run_factorial(cfg: &LabConfig, out: Option<&Path>) -> Result<Vec<FactorialCell>> {
    let mut fc = cfg.factorial.clone();
    fc.dataset_seed = seeds::derive(cfg.master_seed, &[seeds::tag("factorial")]);
    let cells = protocol::factorial(&fc)?;
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        let csv = out.join("factorial.csv");
        report::write_factorial_csv(&csv, &cells)?;
        report::csv_to_markdown(&csv, &out.join("factorial.md"))?;
    }
    Ok(cells)
}

/// Gradient norm of the reference complex model at initialization on a fixed
/// PSK probe batch; feeds the trilemma scan's left axis.
pub fn init_grad_norm(activation: ActivationId, seed: u64) -> f64 {
    let cond = RfCondition::preset(RfTask::PskOnly, 7_777);
    let sizes = SplitSizes { train: 24, val: 2, test: 2 };
    let ds = rfgen::make_dataset(&cond, sizes).expect("probe dataset");
    let shape = DataShape { in_ch: 1, t: ds.header.t, classes: ds.classes() };
    let spec = FamilySpec::new(Family::Complex, activation, 32);
    let model = families::build(&spec, shape, seed).expect("probe model");
    let bundle = train::materialize_bundle(ViewId::ComplexNative, &ds);
    let idxs: Vec<usize> = (0..bundle.train.n.min(64)).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &i in &idxs {
        x.extend_from_slice(
            &bundle.train.data[i * bundle.train.sample_len..(i + 1) * bundle.train.sample_len],
        );
        y.push(bundle.train.labels[i]);
    }
    let mut tape = crate::wirtinger::Tape::new();
    let fwd = model.forward_loss(&mut tape, x, &y, idxs.len()).expect("probe forward");
    let _ = fwd;
    tape.backward(&model.store).expect("probe backward").l2_norm()
}

/// Trilemma scan over the six complex activations.
pub fn run_trilemma(cfg: &LabConfig, out: Option<&Path>) -> Result<Vec<TrilemmaReport>> {
    let reports: Vec<TrilemmaReport> = ActivationId::COMPLEX_SET
        .par_iter()
        .map(|&id| activations::trilemma_scan(id, cfg.trilemma.grid_n, &cfg.trilemma.init_seeds, init_grad_norm))
        .collect();
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        let csv = out.join("trilemma.csv");
        report::write_trilemma_csv(&csv, &reports)?;
        report::csv_to_markdown(&csv, &out.join("trilemma.md"))?;
    }
    Ok(reports)
}

/// Run a suite end to end, writing records, reports, and the manifest.
pub fn run_suite(id: SuiteId, cfg: &LabConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    match id {
        SuiteId::RfStress => {
            run_rf_stress(cfg, Some(out))?;
        }
        SuiteId::QuantumPilot => {
            run_quantum_pilot(cfg, Some(out))?;
        }
        SuiteId::EegPilot => {
            run_eeg_pilot(cfg, Some(out))?;
        }
        SuiteId::Replication => {
            run_replication(cfg, Some(out))?;
        }
        SuiteId::Factorial => {
            run_factorial(cfg, Some(out))?;
        }
        SuiteId::Trilemma => {
            run_trilemma(cfg, Some(out))?;
        }
    }
    let hash = crate::manifest::config_hash(cfg)?;
    let artifacts: Vec<String> = std::fs::read_dir(out)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    let mut artifacts = artifacts;
    artifacts.sort();
    crate::manifest::write_manifest(out, &format!("suite {}", id.name()), hash, artifacts)?;
    Ok(())
}
