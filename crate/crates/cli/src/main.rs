//! `cxbench`: generate synthetic datasets, train single runs, execute the
//! experiment suites, apply selection rules, and emit report tables.
//!
//! Exit codes: 0 success, 1 experiment-level failure, 2 usage/config error.
//! `CXBENCH_SEED` overrides the master seed from config/flags.

use clap::{Parser, Subcommand, ValueEnum};
use cxbench_core::activations::ActivationId;
use cxbench_core::families::{self, DataShape, Family, FamilySpec};
use cxbench_core::protocol::{self, SelectionRule};
use cxbench_core::rfgen::{self, RfCondition, RfTask, SplitSizes};
use cxbench_core::suites::{self, LabConfig, SuiteId};
use cxbench_core::train::{self, TrainConfig};
use cxbench_core::{dataset, eeggen, manifest, qmgen, report, Error};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "cxbench", version, about = "Complex-vs-real classifier laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    Rf,
    Quantum,
    Eeg,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    MatchedShared,
    Independent,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file for one condition.
    Gen {
        #[arg(value_enum)]
        domain: Domain,
        /// Condition name (e.g. psk_only, momentum, pac).
        #[arg(long)]
        condition: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset file.
        #[arg(long)]
        out: PathBuf,
        /// Per-class split sizes (domain defaults when omitted).
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
    },
    /// Train one model family on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        family: String,
        /// Activation (defaults: crelu for complex, real_relu otherwise).
        #[arg(long)]
        activation: Option<String>,
        #[arg(long, default_value_t = 5e-3)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.01)]
        weight_decay: f64,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output run directory (telemetry.csv, result.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named experiment suite end to end.
    Suite {
        /// rf_stress | quantum_pilot | eeg_pilot | replication | factorial | trilemma
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Master seed override (flags win over config; CXBENCH_SEED wins over both).
        #[arg(long)]
        seed: Option<u64>,
        /// JSON config file; missing fields fall back to defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cap on concurrent runs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Apply a selection rule to a completed sweep directory.
    Select {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long, value_enum)]
        rule: RuleArg,
    },
    /// Emit report tables from a completed sweep directory.
    Report {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Activation trilemma scan (shorthand for `suite trilemma`).
    Trilemma {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Format(_) => ExitCode::from(2),
                Error::IncompleteGrid(ref cells) => {
                    for c in cells.iter().take(20) {
                        eprintln!("  missing: {c}");
                    }
                    ExitCode::from(1)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn resolve_config(
    config: Option<&Path>,
    seed_flag: Option<u64>,
) -> cxbench_core::Result<LabConfig> {
    let mut cfg: LabConfig = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => LabConfig::default(),
    };
    if let Some(s) = seed_flag {
        cfg.master_seed = s;
    }
    if let Ok(env_seed) = std::env::var("CXBENCH_SEED") {
        cfg.master_seed = env_seed
            .parse()
            .map_err(|_| Error::Config(format!("CXBENCH_SEED must be a u64, got `{env_seed}`")))?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> cxbench_core::Result<()> {
    match cli.command {
        Command::Gen { domain, condition, seed, out, n_train, n_val, n_test } => {
            let sizes_or = |d: SplitSizes| SplitSizes {
                train: n_train.unwrap_or(d.train),
                val: n_val.unwrap_or(d.val),
                test: n_test.unwrap_or(d.test),
            };
            let ds = match domain {
                Domain::Rf => {
                    let task = RfTask::from_str(&condition)?;
                    let cond = RfCondition::preset(task, seed);
                    rfgen::make_dataset(&cond, sizes_or(SplitSizes::default()))?
                }
                Domain::Quantum => {
                    let task = qmgen::QuantumTask::from_str(&condition)?;
                    qmgen::make_quantum_dataset(task, seed, sizes_or(qmgen::default_sizes()))?
                }
                Domain::Eeg => {
                    let task = eeggen::EegTask::from_str(&condition)?;
                    eeggen::make_eeg_dataset(task, seed, sizes_or(eeggen::default_sizes()))?
                }
            };
            dataset::write_dataset(&out, &ds)?;
            if let Some(dir) = out.parent() {
                let hash = manifest::config_hash(&ds.header)?;
                manifest::write_manifest(
                    dir,
                    &format!("gen {} --condition {condition} --seed {seed}", domain_name(domain)),
                    hash,
                    vec![out.file_name().unwrap().to_string_lossy().into_owned()],
                )?;
            }
            println!(
                "wrote {} ({} train / {} val / {} test, {} classes, T={})",
                out.display(),
                ds.train.len(),
                ds.val.len(),
                ds.test.len(),
                ds.classes(),
                ds.header.t
            );
            Ok(())
        }
        Command::Train {
            dataset: ds_path,
            family,
            activation,
            lr,
            width,
            batch_size,
            weight_decay,
            steps,
            seed,
            out,
        } => {
            let ds = dataset::read_dataset(&ds_path)?;
            let family = Family::from_str(&family)?;
            let act = match activation {
                Some(a) => ActivationId::from_str(&a)?,
                None if family == Family::Complex => ActivationId::Crelu,
                None => ActivationId::RealRelu,
            };
            let spec = FamilySpec::new(family, act, width);
            let shape = DataShape { in_ch: ds.header.ch, t: ds.header.t, classes: ds.classes() };
            let mut model = families::build(&spec, shape, seed)?;
            let bundle = train::materialize_bundle(spec.view, &ds);
            let tc = TrainConfig {
                lr,
                weight_decay,
                batch_size,
                steps,
                seed,
                ..Default::default()
            };
            let (res, trace) = train::train_run(&mut model, &bundle, &tc)?;
            std::fs::create_dir_all(&out)?;
            trace.write_csv(&out.join("telemetry.csv"))?;
            let result_json = serde_json::json!({
                "dataset": ds_path.display().to_string(),
                "family": family.name(),
                "activation": act.name(),
                "view": spec.view.name(),
                "train_config": tc,
                "result": res,
            });
            std::fs::write(
                out.join("result.json"),
                serde_json::to_string_pretty(&result_json)
                    .map_err(|e| Error::Format(e.to_string()))?,
            )?;
            let hash = manifest::config_hash(&result_json["train_config"])?;
            manifest::write_manifest(
                &out,
                &format!("train --family {}", family.name()),
                hash,
                vec!["telemetry.csv".into(), "result.json".into()],
            )?;
            println!(
                "val {:.4}  test {:.4}  dead {}  params {}",
                res.val_accuracy, res.test_accuracy, res.dead, res.cost.param_count
            );
            if res.dead {
                return Err(Error::Diverged(0));
            }
            Ok(())
        }
        Command::Suite { name, out, seed, config, jobs } => {
            if let Some(n) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            let id = SuiteId::from_str(&name)?;
            let cfg = resolve_config(config.as_deref(), seed)?;
            suites::run_suite(id, &cfg, &out)
        }
        Command::Select { sweep, rule } => {
            let records = report::read_records_csv(&sweep.join(report::RECORDS_FILE))?;
            let rule = match rule {
                RuleArg::MatchedShared => SelectionRule::MatchedShared,
                RuleArg::Independent => SelectionRule::Independent,
            };
            let sel = protocol::select(&records, rule)?;
            let path = sweep.join(format!("selection_{}.json", rule.name()));
            report::write_selection_json(&path, &sel)?;
            println!(
                "{}: complex {:.4}, best real {:.4} ({}), gap {:+.2} pp",
                rule.name(),
                sel.complex_test_accuracy,
                sel.best_real_test_accuracy,
                sel.best_real.name(),
                100.0 * sel.gap
            );
            Ok(())
        }
        Command::Report { sweep, format } => {
            let records_path = sweep.join(report::RECORDS_FILE);
            if !records_path.exists() {
                return Err(Error::Config(format!(
                    "{}: no records.csv (not a sweep directory)",
                    sweep.display()
                )));
            }
            let records = report::read_records_csv(&records_path)?;
            if records.is_empty() {
                return Err(Error::Config("records.csv holds no rows".into()));
            }
            let dir = sweep.join("report");
            let trials: std::collections::BTreeSet<usize> =
                records.iter().map(|r| r.trial).collect();
            let multi_trial = trials.len() > 1;
            let mut written = Vec::new();
            if multi_trial {
                // Sweep-style directory: selection tables under both rules.
                let matched = protocol::select(&records, SelectionRule::MatchedShared)?;
                let independent = protocol::select(&records, SelectionRule::Independent)?;
                report::write_selection_json(&sweep.join("selection_matched.json"), &matched)?;
                report::write_selection_json(
                    &sweep.join("selection_independent.json"),
                    &independent,
                )?;
                let contrast = dir.join("selection_contrast.csv");
                report::write_selection_contrast_csv(&contrast, &matched, &independent)?;
                written.push(contrast);
                let (dead, total) = protocol::dead_tally(
                    &records,
                    &Family::CAPACITY_REAL,
                    matched.anchor_trial,
                    3,
                );
                println!("dead real seeds at anchor trial: {dead}/{total}");
                let anchor_table = dir.join("anchor_accuracy.csv");
                report::write_condition_table(&anchor_table, &records, matched.anchor_trial)?;
                written.push(anchor_table);
            } else {
                let t = *trials.iter().next().unwrap();
                let table = dir.join("accuracy.csv");
                report::write_condition_table(&table, &records, t)?;
                written.push(table);
                let ci = dir.join("paired_ci.csv");
                report::write_ci_table(&ci, &records, t)?;
                written.push(ci);
            }
            if matches!(format, FormatArg::Md) {
                for csv in &written {
                    let md = csv.with_extension("md");
                    report::csv_to_markdown(csv, &md)?;
                }
            }
            println!("report written to {}", dir.display());
            Ok(())
        }
        Command::Trilemma { out, seed, config } => {
            let cfg = resolve_config(config.as_deref(), seed)?;
            suites::run_suite(SuiteId::Trilemma, &cfg, &out)
        }
    }
}

fn domain_name(d: Domain) -> &'static str {
    match d {
        Domain::Rf => "rf",
        Domain::Quantum => "quantum",
        Domain::Eeg => "eeg",
    }
}
