//! Table emission from sweep records: machine-readable CSV first, markdown
//! rendered from the CSV afterwards (never computed separately).

use crate::activations::ActivationId;
use crate::families::Family;
use crate::protocol::{paired_ci, FactorialCell, SelectionReport, SweepRecord};
use crate::{Error, Result};
use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

pub const RECORDS_FILE: &str = "records.csv";

/// Canonical family column order for tables.
pub const FAMILY_ORDER: [Family; 7] = [
    Family::Complex,
    Family::RealStacked,
    Family::RealParamMatched,
    Family::RealFlopMatched,
    Family::RealPolar,
    Family::RealPhase,
    Family::RealMagnitude,
];

/// Write the sweep grid sorted by (condition, family, trial, seed); the sort
/// makes the bytes independent of completion order.
pub fn write_records_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    use std::io::Write;
    let mut rows = records.to_vec();
    rows.sort_by(|a, b| {
        (a.condition.as_str(), a.family.name(), a.trial, a.seed).cmp(&(
            b.condition.as_str(),
            b.family.name(),
            b.trial,
            b.seed,
        ))
    });
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "condition,family,activation,trial,seed,val_accuracy,test_accuracy,dead")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            r.condition,
            r.family.name(),
            r.activation.name(),
            r.trial,
            r.seed,
            r.val_accuracy,
            r.test_accuracy,
            r.dead
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(Error::Format(format!("records.csv line {i}: bad field count")));
        }
        out.push(SweepRecord {
            condition: parts[0].to_string(),
            family: Family::from_str(parts[1])?,
            activation: ActivationId::from_str(parts[2])?,
            trial: parts[3].parse().map_err(|_| Error::Format("bad trial".into()))?,
            seed: parts[4].parse().map_err(|_| Error::Format("bad seed".into()))?,
            val_accuracy: parts[5].parse().map_err(|_| Error::Format("bad val".into()))?,
            test_accuracy: parts[6].parse().map_err(|_| Error::Format("bad test".into()))?,
            dead: parts[7].parse().map_err(|_| Error::Format("bad dead flag".into()))?,
        });
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Mean test accuracy per (condition, family) at a fixed trial: the
/// condition-by-view accuracy grid.
pub fn write_condition_table(path: &Path, records: &[SweepRecord], trial: usize) -> Result<()> {
    use std::io::Write;
    let conditions: BTreeSet<&str> = records.iter().map(|r| r.condition.as_str()).collect();
    let present: Vec<Family> = FAMILY_ORDER
        .into_iter()
        .filter(|f| records.iter().any(|r| r.family == *f))
        .collect();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "condition")?;
    for fam in &present {
        write!(f, ",{}", fam.name())?;
    }
    writeln!(f)?;
    for cond in conditions {
        write!(f, "{cond}")?;
        for fam in &present {
            let accs: Vec<f64> = records
                .iter()
                .filter(|r| r.condition == cond && r.family == *fam && r.trial == trial)
                .map(|r| r.test_accuracy)
                .collect();
            write!(f, ",{}", mean(&accs))?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

/// Complex-minus-baseline paired t intervals per condition at a fixed trial.
pub fn write_ci_table(path: &Path, records: &[SweepRecord], trial: usize) -> Result<()> {
    use std::io::Write;
    let conditions: BTreeSet<&str> = records.iter().map(|r| r.condition.as_str()).collect();
    let present: Vec<Family> = FAMILY_ORDER
        .into_iter()
        .filter(|f| *f != Family::Complex && records.iter().any(|r| r.family == *f))
        .collect();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "condition,baseline,mean_diff,ci_half_width")?;
    for cond in conditions {
        let mut complex: Vec<(usize, f64)> = records
            .iter()
            .filter(|r| r.condition == cond && r.family == Family::Complex && r.trial == trial)
            .map(|r| (r.seed, r.test_accuracy))
            .collect();
        complex.sort_by_key(|r| r.0);
        for fam in &present {
            let mut base: Vec<(usize, f64)> = records
                .iter()
                .filter(|r| r.condition == cond && r.family == *fam && r.trial == trial)
                .map(|r| (r.seed, r.test_accuracy))
                .collect();
            base.sort_by_key(|r| r.0);
            if base.len() != complex.len() || complex.len() < 2 {
                continue;
            }
            let diffs: Vec<f64> =
                complex.iter().zip(&base).map(|(c, b)| c.1 - b.1).collect();
            let (m, hw) = paired_ci(&diffs)?;
            writeln!(f, "{cond},{},{m},{hw}", fam.name())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn write_selection_json(path: &Path, report: &SelectionReport) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// The selection-rule contrast table: rule, complex, best real, gap.
pub fn write_selection_contrast_csv(
    path: &Path,
    matched: &SelectionReport,
    independent: &SelectionReport,
) -> Result<()> {
    use std::io::Write;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "selection_rule,complex,best_real,best_real_family,gap_pp")?;
    for r in [matched, independent] {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.rule.name(),
            r.complex_test_accuracy,
            r.best_real_test_accuracy,
            r.best_real.name(),
            100.0 * r.gap
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_factorial_csv(path: &Path, cells: &[FactorialCell]) -> Result<()> {
    use std::io::Write;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "activation,lr,dead,total,max_step1_head_grad,mean_test_accuracy")?;
    for c in cells {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            c.activation.name(),
            c.lr,
            c.dead,
            c.total,
            c.max_step1_head_grad,
            c.mean_test_accuracy
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_trilemma_csv(
    path: &Path,
    reports: &[crate::activations::TrilemmaReport],
) -> Result<()> {
    use std::io::Write;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "activation,grad_norm_mean,grad_norm_std,cr_median,cr_p95,max_abs,bounded")?;
    for r in reports {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            r.activation.name(),
            r.grad_norm_mean,
            r.grad_norm_std,
            r.cr_median,
            r.cr_p95,
            r.max_abs,
            r.bounded_on_grid
        )?;
    }
    f.flush()?;
    Ok(())
}

/// Render any of the emitted CSVs as a markdown table (the markdown is always
/// derived from CSV bytes, never recomputed).
pub fn csv_to_markdown(csv_path: &Path, md_path: &Path) -> Result<()> {
    use std::io::Write;
    let text = std::fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty csv", csv_path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let mut f = std::io::BufWriter::new(std::fs::File::create(md_path)?);
    writeln!(f, "| {} |", cols.join(" | "))?;
    writeln!(f, "|{}|", cols.iter().map(|_| " --- ").collect::<Vec<_>>().join("|"))?;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line
            .split(',')
            .map(|c| match c.parse::<f64>() {
                Ok(v) if c.contains('.') => format!("{v:.4}"),
                _ => c.to_string(),
            })
            .collect();
        writeln!(f, "| {} |", cells.join(" | "))?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<SweepRecord> {
        let mut out = Vec::new();
        for (fi, family) in [Family::Complex, Family::RealPhase].into_iter().enumerate() {
            for cond in ["psk_only", "qam_only"] {
                for seed in 0..3usize {
                    out.push(SweepRecord {
                        condition: cond.into(),
                        family,
                        activation: if fi == 0 {
                            ActivationId::Crelu
                        } else {
                            ActivationId::RealRelu
                        },
                        trial: 0,
                        seed,
                        val_accuracy: 0.7 + 0.01 * seed as f64,
                        test_accuracy: 0.65 + 0.1 * fi as f64,
                        dead: false,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn records_round_trip_and_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RECORDS_FILE);
        let mut recs = sample_records();
        recs.reverse();
        write_records_csv(&path, &recs).unwrap();
        let back = read_records_csv(&path).unwrap();
        assert_eq!(back.len(), recs.len());
        // Sorted output is permutation-invariant.
        let path2 = dir.path().join("records2.csv");
        write_records_csv(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn condition_table_and_markdown() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("table.csv");
        write_condition_table(&csv, &sample_records(), 0).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("condition,complex,real_phase"));
        assert!(text.contains("psk_only,0.65,0.75"));
        let md = dir.path().join("table.md");
        csv_to_markdown(&csv, &md).unwrap();
        let mdtext = std::fs::read_to_string(&md).unwrap();
        assert!(mdtext.contains("| psk_only | 0.6500 | 0.7500 |"));
    }

    #[test]
    fn ci_table_emits_paired_rows() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("ci.csv");
        write_ci_table(&csv, &sample_records(), 0).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        // Constant diffs give a -0.1 mean and zero half-width.
        let row = text
            .lines()
            .find(|l| l.starts_with("psk_only,real_phase"))
            .expect("row present");
        let fields: Vec<&str> = row.split(',').collect();
        let mean: f64 = fields[2].parse().unwrap();
        let hw: f64 = fields[3].parse().unwrap();
        assert!((mean + 0.1).abs() < 1e-12);
        assert_eq!(hw, 0.0);
    }
}
