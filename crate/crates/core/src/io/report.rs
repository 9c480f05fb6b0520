use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::sweep::AggregateReport;
use crate::harness::{MeanStd, SweepOutcome};
use crate::Fitted;

pub const REPORT_COLUMNS: [&str; 6] = ["Model", "ECE", "Max ECE", "smECE", "Max smECE", "Acc"];

/// Three decimals, half away from zero, never `-0.000`.
pub fn fmt3(x: f64) -> String {
    let r = (x * 1000.0).round() / 1000.0;
    format!("{:.3}", if r == 0.0 { 0.0 } else { r })
}

pub fn mean_std_cell(m: MeanStd) -> String {
    format!("{} ± {}", fmt3(m.mean), fmt3(m.std))
}

fn table_row(model: &str, a: &AggregateReport) -> Vec<String> {
    let mut row = vec![model.to_string()];
    row.extend([a.ece, a.max_ece, a.smece, a.max_smece, a.accuracy].map(mean_std_cell));
    row
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub summary: PathBuf,
    pub plot_data: PathBuf,
}

/// Writes `report.csv` (test metrics of each family's selected point),
/// `summary.json` (every run and aggregate) and `plot_data.csv` (one record
/// per grid point). Output depends only on `outcome`.
pub fn emit_report(outcome: &SweepOutcome, dir: &Path) -> Result<ReportFiles> {
    if outcome.points.is_empty() {
        return Err(Error::Argument("no results to report".into()));
    }
    fs::create_dir_all(dir)?;
    let files = ReportFiles {
        table: dir.join("report.csv"),
        summary: dir.join("summary.json"),
        plot_data: dir.join("plot_data.csv"),
    };

    let mut table = csv::Writer::from_path(&files.table)?;
    table.write_record(REPORT_COLUMNS)?;
    for choice in &outcome.best_by_family {
        let point = outcome.point(&choice.point).expect("selected point exists");
        if let Some(test) = &point.test {
            table.write_record(table_row(&choice.family, test))?;
        }
    }
    table.flush()?;

    let mut summary = serde_json::to_string_pretty(outcome)?;
    summary.push('\n');
    fs::write(&files.summary, summary)?;

    let mut plot = csv::Writer::from_path(&files.plot_data)?;
    plot.write_record(["point", "family", "cf", "test_accuracy", "test_max_smece", "val_max_smece"])?;
    for p in &outcome.points {
        let cell = |a: &Option<AggregateReport>, f: fn(&AggregateReport) -> f64| {
            a.as_ref().map(|a| f(a).to_string()).unwrap_or_default()
        };
        plot.write_record([
            p.id.clone(),
            p.family.clone(),
            p.cf.to_string(),
            cell(&p.test, |a| a.accuracy.mean),
            cell(&p.test, |a| a.max_smece.mean),
            cell(&p.validation, |a| a.max_smece.mean),
        ])?;
    }
    plot.flush()?;
    Ok(files)
}

/// A fitted post-processor with the group names its patches index into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub group_names: Vec<String>,
    pub model: Fitted,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::{FamilyChoice, PointSummary};
    use crate::harness::Method;
    use crate::patch::{Patch, Provenance};
    use crate::Predictor;

    #[test]
    fn three_decimal_cells() {
        assert_eq!(mean_std_cell(MeanStd { mean: 0.0855, std: 0.0151 }), "0.086 ± 0.015");
        assert_eq!(fmt3(-0.0001), "0.000");
        assert_eq!(fmt3(1.0), "1.000");
        assert_eq!(fmt3(0.12345), "0.123");
    }

    fn outcome() -> SweepOutcome {
        let m = |mean| MeanStd { mean, std: 0.01 };
        let agg = AggregateReport { ece: m(0.1), max_ece: m(0.2), smece: m(0.09), max_smece: m(0.15), accuracy: m(0.8), brier: m(0.2) };
        SweepOutcome {
            runs: vec![],
            points: vec![PointSummary {
                id: "base cf=0".into(),
                method: Method::Base,
                family: "Base".into(),
                cf: 0.0,
                completed: 1,
                failed: 0,
                mean_patches: 0.0,
                validation: Some(agg.clone()),
                test: Some(agg),
            }],
            best: Some("base cf=0".into()),
            best_by_family: vec![FamilyChoice { family: "Base".into(), point: "base cf=0".into() }],
        }
    }

    #[test]
    fn one_result_gives_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&outcome(), dir.path()).unwrap();
        let text = fs::read_to_string(&files.table).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Model,ECE,Max ECE,smECE,Max smECE,Acc");
        assert_eq!(lines[1], "Base,0.100 ± 0.010,0.200 ± 0.010,0.090 ± 0.010,0.150 ± 0.010,0.800 ± 0.010");
        assert_eq!(lines.len(), 2);
        let plot = fs::read_to_string(&files.plot_data).unwrap();
        assert_eq!(plot.lines().count(), 2);
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(emit_report(&outcome(), &blocker.join("sub")), Err(Error::Io(_))));
    }

    #[test]
    fn model_files_round_trip_exactly() {
        let p = Predictor {
            lambda: 0.1,
            patches: vec![Patch { group_index: 1, bin_index: 3, shift: 0.1 + 0.2 }, Patch { group_index: 0, bin_index: 9, shift: -1.0 / 3.0 }],
            provenance: Provenance::new("hkrr").param("alpha", 0.05),
            converged: true,
        };
        let file = ModelFile { group_names: vec!["a".into(), "b".into()], model: Fitted::Patched(p) };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        file.save(&path).unwrap();
        assert_eq!(ModelFile::load(&path).unwrap(), file);
    }
}
