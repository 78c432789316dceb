use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds spent in each phase of one run. Wall-clock values only appear in
/// JSON, never in CSV, so CSV output stays reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub attack: f64,
    pub scoring: f64,
    pub sampling: f64,
    pub training: f64,
    pub evaluation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    /// Test accuracy in percent.
    pub accuracy: f64,
    /// MAD of test-node embeddings (×100); `None` when degenerate.
    pub mad: Option<f64>,
    pub best_epoch: usize,
    pub negative_edges: usize,
    pub times: PhaseTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_mad: Option<f64>,
    pub std_mad: Option<f64>,
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Aggregate {
    pub fn from_runs(runs: &[RunRecord]) -> Aggregate {
        let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&acc);
        let mads: Option<Vec<f64>> = runs.iter().map(|r| r.mad).collect();
        let (mean_mad, std_mad) = match mads {
            Some(m) if !m.is_empty() => {
                let (a, b) = mean_std(&m);
                (Some(a), Some(b))
            }
            _ => (None, None),
        };
        Aggregate {
            runs: runs.len(),
            mean_accuracy,
            std_accuracy,
            mean_mad,
            std_mad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub variant: String,
    pub dataset: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub runs: Vec<RunRecord>,
    pub aggregate: Aggregate,
}

const CSV_HEADER: [&str; 12] = [
    "experiment",
    "dataset",
    "variant",
    "row",
    "run",
    "seed",
    "accuracy",
    "accuracy_std",
    "mad",
    "mad_std",
    "best_epoch",
    "config_hash",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per run plus one aggregate row per report, columns fixed.
pub fn write_csv<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for rep in reports {
        for r in &rep.runs {
            w.write_record([
                rep.experiment.as_str(),
                &rep.dataset,
                &rep.variant,
                "run",
                &r.run.to_string(),
                &r.seed.to_string(),
                &r.accuracy.to_string(),
                "",
                &opt(r.mad),
                "",
                &r.best_epoch.to_string(),
                &rep.config_hash,
            ])?;
        }
        let a = &rep.aggregate;
        w.write_record([
            rep.experiment.as_str(),
            &rep.dataset,
            &rep.variant,
            "aggregate",
            "",
            "",
            &a.mean_accuracy.to_string(),
            &a.std_accuracy.to_string(),
            &opt(a.mean_mad),
            &opt(a.std_mad),
            "",
            &rep.config_hash,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn csv_string(reports: &[RunReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn emit_report(reports: &[RunReport], dir: &Path, stem: &str) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("nothing to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, csv_string(reports)?).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(reports)?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

pub fn load_reports(path: &Path) -> Result<Vec<RunReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
