//! Run artifacts: `run.json` with the effective configuration and outcome,
//! and `metrics.csv` with one row per epoch.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::ConfusionMatrix;
use crate::dfa::{EpochMetrics, HardwareCounters};
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "epoch,loss,train_acc,test_acc";
pub const RUN_FILE: &str = "run.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub shuffle: u64,
    pub init: u64,
    pub feedback: u64,
    pub noise: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Effective configuration after all overrides.
    pub config: serde_json::Value,
    pub seeds: Seeds,
    pub backend: String,
    pub epochs: usize,
    pub final_train_accuracy: Option<f64>,
    pub final_test_accuracy: Option<f64>,
    pub counters: HardwareCounters,
    pub confusion: Option<ConfusionMatrix>,
}

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        let test = m.test_accuracy.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", m.epoch, m.loss, m.train_accuracy, test);
    }
    out
}

pub fn write_run_log(dir: &Path, record: &RunRecord, metrics: &[EpochMetrics]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let run_path = dir.join(RUN_FILE);
    let mut json = serde_json::to_string_pretty(record).map_err(|source| Error::Json { path: run_path.clone(), source })?;
    json.push('\n');
    std::fs::write(&run_path, json).map_err(|e| Error::io(&run_path, e))?;
    let metrics_path = dir.join(METRICS_FILE);
    std::fs::write(&metrics_path, metrics_csv(metrics)).map_err(|e| Error::io(&metrics_path, e))
}

pub fn read_run_record(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        let mut confusion = ConfusionMatrix::new(2);
        confusion.record(0, 0);
        confusion.record(1, 0);
        RunRecord {
            config: serde_json::json!({ "layers": [2, 3, 2], "learning_rate": 0.003 }),
            seeds: Seeds { shuffle: 1, init: 2, feedback: 3, noise: 4 },
            backend: "noisy".into(),
            epochs: 2,
            final_train_accuracy: Some(0.75),
            final_test_accuracy: Some(0.5),
            counters: HardwareCounters { mvm_calls: 10, cycles: 40, saturated: 1 },
            confusion: Some(confusion),
        }
    }

    #[test]
    fn run_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        write_run_log(dir.path(), &record(), &[]).unwrap();
        assert_eq!(read_run_record(&dir.path().join(RUN_FILE)).unwrap(), record());
        let csv = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
        assert_eq!(csv, format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn identical_inputs_give_identical_files() {
        let metrics = [
            EpochMetrics { epoch: 1, loss: 0.5, train_accuracy: 0.8, test_accuracy: Some(0.81) },
            EpochMetrics { epoch: 2, loss: 0.25, train_accuracy: 0.9, test_accuracy: None },
        ];
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_run_log(a.path(), &record(), &metrics).unwrap();
        write_run_log(b.path(), &record(), &metrics).unwrap();
        for f in [RUN_FILE, METRICS_FILE] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
        let csv = std::fs::read_to_string(a.path().join(METRICS_FILE)).unwrap();
        assert_eq!(csv.lines().nth(2), Some("2,0.25,0.9,"));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        std::fs::write(&file, "x").unwrap();
        let err = write_run_log(&file.join("sub"), &record(), &[]).unwrap_err();
        assert!(err.to_string().contains("occupied"), "{err}");
    }
}
