//! Evaluation report emission: per-record CSV and recall summary JSON.

use crate::{Result, WorkbenchError, write_atomic};
use polarforge_core::metrics::EvalRecord;
use std::collections::BTreeMap;
use std::path::Path;

/// Writes records as CSV with columns `object,add,threshold,hit`.
pub fn write_eval_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["object", "add", "threshold", "hit"])
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    for r in records {
        writer
            .write_record([
                r.object.as_str(),
                &r.add.to_string(),
                &r.threshold.to_string(),
                &r.hit.to_string(),
            ])
            .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Writes the recall summary as `{object: recall_percent}`.
pub fn write_recall_json(path: &Path, recalls: &BTreeMap<String, f64>) -> Result<()> {
    let text = serde_json::to_string_pretty(recalls)?;
    write_atomic(path, text.as_bytes())
}

/// Writes a loss trace as CSV with columns `iteration,loss`.
pub fn write_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["iteration", "loss"])
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    for (i, loss) in trace.iter().enumerate() {
        writer
            .write_record([&i.to_string(), &loss.to_string()])
            .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| WorkbenchError::BadInput(e.to_string()))?;
    write_atomic(path, &bytes)
}
