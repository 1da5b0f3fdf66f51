//! Metric report assembly and serialization.
//!
//! Reports serialize to a flat CSV for plotting and to JSON when the caller
//! wants metadata attached. Formatting goes through the standard float
//! `Display`, which prints the shortest round-trip representation — reruns
//! with the same seeds produce byte-identical files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measured point: a variant evaluated at a variation level and cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rho: i32,
    pub k: usize,
    pub variant: String,
    pub seed: u64,
    pub recall: f64,
    pub ndcg: f64,
}

/// A collection of metric rows with a uniqueness guarantee: each
/// `(rho, K, variant, seed)` combination appears at most once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn new(rows: Vec<ReportRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for row in &rows {
            if !(0.0..=1.0).contains(&row.recall) || !(0.0..=1.0).contains(&row.ndcg) {
                return Err(Error::invalid(
                    "metric value",
                    format!(
                        "recall {} / ndcg {} outside [0, 1] at rho {}, K {}, variant {}",
                        row.recall, row.ndcg, row.rho, row.k, row.variant
                    ),
                ));
            }
            if !seen.insert((row.rho, row.k, row.variant.clone(), row.seed)) {
                return Err(Error::invalid(
                    "report rows",
                    format!(
                        "duplicate combination: rho {}, K {}, variant {}, seed {}",
                        row.rho, row.k, row.variant, row.seed
                    ),
                ));
            }
        }
        Ok(EvalReport { rows })
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    /// Merge reports (e.g. one per seed) into one, re-checking uniqueness.
    pub fn merged(reports: impl IntoIterator<Item = EvalReport>) -> Result<Self> {
        EvalReport::new(reports.into_iter().flat_map(|r| r.rows).collect())
    }

    /// Mean of a metric over all rows matching the filter, or `None` when no
    /// row matches. `metric` picks the column (e.g. `|r| r.recall`).
    pub fn mean_where(
        &self,
        filter: impl Fn(&ReportRow) -> bool,
        metric: impl Fn(&ReportRow) -> f64,
    ) -> Option<f64> {
        let values: Vec<f64> = self.rows.iter().filter(|r| filter(r)).map(metric).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,K,variant,seed,recall,ndcg\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.rho, r.k, r.variant, r.seed, r.recall, r.ndcg
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// JSON document bundling the rows with caller-supplied metadata.
    pub fn to_json(&self, metadata: &serde_json::Value) -> String {
        let doc = serde_json::json!({
            "metadata": metadata,
            "rows": self.rows,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path, metadata: &serde_json::Value) -> Result<()> {
        fs::write(path, self.to_json(metadata)).map_err(|e| Error::io(path, e))
    }
}
