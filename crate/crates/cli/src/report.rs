//! Aggregation of finished runs into comparison tables.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::train::{RunRecord, SUMMARY_FILE};

/// Mean and sample standard deviation; `None` for no values. A single
/// value has deviation 0.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Plain string table rendered as markdown or CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_markdown(&self) -> String {
        let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
        let mut out = line(&self.header);
        out.push_str(&line(&vec!["---".to_string(); self.header.len()]));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let field = |s: &String| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        };
        let line = |cells: &[String]| cells.iter().map(field).collect::<Vec<_>>().join(",") + "\n";
        let mut out = line(&self.header);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// Every `summary.json` below `dir`, in path order.
pub fn find_runs(dir: &Path) -> Result<Vec<(PathBuf, RunRecord)>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = fs::read_dir(&d).with_context(|| format!("reading {}", d.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == SUMMARY_FILE) {
                let rec = RunRecord::load(&path)?;
                found.push((path, rec));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(found)
}

/// One group of runs sharing model, variant and network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: String,
    pub variant: String,
    pub network: String,
    pub params_k: usize,
    pub runs: usize,
    pub failed: usize,
    pub seeds: Vec<u64>,
    pub mean_test_acc: Option<f64>,
    pub std: Option<f64>,
    pub best_test_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// Groups runs by (model, variant, network), sorted by model name, then
/// variant, then network.
pub fn build_report(runs: &[RunRecord]) -> Report {
    let mut keys: Vec<(String, String, String)> = runs
        .iter()
        .map(|r| (r.model.clone(), r.variant.clone(), r.network.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    let rows = keys
        .into_iter()
        .map(|(model, variant, network)| {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.model == model && r.variant == variant && r.network == network)
                .collect();
            let accs: Vec<f64> = group
                .iter()
                .filter(|r| r.error.is_none())
                .filter_map(|r| r.summary.final_test_acc)
                .collect();
            let (mean, std) = mean_std(&accs).map_or((None, None), |(m, s)| (Some(m), Some(s)));
            let mut seeds: Vec<u64> = group.iter().map(|r| r.seed).collect();
            seeds.sort_unstable();
            ReportRow {
                params_k: group[0].params_k,
                runs: group.len(),
                failed: group.iter().filter(|r| r.error.is_some()).count(),
                seeds,
                mean_test_acc: mean,
                std,
                best_test_acc: group
                    .iter()
                    .filter_map(|r| r.summary.best_test_acc)
                    .reduce(f64::max),
                model,
                variant,
                network,
            }
        })
        .collect();
    Report { rows }
}

pub fn report_dir(dir: &Path) -> Result<Report> {
    let runs: Vec<RunRecord> = find_runs(dir)?.into_iter().map(|(_, r)| r).collect();
    Ok(build_report(&runs))
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{:.1}", 100.0 * v))
}

impl Report {
    fn table(&self) -> Table {
        let header = [
            "model",
            "variant",
            "network",
            "params_K",
            "runs",
            "failed",
            "seeds",
            "mean_test_acc (%)",
            "std",
            "best_test_acc (%)",
        ];
        let mut t = Table::new(header.map(String::from).to_vec());
        for r in &self.rows {
            t.push(vec![
                r.model.clone(),
                r.variant.clone(),
                r.network.clone(),
                r.params_k.to_string(),
                r.runs.to_string(),
                r.failed.to_string(),
                r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
                pct(r.mean_test_acc),
                pct(r.std),
                pct(r.best_test_acc),
            ]);
        }
        t
    }

    /// Markdown table; empty when there are no runs.
    pub fn to_markdown(&self) -> String {
        if self.rows.is_empty() {
            return String::new();
        }
        self.table().to_markdown()
    }

    /// CSV with a header line; empty when there are no runs.
    pub fn to_csv(&self) -> String {
        if self.rows.is_empty() {
            return String::new();
        }
        self.table().to_csv()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}
