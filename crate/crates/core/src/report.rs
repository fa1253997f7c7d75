//! Plot-ready CSV tables and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ConvergenceReport, ExperimentConfig};
use crate::explainer::ExplanationResult;
use crate::game::InteractionVector;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const ATTRIBUTIONS_FILE: &str = "attributions.csv";
pub const INTERACTIONS_FILE: &str = "interactions.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Attribution rows sorted by decreasing `|φ_j|` (ties by feature index),
/// keeping the first `top_k` when given.
pub fn attribution_table(
    result: &ExplanationResult,
    names: &[String],
    top_k: Option<usize>,
) -> String {
    let mut order: Vec<usize> = (0..result.shap_values.len()).collect();
    order.sort_by(|&a, &b| {
        result.shap_values[b]
            .abs()
            .total_cmp(&result.shap_values[a].abs())
            .then(a.cmp(&b))
    });
    order.truncate(top_k.unwrap_or(order.len()));
    let mut out = String::from("rank,feature,index,shap_value\n");
    for (rank, &j) in order.iter().enumerate() {
        out += &format!(
            "{},{},{},{}\n",
            rank + 1,
            csv_field(&feature_name(names, j)),
            j,
            number(result.shap_values[j])
        );
    }
    out
}

/// Symmetric `m × m` matrix of pair interaction indices with an empty diagonal.
pub fn interaction_table(interactions: &InteractionVector, names: &[String]) -> String {
    let m = interactions.num_players();
    let matrix = interactions.pair_matrix();
    let labels: Vec<String> = (0..m).map(|j| csv_field(&feature_name(names, j))).collect();
    let mut out = format!("feature,{}\n", labels.join(","));
    for (i, row) in matrix.iter().enumerate() {
        out += &labels[i];
        for (j, v) in row.iter().enumerate() {
            out.push(',');
            if i != j {
                out += &number(*v);
            }
        }
        out.push('\n');
    }
    out
}

/// One row per (method, budget) with a column per percentile, e.g.
/// `method,n_M,q10,q50,q90`.
pub fn convergence_table(report: &ConvergenceReport) -> String {
    let mut out = String::from("method,n_M");
    for p in &report.percentiles {
        out += &format!(",q{}", percentile_label(*p));
    }
    out.push('\n');
    for &method in &report.methods {
        for &budget in &report.budgets {
            out += &format!("{},{}", csv_field(&method.to_string()), budget);
            for &p in &report.percentiles {
                let v = report.value(method, budget, p).expect("complete report");
                out.push(',');
                out += &number(v);
            }
            out.push('\n');
        }
    }
    out
}

/// Shortest decimal that round-trips, in exponent form for tiny or huge values.
fn number(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

fn percentile_label(p: f64) -> String {
    let pct = p * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}", pct.round() as i64)
    } else {
        format!("{pct}")
    }
}

fn feature_name(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// What a run did and how to repeat it. Keys serialize in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub model_id: String,
    pub dataset_id: String,
    pub seeds: Vec<u64>,
    pub budgets: Vec<usize>,
    pub methods: Vec<String>,
    pub outputs: Vec<String>,
    /// The full configuration the run was started with.
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, model_id: &str, dataset_id: &str) -> Self {
        RunManifest {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            model_id: model_id.into(),
            dataset_id: dataset_id.into(),
            seeds: Vec::new(),
            budgets: Vec::new(),
            methods: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// The embedded experiment configuration of a `converge` run.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        serde_json::from_value(self.config.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Everything a command can write.
#[derive(Debug, Default)]
pub struct ReportSet<'a> {
    pub explanation: Option<&'a ExplanationResult>,
    pub feature_names: &'a [String],
    pub top_k: Option<usize>,
    pub convergence: Option<&'a ConvergenceReport>,
}

/// Writes the tables present in `reports` plus `manifest.json` into `out_dir`
/// and returns the written paths.
pub fn emit_reports(
    out_dir: &Path,
    reports: &ReportSet<'_>,
    mut manifest: RunManifest,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let write = |written: &mut Vec<PathBuf>, name: &str, contents: String| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    if let Some(result) = reports.explanation {
        write(
            &mut written,
            ATTRIBUTIONS_FILE,
            attribution_table(result, reports.feature_names, reports.top_k),
        )?;
        if let Some(interactions) = result.interactions.as_ref().filter(|i| i.order() >= 2) {
            write(&mut written, INTERACTIONS_FILE, interaction_table(interactions, reports.feature_names))?;
        }
    }
    if let Some(report) = reports.convergence {
        write(&mut written, CONVERGENCE_FILE, convergence_table(report))?;
    }
    manifest.outputs = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    write(&mut written, MANIFEST_FILE, manifest.to_json())?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainer::Method;

    fn result(phi: Vec<f64>) -> ExplanationResult {
        ExplanationResult {
            method: Method::Exact,
            phi0: 0.0,
            prediction: phi.iter().sum(),
            shap_values: phi,
            interactions: None,
            efficiency_gap: 0.0,
            budget: 0,
            seed: None,
            model_calls: 0,
            rank_warning: None,
        }
    }

    #[test]
    fn attributions_sorted_by_magnitude_with_top_k() {
        let r = result(vec![0.1, -3.0, 2.0, 0.0, -0.5, 1.0, 0.2, -0.3, 0.05, 4.0]);
        let table = attribution_table(&r, &[], Some(5));
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "1,x10,9,4.0");
        assert_eq!(lines[2], "2,x2,1,-3.0");
        assert_eq!(lines[5], "5,x5,4,-0.5");
    }

    #[test]
    fn interaction_matrix_has_empty_diagonal() {
        let m = 11;
        let mut iv = InteractionVector::zeros(m, 2).unwrap();
        for c in iv.coalitions() {
            if c.cardinality() == 2 {
                let v = c.members().map(|j| j as f64).sum::<f64>();
                iv.set(&c, v);
            }
        }
        let table = interaction_table(&iv, &[]);
        let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 11);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), 12);
            assert_eq!(row[i + 1], "");
            for j in 0..m {
                if i != j {
                    assert_eq!(row[j + 1], rows[j][i + 1]);
                    assert_eq!(row[j + 1].parse::<f64>().unwrap(), (i + j) as f64);
                }
            }
        }
    }

    #[test]
    fn names_are_quoted_when_needed() {
        let r = result(vec![1.0]);
        let table = attribution_table(&r, &["a,b".to_string()], None);
        assert!(table.contains("\"a,b\""));
    }

    #[test]
    fn manifest_round_trips_with_fixed_key_order() {
        let mut m = RunManifest::new("converge", "linear(m=2)", "toy");
        m.seeds = vec![1, 2];
        m.config = serde_json::to_value(ExperimentConfig::default()).unwrap();
        let json = m.to_json();
        let keys: Vec<usize> = ["\"tool\"", "\"version\"", "\"command\"", "\"model_id\"", "\"config\""]
            .iter()
            .map(|k| json.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, &json).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.experiment_config().unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let err = emit_reports(&file.join("sub"), &ReportSet::default(), RunManifest::new("x", "y", "z"));
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
