//! Numeric CSV ingestion and seeded train/test splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A numeric table split into features and a target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Where the data came from, recorded in run manifests.
    pub id: String,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub split_seed: u64,
}

impl Dataset {
    /// Builds a dataset from in-memory rows and splits it.
    pub fn from_rows(
        id: impl Into<String>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
        train_fraction: f64,
        split_seed: u64,
    ) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::Argument("feature and target row counts differ".into()));
        }
        if features.is_empty() {
            return Err(Error::Ingestion {
                row: 0,
                column: 0,
                message: "no data rows".into(),
            });
        }
        for (r, row) in features.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(Error::Ingestion {
                    row: r + 1,
                    column: row.len().min(feature_names.len()) + 1,
                    message: format!("expected {} features, found {}", feature_names.len(), row.len()),
                });
            }
        }
        let (train, test) = split_indices(features.len(), train_fraction, split_seed)?;
        Ok(Dataset {
            id: id.into(),
            feature_names,
            target_name: target_name.into(),
            features,
            targets,
            train,
            test,
            split_seed,
        })
    }

    /// `rows` instances with features uniform on `[0, 1)` and a zero target.
    pub fn synthetic_uniform(
        m: usize,
        rows: usize,
        train_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
            .collect();
        Dataset::from_rows(
            format!("uniform(m={m},rows={rows},seed={seed})"),
            (1..=m).map(|j| format!("x{j}")).collect(),
            "y",
            features,
            vec![0.0; rows],
            train_fraction,
            seed,
        )
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn train_features(&self) -> Vec<Vec<f64>> {
        self.train.iter().map(|&i| self.features[i].clone()).collect()
    }

    pub fn train_targets(&self) -> Vec<f64> {
        self.train.iter().map(|&i| self.targets[i]).collect()
    }

    pub fn test_features(&self) -> Vec<Vec<f64>> {
        self.test.iter().map(|&i| self.features[i].clone()).collect()
    }
}

fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} must lie in (0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Reads a header-first numeric CSV, takes `target` as the label column and
/// splits the rows. With `binarize_above = Some(t)` the target becomes
/// `1` when it exceeds `t` and `0` otherwise.
pub fn load_csv_dataset(
    path: &Path,
    target: &str,
    train_fraction: f64,
    split_seed: u64,
    binarize_above: Option<f64>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Ingestion {
            row: 0,
            column: 0,
            message: "missing header row".into(),
        });
    }
    let target_col = header.iter().position(|h| h == target).ok_or_else(|| Error::Ingestion {
        row: 0,
        column: 0,
        message: format!("unknown target column '{target}'"),
    })?;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(Error::Ingestion {
                row,
                column: record.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut x = Vec::with_capacity(header.len() - 1);
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                row,
                column: c + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row,
                    column: c + 1,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            if c == target_col {
                targets.push(match binarize_above {
                    Some(t) => f64::from(u8::from(v > t)),
                    None => v,
                });
            } else {
                x.push(v);
            }
        }
        features.push(x);
    }
    if features.is_empty() {
        return Err(Error::Ingestion {
            row: 1,
            column: 0,
            message: "file has a header but no data rows".into(),
        });
    }
    let feature_names = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::from_rows(
        path.display().to_string(),
        feature_names,
        target,
        features,
        targets,
        train_fraction,
        split_seed,
    )
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Ingestion {
            row,
            column: 0,
            message: format!("{kind:?}"),
        },
    }
}
