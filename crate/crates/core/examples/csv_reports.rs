//! Load a numeric CSV, fit the built-in linear model, explain one test row
//! with the k-additive estimator and write the report files.
//!
//! cargo run --example csv_reports -- [out-dir]

use std::io::Write;

use kadd_shap::dataset::load_csv_dataset;
use kadd_shap::explainer::{explain_kadd, sample_coalitions, BackgroundSet, ExplainOptions};
use kadd_shap::model::builtin_linear_model;
use kadd_shap::report::{emit_reports, ReportSet, RunManifest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/csv-reports".into());
    let mut csv = tempfile::NamedTempFile::new()?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    writeln!(csv, "age,bmi,bp,s1,s2,progression")?;
    for _ in 0..120 {
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = 150.0 + 30.0 * x[1] + 20.0 * x[2] - 5.0 * x[0] + rng.gen_range(-3.0..3.0);
        let cells: Vec<String> = x.iter().chain([y].iter()).map(|v| format!("{v:.4}")).collect();
        writeln!(csv, "{}", cells.join(","))?;
    }

    let data = load_csv_dataset(csv.path(), "progression", 0.8, 1, None)?;
    let model = builtin_linear_model(&data.train_features(), &data.train_targets())?;
    let background = BackgroundSet::new(data.train_features(), 40, 1)?;
    let instance = data.test_features()[0].clone();
    let sample = sample_coalitions(data.num_features(), 24, 1)?;
    let r = explain_kadd(&model, &instance, &sample, &background, 2, &ExplainOptions::default())?;

    let mut manifest = RunManifest::new("explain", "linear", "generated progression table");
    manifest.seeds = vec![1];
    manifest.budgets = vec![24];
    manifest.methods = vec![r.method.to_string()];
    let reports = ReportSet {
        explanation: Some(&r),
        feature_names: &data.feature_names,
        top_k: Some(3),
        convergence: None,
    };
    for path in emit_reports(out.as_ref(), &reports, manifest)? {
        println!("==> {}", path.display());
        print!("{}", std::fs::read_to_string(&path)?);
    }
    Ok(())
}
