//! Kernel SHAP and k-additive estimates on the same coalition sample,
//! compared with the exact values.
//!
//! cargo run --release --example kernel_vs_kadd

use kadd_shap::experiment::squared_error;
use kadd_shap::explainer::{
    explain_exact, explain_kadd, explain_kernel_shap, sample_coalitions, BackgroundSet,
    ExplainOptions,
};
use kadd_shap::model::{parse_terms, synthetic_interaction_model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kadd_shap::Result<()> {
    let m = 8;
    let spec = "x1 - 0.5*x2 + 1.5*x3*x4 - x5*x6 + 0.8*x2*x7*x8";
    let model = synthetic_interaction_model(m, parse_terms(spec)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows = (0..100).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    let background = BackgroundSet::new(rows, 25, 3)?;
    let instance: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    let opts = ExplainOptions::default();
    let exact = explain_exact(&model, &instance, &background, &opts)?;

    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "n_M", "kernel", "kadd(1)", "kadd(2)", "kadd(3)");
    for budget in [20, 40, 64, 100, 160, 256] {
        let sample = sample_coalitions(m, budget, 11)?;
        let kernel = explain_kernel_shap(&model, &instance, &sample, &background, &opts)?;
        let mut line = format!("{budget:>6} {:>12.3e}", squared_error(&kernel.shap_values, &exact.shap_values)?);
        for k in 1..=3 {
            let kadd = explain_kadd(&model, &instance, &sample, &background, k, &opts)?;
            let err = squared_error(&kadd.shap_values, &exact.shap_values)?;
            let flag = if kadd.rank_warning.is_some() { "*" } else { " " };
            line += &format!(" {err:>11.3e}{flag}");
        }
        println!("{line}");
    }
    println!("\n* fewer independent coalitions than parameters (minimum-norm solution)");
    Ok(())
}
