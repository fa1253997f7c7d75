//! Error of Kernel SHAP and k-additive estimates against exact SHAP values as
//! the coalition budget grows, on a model with planted third-order terms.
//!
//! cargo run --release --example convergence

use kadd_shap::experiment::{run_convergence, ExperimentConfig};
use kadd_shap::Method;

fn main() -> kadd_shap::Result<()> {
    let cfg = ExperimentConfig {
        model: "synthetic:x1 + 2*x2*x3 - 1.5*x4*x5*x6 + x7*x8 + 0.8*x9*x10*x1 - x2*x5*x8".into(),
        features: Some(10),
        rows: 250,
        methods: vec![Method::Kernel, Method::KAdditive(2), Method::KAdditive(3)],
        budgets: vec![102, 307, 512, 1024],
        simulations: 101,
        background_size: 20,
        instances: vec![0, 1, 2],
        ..Default::default()
    };
    let report = run_convergence(&cfg)?;
    println!("{:<8} {:>6} {:>12} {:>12} {:>12}", "method", "budget", "q10", "q50", "q90");
    for &method in &report.methods {
        for &budget in &report.budgets {
            let q = |p| report.value(method, budget, p).unwrap_or(f64::NAN);
            println!(
                "{:<8} {:>6} {:>12.3e} {:>12.3e} {:>12.3e}",
                method.to_string(),
                budget,
                q(0.1),
                q(0.5),
                q(0.9)
            );
        }
    }
    Ok(())
}
