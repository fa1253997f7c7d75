//! Exact SHAP values and pair interactions for a small synthetic model.
//!
//! cargo run --example exact_attribution

use kadd_shap::explainer::{explain_exact, BackgroundSet, ExplainOptions};
use kadd_shap::model::{parse_terms, synthetic_interaction_model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kadd_shap::Result<()> {
    let m = 5;
    let model = synthetic_interaction_model(m, parse_terms("x1 + 2*x2*x3 - x3*x4*x5")?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows = (0..64).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    let background = BackgroundSet::new(rows, 32, 7)?;
    let instance = [0.9, 0.8, 0.7, 0.2, 0.4];

    let r = explain_exact(&model, &instance, &background, &ExplainOptions::default())?;
    println!("model        {model}");
    println!("f(x*)        {:.6}", r.prediction);
    println!("phi0         {:.6}", r.phi0);
    for (j, v) in r.shap_values.iter().enumerate() {
        println!("phi_x{}       {v:+.6}", j + 1);
    }
    println!("sum check    {:.2e}", r.efficiency_gap);

    let interactions = r.interactions.expect("exact results carry interactions");
    println!("\npair interactions");
    for j in 0..m {
        let row: Vec<String> = (0..m)
            .map(|k| if j == k { "      .".into() } else { format!("{:+.3}", interactions.pair(j, k)) })
            .collect();
        println!("x{}  {}", j + 1, row.join(" "));
    }
    Ok(())
}
