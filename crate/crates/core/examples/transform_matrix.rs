//! The interaction-to-game transform for three players, printed as exact
//! fractions, and a round trip through it.
//!
//! cargo run --example transform_matrix

use kadd_shap::coalition::coalitions_up_to;
use kadd_shap::game::{build_transform_matrix, game_to_interactions, interactions_to_game, shapley_exact};
use kadd_shap::Game;

fn main() -> kadd_shap::Result<()> {
    let m = 3;
    let rows = coalitions_up_to(m, m)?;
    let t = build_transform_matrix(&rows, m, m)?;
    let header: Vec<String> = t.columns().iter().map(|c| format!("{:>7}", c.to_string())).collect();
    println!("{:>7} {}", "", header.join(" "));
    for (r, a) in t.rows().iter().enumerate() {
        let cells: Vec<String> = (0..t.ncols()).map(|c| format!("{:>7}", t.exact_entry(r, c).to_string())).collect();
        println!("{:>7} {}", a.to_string(), cells.join(" "));
    }

    let game = Game::from_cardinal_lex(m, &[0.0, 1.0, 2.0, 0.5, 4.0, 1.5, 3.0, 6.0])?;
    let interactions = game_to_interactions(&game, m)?;
    println!("\ninteraction indices {:?}", interactions.values());
    println!("shapley values      {:?}", shapley_exact(&game)?);
    let back = interactions_to_game(&interactions)?;
    println!("round trip          {:?}", back.to_cardinal_lex()?);
    Ok(())
}
