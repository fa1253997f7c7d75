//! The discrete Choquet integral of a game, its agreement with the game on
//! binary inputs and the closed form for 2-additive games.
//!
//! cargo run --example choquet_integral

use kadd_shap::choquet::{choquet_2add_eval, choquet_eval, ChoquetInput};
use kadd_shap::coalition::coalitions_up_to;
use kadd_shap::game::{interactions_to_game, InteractionVector};
use kadd_shap::Coalition;

fn main() -> kadd_shap::Result<()> {
    let m = 3;
    // I(∅), I(1), I(2), I(3), I(12), I(13), I(23)
    let interactions = InteractionVector::new(m, 2, vec![0.0, 0.4, 0.3, 0.3, 0.2, -0.1, 0.0])?
        .with_zero_empty_payoff();
    let game = interactions_to_game(&interactions)?;

    println!("coalition  payoff  integral at its indicator");
    for a in coalitions_up_to(m, m)? {
        let at_indicator = choquet_eval(&ChoquetInput::indicator(&a), &game)?;
        println!("{:<10} {:>7.4} {:>7.4}", a.to_string(), game.value(&a).unwrap(), at_indicator);
    }

    for x in [[0.2, 0.9, 0.5], [0.7, 0.7, 0.1], [1.0, 0.0, 0.3]] {
        let input = ChoquetInput::new(x.to_vec())?;
        println!(
            "\nx = {x:?}\n  general {:.12}\n  closed  {:.12}",
            choquet_eval(&input, &game)?,
            choquet_2add_eval(&input, &interactions)?
        );
    }
    let everyone = Coalition::full(m);
    println!("\nupsilon(M) = {:.4}", game.value(&everyone).unwrap());
    Ok(())
}
