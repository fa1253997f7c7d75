#![allow(dead_code)]

use kadd_shap::coalition::coalitions_up_to;
use kadd_shap::explainer::BackgroundSet;
use kadd_shap::game::{interaction_count, InteractionVector};
use kadd_shap::model::{synthetic_interaction_model, LinearModel, SyntheticModel, Term};
use kadd_shap::Game;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random monomials of degree up to `max_degree` with coefficients in [-2, 2].
pub fn random_synthetic(rng: &mut ChaCha8Rng, m: usize, terms: usize, max_degree: usize) -> SyntheticModel {
    let terms = (0..terms)
        .map(|_| {
            let degree = rng.gen_range(1..=max_degree.min(m));
            let mut features = sample(rng, m, degree).into_vec();
            features.sort_unstable();
            Term {
                coefficient: rng.gen_range(-2.0..2.0),
                features,
            }
        })
        .collect();
    synthetic_interaction_model(m, terms).unwrap()
}

pub fn random_linear(rng: &mut ChaCha8Rng, m: usize) -> LinearModel {
    LinearModel {
        intercept: rng.gen_range(-1.0..1.0),
        coefficients: (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect(),
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..2.0)).collect())
        .collect()
}

pub fn full_background(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BackgroundSet {
    BackgroundSet::all(random_rows(rng, n, m)).unwrap()
}

/// Dense game with `υ(∅) = 0` and other payoffs uniform in [-1, 1].
pub fn random_game(rng: &mut ChaCha8Rng, m: usize) -> Game {
    Game::from_fn(m, |a| if a.is_empty() { 0.0 } else { rng.gen_range(-1.0..1.0) }).unwrap()
}

pub fn random_interactions(rng: &mut ChaCha8Rng, m: usize, k: usize) -> InteractionVector {
    let values = (0..interaction_count(m, k)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    InteractionVector::new(m, k, values).unwrap()
}

/// Shapley values from the permutation definition: the average marginal
/// contribution over all orderings of the players.
pub fn shapley_by_permutations(m: usize, value: impl Fn(u64) -> f64) -> Vec<f64> {
    let mut phi = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut count = 0u64;
    permute(&mut order, 0, &mut |perm| {
        count += 1;
        let mut mask = 0u64;
        for &j in perm {
            let before = value(mask);
            mask |= 1 << j;
            phi[j] += value(mask) - before;
        }
    });
    phi.iter().map(|v| v / count as f64).collect()
}

fn permute(order: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == order.len() {
        visit(order);
        return;
    }
    for i in start..order.len() {
        order.swap(start, i);
        permute(order, start + 1, visit);
        order.swap(start, i);
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn all_coalitions(m: usize) -> Vec<kadd_shap::Coalition> {
    coalitions_up_to(m, m).unwrap()
}
