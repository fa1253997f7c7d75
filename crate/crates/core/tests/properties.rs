mod common;

use common::*;
use kadd_shap::choquet::{choquet_2add_eval, choquet_eval, ChoquetInput};
use kadd_shap::coalition::{binomial, coalitions_up_to, enumerate_powerset};
use kadd_shap::experiment::percentile;
use kadd_shap::explainer::{
    build_value_function, precompute_solver, sample_coalitions, LinearValueFunction,
    MarginalExpectation, SolverOptions, ValueFunctionEstimate,
};
use kadd_shap::game::{
    build_transform_matrix, game_to_interactions, interaction_general, interactions_to_game,
    shapley_exact, InteractionVector,
};
use kadd_shap::wls::{solve_weighted_ls, Matrix, WlsFactorization, WlsProblem};
use kadd_shap::{Coalition, Game, Method};
use proptest::prelude::*;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn power_set_counts_and_ranks(m in 1usize..=10) {
        let order = enumerate_powerset(m).unwrap();
        prop_assert_eq!(order.len(), 1 << m);
        for r in 0..=m {
            let count = order.iter().filter(|c| c.cardinality() == r).count() as u64;
            prop_assert_eq!(count, binomial(m as u64, r as u64));
        }
        let mut vectors = std::collections::HashSet::new();
        for (rank, c) in order.iter().enumerate() {
            prop_assert_eq!(order.rank_of(&c), rank);
            prop_assert_eq!(order.get(rank), Some(c));
            prop_assert!(vectors.insert(c.characteristic_vector()));
        }
    }

    #[test]
    fn shapley_is_efficient(seed: u64, m in 1usize..=10) {
        let game = random_game(&mut rng(seed), m);
        let phi = shapley_exact(&game).unwrap();
        let total = game.value(&Coalition::full(m)).unwrap() - game.value(&Coalition::empty(m)).unwrap();
        prop_assert!((phi.iter().sum::<f64>() - total).abs() < 1e-9);
    }

    #[test]
    fn symmetric_players_share_equally(seed: u64, m in 2usize..=9) {
        let mut rng = rng(seed);
        let (j, j2) = (rng.gen_range(0..m), rng.gen_range(0..m));
        prop_assume!(j != j2);
        let base = random_game(&mut rng, m);
        let swap = |a: &Coalition| {
            let mut bits = a.bits() & !(1 << j) & !(1 << j2);
            if a.contains(j) { bits |= 1 << j2; }
            if a.contains(j2) { bits |= 1 << j; }
            Coalition::from_bits(m, bits).unwrap()
        };
        let game = Game::from_fn(m, |a| base.value(&a).unwrap() + base.value(&swap(&a)).unwrap()).unwrap();
        let phi = shapley_exact(&game).unwrap();
        prop_assert!((phi[j] - phi[j2]).abs() < 1e-12);
    }

    #[test]
    fn dummy_player_gets_nothing(seed: u64, m in 2usize..=9) {
        let mut rng = rng(seed);
        let dummy = rng.gen_range(0..m);
        let base = random_game(&mut rng, m);
        let game = Game::from_fn(m, |a| {
            let without = Coalition::from_bits(m, a.bits() & !(1 << dummy)).unwrap();
            base.value(&without).unwrap()
        }).unwrap();
        prop_assert!(shapley_exact(&game).unwrap()[dummy].abs() < 1e-12);
    }

    #[test]
    fn shapley_is_linear(seed: u64, m in 1usize..=9, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = rng(seed);
        let (g1, g2) = (random_game(&mut rng, m), random_game(&mut rng, m));
        let combined = shapley_exact(&g1.linear_combination(alpha, &g2, beta).unwrap()).unwrap();
        let (p1, p2) = (shapley_exact(&g1).unwrap(), shapley_exact(&g2).unwrap());
        let expected: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| alpha * a + beta * b).collect();
        prop_assert!(max_abs_diff(&combined, &expected) < 1e-10);
    }

    #[test]
    fn game_interaction_round_trip(seed: u64, m in 1usize..=8) {
        let game = random_game(&mut rng(seed), m);
        let back = interactions_to_game(&game_to_interactions(&game, m).unwrap()).unwrap();
        prop_assert!(max_abs_diff(back.dense_by_mask().unwrap(), game.dense_by_mask().unwrap()) < 1e-10);
    }

    #[test]
    fn singleton_interactions_are_shapley_values(seed: u64, m in 1usize..=8) {
        let game = random_game(&mut rng(seed), m);
        let phi = shapley_exact(&game).unwrap();
        for (j, p) in phi.iter().enumerate() {
            let direct = interaction_general(&game, &Coalition::new(m, &[j]).unwrap()).unwrap();
            prop_assert!((direct - p).abs() < 1e-12);
        }
    }

    #[test]
    fn shapley_matches_permutation_definition(seed: u64, m in 1usize..=6) {
        let game = random_game(&mut rng(seed), m);
        let dense = game.dense_by_mask().unwrap().to_vec();
        let oracle = shapley_by_permutations(m, |mask| dense[mask as usize]);
        prop_assert!(max_abs_diff(&shapley_exact(&game).unwrap(), &oracle) < 1e-12);
    }

    #[test]
    fn choquet_agrees_on_indicators(seed: u64, m in 1usize..=8) {
        let game = random_game(&mut rng(seed), m);
        for a in all_coalitions(m) {
            prop_assert_eq!(choquet_eval(&ChoquetInput::indicator(&a), &game).unwrap(), game.value(&a).unwrap());
        }
    }

    #[test]
    fn two_additive_closed_form(seed: u64, m in 2usize..=8) {
        let mut rng = rng(seed);
        let iv = random_interactions(&mut rng, m, 2).with_zero_empty_payoff();
        let game = interactions_to_game(&iv).unwrap();
        let x = ChoquetInput::new((0..m).map(|_| rng.gen::<f64>()).collect()).unwrap();
        prop_assert!((choquet_eval(&x, &game).unwrap() - choquet_2add_eval(&x, &iv).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn additive_games_give_weighted_means(seed: u64, m in 1usize..=8) {
        let mut rng = rng(seed);
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let game = Game::from_fn(m, |a| a.members().map(|j| w[j]).sum()).unwrap();
        let x: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let mean: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        prop_assert!((choquet_eval(&ChoquetInput::new(x).unwrap(), &game).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn choquet_ignores_tie_order(seed: u64, m in 1usize..=8, levels in 1usize..=3) {
        let mut rng = rng(seed);
        let game = random_game(&mut rng, m);
        let grid: Vec<f64> = (0..levels).map(|_| rng.gen::<f64>()).collect();
        let x: Vec<f64> = (0..m).map(|_| grid[rng.gen_range(0..levels)]).collect();
        // level-set form: sum over distinct values of the step times the upper set's payoff
        let mut distinct = x.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut oracle = 0.0;
        let mut previous = 0.0;
        for &t in &distinct {
            let upper: Vec<usize> = (0..m).filter(|&j| x[j] >= t).collect();
            oracle += (t - previous) * game.value(&Coalition::new(m, &upper).unwrap()).unwrap();
            previous = t;
        }
        prop_assert!((choquet_eval(&ChoquetInput::new(x).unwrap(), &game).unwrap() - oracle).abs() < 1e-12);
    }
}

/// Normal-equations oracle, solved by Gaussian elimination with partial pivoting.
fn normal_equations(design: &[Vec<f64>], w: &[f64], y: &[f64]) -> Vec<f64> {
    let p = design[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (i, row) in design.iter().enumerate() {
        for r in 0..p {
            for c in 0..p {
                a[r][c] += w[i] * row[r] * row[c];
            }
            a[r][p] += w[i] * row[r] * y[i];
        }
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            for c in col..=p {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][p] - s) / a[r][r];
    }
    x
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn wls_matches_normal_equations(seed: u64, p in 1usize..=60, extra in 0usize..=140) {
        let mut rng = rng(seed);
        let n = p + extra.max(p / 2);
        let design: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let problem = WlsProblem::new(Matrix::from_rows(&design).unwrap(), w.clone(), y.clone()).unwrap();
        let got = solve_weighted_ls(&problem, 1e-10).unwrap();
        let oracle = normal_equations(&design, &w, &y);
        let scale = oracle.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        prop_assert_eq!(got.rank, p);
        prop_assert!(max_abs_diff(&got.params, &oracle) < 1e-8 * scale);
    }

    #[test]
    fn wls_ignores_weight_scale(seed: u64, p in 1usize..=30, c in 1e-3f64..1e3) {
        let mut rng = rng(seed);
        let n = 3 * p + rng.gen_range(0..30);
        let design = Matrix::from_rows(
            &(0..n).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect::<Vec<_>>()
        ).unwrap();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let a = WlsFactorization::new(&design, &w, 1e-10).unwrap().solve(&y).unwrap();
        let b = WlsFactorization::new(&design, &scaled, 1e-10).unwrap().solve(&y).unwrap();
        prop_assert!(max_abs_diff(&a.params, &b.params) < 1e-10);
    }

    #[test]
    fn heavy_rows_are_fitted(seed: u64, p in 2usize..=20) {
        let mut rng = rng(seed);
        let n = 2 * p + 5;
        let mut rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        // heavy rows near distinct unit vectors, so their own subsystem is well conditioned
        let heavy = [0, n - 1];
        for (axis, &i) in heavy.iter().enumerate() {
            w[i] = 1e6;
            for (c, v) in rows[i].iter_mut().enumerate() {
                *v = if c == axis { 1.0 } else { 0.1 * *v };
            }
        }
        let problem = WlsProblem::new(Matrix::from_rows(&rows).unwrap(), w, y.clone()).unwrap();
        let sol = solve_weighted_ls(&problem, 1e-10).unwrap();
        for &i in &heavy {
            let fit: f64 = rows[i].iter().zip(&sol.params).map(|(a, b)| a * b).sum();
            prop_assert!((fit - y[i]).abs() < 1e-4 * y[i].abs().max(1.0), "row {} residual {}", i, fit - y[i]);
        }
    }
}

fn linear_values(seed: u64, m: usize, coalitions: &[Coalition]) -> ValueFunctionEstimate {
    let mut rng = rng(seed);
    let model = random_linear(&mut rng, m);
    let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..2.0)).collect();
    let mean: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..2.0)).collect();
    let source = LinearValueFunction::new(model, &x, &mean).unwrap();
    build_value_function(&source, coalitions).unwrap()
}

fn synthetic_values(seed: u64, m: usize, coalitions: &[Coalition]) -> ValueFunctionEstimate {
    let mut rng = rng(seed);
    let model = random_synthetic(&mut rng, m, 6, 3);
    let bg = full_background(&mut rng, 6, m);
    let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..2.0)).collect();
    let source = MarginalExpectation::new(&model, &x, &bg).unwrap();
    build_value_function(&source, coalitions).unwrap()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn kadd_ignores_uniform_weight_scale(seed: u64, m in 3usize..=8, k in 1usize..=3, c in 1e-2f64..1e2) {
        let budget = (1usize << m).min(4 * m + 8);
        let sample = sample_coalitions(m, budget, seed).unwrap();
        let vfe = synthetic_values(seed, m, sample.coalitions());
        let k = k.min(m);
        let reference = precompute_solver(&sample, Method::KAdditive(k), SolverOptions::default())
            .unwrap()
            .explain(&vfe)
            .unwrap();
        let t = build_transform_matrix(sample.coalitions(), m, k).unwrap();
        let design = Matrix::from_row_major(t.nrows(), t.ncols(), t.as_slice().to_vec()).unwrap();
        let weights: Vec<f64> = sample
            .coalitions()
            .iter()
            .map(|a| c * if a.is_empty() || a.is_full() { 1e6 } else { 1.0 })
            .collect();
        let targets: Vec<f64> = sample
            .coalitions()
            .iter()
            .map(|a| vfe.get(a).unwrap() - vfe.phi0())
            .collect();
        let sol = WlsFactorization::new(&design, &weights, 1e-10).unwrap().solve(&targets).unwrap();
        let iv = InteractionVector::new(m, k, sol.params).unwrap();
        prop_assert!(max_abs_diff(&iv.shapley_values(), &reference.shap_values) < 1e-10);
    }

    #[test]
    fn cached_solver_matches_fresh_solves(seed: u64, m in 2usize..=8, k in 1usize..=3) {
        let k = k.min(m);
        let budget = (1usize << m).min(3 * m + 4);
        let sample = sample_coalitions(m, budget, seed).unwrap();
        for method in [Method::Kernel, Method::KAdditive(k)] {
            let cached = precompute_solver(&sample, method, SolverOptions::default()).unwrap();
            for instance in 0..3u64 {
                let vfe = linear_values(seed ^ instance, m, sample.coalitions());
                let fresh = precompute_solver(&sample, method, SolverOptions::default())
                    .unwrap()
                    .explain(&vfe)
                    .unwrap();
                let reused = cached.explain(&vfe).unwrap();
                prop_assert!(max_abs_diff(&fresh.shap_values, &reused.shap_values) < 1e-10);
                // the operator applied to the targets gives the same parameters
                prop_assert!(reused.is_locally_accurate(1e-4));
            }
        }
    }

    #[test]
    fn samples_are_distinct_and_anchored(seed: u64, m in 1usize..=20, frac in 0.0f64..1.0) {
        let total = if m >= 20 { 1usize << 20 } else { 1usize << m };
        let budget = (2 + (frac * (total.min(300) - 2) as f64) as usize).min(total);
        let sample = sample_coalitions(m, budget, seed).unwrap();
        let c = sample.coalitions();
        prop_assert_eq!(c.len(), budget);
        prop_assert!(c.iter().any(Coalition::is_empty) && c.iter().any(Coalition::is_full));
        let mut bits: Vec<u64> = c.iter().map(Coalition::bits).collect();
        bits.sort_unstable();
        bits.dedup();
        prop_assert_eq!(bits.len(), budget);
        let again = sample_coalitions(m, budget, seed).unwrap();
        prop_assert_eq!(again.coalitions(), c);
    }

    #[test]
    fn median_of_odd_sequence_is_middle(mut xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        if xs.len() % 2 == 0 { xs.pop(); }
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(percentile(&xs, 0.5), sorted[xs.len() / 2]);
    }
}

#[test]
fn transform_rows_follow_cardinal_lex_order() {
    let rows = coalitions_up_to(4, 2).unwrap();
    let t = build_transform_matrix(&rows, 4, 2).unwrap();
    assert_eq!(t.columns(), &rows[..]);
    assert_eq!(t.nrows(), 11);
}
