//! Kernel-weighted coalition sampling without replacement.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalition::{binomial, combinations_lex, coalitions_up_to, full_mask, Coalition};
use crate::error::{Error, Result};

/// Weight standing in for the infinite kernel weight of `∅` and `M`.
pub const DEFAULT_BIG_WEIGHT: f64 = 1e6;

/// Kernel SHAP weight `(m−1) / (C(m,a)·a·(m−a))`, or `big_weight` for `a ∈ {0, m}`.
pub fn kernel_weight_with(m: usize, a: usize, big_weight: f64) -> f64 {
    assert!(a <= m, "cardinality {a} exceeds m = {m}");
    if a == 0 || a == m {
        return big_weight;
    }
    (m - 1) as f64 / (binomial(m as u64, a as u64) as f64 * a as f64 * (m - a) as f64)
}

pub fn kernel_weight(m: usize, a: usize) -> f64 {
    kernel_weight_with(m, a, DEFAULT_BIG_WEIGHT)
}

/// An ordered set of distinct coalitions containing `∅` and `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionSample {
    m: usize,
    coalitions: Vec<Coalition>,
    seed: Option<u64>,
}

impl CoalitionSample {
    /// Wraps a caller-chosen coalition list after checking the invariants.
    pub fn from_coalitions(m: usize, coalitions: Vec<Coalition>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(coalitions.len());
        for c in &coalitions {
            if c.num_attributes() != m {
                return Err(Error::Argument(format!("coalition {c:?} is not over {m} attributes")));
            }
            if !seen.insert(c.bits()) {
                return Err(Error::Argument(format!("duplicate coalition {c}")));
            }
        }
        if !seen.contains(&0) || !seen.contains(&full_mask(m)) {
            return Err(Error::Argument(
                "a coalition sample must contain both the empty and the grand coalition".into(),
            ));
        }
        Ok(CoalitionSample {
            m,
            coalitions,
            seed: None,
        })
    }

    /// Every coalition, in cardinal-lexicographic order.
    pub fn full_power_set(m: usize) -> Result<Self> {
        crate::coalition::check_dense(m)?;
        CoalitionSample::from_coalitions(m, coalitions_up_to(m, m)?)
    }

    pub fn num_attributes(&self) -> usize {
        self.m
    }

    pub fn budget(&self) -> usize {
        self.coalitions.len()
    }

    pub fn coalitions(&self) -> &[Coalition] {
        &self.coalitions
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

fn max_budget(m: usize) -> u128 {
    1u128 << m
}

/// Draws `budget` distinct coalitions. `∅` and `M` come first; the rest are
/// drawn one at a time with probability proportional to the kernel weight
/// among the coalitions not yet drawn.
pub fn sample_coalitions(m: usize, budget: usize, seed: u64) -> Result<CoalitionSample> {
    if m == 0 || m > crate::coalition::MAX_ATTRIBUTES {
        return Err(Error::Argument(format!("attribute count {m} outside 1..=64")));
    }
    let max = max_budget(m);
    if budget < 2 || budget as u128 > max {
        return Err(Error::Budget {
            budget: budget as u128,
            min: 2,
            max,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coalitions = Vec::with_capacity(budget);
    coalitions.push(Coalition::empty(m));
    coalitions.push(Coalition::full(m));

    // Weights depend only on cardinality: pick a level in proportion to
    // (remaining count × weight), then a uniform undrawn member of it.
    let levels: Vec<usize> = (1..m).collect();
    let weight: Vec<f64> = levels.iter().map(|&a| kernel_weight(m, a)).collect();
    let size: Vec<u64> = levels.iter().map(|&a| binomial(m as u64, a as u64)).collect();
    let mut drawn: Vec<HashSet<u64>> = vec![HashSet::new(); levels.len()];

    for _ in 2..budget {
        let remaining: Vec<f64> = (0..levels.len())
            .map(|i| (size[i] - drawn[i].len() as u64) as f64 * weight[i])
            .collect();
        let total: f64 = remaining.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut level = None;
        for (i, r) in remaining.iter().enumerate() {
            if *r <= 0.0 {
                continue;
            }
            level = Some(i);
            if u < *r {
                break;
            }
            u -= r;
        }
        let i = level.expect("budget ≤ 2^m leaves an undrawn coalition");
        let a = levels[i];
        let left = size[i] - drawn[i].len() as u64;
        let bits = if drawn[i].len() as u64 * 2 >= size[i] {
            // dense level: pick among the enumerated leftovers
            let pick = rng.gen_range(0..left) as usize;
            combinations_lex(m, a)
                .into_iter()
                .filter(|b| !drawn[i].contains(b))
                .nth(pick)
                .expect("pick < leftover count")
        } else {
            loop {
                let b = index::sample(&mut rng, m, a)
                    .into_iter()
                    .fold(0u64, |acc, j| acc | (1 << j));
                if !drawn[i].contains(&b) {
                    break b;
                }
            }
        };
        drawn[i].insert(bits);
        coalitions.push(Coalition::from_bits_unchecked(m, bits));
    }
    Ok(CoalitionSample {
        m,
        coalitions,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_weight_values() {
        assert_eq!(kernel_weight(3, 0), 1e6);
        assert_eq!(kernel_weight(3, 3), 1e6);
        assert!((kernel_weight(3, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((kernel_weight(4, 2) - 0.125).abs() < 1e-15);
        assert_eq!(kernel_weight_with(5, 0, 42.0), 42.0);
    }

    #[test]
    fn full_budget_exhausts_the_power_set() {
        let s = sample_coalitions(4, 16, 3).unwrap();
        let mut bits: Vec<u64> = s.coalitions().iter().map(|c| c.bits()).collect();
        bits.sort_unstable();
        assert_eq!(bits, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn extremes_always_present_and_deterministic() {
        for budget in [2, 3, 7, 20, 32] {
            let s = sample_coalitions(5, budget, 99).unwrap();
            assert_eq!(s.budget(), budget);
            assert!(s.coalitions()[0].is_empty());
            assert!(s.coalitions()[1].is_full());
            assert_eq!(s, sample_coalitions(5, budget, 99).unwrap());
            CoalitionSample::from_coalitions(5, s.coalitions().to_vec()).unwrap();
        }
        assert_ne!(
            sample_coalitions(6, 20, 1).unwrap(),
            sample_coalitions(6, 20, 2).unwrap()
        );
    }

    #[test]
    fn budget_errors() {
        assert!(matches!(sample_coalitions(3, 1, 0), Err(Error::Budget { .. })));
        assert!(matches!(sample_coalitions(3, 9, 0), Err(Error::Budget { max: 8, .. })));
        assert_eq!(sample_coalitions(1, 2, 0).unwrap().budget(), 2);
    }

    #[test]
    fn large_attribute_counts_sample_sparsely() {
        let s = sample_coalitions(40, 500, 5).unwrap();
        assert_eq!(s.budget(), 500);
        let distinct: HashSet<u64> = s.coalitions().iter().map(|c| c.bits()).collect();
        assert_eq!(distinct.len(), 500);
    }

    #[test]
    fn from_coalitions_checks_invariants() {
        let e = Coalition::empty(2);
        let f = Coalition::full(2);
        assert!(CoalitionSample::from_coalitions(2, vec![e]).is_err());
        assert!(CoalitionSample::from_coalitions(2, vec![e, f, f]).is_err());
        assert!(CoalitionSample::from_coalitions(2, vec![f, e]).is_ok());
    }
}
