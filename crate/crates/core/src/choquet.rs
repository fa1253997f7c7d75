//! Discrete Choquet integral with respect to a game.

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{Game, InteractionVector};

/// A point of `[0,1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoquetInput(Vec<f64>);

impl ChoquetInput {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain { index, value });
        }
        Ok(ChoquetInput(x))
    }

    pub fn indicator(c: &Coalition) -> Self {
        ChoquetInput(c.characteristic_vector().into_iter().map(f64::from).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ChoquetInput {
    type Error = Error;

    fn try_from(x: Vec<f64>) -> Result<Self> {
        ChoquetInput::new(x)
    }
}

/// `Σ_j (x_(j) − x_(j−1)) υ({(j),…,(m)})` with `x_(0) = 0`.
///
/// Ties among equal coordinates are ordered by ascending index.
pub fn choquet_eval(x: &ChoquetInput, game: &Game) -> Result<f64> {
    let m = game.num_players();
    if x.len() != m {
        return Err(Error::Argument(format!(
            "input has {} coordinates, game has {m} players",
            x.len()
        )));
    }
    let v = game.dense_by_mask()?;
    let xs = x.as_slice();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));

    let mut upper: u64 = order.iter().fold(0, |acc, &j| acc | (1 << j));
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &j in &order {
        let step = xs[j] - prev;
        if step != 0.0 {
            acc += step * v[upper as usize];
        }
        prev = xs[j];
        upper &= !(1 << j);
    }
    Ok(acc)
}

/// Closed form of the Choquet integral for a 2-additive game given by its
/// Shapley values and pairwise interactions.
pub fn choquet_2add_eval(x: &ChoquetInput, interactions: &InteractionVector) -> Result<f64> {
    let m = interactions.num_players();
    if interactions.order() != 2 {
        return Err(Error::Argument(format!(
            "expected a 2-additive interaction vector, got order {}",
            interactions.order()
        )));
    }
    if x.len() != m {
        return Err(Error::Argument(format!(
            "input has {} coordinates, interaction vector has {m} players",
            x.len()
        )));
    }
    let xs = x.as_slice();
    let pairs = interactions.pair_matrix();
    let mut acc = 0.0;
    for j in 0..m {
        let abs_sum: f64 = pairs[j].iter().map(|v| v.abs()).sum();
        acc += xs[j] * (interactions.shapley(j) - 0.5 * abs_sum);
    }
    for j in 0..m {
        for j2 in j + 1..m {
            let i = pairs[j][j2];
            if i < 0.0 {
                acc += xs[j].max(xs[j2]) * -i;
            } else if i > 0.0 {
                acc += xs[j].min(xs[j2]) * i;
            }
        }
    }
    Ok(acc)
}
