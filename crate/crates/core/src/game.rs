//! Cooperative games, Shapley values and interaction indices.
//!
//! Dense games store one payoff per coalition, indexed internally by the
//! coalition's bit mask. The public vector layout (`from_cardinal_lex`,
//! `to_cardinal_lex`) and [`InteractionVector`] use the cardinal-lexicographic
//! order of [`crate::coalition`].
//!
//! The game ↔ interaction transform is exposed two ways that share no code:
//! [`interactions_to_game`] applies the γ-coefficient matrix directly, while
//! [`game_to_interactions`] goes through the Möbius transform. Pointwise
//! evaluation of the defining sums lives in [`shapley_exact`],
//! [`interaction_pair`] and [`interaction_general`].

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::coalition::{binomial, check_dense, coalitions_up_to, full_mask, Coalition};
use crate::error::{Error, Result};

/// Highest order for which Bernoulli numbers and γ coefficients are tabulated.
pub const MAX_ORDER: usize = 64;

/// Default absolute tolerance for equality checks on game quantities.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

struct CoefficientTable {
    bernoulli: Vec<BigRational>,
    bernoulli_f64: Vec<f64>,
    // gamma[r_prime][r] for r <= r_prime
    gamma: Vec<Vec<BigRational>>,
    gamma_f64: Vec<Vec<f64>>,
}

fn big_binomial(n: usize, r: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(binomial(n as u64, r as u64)))
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().expect("rational converts to f64")
}

fn table() -> &'static CoefficientTable {
    static TABLE: OnceLock<CoefficientTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut eta: Vec<BigRational> = Vec::with_capacity(MAX_ORDER + 1);
        eta.push(BigRational::one());
        for r in 1..=MAX_ORDER {
            let mut acc = BigRational::zero();
            for (rp, e) in eta.iter().enumerate() {
                let denom = BigRational::from_integer(BigInt::from(r - rp + 1));
                acc += e * big_binomial(r, rp) / denom;
            }
            eta.push(-acc);
        }
        let gamma: Vec<Vec<BigRational>> = (0..=MAX_ORDER)
            .map(|rp| {
                (0..=rp)
                    .map(|r| {
                        (0..=r).fold(BigRational::zero(), |acc, l| {
                            acc + big_binomial(r, l) * &eta[rp - l]
                        })
                    })
                    .collect()
            })
            .collect();
        CoefficientTable {
            bernoulli_f64: eta.iter().map(to_f64).collect(),
            gamma_f64: gamma
                .iter()
                .map(|row| row.iter().map(to_f64).collect())
                .collect(),
            bernoulli: eta,
            gamma,
        }
    })
}

/// Bernoulli numbers `η_0..=η_{n_max}` (convention `η_1 = -1/2`) as exact rationals.
pub fn bernoulli_rational(n_max: usize) -> Vec<BigRational> {
    assert!(n_max <= MAX_ORDER, "n_max {n_max} exceeds {MAX_ORDER}");
    table().bernoulli[..=n_max].to_vec()
}

/// Bernoulli numbers `η_0..=η_{n_max}` rounded to `f64`.
pub fn bernoulli_numbers(n_max: usize) -> Vec<f64> {
    assert!(n_max <= MAX_ORDER, "n_max {n_max} exceeds {MAX_ORDER}");
    table().bernoulli_f64[..=n_max].to_vec()
}

/// `γ^{r'}_r = Σ_{l≤r} C(r,l) η_{r'-l}` as an exact rational.
pub fn gamma_rational(r_prime: usize, r: usize) -> BigRational {
    assert!(r <= r_prime && r_prime <= MAX_ORDER);
    table().gamma[r_prime][r].clone()
}

pub fn gamma_coefficient(r_prime: usize, r: usize) -> f64 {
    assert!(r <= r_prime && r_prime <= MAX_ORDER);
    table().gamma_f64[r_prime][r]
}

#[derive(Debug, Clone, PartialEq)]
enum Payoffs {
    Dense(Vec<f64>),
    Sparse(BTreeMap<u64, f64>),
}

/// A set function over the coalitions of `m` players.
///
/// Exact operations require the dense representation. Games obtained from a
/// value function are normalized so that `υ(∅) = 0`; games reconstructed from
/// arbitrary interaction vectors need not be.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    m: usize,
    payoffs: Payoffs,
}

impl Game {
    pub fn from_fn(m: usize, mut f: impl FnMut(Coalition) -> f64) -> Result<Self> {
        check_dense(m)?;
        let payoffs = (0..1u64 << m)
            .map(|bits| f(Coalition::from_bits_unchecked(m, bits)))
            .collect();
        Ok(Game {
            m,
            payoffs: Payoffs::Dense(payoffs),
        })
    }

    pub fn zero(m: usize) -> Result<Self> {
        Game::from_fn(m, |_| 0.0)
    }

    /// Builds a dense game from payoffs listed in cardinal-lexicographic order.
    pub fn from_cardinal_lex(m: usize, values: &[f64]) -> Result<Self> {
        check_dense(m)?;
        if values.len() != 1 << m {
            return Err(Error::Argument(format!(
                "expected {} payoffs for m = {m}, got {}",
                1u64 << m,
                values.len()
            )));
        }
        let mut payoffs = vec![0.0; 1 << m];
        for (c, &v) in coalitions_up_to(m, m)?.iter().zip(values) {
            payoffs[c.bits() as usize] = v;
        }
        Ok(Game {
            m,
            payoffs: Payoffs::Dense(payoffs),
        })
    }

    /// Builds a sparse game holding only the listed coalitions.
    pub fn sparse(m: usize, entries: impl IntoIterator<Item = (Coalition, f64)>) -> Self {
        let map = entries
            .into_iter()
            .map(|(c, v)| {
                assert_eq!(c.num_attributes(), m);
                (c.bits(), v)
            })
            .collect();
        Game {
            m,
            payoffs: Payoffs::Sparse(map),
        }
    }

    pub fn num_players(&self) -> usize {
        self.m
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.payoffs, Payoffs::Dense(_))
    }

    pub fn value(&self, c: &Coalition) -> Option<f64> {
        match &self.payoffs {
            Payoffs::Dense(v) => v.get(c.bits() as usize).copied(),
            Payoffs::Sparse(map) => map.get(&c.bits()).copied(),
        }
    }

    /// Dense payoffs indexed by coalition bit mask.
    pub fn dense_by_mask(&self) -> Result<&[f64]> {
        match &self.payoffs {
            Payoffs::Dense(v) => Ok(v),
            Payoffs::Sparse(_) => Err(Error::UnsupportedRepresentation),
        }
    }

    pub fn to_cardinal_lex(&self) -> Result<Vec<f64>> {
        let v = self.dense_by_mask()?;
        Ok(coalitions_up_to(self.m, self.m)?
            .iter()
            .map(|c| v[c.bits() as usize])
            .collect())
    }

    /// `α·self + β·other`, both dense over the same players.
    pub fn linear_combination(&self, alpha: f64, other: &Game, beta: f64) -> Result<Game> {
        if self.m != other.m {
            return Err(Error::Argument("games have different player counts".into()));
        }
        let (a, b) = (self.dense_by_mask()?, other.dense_by_mask()?);
        Ok(Game {
            m: self.m,
            payoffs: Payoffs::Dense(a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect()),
        })
    }
}

/// Generalized interaction indices `I(D)` for all `|D| ≤ k`, cardinal-lexicographic.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionVector {
    m: usize,
    k: usize,
    values: Vec<f64>,
}

pub fn interaction_count(m: usize, k: usize) -> usize {
    (0..=k.min(m))
        .map(|r| binomial(m as u64, r as u64) as usize)
        .sum()
}

impl InteractionVector {
    pub fn new(m: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || k == 0 || k > m {
            return Err(Error::Argument(format!(
                "additivity order k = {k} must lie in 1..={m}"
            )));
        }
        let expected = interaction_count(m, k);
        if values.len() != expected {
            return Err(Error::Argument(format!(
                "expected {expected} interaction values for m = {m}, k = {k}, got {}",
                values.len()
            )));
        }
        Ok(InteractionVector { m, k, values })
    }

    pub fn zeros(m: usize, k: usize) -> Result<Self> {
        InteractionVector::new(m, k, vec![0.0; interaction_count(m, k)])
    }

    pub fn num_players(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The index set, aligned with [`InteractionVector::values`].
    pub fn coalitions(&self) -> Vec<Coalition> {
        coalitions_up_to(self.m, self.k).expect("validated at construction")
    }

    /// `I(D)`; zero for `|D| > k`.
    pub fn get(&self, d: &Coalition) -> f64 {
        if d.cardinality() > self.k {
            0.0
        } else {
            self.values[d.cardinal_lex_rank() as usize]
        }
    }

    pub fn set(&mut self, d: &Coalition, value: f64) {
        assert!(d.cardinality() <= self.k);
        self.values[d.cardinal_lex_rank() as usize] = value;
    }

    pub fn empty_set_index(&self) -> f64 {
        self.values[0]
    }

    /// `φ_j = I({j})`, 0-based.
    pub fn shapley(&self, j: usize) -> f64 {
        self.values[1 + j]
    }

    pub fn shapley_values(&self) -> Vec<f64> {
        self.values[1..=self.m].to_vec()
    }

    /// `I_{j,j'}`, 0-based; zero when `k < 2`.
    pub fn pair(&self, j: usize, j2: usize) -> f64 {
        assert_ne!(j, j2);
        self.get(&Coalition::new(self.m, &[j, j2]).expect("valid pair"))
    }

    /// Symmetric matrix of pairwise indices with a zero diagonal.
    pub fn pair_matrix(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.m]; self.m];
        for j in 0..self.m {
            for j2 in j + 1..self.m {
                let v = self.pair(j, j2);
                out[j][j2] = v;
                out[j2][j] = v;
            }
        }
        out
    }

    /// Sets `I(∅)` so that the induced game has `υ(∅) = 0`.
    pub fn with_zero_empty_payoff(mut self) -> Self {
        let eta = bernoulli_numbers(self.k);
        let rest: f64 = self
            .coalitions()
            .iter()
            .zip(&self.values)
            .skip(1)
            .map(|(d, v)| eta[d.cardinality()] * v)
            .sum();
        self.values[0] = -rest;
        self
    }
}

/// Rows indexed by a coalition set, columns by `I(D)` with `|D| ≤ k`;
/// entry `(A, D) = γ^{|D|}_{|A∩D|}`.
#[derive(Debug, Clone)]
pub struct TransformMatrix {
    k: usize,
    rows: Vec<Coalition>,
    columns: Vec<Coalition>,
    entries: Vec<f64>,
}

impl TransformMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[Coalition] {
        &self.rows
    }

    pub fn columns(&self) -> &[Coalition] {
        &self.columns
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let p = self.columns.len();
        &self.entries[row * p..(row + 1) * p]
    }

    pub fn exact_entry(&self, row: usize, col: usize) -> BigRational {
        let (a, d) = (self.rows[row], self.columns[col]);
        gamma_rational(d.cardinality(), a.intersection(&d).cardinality())
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

pub fn build_transform_matrix(
    coalitions: &[Coalition],
    m: usize,
    k: usize,
) -> Result<TransformMatrix> {
    if k == 0 || k > m {
        return Err(Error::Argument(format!("additivity order k = {k} must lie in 1..={m}")));
    }
    if let Some(bad) = coalitions.iter().find(|c| c.num_attributes() != m) {
        return Err(Error::Argument(format!("coalition {bad:?} is not over {m} attributes")));
    }
    let columns = coalitions_up_to(m, k)?;
    let gamma = &table().gamma_f64;
    let mut entries = Vec::with_capacity(coalitions.len() * columns.len());
    for a in coalitions {
        for d in &columns {
            let inter = (a.bits() & d.bits()).count_ones() as usize;
            entries.push(gamma[d.cardinality()][inter]);
        }
    }
    Ok(TransformMatrix {
        k,
        rows: coalitions.to_vec(),
        columns,
        entries,
    })
}

/// `υ(A) = Σ_{|D|≤k} γ^{|D|}_{|A∩D|} I(D)` for every coalition `A`.
pub fn interactions_to_game(interactions: &InteractionVector) -> Result<Game> {
    let m = interactions.num_players();
    check_dense(m)?;
    let columns = interactions.coalitions();
    let gamma = &table().gamma_f64;
    Game::from_fn(m, |a| {
        columns
            .iter()
            .zip(interactions.values())
            .map(|(d, &v)| gamma[d.cardinality()][(a.bits() & d.bits()).count_ones() as usize] * v)
            .sum()
    })
}

/// Shapley value of every player by direct evaluation of the marginal
/// contribution sum.
pub fn shapley_exact(game: &Game) -> Result<Vec<f64>> {
    let v = game.dense_by_mask()?;
    let m = game.num_players();
    let weights: Vec<f64> = (0..m)
        .map(|a| 1.0 / (m as f64 * binomial(m as u64 - 1, a as u64) as f64))
        .collect();
    let full = full_mask(m);
    Ok((0..m)
        .map(|j| {
            let bit = 1u64 << j;
            let others = full & !bit;
            let mut acc = 0.0;
            let mut sub = others;
            // descending submask enumeration, fixed order
            loop {
                let a = sub.count_ones() as usize;
                acc += weights[a] * (v[(sub | bit) as usize] - v[sub as usize]);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & others;
            }
            acc
        })
        .collect())
}

fn check_player(m: usize, j: usize) -> Result<()> {
    if j >= m {
        return Err(Error::Argument(format!("player {j} out of range for m = {m}")));
    }
    Ok(())
}

/// Pairwise Shapley interaction index `I_{j,j'}` (0-based players).
pub fn interaction_pair(game: &Game, j: usize, j2: usize) -> Result<f64> {
    let v = game.dense_by_mask()?;
    let m = game.num_players();
    check_player(m, j)?;
    check_player(m, j2)?;
    if j == j2 {
        return Err(Error::Argument(format!(
            "interaction_pair needs distinct players, got {j} twice"
        )));
    }
    let (bj, bj2) = (1u64 << j, 1u64 << j2);
    let others = full_mask(m) & !bj & !bj2;
    let mut acc = 0.0;
    let mut sub = others;
    loop {
        let a = sub.count_ones() as u64;
        let w = 1.0 / ((m - 1) as f64 * binomial(m as u64 - 2, a) as f64);
        let delta = v[(sub | bj | bj2) as usize] - v[(sub | bj) as usize] - v[(sub | bj2) as usize]
            + v[sub as usize];
        acc += w * delta;
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & others;
    }
    Ok(acc)
}

/// Generalized interaction index `I(A)` evaluated from its defining double sum.
pub fn interaction_general(game: &Game, a: &Coalition) -> Result<f64> {
    let v = game.dense_by_mask()?;
    let m = game.num_players();
    if a.num_attributes() != m {
        return Err(Error::Argument("coalition and game disagree on m".into()));
    }
    let abits = a.bits();
    let size_a = a.cardinality();
    let n = m - size_a;
    let rest = full_mask(m) & !abits;
    let mut acc = 0.0;
    let mut d = rest;
    loop {
        let w = 1.0 / ((n + 1) as f64 * binomial(n as u64, d.count_ones() as u64) as f64);
        let mut diff = 0.0;
        let mut dp = abits;
        loop {
            let sign = if (size_a - dp.count_ones() as usize) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            diff += sign * v[(d | dp) as usize];
            if dp == 0 {
                break;
            }
            dp = (dp - 1) & abits;
        }
        acc += w * diff;
        if d == 0 {
            break;
        }
        d = (d - 1) & rest;
    }
    Ok(acc)
}

/// Möbius transform `a(T) = Σ_{S⊆T} (-1)^{|T\S|} υ(S)`, indexed by mask.
pub fn mobius_transform(game: &Game) -> Result<Vec<f64>> {
    let mut a = game.dense_by_mask()?.to_vec();
    let m = game.num_players();
    for i in 0..m {
        let bit = 1usize << i;
        for mask in 0..a.len() {
            if mask & bit != 0 {
                a[mask] -= a[mask ^ bit];
            }
        }
    }
    Ok(a)
}

/// All interaction indices with `|D| ≤ k`, computed through the Möbius
/// representation: `I(D) = Σ_{T⊇D} a(T) / (|T| - |D| + 1)`.
pub fn game_to_interactions(game: &Game, k: usize) -> Result<InteractionVector> {
    let m = game.num_players();
    if k == 0 || k > m {
        return Err(Error::Argument(format!("additivity order k = {k} must lie in 1..={m}")));
    }
    let mobius = mobius_transform(game)?;
    let full = full_mask(m);
    let values = coalitions_up_to(m, k)?
        .iter()
        .map(|d| {
            let dbits = d.bits();
            let rest = full & !dbits;
            let mut acc = 0.0;
            let mut s = rest;
            loop {
                acc += mobius[(dbits | s) as usize] / (s.count_ones() + 1) as f64;
                if s == 0 {
                    break;
                }
                s = (s - 1) & rest;
            }
            acc
        })
        .collect();
    InteractionVector::new(m, k, values)
}

/// Whether every interaction index of cardinality above `k` is within `tol` of zero.
pub fn is_k_additive(game: &Game, k: usize, tol: f64) -> Result<bool> {
    let m = game.num_players();
    if k >= m {
        game.dense_by_mask()?;
        return Ok(true);
    }
    let all = game_to_interactions(game, m)?;
    Ok(all
        .coalitions()
        .iter()
        .zip(all.values())
        .filter(|(d, _)| d.cardinality() > k)
        .all(|(_, v)| v.abs() <= tol))
}
