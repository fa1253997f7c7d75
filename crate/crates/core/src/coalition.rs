//! Coalitions of attributes and the cardinal-lexicographic power-set order.
//!
//! A [`Coalition`] is a bit-set over `m ≤ 64` attributes. Internally attribute
//! indices are 0-based; [`Coalition`]'s `Display` impl uses 1-based labels.
//! Every vector indexed "by coalition" in this crate (games in their public
//! layout, interaction vectors, transform matrix columns) follows the
//! cardinal-lexicographic order: coalitions sorted by cardinality, then
//! lexicographically by their sorted member lists.

use std::fmt;

use crate::error::{Error, Result};

/// Largest attribute count a [`Coalition`] can address.
pub const MAX_ATTRIBUTES: usize = 64;

/// Largest attribute count for structures holding all `2^m` coalitions.
pub const DENSE_CAP: usize = 26;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    bits: u64,
    m: u8,
}

impl Coalition {
    pub fn empty(m: usize) -> Self {
        assert!(
            (1..=MAX_ATTRIBUTES).contains(&m),
            "attribute count {m} outside 1..=64"
        );
        Coalition { bits: 0, m: m as u8 }
    }

    pub fn full(m: usize) -> Self {
        let mut c = Coalition::empty(m);
        c.bits = full_mask(m);
        c
    }

    /// Builds a coalition from 0-based member indices.
    pub fn new(m: usize, members: &[usize]) -> Result<Self> {
        check_attribute_count(m)?;
        let mut bits = 0u64;
        for &j in members {
            if j >= m {
                return Err(Error::Argument(format!(
                    "member index {j} out of range for m = {m}"
                )));
            }
            bits |= 1 << j;
        }
        Ok(Coalition { bits, m: m as u8 })
    }

    pub fn from_bits(m: usize, bits: u64) -> Result<Self> {
        check_attribute_count(m)?;
        if bits & !full_mask(m) != 0 {
            return Err(Error::Argument(format!(
                "bit-set {bits:#x} has members outside 0..{m}"
            )));
        }
        Ok(Coalition { bits, m: m as u8 })
    }

    /// Unchecked constructor for hot loops that already hold a valid mask.
    #[inline]
    pub(crate) fn from_bits_unchecked(m: usize, bits: u64) -> Self {
        debug_assert!(bits & !full_mask(m) == 0);
        Coalition { bits, m: m as u8 }
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn num_attributes(&self) -> usize {
        self.m as usize
    }

    #[inline]
    pub fn cardinality(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        j < self.num_attributes() && self.bits & (1 << j) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits == full_mask(self.num_attributes())
    }

    pub fn with(&self, j: usize) -> Self {
        assert!(j < self.num_attributes());
        Coalition {
            bits: self.bits | (1 << j),
            m: self.m,
        }
    }

    pub fn intersection(&self, other: &Coalition) -> Self {
        Coalition {
            bits: self.bits & other.bits,
            m: self.m,
        }
    }

    pub fn complement(&self) -> Self {
        Coalition {
            bits: !self.bits & full_mask(self.num_attributes()),
            m: self.m,
        }
    }

    /// Sorted 0-based member indices.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        let mut bits = self.bits;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(j)
            }
        })
    }

    /// The 0/1 indicator vector `1_A` of length `m`.
    pub fn characteristic_vector(&self) -> Vec<u8> {
        (0..self.num_attributes())
            .map(|j| u8::from(self.contains(j)))
            .collect()
    }

    /// Position of this coalition in the cardinal-lexicographic order of all
    /// subsets of its attribute set.
    pub fn cardinal_lex_rank(&self) -> u128 {
        let m = self.num_attributes();
        let c = self.cardinality();
        let offset: u128 = (0..c).map(|r| binomial(m as u64, r as u64) as u128).sum();
        offset + lex_rank_within_cardinality(m, self.bits) as u128
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("∅");
        }
        f.write_str("{")?;
        for (i, j) in self.members().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coalition({self}; m={})", self.m)
    }
}

#[inline]
pub(crate) fn full_mask(m: usize) -> u64 {
    if m >= 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

fn check_attribute_count(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Argument("attribute count must be positive".into()));
    }
    if m > MAX_ATTRIBUTES {
        return Err(Error::SizeLimit {
            what: "attribute count",
            value: m,
            cap: MAX_ATTRIBUTES,
        });
    }
    Ok(())
}

pub(crate) fn check_dense(m: usize) -> Result<()> {
    check_attribute_count(m)?;
    if m > DENSE_CAP {
        return Err(Error::SizeLimit {
            what: "attribute count for dense power-set structures",
            value: m,
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

/// Exact binomial coefficient for `n ≤ 64`; zero when `r > n`.
pub fn binomial(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial coefficient overflows u64")
}

fn lex_rank_within_cardinality(m: usize, bits: u64) -> u64 {
    let c = bits.count_ones() as u64;
    let mut rank = 0u64;
    let mut next_free = 0usize;
    let mut placed = 0u64;
    let mut rest = bits;
    while rest != 0 {
        let a = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        placed += 1;
        for v in next_free..a {
            rank += binomial((m - 1 - v) as u64, c - placed);
        }
        next_free = a + 1;
    }
    rank
}

/// All `r`-subsets of `{0..m-1}` as bit masks, in lexicographic order of their
/// sorted member lists.
pub(crate) fn combinations_lex(m: usize, r: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(binomial(m as u64, r as u64) as usize);
    if r > m {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.iter().fold(0u64, |acc, &j| acc | (1 << j)));
        // rightmost position that can still advance
        let Some(i) = (0..r).rev().find(|&i| idx[i] < m - r + i) else {
            break;
        };
        idx[i] += 1;
        for t in i + 1..r {
            idx[t] = idx[t - 1] + 1;
        }
    }
    out
}

/// Coalitions of cardinality at most `k`, in cardinal-lexicographic order.
pub fn coalitions_up_to(m: usize, k: usize) -> Result<Vec<Coalition>> {
    check_attribute_count(m)?;
    let k = k.min(m);
    let total: u128 = (0..=k).map(|r| binomial(m as u64, r as u64) as u128).sum();
    let cap = 1usize << DENSE_CAP;
    if total > cap as u128 {
        return Err(Error::SizeLimit {
            what: "number of coalitions",
            value: usize::try_from(total).unwrap_or(usize::MAX),
            cap,
        });
    }
    let mut out = Vec::with_capacity(total as usize);
    for r in 0..=k {
        out.extend(
            combinations_lex(m, r)
                .into_iter()
                .map(|bits| Coalition::from_bits_unchecked(m, bits)),
        );
    }
    Ok(out)
}

/// The full power set of `m` attributes in cardinal-lexicographic order.
#[derive(Debug, Clone)]
pub struct PowerSetOrder {
    m: usize,
    order: Vec<Coalition>,
}

impl PowerSetOrder {
    pub fn num_attributes(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn get(&self, rank: usize) -> Option<Coalition> {
        self.order.get(rank).copied()
    }

    pub fn as_slice(&self) -> &[Coalition] {
        &self.order
    }

    pub fn iter(&self) -> impl Iterator<Item = Coalition> + '_ {
        self.order.iter().copied()
    }

    /// Inverse of [`PowerSetOrder::get`].
    pub fn rank_of(&self, c: &Coalition) -> usize {
        assert_eq!(c.num_attributes(), self.m);
        c.cardinal_lex_rank() as usize
    }
}

/// Enumerates all `2^m` coalitions in cardinal-lexicographic order.
pub fn enumerate_powerset(m: usize) -> Result<PowerSetOrder> {
    check_dense(m)?;
    Ok(PowerSetOrder {
        m,
        order: coalitions_up_to(m, m)?,
    })
}
