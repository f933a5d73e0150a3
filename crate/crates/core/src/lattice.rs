//! Subset-lattice combinatorics.
//!
//! Sets of items are stored as bit masks (bit `j` set means item `j + 1` is
//! present). Within a level, sets are ordered colexicographically, which for
//! bit masks coincides with ascending numeric order, so enumeration is a
//! plain Gosper walk and ranking is a sum of binomials.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported item count.
pub const MAX_ITEMS: usize = 24;

const PASCAL_ROWS: usize = 33;

const PASCAL: [[u64; PASCAL_ROWS]; PASCAL_ROWS] = build_pascal();

const fn build_pascal() -> [[u64; PASCAL_ROWS]; PASCAL_ROWS] {
    let mut t = [[0u64; PASCAL_ROWS]; PASCAL_ROWS];
    let mut n = 0;
    while n < PASCAL_ROWS {
        t[n][0] = 1;
        let mut k = 1;
        while k <= n {
            t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
            k += 1;
        }
        n += 1;
    }
    t
}

/// Binomial coefficient C(n, k), exact. Returns 0 when `k < 0` or `k > n`.
pub fn binom(n: u64, k: i64) -> Result<u64> {
    if k < 0 || k as u64 > n {
        return Ok(0);
    }
    let k = k as u64;
    if (n as usize) < PASCAL_ROWS {
        return Ok(PASCAL[n as usize][k as usize]);
    }
    let k_small = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k_small {
        // acc * (n - j) is divisible by (j + 1) after the multiply.
        acc = acc
            .checked_mul(u128::from(n - j))
            .ok_or(Error::BinomialOverflow { n, k: k as i64 })?
            / u128::from(j + 1);
    }
    u64::try_from(acc).map_err(|_| Error::BinomialOverflow { n, k: k as i64 })
}

/// Binomial for the small signed arguments that appear in overlap counts.
/// Negative `n` or out-of-range `k` give 0.
pub(crate) fn choose(n: i64, k: i64) -> u64 {
    if n < 0 || k < 0 || k > n {
        return 0;
    }
    binom(n as u64, k).expect("overlap counts stay within 64 bits")
}

/// A subset of the problem items.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSet(u32);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub const fn from_bits(bits: u32) -> Self {
        ItemSet(bits)
    }

    /// Builds a set from 1-based item labels.
    pub fn from_items<I: IntoIterator<Item = usize>>(items: I) -> Result<Self> {
        let mut bits = 0u32;
        for item in items {
            if item == 0 || item > MAX_ITEMS {
                return Err(Error::ItemOutOfRange { item, n: MAX_ITEMS });
            }
            bits |= 1 << (item - 1);
        }
        Ok(ItemSet(bits))
    }

    /// The set `{1, ..., count}`.
    pub fn first_items(count: usize) -> Self {
        debug_assert!(count <= MAX_ITEMS);
        ItemSet(((1u64 << count) - 1) as u32)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    /// Cardinality, i.e. the lattice level of the set.
    pub const fn level(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, item: usize) -> bool {
        (1..=MAX_ITEMS).contains(&item) && self.0 & (1 << (item - 1)) != 0
    }

    pub fn with(self, item: usize) -> Self {
        debug_assert!((1..=MAX_ITEMS).contains(&item));
        ItemSet(self.0 | 1 << (item - 1))
    }

    pub fn union(self, other: ItemSet) -> Self {
        ItemSet(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Cardinality of the intersection.
    pub fn overlap(self, other: ItemSet) -> usize {
        (self.0 & other.0).count_ones() as usize
    }

    /// Largest item label, if any.
    pub fn max_item(self) -> Option<usize> {
        (self.0 != 0).then(|| 32 - self.0.leading_zeros() as usize)
    }

    /// True when every item lies in `1..=n`.
    pub fn within(self, n: usize) -> bool {
        n >= 32 || self.0 >> n == 0
    }

    /// Item labels in ascending order (1-based).
    pub fn items(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            (rest != 0).then(|| {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                j + 1
            })
        })
    }

    /// Colexicographic index among sets of the same cardinality.
    pub fn rank(self) -> u64 {
        let mut rank = 0;
        let mut rest = self.0;
        let mut j = 1;
        while rest != 0 {
            let pos = rest.trailing_zeros() as usize;
            rank += PASCAL[pos][j];
            rest &= rest - 1;
            j += 1;
        }
        rank
    }
}

/// Cardinality of `a ∩ b`.
pub fn overlap(a: ItemSet, b: ItemSet) -> usize {
    a.overlap(b)
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (idx, item) in self.items().enumerate() {
            if idx > 0 {
                f.write_str(",")?;
            }
            write!(f, "{item}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ItemSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ParseItemSet(s.to_string());
        let inner = s
            .trim()
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(bad)?;
        if inner.trim().is_empty() {
            return Ok(ItemSet::EMPTY);
        }
        let mut items = Vec::new();
        for tok in inner.split(',') {
            let item: usize = tok.trim().parse().map_err(|_| bad())?;
            if items.contains(&item) {
                return Err(bad());
            }
            items.push(item);
        }
        ItemSet::from_items(items)
    }
}

/// One level of the lattice over `n` items: all sets of size `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    n: usize,
    level: usize,
}

impl Level {
    pub fn new(n: usize, level: usize) -> Result<Self> {
        if n > MAX_ITEMS {
            return Err(Error::TooManyItems(n));
        }
        if level > n {
            return Err(Error::LevelOutOfRange { n, level });
        }
        Ok(Level { n, level })
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of sets at this level, C(n, level).
    pub fn size(&self) -> usize {
        PASCAL[self.n][self.level] as usize
    }

    /// Inverse of [`ItemSet::rank`].
    pub fn unrank(&self, rank: u64) -> Result<ItemSet> {
        let size = self.size() as u64;
        if rank >= size {
            return Err(Error::RankOutOfRange { rank, size });
        }
        let mut rest = rank;
        let mut bits = 0u32;
        let mut upper = self.n;
        for j in (1..=self.level).rev() {
            // Largest position c < upper with C(c, j) <= rest.
            let mut c = upper - 1;
            while PASCAL[c][j] > rest {
                c -= 1;
            }
            bits |= 1 << c;
            rest -= PASCAL[c][j];
            upper = c;
        }
        Ok(ItemSet(bits))
    }

    /// Sets at this level in rank order.
    pub fn iter(&self) -> LevelIter {
        LevelIter {
            next: Some(((1u64 << self.level) - 1) as u32),
            limit: 1u64 << self.n,
        }
    }

    /// Bit masks of the sets at this level, in rank order.
    pub fn masks(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.size());
        out.extend(self.iter().map(ItemSet::bits));
        out
    }
}

/// Gosper walk over equal-popcount masks below `2^n`.
pub struct LevelIter {
    next: Option<u32>,
    limit: u64,
}

impl Iterator for LevelIter {
    type Item = ItemSet;

    fn next(&mut self) -> Option<ItemSet> {
        let cur = self.next?;
        if u64::from(cur) >= self.limit {
            self.next = None;
            return None;
        }
        self.next = if cur == 0 {
            None
        } else {
            let c = u64::from(cur);
            let low = c & c.wrapping_neg();
            let ripple = c + low;
            let succ = (((ripple ^ c) >> 2) / low) | ripple;
            (succ < self.limit).then_some(succ as u32)
        };
        Some(ItemSet(cur))
    }
}

/// Number of `(i+1)`-sets `r` with `|r ∩ α| = k` for a fixed `i`-set `α`.
pub fn n_k(n: usize, i: usize, k: usize) -> u64 {
    let (n, i, k) = (n as i64, i as i64, k as i64);
    choose(i, k) * choose(n - i, i + 1 - k)
}

/// Number of `(i+1)`-sets `r` with `|r ∩ α| = k` and `|r ∩ β| = j`, for
/// fixed `i`-sets with `|α ∩ β| = p`.
pub fn n_pjk(n: usize, i: usize, p: usize, j: usize, k: usize) -> u64 {
    let (n, i, p, j, k) = (n as i64, i as i64, p as i64, j as i64, k as i64);
    // x counts the items r shares with both α and β.
    (0..=p)
        .map(|x| choose(i - p, k - x) * choose(p, x) * choose(i - p, j - x) * choose(n - 2 * i + p, i + 1 - j - k + x))
        .sum()
}
