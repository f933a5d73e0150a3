//! Search problems expressed as nogoods in the subset lattice, random
//! instance generators, and exact solution counting.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{binom, ItemSet, Level, MAX_ITEMS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Explicit,
    RandomCsp,
    /// Random 3-SAT over `variables` boolean variables; item `2v − 1` is
    /// "variable v true", item `2v` is "variable v false".
    Random3Sat {
        variables: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Good,
    Nogood,
}

/// `n` items, solution level `l`, and the nogoods given by the constraints.
/// Any superset of a nogood is itself nogood.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    n: usize,
    l: usize,
    nogoods: Vec<ItemSet>,
    origin: Origin,
}

impl Problem {
    pub fn new(n: usize, l: usize, nogoods: Vec<ItemSet>) -> Result<Self> {
        Self::with_origin(n, l, nogoods, Origin::Explicit)
    }

    pub fn with_origin(n: usize, l: usize, nogoods: Vec<ItemSet>, origin: Origin) -> Result<Self> {
        if n > MAX_ITEMS {
            return Err(Error::TooManyItems(n));
        }
        if l > n {
            return Err(Error::InvalidProblem(format!(
                "solution level {l} exceeds item count {n}"
            )));
        }
        for (idx, ng) in nogoods.iter().enumerate() {
            if !ng.within(n) {
                return Err(Error::InvalidProblem(format!("nogood {ng} uses items beyond {n}")));
            }
            if ng.level() == 0 || ng.level() > l {
                return Err(Error::InvalidProblem(format!(
                    "nogood {ng} has size {} outside 1..={l}",
                    ng.level()
                )));
            }
            if nogoods[..idx].contains(ng) {
                return Err(Error::InvalidProblem(format!("duplicate nogood {ng}")));
            }
        }
        Ok(Problem { n, l, nogoods, origin })
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn solution_level(&self) -> usize {
        self.l
    }

    pub fn nogoods(&self) -> &[ItemSet] {
        &self.nogoods
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// Number of nogoods listed by the constraints.
    pub fn constraint_count(&self) -> usize {
        self.nogoods.len()
    }

    pub fn classify(&self, s: ItemSet) -> Classification {
        classify(s, self)
    }

    pub fn is_good(&self, s: ItemSet) -> bool {
        self.classify(s) == Classification::Good
    }

    /// Nogoods grouped by their largest item, for incremental checks while
    /// extending sets in ascending item order.
    pub(crate) fn nogoods_by_max_item(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.n + 1];
        for ng in &self.nogoods {
            out[ng.max_item().expect("nogoods are non-empty")].push(ng.bits());
        }
        out
    }

    /// Precomputed good/nogood flags for every subset of the items.
    pub fn nogood_table(&self) -> NogoodTable {
        NogoodTable::new(self)
    }

    /// Renders the problem in the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.origin {
            Origin::Explicit => {}
            Origin::RandomCsp => out.push_str("# random binary csp\n"),
            Origin::Random3Sat { variables } => out.push_str(&format!("# random 3-sat, {variables} variables\n")),
        }
        out.push_str(&format!("N={} L={}\n", self.n, self.l));
        for ng in &self.nogoods {
            out.push_str(&ng.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut nogoods = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if header.is_none() {
                header = Some(parse_header(line).map_err(|msg| Error::Parse { line: lineno, msg })?);
                continue;
            }
            let ng: ItemSet = line.parse().map_err(|e: Error| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            nogoods.push(ng);
        }
        let (n, l) = header.ok_or(Error::Parse {
            line: 0,
            msg: "missing `N=<int> L=<int>` header".into(),
        })?;
        Problem::new(n, l, nogoods)
    }
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize), String> {
    let mut n = None;
    let mut l = None;
    for tok in line.split_whitespace() {
        let (key, value) = tok.split_once('=').ok_or_else(|| format!("bad header token {tok:?}"))?;
        let value: usize = value.parse().map_err(|_| format!("bad integer in {tok:?}"))?;
        match key {
            "N" => n = Some(value),
            "L" => l = Some(value),
            _ => return Err(format!("unknown header key {key:?}")),
        }
    }
    match (n, l) {
        (Some(n), Some(l)) => Ok((n, l)),
        _ => Err("header needs both N and L".into()),
    }
}

/// Nogood iff some listed nogood is a subset of `s`.
pub fn classify(s: ItemSet, p: &Problem) -> Classification {
    if p.nogoods.iter().any(|ng| ng.is_subset_of(s)) {
        Classification::Nogood
    } else {
        Classification::Good
    }
}

/// Good/nogood flag for all `2^n` subsets, built by closing the nogood list
/// under supersets.
#[derive(Clone, Debug)]
pub struct NogoodTable {
    nogood: Vec<bool>,
}

impl NogoodTable {
    pub fn new(p: &Problem) -> Self {
        let size = 1usize << p.n;
        let mut nogood = vec![false; size];
        for ng in &p.nogoods {
            nogood[ng.bits() as usize] = true;
        }
        for bit in 0..p.n {
            let b = 1usize << bit;
            for mask in 0..size {
                if mask & b != 0 && nogood[mask ^ b] {
                    nogood[mask] = true;
                }
            }
        }
        NogoodTable { nogood }
    }

    #[inline]
    pub fn is_nogood(&self, mask: u32) -> bool {
        self.nogood[mask as usize]
    }
}

fn sample_from_pool<R: Rng + ?Sized>(pool: &[ItemSet], m: usize, rng: &mut R) -> Result<Vec<ItemSet>> {
    if m > pool.len() {
        return Err(Error::PoolExhausted {
            requested: m,
            available: pool.len(),
        });
    }
    let mut picked = index::sample(rng, pool.len(), m).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pool[i]).collect())
}

/// Random binary problem with `m` nogoods at level 2, none of which lies
/// inside `solution`, so `solution` is guaranteed to solve it.
pub fn generate_random_csp<R: Rng + ?Sized>(n: usize, m: usize, solution: ItemSet, rng: &mut R) -> Result<Problem> {
    if n > MAX_ITEMS {
        return Err(Error::TooManyItems(n));
    }
    if !solution.within(n) {
        return Err(Error::InvalidProblem(format!(
            "solution {solution} uses items beyond {n}"
        )));
    }
    let pool: Vec<ItemSet> = Level::new(n, 2)?
        .iter()
        .filter(|pair| !pair.is_subset_of(solution))
        .collect();
    let nogoods = sample_from_pool(&pool, m, rng)?;
    Problem::with_origin(n, solution.level(), nogoods, Origin::RandomCsp)
}

/// Random binary problem with `m` nogoods drawn from all pairs, with no
/// guarantee of solubility.
pub fn generate_unforced_csp<R: Rng + ?Sized>(n: usize, l: usize, m: usize, rng: &mut R) -> Result<Problem> {
    if n > MAX_ITEMS {
        return Err(Error::TooManyItems(n));
    }
    let pool: Vec<ItemSet> = Level::new(n, 2)?.iter().collect();
    let nogoods = sample_from_pool(&pool, m, rng)?;
    Problem::with_origin(n, l, nogoods, Origin::RandomCsp)
}

/// Item for a literal: `variable` is 1-based.
pub fn sat_item(variable: usize, value: bool) -> usize {
    if value {
        2 * variable - 1
    } else {
        2 * variable
    }
}

/// Number of distinct 3-clauses over distinct variables.
pub fn sat_clause_pool_size(variables: usize) -> usize {
    binom(variables as u64, 3).expect("small") as usize * 8
}

/// Random 3-SAT instance: `variables` boolean variables, `clauses` distinct
/// clauses each over three distinct variables.
///
/// Each clause forbids the one assignment of its three variables that falsifies
/// it, giving a nogood of size 3. The `variables` necessary nogoods
/// `{2v − 1, 2v}` rule out giving a variable both values.
pub fn generate_random_3sat<R: Rng + ?Sized>(variables: usize, clauses: usize, rng: &mut R) -> Result<Problem> {
    let n = 2 * variables;
    if n > MAX_ITEMS {
        return Err(Error::TooManyItems(n));
    }
    if variables < 3 && clauses > 0 {
        return Err(Error::PoolExhausted {
            requested: clauses,
            available: 0,
        });
    }
    let mut nogoods: Vec<ItemSet> = (1..=variables)
        .map(|v| ItemSet::from_items([sat_item(v, true), sat_item(v, false)]))
        .collect::<Result<_>>()?;
    if clauses > 0 {
        let mut pool = Vec::with_capacity(sat_clause_pool_size(variables));
        for triple in Level::new(variables, 3)?.iter() {
            let vars: Vec<usize> = triple.items().collect();
            for pattern in 0..8u32 {
                let forbidden = vars
                    .iter()
                    .enumerate()
                    .map(|(slot, &v)| sat_item(v, pattern >> slot & 1 == 1));
                pool.push(ItemSet::from_items(forbidden)?);
            }
        }
        nogoods.extend(sample_from_pool(&pool, clauses, rng)?);
    }
    Problem::with_origin(n, variables, nogoods, Origin::Random3Sat { variables })
}

/// Depth-first enumeration of good sets, extending in ascending item order.
struct Enumerator<'a> {
    n: usize,
    l: usize,
    by_max: &'a [Vec<u32>],
}

impl Enumerator<'_> {
    fn extends_cleanly(&self, set: u32, item: usize) -> bool {
        let next = set | 1 << (item - 1);
        self.by_max[item].iter().all(|&ng| ng & !next != 0)
    }

    /// Visits solutions below `set`; `visit` returns false to stop.
    fn walk(&self, set: u32, size: usize, next_item: usize, visit: &mut dyn FnMut(u32) -> bool) -> bool {
        if size == self.l {
            return visit(set);
        }
        let needed = self.l - size;
        // leave room for the remaining items
        for item in next_item..=self.n + 1 - needed {
            if self.extends_cleanly(set, item) && !self.walk(set | 1 << (item - 1), size + 1, item + 1, visit) {
                return false;
            }
        }
        true
    }
}

fn enumerate_solutions(p: &Problem, visit: &mut dyn FnMut(u32) -> bool) {
    let by_max = p.nogoods_by_max_item();
    let e = Enumerator {
        n: p.n,
        l: p.l,
        by_max: &by_max,
    };
    e.walk(0, 0, 1, visit);
}

/// Exact number of good sets at the solution level.
pub fn count_solutions(p: &Problem) -> u64 {
    let mut count = 0;
    enumerate_solutions(p, &mut |_| {
        count += 1;
        true
    });
    count
}

pub fn is_soluble(p: &Problem) -> bool {
    let mut found = false;
    enumerate_solutions(p, &mut |_| {
        found = true;
        false
    });
    found
}

/// All solutions in the order the enumeration finds them.
pub fn solutions(p: &Problem) -> Vec<ItemSet> {
    let mut out = Vec::new();
    enumerate_solutions(p, &mut |s| {
        out.push(ItemSet::from_bits(s));
        true
    });
    out
}
