//! Chronological backtracking baseline.
//!
//! The search starts at the empty set and extends the current good set with
//! items in ascending order, each new item larger than the current maximum.
//! Cost is the length of the search walk counted in decision points: the
//! root, every set stepped into (nogoods included), and every return to a
//! parent after a failed child. A search that never backtracks costs `L + 1`.

use crate::lattice::ItemSet;
use crate::problems::Problem;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BacktrackReport {
    pub cost: u64,
    pub found: bool,
    pub solution: Option<ItemSet>,
}

struct Search<'a> {
    n: usize,
    l: usize,
    by_max: &'a [Vec<u32>],
    cost: u64,
}

impl Search<'_> {
    fn descend(&mut self, set: u32, size: usize) -> Option<u32> {
        if size == self.l {
            return Some(set);
        }
        let start = 32 - set.leading_zeros() as usize + 1;
        for item in start..=self.n {
            let child = set | 1 << (item - 1);
            self.cost += 1;
            // the parent is good, so only nogoods containing `item` can fire
            let nogood = self.by_max[item].iter().any(|&ng| ng & !child == 0);
            if !nogood {
                if let Some(found) = self.descend(child, size + 1) {
                    return Some(found);
                }
            }
            self.cost += 1;
        }
        None
    }
}

pub fn backtrack_cost(p: &Problem) -> BacktrackReport {
    let by_max = p.nogoods_by_max_item();
    let mut search = Search {
        n: p.items(),
        l: p.solution_level(),
        by_max: &by_max,
        cost: 1,
    };
    let root_good = p.is_good(ItemSet::EMPTY);
    let found = if root_good { search.descend(0, 0) } else { None };
    BacktrackReport {
        cost: search.cost,
        found: found.is_some(),
        solution: found.map(ItemSet::from_bits),
    }
}
