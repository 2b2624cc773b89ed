//! Lower bounds on the optimal bin count and an exact solver for small
//! instances.

use crate::error::{Error, Result};
use crate::model::Instance;

/// Largest instance [`exact_solve`] accepts.
pub const EXACT_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundReport {
    pub l1: u64,
    pub l2: u64,
    pub exact: Option<u64>,
}

/// Size bound `ceil(sum s / B)`.
pub fn l1_lower_bound(instance: &Instance) -> u64 {
    instance.total_size().div_ceil(u64::from(instance.capacity()))
}

/// Martello-Toth L2 bound, maximised over integer `alpha` in `0..=B/2`.
pub fn l2_lower_bound(instance: &Instance) -> u64 {
    let cap = u64::from(instance.capacity());
    // items per size
    let mut hist = vec![0u64; cap as usize + 1];
    for s in instance.item_sizes() {
        hist[s as usize] += 1;
    }
    let mut best = 0u64;
    for alpha in 0..=cap / 2 {
        let (mut j1, mut j2, mut j2_size, mut j3_size) = (0u64, 0u64, 0u64, 0u64);
        for (s, &n) in hist.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let s = s as u64;
            if s > cap - alpha {
                j1 += n;
            } else if 2 * s > cap {
                j2 += n;
                j2_size += n * s;
            } else if s >= alpha {
                j3_size += n * s;
            }
        }
        let free_in_j2 = j2 * cap - j2_size;
        let extra = j3_size.saturating_sub(free_in_j2).div_ceil(cap);
        best = best.max(j1 + j2 + extra);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactSolution {
    pub bins: u64,
    /// Bin index of every item, in arrival order.
    pub assignment: Vec<usize>,
}

/// Optimal bin count by depth-first branch and bound over item-to-bin
/// assignments.
///
/// Items are assigned in nonincreasing size order; an item may open only the
/// next unused bin, and bins with equal residual capacity are tried once.
/// Nodes whose bin count plus the capacity shortfall reaches the incumbent are
/// pruned, and the search stops as soon as the incumbent meets the L2 bound.
pub fn exact_solve(instance: &Instance) -> Result<ExactSolution> {
    let n = instance.len();
    if n > EXACT_LIMIT {
        return Err(Error::SizeGuard {
            n,
            limit: EXACT_LIMIT,
        });
    }
    let cap = instance.capacity();
    let sizes: Vec<u32> = instance.item_sizes().collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let sorted: Vec<u32> = order.iter().map(|&i| sizes[i]).collect();
    let lower = l2_lower_bound(instance);

    // First-fit decreasing gives the starting incumbent.
    let mut ffd = vec![0usize; n];
    let mut residual: Vec<u32> = Vec::new();
    for (k, &s) in sorted.iter().enumerate() {
        match residual.iter().position(|&r| r >= s) {
            Some(b) => {
                residual[b] -= s;
                ffd[k] = b;
            }
            None => {
                residual.push(cap - s);
                ffd[k] = residual.len() - 1;
            }
        }
    }

    let mut search = Search {
        sizes: &sorted,
        cap,
        suffix: suffix_sums(&sorted),
        best: residual.len() as u64,
        best_assign: ffd,
        lower,
        residual: Vec::with_capacity(n),
        assign: vec![0; n],
    };
    if search.best > search.lower {
        search.dfs(0);
    }
    let mut assignment = vec![0usize; n];
    for (k, &i) in order.iter().enumerate() {
        assignment[i] = search.best_assign[k];
    }
    Ok(ExactSolution {
        bins: search.best,
        assignment,
    })
}

fn suffix_sums(sizes: &[u32]) -> Vec<u64> {
    let mut out = vec![0u64; sizes.len() + 1];
    for i in (0..sizes.len()).rev() {
        out[i] = out[i + 1] + u64::from(sizes[i]);
    }
    out
}

struct Search<'a> {
    sizes: &'a [u32],
    cap: u32,
    suffix: Vec<u64>,
    best: u64,
    best_assign: Vec<usize>,
    lower: u64,
    residual: Vec<u32>,
    assign: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize) {
        if self.best <= self.lower {
            return;
        }
        let used = self.residual.len() as u64;
        if k == self.sizes.len() {
            if used < self.best {
                self.best = used;
                self.best_assign = self.assign.clone();
            }
            return;
        }
        let free: u64 = self.residual.iter().map(|&r| u64::from(r)).sum();
        let shortfall = self.suffix[k].saturating_sub(free).div_ceil(u64::from(self.cap));
        if used + shortfall >= self.best {
            return;
        }
        let s = self.sizes[k];
        let mut tried: Vec<u32> = Vec::new();
        for b in 0..self.residual.len() {
            let r = self.residual[b];
            if r < s || tried.contains(&r) {
                continue;
            }
            tried.push(r);
            self.residual[b] -= s;
            self.assign[k] = b;
            self.dfs(k + 1);
            self.residual[b] += s;
        }
        if used + 1 < self.best {
            self.residual.push(self.cap - s);
            self.assign[k] = self.residual.len() - 1;
            self.dfs(k + 1);
            self.residual.pop();
        }
    }
}

/// L1, L2 and, for instances within [`EXACT_LIMIT`], the optimum.
pub fn bound_report(instance: &Instance) -> BoundReport {
    BoundReport {
        l1: l1_lower_bound(instance),
        l2: l2_lower_bound(instance),
        exact: exact_solve(instance).ok().map(|s| s.bins),
    }
}
