//! Pricing subproblem: the unbounded integer knapsack
//! `max sum_t delta_t p_t  s.t.  sum_t s_t p_t <= B`.

use crate::model::{Instance, Pattern};

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub pattern: Pattern,
    /// `sum_t delta_t p*_t` of the returned pattern.
    pub value: f64,
    /// `1 - value`; nonnegative means no improving column exists.
    pub reduced_cost: f64,
}

/// Finds the pattern of maximum dual value by dynamic programming over
/// capacities `0..=B`.
///
/// At each capacity the "leave one unit unused" option is preferred, then
/// types in ascending index order; a later option replaces an earlier one only
/// when strictly better. With all prices zero the empty pattern comes back
/// with reduced cost 1.
pub fn solve_pricing(duals: &[f64], instance: &Instance) -> PricingResult {
    let sizes = instance.sizes();
    solve_knapsack(duals, &sizes, instance.capacity())
}

pub(crate) fn solve_knapsack(duals: &[f64], sizes: &[u32], capacity: u32) -> PricingResult {
    debug_assert_eq!(duals.len(), sizes.len());
    let cap = capacity as usize;
    let mut best = vec![0.0f64; cap + 1];
    // usize::MAX marks "carry from c - 1"
    let mut choice = vec![usize::MAX; cap + 1];
    for c in 1..=cap {
        let mut v = best[c - 1];
        let mut pick = usize::MAX;
        for (t, (&s, &d)) in sizes.iter().zip(duals).enumerate() {
            let s = s as usize;
            if s == 0 || s > c || d <= 0.0 {
                continue;
            }
            let cand = best[c - s] + d;
            if cand > v + 1e-12 {
                v = cand;
                pick = t;
            }
        }
        best[c] = v;
        choice[c] = pick;
    }
    let mut counts = vec![0u32; sizes.len()];
    let mut c = cap;
    while c > 0 {
        match choice[c] {
            usize::MAX => c -= 1,
            t => {
                counts[t] += 1;
                c -= sizes[t] as usize;
            }
        }
    }
    let value: f64 = counts
        .iter()
        .zip(duals)
        .map(|(&n, &d)| f64::from(n) * d)
        .sum();
    PricingResult {
        pattern: Pattern::new(counts),
        value,
        reduced_cost: 1.0 - value,
    }
}

/// Best value reachable at every capacity `0..=B`; nondecreasing in capacity.
pub fn knapsack_profile(duals: &[f64], instance: &Instance) -> Vec<f64> {
    let sizes = instance.sizes();
    let cap = instance.capacity() as usize;
    let mut best = vec![0.0f64; cap + 1];
    for c in 1..=cap {
        let mut v = best[c - 1];
        for (&s, &d) in sizes.iter().zip(duals) {
            let s = s as usize;
            if s <= c && d > 0.0 {
                v = v.max(best[c - s] + d);
            }
        }
        best[c] = v;
    }
    best
}

/// Every pattern with reduced cost at most `max_rc` that respects the per-type
/// count bounds and cannot take one more item of any bounded type.
///
/// Returns `None` when more than `limit` patterns exist or the search visits
/// more than `64 * limit` nodes.
pub fn enumerate_patterns(
    duals: &[f64],
    sizes: &[u32],
    capacity: u32,
    bounds: &[u32],
    max_rc: f64,
    limit: usize,
) -> Option<Vec<Pattern>> {
    let mut order: Vec<usize> = (0..sizes.len()).filter(|&t| bounds[t] > 0).collect();
    let density = |t: usize| duals[t].max(0.0) / f64::from(sizes[t]);
    order.sort_by(|&a, &b| density(b).total_cmp(&density(a)).then(a.cmp(&b)));
    let mut best_density = vec![0.0f64; order.len() + 1];
    for k in (0..order.len()).rev() {
        best_density[k] = best_density[k + 1].max(density(order[k]));
    }
    let mut e = Enumeration {
        duals,
        sizes,
        bounds,
        order,
        best_density,
        max_value: 1.0 - max_rc - 1e-9,
        counts: vec![0; sizes.len()],
        found: Vec::new(),
        limit,
        budget: 64 * limit.max(1),
    };
    e.dfs(0, capacity, 0.0).then_some(e.found)
}

struct Enumeration<'a> {
    duals: &'a [f64],
    sizes: &'a [u32],
    bounds: &'a [u32],
    order: Vec<usize>,
    best_density: Vec<f64>,
    max_value: f64,
    counts: Vec<u32>,
    found: Vec<Pattern>,
    limit: usize,
    budget: usize,
}

impl Enumeration<'_> {
    /// False once a limit is exceeded.
    fn dfs(&mut self, k: usize, residual: u32, value: f64) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        if value + f64::from(residual) * self.best_density[k] < self.max_value {
            return true;
        }
        if k == self.order.len() {
            let maximal = self
                .order
                .iter()
                .all(|&t| self.counts[t] >= self.bounds[t] || self.sizes[t] > residual);
            if maximal && value >= self.max_value && self.counts.iter().any(|&c| c > 0) {
                if self.found.len() == self.limit {
                    return false;
                }
                self.found.push(Pattern::new(self.counts.clone()));
            }
            return true;
        }
        let t = self.order[k];
        let most = self.bounds[t].min(residual / self.sizes[t]);
        for n in (0..=most).rev() {
            self.counts[t] = n;
            let ok = self.dfs(
                k + 1,
                residual - n * self.sizes[t],
                value + f64::from(n) * self.duals[t],
            );
            if !ok {
                self.counts[t] = 0;
                return false;
            }
        }
        self.counts[t] = 0;
        true
    }
}
