//! Independent oracles and random problem builders shared by the
//! integration tests. Nothing here calls into the solver paths it checks.

#![allow(dead_code)]

use cgpp::model::{Instance, Pattern};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type TestRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

/// A restricted master problem over random item sizes.
#[derive(Debug, Clone)]
pub struct RandomRmp {
    pub sizes: Vec<u32>,
    pub capacity: u32,
    pub columns: Vec<Pattern>,
    pub demands: Vec<f64>,
}

/// Random feasible RMP with `1..=max_types` types and at most `max_columns`
/// columns. Every type gets its max-fill singleton so the LP is feasible;
/// some demands are zero and some integral to provoke degenerate bases.
pub fn random_rmp(rng: &mut TestRng, max_types: usize, max_columns: usize) -> RandomRmp {
    let t = rng.random_range(1..=max_types);
    let capacity = rng.random_range(6..=30u32);
    let sizes: Vec<u32> = (0..t).map(|_| rng.random_range(1..=capacity)).collect();
    let mut columns: Vec<Pattern> = (0..t)
        .map(|i| Pattern::singleton(t, i, capacity / sizes[i]))
        .collect();
    let target = rng.random_range(t..=max_columns.max(t));
    while columns.len() < target {
        let mut counts = vec![0u32; t];
        let mut room = capacity;
        for _ in 0..rng.random_range(1..=8) {
            let i = rng.random_range(0..t);
            if sizes[i] <= room {
                counts[i] += 1;
                room -= sizes[i];
            }
        }
        if counts.iter().any(|&c| c > 0) {
            columns.push(Pattern::new(counts));
        }
    }
    let demands = (0..t)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1..=3 => f64::from(rng.random_range(1..=40u32)),
            _ => rng.random_range(0.1..60.0),
        })
        .collect();
    RandomRmp {
        sizes,
        capacity,
        columns,
        demands,
    }
}

/// Optimum of the dual `max q.y  s.t.  p^h . y <= 1 for every column, y >= 0`
/// by solving every square subsystem of tight constraints and keeping the best
/// feasible point. Exponential; meant for at most four types.
pub fn dual_vertex_optimum(columns: &[Pattern], demands: &[f64]) -> f64 {
    let t = demands.len();
    // rows a.y <= b: the columns, then -y_i <= 0
    let mut rows: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|c| (c.counts().iter().map(|&v| f64::from(v)).collect(), 1.0))
        .collect();
    for i in 0..t {
        let mut a = vec![0.0; t];
        a[i] = -1.0;
        rows.push((a, 0.0));
    }
    let mut best = f64::NEG_INFINITY;
    let mut pick = Vec::with_capacity(t);
    choose(rows.len(), t, 0, &mut pick, &mut |sel| {
        let a: Vec<Vec<f64>> = sel.iter().map(|&r| rows[r].0.clone()).collect();
        let b: Vec<f64> = sel.iter().map(|&r| rows[r].1).collect();
        let Some(y) = gauss_solve(a, b) else { return };
        let feasible = rows
            .iter()
            .all(|(a, b)| a.iter().zip(&y).map(|(x, v)| x * v).sum::<f64>() <= b + 1e-9);
        if feasible {
            let obj: f64 = demands.iter().zip(&y).map(|(q, v)| q * v).sum();
            best = best.max(obj);
        }
    });
    best
}

fn choose(n: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..n {
        if n - i < k - pick.len() {
            break;
        }
        pick.push(i);
        choose(n, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Best `sum duals_t p_t` over every count vector with `sum sizes_t p_t <= capacity`.
pub fn brute_force_knapsack(duals: &[f64], sizes: &[u32], capacity: u32) -> f64 {
    fn go(i: usize, room: u32, duals: &[f64], sizes: &[u32]) -> f64 {
        if i == sizes.len() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for n in 0..=room / sizes[i] {
            let v = f64::from(n) * duals[i] + go(i + 1, room - n * sizes[i], duals, sizes);
            best = best.max(v);
        }
        best
    }
    go(0, capacity, duals, sizes)
}

/// Random instance with `1..=max_items` items drawn from at most `max_types`
/// distinct sizes, capacity in `2..=max_capacity`.
pub fn random_instance(rng: &mut TestRng, max_items: usize, max_types: usize, max_capacity: u32) -> Instance {
    let capacity = rng.random_range(2..=max_capacity);
    let mut pool: Vec<u32> = (1..=capacity).collect();
    pool.shuffle(rng);
    let t = rng.random_range(1..=max_types.min(pool.len()));
    let sizes = &pool[..t];
    let n = rng.random_range(1..=max_items);
    let items: Vec<u32> = (0..n).map(|_| sizes[rng.random_range(0..t)]).collect();
    Instance::from_item_sizes(capacity, &items).expect("sizes lie in [1, B]")
}

/// Optimal bin count by trying every assignment of items to bins, with the
/// usual symmetry cut that item `k` may only open bin `used`.
pub fn brute_force_bins(instance: &Instance) -> usize {
    fn go(k: usize, items: &[u32], load: &mut Vec<u32>, cap: u32, best: &mut usize) {
        if load.len() >= *best {
            return;
        }
        if k == items.len() {
            *best = load.len();
            return;
        }
        for b in 0..load.len() {
            if load[b] + items[k] <= cap {
                load[b] += items[k];
                go(k + 1, items, load, cap, best);
                load[b] -= items[k];
            }
        }
        load.push(items[k]);
        go(k + 1, items, load, cap, best);
        load.pop();
    }
    let items: Vec<u32> = instance.item_sizes().collect();
    let mut best = items.len();
    go(0, &items, &mut Vec::new(), instance.capacity(), &mut best);
    best
}
