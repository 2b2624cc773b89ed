//! Column generation over the pattern formulation and integer plan
//! extraction (price-and-branch: pricing happens only at the root).

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::lp::{check_coverage, lp_tolerance, RevisedSimplex};
use crate::model::{Instance, PackingSolution, Pattern, Plan};
use crate::pricing::{enumerate_patterns, solve_pricing};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub max_colgen_iters: usize,
    pub ip_node_limit: usize,
    /// Columns are added while their reduced cost is below `-lp_tolerance`.
    pub lp_tolerance: f64,
    /// Cap on the extra columns enumerated when rounding leaves a gap.
    pub max_enumerated_columns: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_colgen_iters: 2000,
            ip_node_limit: 200,
            lp_tolerance: 1e-7,
            max_enumerated_columns: 2000,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_colgen_iters == 0
            || self.ip_node_limit == 0
            || self.max_enumerated_columns == 0
            || !(self.lp_tolerance > 0.0)
        {
            return Err(Error::InvalidParams(
                "planner limits and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Forecast quantity `q_t` of every type.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandForecast(pub Vec<f64>);

impl DemandForecast {
    pub fn new(demands: Vec<f64>) -> Result<Self> {
        if let Some((t, q)) = demands
            .iter()
            .enumerate()
            .find(|(_, q)| !q.is_finite() || **q < 0.0)
        {
            return Err(Error::InvalidParams(format!("demand {t} is {q}")));
        }
        Ok(DemandForecast(demands))
    }

    /// Exact per-type counts of an instance.
    pub fn from_counts(instance: &Instance) -> Self {
        DemandForecast(instance.type_counts().into_iter().map(f64::from).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&q| q == 0.0)
    }
}

/// Outcome of one planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub plan: Plan,
    /// Final generated column set.
    pub patterns: Vec<Pattern>,
    /// Objective of the final restricted master LP.
    pub lp_objective: f64,
    /// LP objective after every master solve, in order.
    pub lp_trace: Vec<f64>,
    pub colgen_iterations: usize,
    /// `false` when `max_colgen_iters` stopped the loop early; the plan is
    /// then the best one over the columns found so far.
    pub converged: bool,
    /// Reduced cost of the last pricing call.
    pub final_reduced_cost: f64,
    /// Shadow prices of the final master LP, one per type.
    pub duals: Vec<f64>,
    pub ip_nodes: usize,
}

/// One single-type pattern of count `floor(B / s_t)` for every demanded type.
pub fn initial_patterns(instance: &Instance, demands: &DemandForecast) -> Vec<Pattern> {
    let t = instance.num_types();
    let cap = instance.capacity();
    demands
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &q)| q > 0.0)
        .map(|(i, _)| Pattern::singleton(t, i, cap / instance.size_of(i)))
        .collect()
}

/// Generates columns until no pattern prices out, then solves the integer
/// program over the generated columns.
pub fn generate_plan(
    instance: &Instance,
    demands: &DemandForecast,
    config: &PlannerConfig,
) -> Result<PlanReport> {
    let q = demands.as_slice();
    if q.len() != instance.num_types() {
        return Err(Error::InvalidParams(format!(
            "forecast has {} entries for {} types",
            q.len(),
            instance.num_types()
        )));
    }
    if demands.is_zero() {
        return Ok(PlanReport {
            plan: Plan::empty(),
            patterns: Vec::new(),
            lp_objective: 0.0,
            lp_trace: Vec::new(),
            colgen_iterations: 0,
            converged: true,
            final_reduced_cost: 1.0,
            duals: vec![0.0; q.len()],
            ip_nodes: 0,
        });
    }
    let mut patterns = initial_patterns(instance, demands);
    let mut known: HashSet<Pattern> = patterns.iter().cloned().collect();
    let mut lp = RevisedSimplex::new(q.to_vec());
    for p in &patterns {
        lp.push_pattern(p);
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut final_rc;
    loop {
        lp.optimize()?;
        trace.push(lp.objective());
        let duals = lp.result(q.len()).duals;
        let priced = solve_pricing(&duals, instance);
        final_rc = priced.reduced_cost;
        if priced.reduced_cost >= -config.lp_tolerance || priced.pattern.is_zero() {
            converged = true;
            break;
        }
        if known.contains(&priced.pattern) {
            // Degenerate near-tolerance repricing; stop instead of cycling.
            converged = true;
            break;
        }
        if iterations >= config.max_colgen_iters {
            break;
        }
        iterations += 1;
        known.insert(priced.pattern.clone());
        lp.push_pattern(&priced.pattern);
        patterns.push(priced.pattern);
    }
    // Floor of the relaxation plus a first-fit-decreasing packing of what
    // the floor leaves uncovered seeds the search with a strong incumbent.
    let mut incumbent: Vec<u32> = lp.primal().iter().map(|&v| (v + INT_TOL).floor() as u32).collect();
    for (pattern, n) in residual_patterns(instance, &patterns, &incumbent, q) {
        match patterns.iter().position(|p| *p == pattern) {
            Some(j) => incumbent[j] += n,
            None => {
                lp.push_pattern(&pattern);
                known.insert(pattern.clone());
                patterns.push(pattern);
                incumbent.push(n);
            }
        }
    }
    lp.optimize()?;
    let lp_objective = lp.objective();
    let duals = lp.result(q.len()).duals;
    let root = lp.clone();
    let (mut quotas, mut ip_nodes) = branch_and_bound(lp, q, config.ip_node_limit, Some(incumbent))?;
    let mut value: u64 = quotas.iter().map(|&v| u64::from(v)).sum();
    let bound = (lp_objective - INT_TOL).ceil().max(0.0) as u64;
    if converged && value > bound {
        // An integer solution below `value` can only use columns whose
        // reduced cost is at most `value - 1 - lp_objective`.
        let caps: Vec<u32> = q.iter().map(|&v| (v - INT_TOL).ceil().max(0.0) as u32).collect();
        let max_rc = value as f64 - 1.0 - lp_objective + config.lp_tolerance;
        let extra = enumerate_patterns(
            &duals,
            &instance.sizes(),
            instance.capacity(),
            &caps,
            max_rc,
            config.max_enumerated_columns,
        );
        let fresh: Vec<Pattern> = extra
            .unwrap_or_default()
            .into_iter()
            .filter(|p| !known.contains(p))
            .collect();
        if !fresh.is_empty() {
            let mut lp = root;
            for p in &fresh {
                lp.push_pattern(p);
            }
            patterns.extend(fresh);
            lp.optimize()?;
            let (enriched, nodes) = branch_and_bound(lp, q, config.ip_node_limit, None)?;
            ip_nodes += nodes;
            let enriched_value: u64 = enriched.iter().map(|&v| u64::from(v)).sum();
            quotas.resize(patterns.len(), 0);
            if enriched_value < value {
                quotas = enriched;
                value = enriched_value;
            }
        }
    }
    debug_assert!(value >= bound);
    Ok(PlanReport {
        plan: Plan::from_quotas(&patterns, &quotas),
        patterns,
        lp_objective,
        lp_trace: trace,
        colgen_iterations: iterations,
        converged,
        final_reduced_cost: final_rc,
        duals,
        ip_nodes,
    })
}

/// Integer quotas minimising `sum z` subject to `sum_h p^h z_h >= q`.
///
/// Depth-first branch and bound on the most fractional variable, ceiling
/// child first, pruning on the rounded-up LP bound. When the node limit is
/// reached the best known solution is returned; before any node is processed
/// that is the ceiling rounding of the root relaxation.
pub fn solve_integer_plan(
    patterns: &[Pattern],
    demands: &DemandForecast,
    config: &PlannerConfig,
) -> Result<Vec<u32>> {
    let q = demands.as_slice();
    check_coverage(patterns, q)?;
    let mut lp = RevisedSimplex::new(q.to_vec());
    for p in patterns {
        lp.push_pattern(p);
    }
    lp.optimize()?;
    Ok(branch_and_bound(lp, q, config.ip_node_limit, None)?.0)
}

const INT_TOL: f64 = 1e-6;

fn ceil_round(z: &[f64]) -> Vec<u32> {
    z.iter().map(|&v| (v - INT_TOL).ceil().max(0.0) as u32).collect()
}

fn covers(columns: &[Vec<(usize, f64)>], z: &[u32], q: &[f64], tol: f64) -> bool {
    let mut cover = vec![0.0; q.len()];
    for (col, &n) in columns.iter().zip(z) {
        for &(r, v) in col {
            if r < q.len() {
                cover[r] += v * f64::from(n);
            }
        }
    }
    cover.iter().zip(q).all(|(c, q)| *c >= q - tol)
}

/// Drops surplus columns from a covering solution, largest index first.
fn trim(columns: &[Vec<(usize, f64)>], z: &mut [u32], q: &[f64], tol: f64) {
    for j in (0..z.len()).rev() {
        while z[j] > 0 {
            z[j] -= 1;
            if !covers(columns, z, q, tol) {
                z[j] += 1;
                break;
            }
        }
    }
}

fn pattern_columns(lp: &RevisedSimplex, rows: usize) -> Vec<Vec<(usize, f64)>> {
    (0..lp.num_cols())
        .map(|j| {
            lp.column(j)
                .iter()
                .copied()
                .filter(|&(r, _)| r < rows)
                .collect()
        })
        .collect()
}

/// Patterns covering the demand a partial solution `z` leaves open, packed
/// first-fit decreasing, with their multiplicities.
fn residual_patterns(instance: &Instance, patterns: &[Pattern], z: &[u32], q: &[f64]) -> Vec<(Pattern, u32)> {
    let tol = lp_tolerance(q);
    let mut open = q.to_vec();
    for (p, &n) in patterns.iter().zip(z) {
        for (o, &c) in open.iter_mut().zip(p.counts()) {
            *o -= f64::from(c * n);
        }
    }
    let mut items: Vec<usize> = open
        .iter()
        .enumerate()
        .flat_map(|(t, &r)| std::iter::repeat_n(t, (r - tol).ceil().max(0.0) as usize))
        .collect();
    items.sort_by(|&a, &b| instance.size_of(b).cmp(&instance.size_of(a)).then(a.cmp(&b)));
    let mut bins: Vec<(u32, Vec<u32>)> = Vec::new();
    for t in items {
        let s = instance.size_of(t);
        let b = match bins.iter().position(|(r, _)| *r >= s) {
            Some(b) => b,
            None => {
                bins.push((instance.capacity(), vec![0; q.len()]));
                bins.len() - 1
            }
        };
        bins[b].0 -= s;
        bins[b].1[t] += 1;
    }
    let mut out: Vec<(Pattern, u32)> = Vec::new();
    for (_, counts) in bins {
        let p = Pattern::new(counts);
        match out.iter_mut().find(|(o, _)| *o == p) {
            Some((_, n)) => *n += 1,
            None => out.push((p, 1)),
        }
    }
    out
}

fn branch_and_bound(
    root: RevisedSimplex,
    q: &[f64],
    node_limit: usize,
    incumbent: Option<Vec<u32>>,
) -> Result<(Vec<u32>, usize)> {
    let rows = q.len();
    let tol = lp_tolerance(q);
    let columns = pattern_columns(&root, rows);
    let root_z = root.primal();
    let bound = (root.objective() - INT_TOL).ceil().max(0.0) as u64;
    let mut best = ceil_round(&root_z);
    if let Some(mut z) = incumbent.filter(|z| covers(&columns, z, q, tol)) {
        trim(&columns, &mut z, q, tol);
        if z.iter().sum::<u32>() < best.iter().sum::<u32>() {
            best = z;
        }
    }
    let mut best_val: u64 = best.iter().map(|&v| u64::from(v)).sum();
    let mut nodes = 0;
    let mut stack = vec![root];
    while let Some(mut node) = stack.pop() {
        if best_val <= bound || nodes >= node_limit {
            break;
        }
        nodes += 1;
        match node.optimize() {
            Ok(()) => {}
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        }
        let z = node.primal();
        let node_bound = (z.iter().sum::<f64>() - INT_TOL).ceil().max(0.0) as u64;
        if node_bound >= best_val {
            continue;
        }
        let mut rounded = ceil_round(&z);
        trim(&columns, &mut rounded, q, tol);
        let rounded_val: u64 = rounded.iter().map(|&v| u64::from(v)).sum();
        if rounded_val < best_val {
            best_val = rounded_val;
            best = rounded;
        }
        let branch = z
            .iter()
            .enumerate()
            .map(|(j, &v)| (j, v, v - v.floor()))
            .filter(|&(_, _, f)| f > INT_TOL && f < 1.0 - INT_TOL)
            .min_by(|a, b| (a.2 - 0.5).abs().total_cmp(&(b.2 - 0.5).abs()).then(a.0.cmp(&b.0)));
        let Some((j, v, _)) = branch else {
            // integral LP solution: already captured by the rounding above
            continue;
        };
        let mut down = node.clone();
        down.add_upper_bound(j, v.floor())?;
        node.add_lower_bound(j, v.ceil())?;
        stack.push(down);
        stack.push(node);
    }
    Ok((best, nodes))
}

/// Offline oracle: plans on the exact type counts and materialises the plan
/// against the arrival sequence.
#[derive(Debug, Clone)]
pub struct OfflineSolution {
    pub solution: PackingSolution,
    pub report: PlanReport,
    /// Distinct realised bin contents with their multiplicities, in order of
    /// first appearance.
    pub histogram: Vec<(Pattern, usize)>,
}

pub fn solve_offline(instance: &Instance, config: &PlannerConfig) -> Result<OfflineSolution> {
    let demands = DemandForecast::from_counts(instance);
    let report = generate_plan(instance, &demands, config)?;
    let solution = crate::policy::materialize_plan(instance, &report.plan);
    let histogram = crate::analytics::content_histogram(&solution);
    Ok(OfflineSolution {
        solution,
        report,
        histogram,
    })
}
