//! Online packing engines: Best-Fit, and the plan-guided policy with either
//! an estimated (`cgpp`) or a known (`cgpp-l`) item distribution.
//!
//! The plan-guided policy keeps a plan of patterns with quotas. Each arriving
//! item goes, in order of preference, to an open pattern bin still waiting
//! for its type, to a new bin opened for a plan pattern containing its type,
//! or to Best-Fit. Items the plan cannot absorb are counted per type; reaching
//! the tolerance threshold, a large KL divergence between the adopted and the
//! freshly estimated distribution, or the start of a new section triggers a
//! replan over the expected remaining demand of the section.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{forecast_demands, kl_divergence, KdeEstimator, TypeDistribution};
use crate::model::{fill_rate, weighted_size, Bin, BinMode, Cause, Instance, PackingSolution, Placement, Plan};
use crate::planner::{generate_plan, PlannerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "bestfit")]
    BestFit,
    #[serde(rename = "cgpp")]
    Cgpp,
    #[serde(rename = "cgpp-l")]
    CgppL,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::BestFit => "bestfit",
            PolicyKind::Cgpp => "cgpp",
            PolicyKind::CgppL => "cgpp-l",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bestfit" | "best-fit" | "bf" => Ok(PolicyKind::BestFit),
            "cgpp" => Ok(PolicyKind::Cgpp),
            "cgpp-l" | "cgppl" => Ok(PolicyKind::CgppL),
            other => Err(Error::InvalidParams(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// Section length `L`.
    pub section_length: usize,
    /// Memory window length `k <= L`.
    pub memory_length: usize,
    pub kl_threshold: f64,
    /// Fallback-packed items of one type tolerated before replanning.
    pub tolerance_threshold: u32,
    /// Risk ratio `w / e` at which the plan is abandoned for the section.
    pub overestimate_threshold: f64,
    pub kl_epsilon: f64,
    /// Known distribution for `cgpp-l`.
    pub prior: Option<TypeDistribution>,
    pub planner: PlannerConfig,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            section_length: 1000,
            memory_length: 250,
            kl_threshold: 0.1,
            tolerance_threshold: 5,
            overestimate_threshold: 0.8,
            kl_epsilon: 1e-6,
            prior: None,
            planner: PlannerConfig::default(),
        }
    }
}

impl PolicyParams {
    /// Profile for long sequences.
    pub fn large_scale() -> Self {
        PolicyParams {
            section_length: 4000,
            memory_length: 1000,
            tolerance_threshold: 20,
            overestimate_threshold: 1.5,
            ..PolicyParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.section_length == 0 {
            return Err(Error::InvalidParams("section length must be >= 1".into()));
        }
        if self.memory_length == 0 || self.memory_length > self.section_length {
            return Err(Error::InvalidParams(format!(
                "memory length {} must lie in [1, {}]",
                self.memory_length, self.section_length
            )));
        }
        if !(self.kl_threshold > 0.0)
            || self.tolerance_threshold == 0
            || !(self.overestimate_threshold > 0.0)
            || !(self.kl_epsilon > 0.0)
        {
            return Err(Error::InvalidParams("thresholds must be positive".into()));
        }
        self.planner.validate()
    }
}

/// Per-type count of items the plan could not absorb since the last replan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToleranceTable {
    counts: Vec<u32>,
}

impl ToleranceTable {
    pub fn new(num_types: usize) -> Self {
        ToleranceTable {
            counts: vec![0; num_types],
        }
    }

    pub fn bump(&mut self, type_index: usize) {
        self.counts[type_index] += 1;
    }

    pub fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn any_at_least(&self, threshold: u32) -> bool {
        self.counts.iter().any(|&c| c >= threshold)
    }
}

/// Overestimation risk `w / e`; infinite once nothing more is expected.
pub fn risk_ratio(empty_space: f64, expected_remaining: f64) -> f64 {
    if expected_remaining <= 0.0 {
        f64::INFINITY
    } else {
        empty_space / expected_remaining
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReplanTrigger {
    Initial,
    SectionStart,
    Divergence,
    Tolerance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub bins: usize,
    pub replans: usize,
    pub initial_plans: usize,
    pub section_replans: usize,
    pub divergence_replans: usize,
    pub tolerance_replans: usize,
    pub planner_failures: usize,
    pub capped_plans: usize,
    pub fallback_items: usize,
    pub plan_match_items: usize,
    pub plan_open_items: usize,
    /// Steps at which a plan was (re)generated, with the trigger.
    pub replan_log: Vec<(usize, ReplanTrigger)>,
}

#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub solution: PackingSolution,
    pub stats: RunStats,
    /// Plan issued by every replan, aligned with `stats.replan_log`; empty
    /// when the planner failed.
    pub plans: Vec<Plan>,
}

/// Bins plus the indices Best-Fit and plan matching need.
#[derive(Debug, Clone)]
struct BinStore {
    bins: Vec<Bin>,
    sizes: Vec<u32>,
    capacity: u32,
    by_residual: BTreeSet<(u32, usize)>,
    assigned: BTreeSet<usize>,
    pending_size: Vec<u64>,
    total_residual: u64,
}

impl BinStore {
    fn new(instance: &Instance) -> Self {
        BinStore {
            bins: Vec::new(),
            sizes: instance.sizes(),
            capacity: instance.capacity(),
            by_residual: BTreeSet::new(),
            assigned: BTreeSet::new(),
            pending_size: Vec::new(),
            total_residual: 0,
        }
    }

    fn open(&mut self, mode: BinMode) -> usize {
        let id = self.bins.len();
        let opened_for = match &mode {
            BinMode::Assigned { pattern, .. } => Some(pattern.clone()),
            BinMode::Free => None,
        };
        let pending = match &mode {
            BinMode::Assigned { pending, .. } => {
                self.assigned.insert(id);
                weighted_size(pending, &self.sizes)
            }
            BinMode::Free => 0,
        };
        self.bins.push(Bin {
            id,
            content: vec![0; self.sizes.len()],
            residual: self.capacity,
            mode,
            opened_for,
        });
        self.pending_size.push(pending);
        self.by_residual.insert((self.capacity, id));
        self.total_residual += u64::from(self.capacity);
        id
    }

    fn release(&mut self, id: usize) {
        if self.assigned.remove(&id) {
            self.bins[id].mode = BinMode::Free;
            self.pending_size[id] = 0;
        }
    }

    /// Packs one item; an assigned bin that receives a type it is not waiting
    /// for becomes free, one whose pattern is complete is released.
    fn place(&mut self, id: usize, type_index: usize) {
        let size = self.sizes[type_index];
        let mut broken = false;
        let mut complete = false;
        if let BinMode::Assigned { pending, .. } = &mut self.bins[id].mode {
            if pending[type_index] > 0 {
                pending[type_index] -= 1;
                self.pending_size[id] -= u64::from(size);
                complete = pending.iter().all(|&p| p == 0);
            } else {
                broken = true;
            }
        }
        if broken {
            self.release(id);
        }
        let bin = &mut self.bins[id];
        assert!(bin.residual >= size, "bin {id} overflow");
        self.by_residual.remove(&(bin.residual, id));
        bin.residual -= size;
        bin.content[type_index] += 1;
        self.total_residual -= u64::from(size);
        self.by_residual.insert((bin.residual, id));
        if complete {
            self.release(id);
        }
    }

    fn best_fit(&self, size: u32) -> Option<usize> {
        self.by_residual.range((size, 0)..).next().map(|&(_, id)| id)
    }

    /// Open pattern bin waiting for `type_index` with the least remaining
    /// planned size, lowest id on ties.
    fn match_bin(&self, type_index: usize) -> Option<usize> {
        self.assigned
            .iter()
            .copied()
            .filter(|&id| match &self.bins[id].mode {
                BinMode::Assigned { pending, .. } => pending[type_index] > 0,
                BinMode::Free => false,
            })
            .min_by_key(|&id| (self.pending_size[id], id))
    }

    /// Planned items still expected by the open pattern bins.
    fn pending_counts(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.sizes.len()];
        for &id in &self.assigned {
            if let BinMode::Assigned { pending, .. } = &self.bins[id].mode {
                for (o, &p) in out.iter_mut().zip(pending) {
                    *o += p;
                }
            }
        }
        out
    }
}

/// Plan entry to open a bin for: contains the type, has quota left, maximum
/// remaining quota, then higher fill rate, then lower index.
fn choose_entry(plan: &Plan, type_index: usize, instance: &Instance) -> Option<usize> {
    let mut best: Option<(usize, u32, f64)> = None;
    for (i, e) in plan.entries().iter().enumerate() {
        if e.remaining == 0 || !e.pattern.contains(type_index) {
            continue;
        }
        let fr = fill_rate(e.pattern.counts(), instance);
        let better = match best {
            None => true,
            Some((_, rem, bfr)) => e.remaining > rem || (e.remaining == rem && fr > bfr),
        };
        if better {
            best = Some((i, e.remaining, fr));
        }
    }
    best.map(|(i, _, _)| i)
}

/// Mutable state of one policy run over one instance.
#[derive(Debug, Clone)]
pub struct PackingState<'a> {
    instance: &'a Instance,
    params: PolicyParams,
    kind: PolicyKind,
    store: BinStore,
    plan: Plan,
    dist: Option<TypeDistribution>,
    estimator: Option<KdeEstimator>,
    tolerance: ToleranceTable,
    section: usize,
    position: usize,
    step: usize,
    fallback_only: bool,
    log: Vec<Placement>,
    stats: RunStats,
    plans: Vec<Plan>,
}

impl<'a> PackingState<'a> {
    pub fn new(kind: PolicyKind, instance: &'a Instance, params: PolicyParams) -> Result<Self> {
        params.validate()?;
        let dist = match kind {
            PolicyKind::CgppL => {
                let prior = params.prior.clone().ok_or_else(|| {
                    Error::InvalidParams("cgpp-l needs a prior distribution".into())
                })?;
                if prior.len() != instance.num_types() {
                    return Err(Error::InvalidParams(format!(
                        "prior covers {} types, instance declares {}",
                        prior.len(),
                        instance.num_types()
                    )));
                }
                Some(prior)
            }
            _ => None,
        };
        let estimator = match kind {
            PolicyKind::Cgpp => Some(KdeEstimator::new(instance, params.memory_length)),
            _ => None,
        };
        Ok(PackingState {
            instance,
            kind,
            store: BinStore::new(instance),
            plan: Plan::empty(),
            dist,
            estimator,
            tolerance: ToleranceTable::new(instance.num_types()),
            section: 0,
            position: 0,
            step: 0,
            fallback_only: false,
            log: Vec::with_capacity(instance.len()),
            stats: RunStats::default(),
            plans: Vec::new(),
            params,
        })
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn distribution(&self) -> Option<&TypeDistribution> {
        self.dist.as_ref()
    }

    pub fn tolerance(&self) -> &ToleranceTable {
        &self.tolerance
    }

    pub fn bins(&self) -> &[Bin] {
        &self.store.bins
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Section index and position `i` within it of the current item.
    pub fn cursor(&self) -> (usize, usize) {
        (self.section, self.position)
    }

    /// Total residual capacity `w` of the open bins.
    pub fn empty_space(&self) -> u64 {
        self.store.total_residual
    }

    /// Expected total size `e` of the items left in the section.
    pub fn expected_remaining(&self) -> f64 {
        match &self.dist {
            Some(d) => (self.params.section_length - self.position) as f64 * d.mean_size(self.instance),
            None => 0.0,
        }
    }

    fn record(&mut self, type_index: usize, bin: usize, cause: Cause) {
        self.log.push(Placement {
            step: self.step,
            type_index,
            bin,
            cause,
        });
        match cause {
            Cause::Fallback => self.stats.fallback_items += 1,
            Cause::PlanMatch => self.stats.plan_match_items += 1,
            Cause::PlanOpen => self.stats.plan_open_items += 1,
        }
    }

    /// Best-Fit: tightest bin that still fits, lowest id on ties; opens a
    /// free bin when none fits. A pattern bin chosen this way turns free.
    pub fn bestfit_step(&mut self, type_index: usize) -> usize {
        let size = self.instance.size_of(type_index);
        let id = match self.store.best_fit(size) {
            Some(id) => {
                self.store.release(id);
                id
            }
            None => self.store.open(BinMode::Free),
        };
        self.store.place(id, type_index);
        self.record(type_index, id, Cause::Fallback);
        id
    }

    /// Replans if the estimate drifted past the KL threshold or some type hit
    /// the tolerance threshold. Returns the trigger when a plan was produced.
    /// On planner failure the state packs by Best-Fit until the next section.
    pub fn maybe_replan(&mut self) -> Result<Option<ReplanTrigger>> {
        if self.fallback_only || self.dist.is_none() {
            return Ok(None);
        }
        let mut trigger = None;
        if self.kind == PolicyKind::Cgpp {
            let fresh = self.current_estimate()?;
            let current = self.dist.as_ref().expect("checked above");
            if kl_divergence(&fresh, current, self.params.kl_epsilon) >= self.params.kl_threshold {
                trigger = Some(ReplanTrigger::Divergence);
            }
        }
        if trigger.is_none() && self.tolerance.any_at_least(self.params.tolerance_threshold) {
            trigger = Some(ReplanTrigger::Tolerance);
        }
        match trigger {
            Some(t) => self.replan(t).map(|_| Some(t)),
            None => Ok(None),
        }
    }

    fn current_estimate(&self) -> Result<TypeDistribution> {
        self.estimator
            .as_ref()
            .ok_or(Error::EmptyWindow)?
            .distribution()
    }

    /// Adopts the current estimate (`cgpp`) or keeps the prior (`cgpp-l`),
    /// forecasts the remaining section demand net of the items the open
    /// pattern bins are already waiting for, and replaces the plan.
    pub fn replan(&mut self, trigger: ReplanTrigger) -> Result<()> {
        if self.kind == PolicyKind::Cgpp {
            self.dist = Some(self.current_estimate()?);
        }
        let dist = self
            .dist
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("no distribution to plan with".into()))?;
        let mut demand = forecast_demands(dist, self.params.section_length, self.position);
        for (q, p) in demand.0.iter_mut().zip(self.store.pending_counts()) {
            *q = (*q - f64::from(p)).max(0.0);
        }
        self.tolerance.clear();
        self.stats.replans += 1;
        self.stats.replan_log.push((self.step, trigger));
        match trigger {
            ReplanTrigger::Initial => self.stats.initial_plans += 1,
            ReplanTrigger::SectionStart => self.stats.section_replans += 1,
            ReplanTrigger::Divergence => self.stats.divergence_replans += 1,
            ReplanTrigger::Tolerance => self.stats.tolerance_replans += 1,
        }
        match generate_plan(self.instance, &demand, &self.params.planner) {
            Ok(report) => {
                if !report.converged {
                    self.stats.capped_plans += 1;
                }
                self.plan = report.plan;
                self.plans.push(self.plan.clone());
                Ok(())
            }
            Err(e) => {
                self.stats.planner_failures += 1;
                self.plan = Plan::empty();
                self.plans.push(Plan::empty());
                self.fallback_only = true;
                Err(e)
            }
        }
    }

    /// Plan-guided placement of one item; `maybe_replan` must already have
    /// run for this step.
    pub fn cgpp_step(&mut self, type_index: usize) -> (usize, Cause) {
        if self.fallback_only || self.dist.is_none() {
            return (self.bestfit_step(type_index), Cause::Fallback);
        }
        let ratio = risk_ratio(self.empty_space() as f64, self.expected_remaining());
        if ratio >= self.params.overestimate_threshold {
            return (self.bestfit_step(type_index), Cause::Fallback);
        }
        if let Some(id) = self.store.match_bin(type_index) {
            self.store.place(id, type_index);
            self.record(type_index, id, Cause::PlanMatch);
            return (id, Cause::PlanMatch);
        }
        if let Some(e) = choose_entry(&self.plan, type_index, self.instance) {
            let entry = &mut self.plan.entries_mut()[e];
            entry.remaining -= 1;
            let pattern = entry.pattern.clone();
            let pending = pattern.counts().to_vec();
            let id = self.store.open(BinMode::Assigned { pattern, pending });
            self.store.place(id, type_index);
            self.record(type_index, id, Cause::PlanOpen);
            return (id, Cause::PlanOpen);
        }
        self.tolerance.bump(type_index);
        (self.bestfit_step(type_index), Cause::Fallback)
    }

    fn advance(&mut self, step: usize) {
        self.step = step;
        self.section = step / self.params.section_length;
        self.position = step % self.params.section_length;
        if self.position == 0 && step > 0 {
            self.fallback_only = false;
        }
    }

    fn step_item(&mut self, step: usize, type_index: usize) {
        self.advance(step);
        match self.kind {
            PolicyKind::BestFit => {
                self.bestfit_step(type_index);
            }
            PolicyKind::Cgpp | PolicyKind::CgppL => {
                if let Some(est) = self.estimator.as_mut() {
                    est.observe(type_index);
                }
                let warm = self.kind == PolicyKind::CgppL || step >= self.params.memory_length;
                if !warm {
                    self.bestfit_step(type_index);
                    return;
                }
                // Planner errors already switched the state to fallback-only.
                let _ = if self.stats.replans == 0 {
                    self.replan(ReplanTrigger::Initial)
                } else if self.position == 0 {
                    self.replan(ReplanTrigger::SectionStart)
                } else {
                    self.maybe_replan().map(|_| ())
                };
                self.cgpp_step(type_index);
            }
        }
    }

    pub fn finish(self) -> PolicyRun {
        let mut stats = self.stats;
        stats.bins = self.store.bins.len();
        PolicyRun {
            solution: PackingSolution {
                bins: self.store.bins,
                log: self.log,
            },
            stats,
            plans: self.plans,
        }
    }
}

/// Runs a policy over the whole arrival sequence.
pub fn run_policy(kind: PolicyKind, instance: &Instance, params: &PolicyParams) -> Result<PolicyRun> {
    let mut state = PackingState::new(kind, instance, params.clone())?;
    for (step, &t) in instance.sequence().iter().enumerate() {
        state.step_item(step, t);
    }
    Ok(state.finish())
}

/// Packs the arrival sequence into the slots of a plan, falling back to
/// Best-Fit only when no slot is left for an item.
pub(crate) fn materialize_plan(instance: &Instance, plan: &Plan) -> PackingSolution {
    let mut store = BinStore::new(instance);
    let mut plan = plan.clone();
    let mut log = Vec::with_capacity(instance.len());
    for (step, &t) in instance.sequence().iter().enumerate() {
        let (bin, cause) = if let Some(id) = store.match_bin(t) {
            store.place(id, t);
            (id, Cause::PlanMatch)
        } else if let Some(e) = choose_entry(&plan, t, instance) {
            let entry = &mut plan.entries_mut()[e];
            entry.remaining -= 1;
            let pattern = entry.pattern.clone();
            let pending = pattern.counts().to_vec();
            let id = store.open(BinMode::Assigned { pattern, pending });
            store.place(id, t);
            (id, Cause::PlanOpen)
        } else {
            let size = instance.size_of(t);
            let id = match store.best_fit(size) {
                Some(id) => {
                    store.release(id);
                    id
                }
                None => store.open(BinMode::Free),
            };
            store.place(id, t);
            (id, Cause::Fallback)
        };
        log.push(Placement {
            step,
            type_index: t,
            bin,
            cause,
        });
    }
    PackingSolution {
        bins: store.bins,
        log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pattern;

    fn case1() -> Instance {
        Instance::from_item_sizes(10, &[5, 4, 4, 3, 2, 2]).unwrap()
    }

    fn case2() -> Instance {
        Instance::from_item_sizes(10, &[5, 4, 4, 3, 3, 3, 3, 3, 2, 2, 2, 2, 2, 2]).unwrap()
    }

    #[test]
    fn bestfit_table1() {
        let inst = case1();
        let run = run_policy(PolicyKind::BestFit, &inst, &PolicyParams::default()).unwrap();
        assert_eq!(run.stats.bins, 3);
        let labels: Vec<String> = run
            .solution
            .bins
            .iter()
            .map(|b| crate::model::content_label(&b.content, &inst))
            .collect();
        assert_eq!(labels, vec!["5+4", "4+3+2", "2"]);
        assert_eq!(run.stats.replans, 0);
        let run = run_policy(PolicyKind::BestFit, &case2(), &PolicyParams::default()).unwrap();
        assert_eq!(run.stats.bins, 5);
    }

    #[test]
    fn single_item_opens_bin() {
        let inst = Instance::new(10, &[3], vec![0]).unwrap();
        let mut state = PackingState::new(PolicyKind::BestFit, &inst, PolicyParams::default()).unwrap();
        assert_eq!(state.bestfit_step(0), 0);
        assert_eq!(state.bins()[0].residual, 7);
    }

    #[test]
    fn risk_ratio_threshold() {
        let r = risk_ratio(40.0, 80.0);
        assert_eq!(r, 0.5);
        assert!(r < 0.8);
        assert_eq!(risk_ratio(1.0, 0.0), f64::INFINITY);
    }

    fn exact_params(inst: &Instance) -> PolicyParams {
        PolicyParams {
            section_length: inst.len(),
            memory_length: inst.len(),
            overestimate_threshold: 1.5,
            prior: Some(TypeDistribution::empirical(inst).unwrap()),
            ..PolicyParams::default()
        }
    }

    #[test]
    fn plan_guided_table1_case1() {
        let inst = case1();
        let run = run_policy(PolicyKind::CgppL, &inst, &exact_params(&inst)).unwrap();
        assert_eq!(run.stats.bins, 2);
        assert!(run.solution.log.iter().all(|p| p.cause != Cause::Fallback));
        run.solution.check(&inst).unwrap();
    }

    #[test]
    fn explicit_plan_is_followed() {
        // plan {5,3,2} x1, {4,4,2} x1 installed by hand
        let inst = case1();
        let mut state = PackingState::new(PolicyKind::CgppL, &inst, exact_params(&inst)).unwrap();
        state.plan = Plan::from_quotas(
            &[Pattern::new(vec![1, 0, 1, 1]), Pattern::new(vec![0, 2, 0, 1])],
            &[1, 1],
        );
        state.stats.replans = 1;
        let mut causes = Vec::new();
        for (step, &t) in inst.sequence().iter().enumerate() {
            state.advance(step);
            causes.push(state.cgpp_step(t).1);
        }
        let run = state.finish();
        assert_eq!(run.stats.bins, 2);
        assert_eq!(
            causes,
            vec![
                Cause::PlanOpen,
                Cause::PlanOpen,
                Cause::PlanMatch,
                Cause::PlanMatch,
                Cause::PlanMatch,
                Cause::PlanMatch
            ]
        );
    }

    #[test]
    fn tolerance_triggers_replan() {
        let inst = case2();
        let mut state = PackingState::new(PolicyKind::CgppL, &inst, exact_params(&inst)).unwrap();
        state.replan(ReplanTrigger::Initial).unwrap();
        for _ in 0..5 {
            state.tolerance.bump(2);
        }
        assert_eq!(state.maybe_replan().unwrap(), Some(ReplanTrigger::Tolerance));
        assert!(!state.tolerance().any_at_least(1));
    }

    #[test]
    fn matching_distribution_keeps_plan() {
        let inst = Instance::new(100, &[20, 30, 50], (0..600).map(|i| i % 3).collect()).unwrap();
        let params = PolicyParams {
            section_length: 600,
            memory_length: 300,
            ..PolicyParams::default()
        };
        let mut state = PackingState::new(PolicyKind::Cgpp, &inst, params).unwrap();
        for (step, &t) in inst.sequence().iter().enumerate().take(300) {
            state.advance(step);
            state.estimator.as_mut().unwrap().observe(t);
        }
        state.replan(ReplanTrigger::Initial).unwrap();
        let plan = state.plan().clone();
        state.advance(300);
        state.estimator.as_mut().unwrap().observe(0);
        assert_eq!(state.maybe_replan().unwrap(), None);
        assert_eq!(state.plan(), &plan);
    }

    #[test]
    fn cgpp_l_requires_prior() {
        let inst = case1();
        assert!(PackingState::new(PolicyKind::CgppL, &inst, PolicyParams::default()).is_err());
    }

    #[test]
    fn identical_items_are_optimal() {
        let inst = Instance::new(10, &[5], vec![0; 1000]).unwrap();
        let run = run_policy(PolicyKind::Cgpp, &inst, &PolicyParams::default()).unwrap();
        assert_eq!(run.stats.bins, 500);
    }

    #[test]
    fn params_validation() {
        let mut p = PolicyParams::default();
        p.memory_length = 2000;
        assert!(p.validate().is_err());
        assert!(PolicyParams::large_scale().validate().is_ok());
        assert_eq!("cgpp-l".parse::<PolicyKind>().unwrap(), PolicyKind::CgppL);
    }
}
