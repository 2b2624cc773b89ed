//! Batch experiments: generate or load instances, run policies, compare the
//! bin counts against the L2 bound and aggregate per dataset and policy.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bounds::l2_lower_bound;
use crate::error::{Error, Result};
use crate::estimator::TypeDistribution;
use crate::generator::{preset, sample_instance, DistributionSpec};
use crate::model::{Cause, Instance};
use crate::planner::solve_offline;
use crate::policy::{run_policy, PolicyKind, PolicyParams};

/// What a run executes: an online policy or the offline oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Solver {
    Online(PolicyKind),
    Offline,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solver::Online(kind) => kind.fmt(f),
            Solver::Offline => f.write_str("offline"),
        }
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "offline" {
            Ok(Solver::Offline)
        } else {
            s.parse().map(Solver::Online)
        }
    }
}

impl TryFrom<String> for Solver {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Solver> for String {
    fn from(s: Solver) -> String {
        s.to_string()
    }
}

/// Optional overrides on top of a parameter profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub section_length: Option<usize>,
    pub memory_length: Option<usize>,
    pub kl_threshold: Option<f64>,
    pub tolerance_threshold: Option<u32>,
    pub overestimate_threshold: Option<f64>,
    pub kl_epsilon: Option<f64>,
    pub max_colgen_iters: Option<usize>,
    pub ip_node_limit: Option<usize>,
    pub lp_tolerance: Option<f64>,
    pub max_enumerated_columns: Option<usize>,
}

impl ParamOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&self, base: &PolicyParams) -> PolicyParams {
        let mut p = base.clone();
        let planner = &mut p.planner;
        macro_rules! set {
            ($($dst:expr => $src:ident),* $(,)?) => {
                $(if let Some(v) = self.$src { $dst = v; })*
            };
        }
        set!(
            planner.max_colgen_iters => max_colgen_iters,
            planner.ip_node_limit => ip_node_limit,
            planner.lp_tolerance => lp_tolerance,
            planner.max_enumerated_columns => max_enumerated_columns,
        );
        set!(
            p.section_length => section_length,
            p.memory_length => memory_length,
            p.kl_threshold => kl_threshold,
            p.tolerance_threshold => tolerance_threshold,
            p.overestimate_threshold => overestimate_threshold,
            p.kl_epsilon => kl_epsilon,
        );
        p
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Default,
    LargeScale,
}

impl Profile {
    pub fn params(self) -> PolicyParams {
        match self {
            Profile::Default => PolicyParams::default(),
            Profile::LargeScale => PolicyParams::large_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub name: String,
    /// Name of a shipped preset.
    #[serde(default)]
    pub preset: Option<String>,
    /// Inline generator spec.
    #[serde(default)]
    pub spec: Option<DistributionSpec>,
    /// Fixed instance file, relative to the config file.
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default)]
    pub n_items: usize,
    #[serde(default)]
    pub bin_capacity: Option<u32>,
    /// Explicit seeds, one instance each.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Otherwise `n_instances` consecutive seeds starting at `seed`.
    #[serde(default)]
    pub n_instances: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policies: Vec<Solver>,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<Dataset>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative instance paths resolve against its
    /// directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut config.datasets {
            if let Some(p) = &d.instance {
                if p.is_relative() {
                    d.instance = Some(base.join(p));
                }
            }
        }
        Ok(config)
    }

    pub fn params(&self) -> PolicyParams {
        self.params.apply(&self.profile.params())
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Config("no policies listed".into()));
        }
        self.params().validate()?;
        let mut names = HashSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return Err(Error::Config(format!("duplicate dataset {:?}", d.name)));
            }
            let sources = [d.preset.is_some(), d.spec.is_some(), d.instance.is_some()];
            if sources.iter().filter(|&&s| s).count() != 1 {
                return Err(Error::Config(format!(
                    "dataset {:?} needs exactly one of preset, spec, instance",
                    d.name
                )));
            }
            if d.instance.is_none() {
                let seeds = d.seed_list();
                if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
                    return Err(Error::Config(format!("dataset {:?} repeats a seed", d.name)));
                }
                let (spec, cap) = d.generator()?;
                spec.validate(cap)?;
            }
        }
        Ok(())
    }
}

impl Dataset {
    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.n_instances) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) => (0..n as u64).map(|i| self.seed + i).collect(),
            (None, None) => vec![self.seed],
        }
    }

    fn generator(&self) -> Result<(DistributionSpec, u32)> {
        match (&self.preset, &self.spec) {
            (Some(name), _) => {
                let p = preset(name)?;
                if p.placeholder {
                    return Err(Error::Config(format!(
                        "preset {name:?} is a placeholder and cannot be used in experiments"
                    )));
                }
                Ok((p.spec, self.bin_capacity.unwrap_or(p.bin_capacity)))
            }
            (None, Some(spec)) => Ok((spec.clone(), self.bin_capacity.unwrap_or(100))),
            (None, None) => Err(Error::Config(format!("dataset {:?} has no generator", self.name))),
        }
    }

    fn materialize(&self) -> Vec<Prepared> {
        if let Some(path) = &self.instance {
            let loaded = Instance::read(path).map(|inst| {
                let counts: Vec<f64> = inst.type_counts().into_iter().map(f64::from).collect();
                let prior = TypeDistribution::from_weights(&counts).ok();
                (inst, prior)
            });
            return vec![Prepared {
                dataset: self.name.clone(),
                id: self.name.clone(),
                seed: None,
                loaded: loaded.map_err(|e| e.to_string()),
            }];
        }
        let generator = self.generator();
        self.seed_list()
            .into_iter()
            .map(|seed| {
                let loaded = generator.as_ref().map_err(|e| e.to_string()).and_then(|(spec, cap)| {
                    let inst = sample_instance(spec, *cap, self.n_items, seed).map_err(|e| e.to_string())?;
                    let prior = spec.type_distribution(&inst).ok();
                    Ok((inst, prior))
                });
                Prepared {
                    dataset: self.name.clone(),
                    id: format!("{}#{seed}", self.name),
                    seed: Some(seed),
                    loaded,
                }
            })
            .collect()
    }
}

struct Prepared {
    dataset: String,
    id: String,
    seed: Option<u64>,
    loaded: std::result::Result<(Instance, Option<TypeDistribution>), String>,
}

/// One `(instance, policy)` outcome; `error` is empty on success.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub instance: String,
    pub dataset: String,
    pub seed: Option<u64>,
    pub n_items: usize,
    pub policy: String,
    pub bins: Option<u64>,
    pub l2: Option<u64>,
    pub gap: Option<u64>,
    pub replans: Option<usize>,
    pub fallback_items: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub instance: String,
    pub policy: String,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub policy: String,
    pub runs: usize,
    pub errors: usize,
    pub mean_bins: Option<f64>,
    pub mean_gap: Option<f64>,
    /// Half-width of the 95% t interval over instances; empty below 2 runs.
    pub ci95: Option<f64>,
    pub mean_replans: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub runs: Vec<RunRow>,
    pub aggregates: Vec<AggregateRow>,
    pub timings: Vec<TimingRow>,
}

impl RunReport {
    pub fn has_errors(&self) -> bool {
        self.runs.iter().any(|r| !r.error.is_empty())
    }

    /// Writes `runs.csv`, `aggregates.csv` and `timings.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_rows(dir.join("runs.csv"), &self.runs, RUN_HEADER)?;
        write_rows(dir.join("aggregates.csv"), &self.aggregates, AGGREGATE_HEADER)?;
        write_rows(dir.join("timings.csv"), &self.timings, TIMING_HEADER)?;
        Ok(())
    }

    pub fn aggregate(&self, dataset: &str, policy: &str) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.dataset == dataset && a.policy == policy)
    }
}

pub const RUN_HEADER: &[&str] = &[
    "instance",
    "dataset",
    "seed",
    "n_items",
    "policy",
    "bins",
    "l2",
    "gap",
    "replans",
    "fallback_items",
    "error",
];
pub const AGGREGATE_HEADER: &[&str] = &[
    "dataset",
    "policy",
    "runs",
    "errors",
    "mean_bins",
    "mean_gap",
    "ci95",
    "mean_replans",
];
pub const TIMING_HEADER: &[&str] = &["instance", "policy", "runtime_ms"];

/// Serialises rows; an empty slice still gets its header line.
pub fn write_rows<T: Serialize>(path: impl AsRef<Path>, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Global worker pool, one thread per core. Without the `parallel`
    /// feature this and `Threads` run sequentially.
    #[default]
    Parallel,
    /// Dedicated pool with the given number of threads.
    Threads(usize),
}

/// Order-preserving map over `items` under the chosen execution mode.
pub fn map_jobs<T, R, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => Ok(items.iter().map(f).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            Ok(items.par_iter().map(f).collect())
        }
        #[cfg(feature = "parallel")]
        Execution::Threads(n) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(|| items.par_iter().map(f).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::Threads(_) => Ok(items.iter().map(f).collect()),
    }
}

struct Outcome {
    bins: u64,
    replans: usize,
    fallback_items: usize,
}

fn execute(solver: Solver, instance: &Instance, prior: Option<&TypeDistribution>, params: &PolicyParams) -> Result<Outcome> {
    match solver {
        Solver::Offline => {
            let off = solve_offline(instance, &params.planner)?;
            let fallback_items = off
                .solution
                .log
                .iter()
                .filter(|p| p.cause == Cause::Fallback)
                .count();
            Ok(Outcome {
                bins: off.solution.num_bins() as u64,
                replans: 0,
                fallback_items,
            })
        }
        Solver::Online(kind) => {
            let params = if kind == PolicyKind::CgppL {
                let mut p = params.clone();
                p.prior = Some(
                    prior
                        .cloned()
                        .ok_or_else(|| Error::InvalidParams("no known distribution for cgpp-l".into()))?,
                );
                p
            } else {
                params.clone()
            };
            let run = run_policy(kind, instance, &params)?;
            Ok(Outcome {
                bins: run.stats.bins as u64,
                replans: run.stats.replans,
                fallback_items: run.stats.fallback_items,
            })
        }
    }
}

/// Runs every `(instance, policy)` pair of the config. Rows come back in
/// config order whatever the execution mode; failed runs become rows with
/// the error text filled in.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<RunReport> {
    config.validate()?;
    let params = config.params();
    let prepared: Vec<Prepared> = map_jobs(&config.datasets, exec, Dataset::materialize)?
        .into_iter()
        .flatten()
        .collect();
    let jobs: Vec<(usize, Solver)> = (0..prepared.len())
        .flat_map(|i| config.policies.iter().map(move |&s| (i, s)))
        .collect();
    let results = map_jobs(&jobs, exec, |&(i, solver)| {
        let p = &prepared[i];
        let started = Instant::now();
        let (row, n_items) = match &p.loaded {
            Err(e) => (Err(e.clone()), 0),
            Ok((inst, prior)) => {
                let out = execute(solver, inst, prior.as_ref(), &params).map_err(|e| e.to_string());
                let out = out.and_then(|o| {
                    let l2 = l2_lower_bound(inst);
                    if o.bins < l2 {
                        Err(format!("{} bins is below the L2 bound {l2}", o.bins))
                    } else {
                        Ok((o, l2))
                    }
                });
                (out, inst.len())
            }
        };
        let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
        let mut run = RunRow {
            instance: p.id.clone(),
            dataset: p.dataset.clone(),
            seed: p.seed,
            n_items,
            policy: solver.to_string(),
            bins: None,
            l2: None,
            gap: None,
            replans: None,
            fallback_items: None,
            error: String::new(),
        };
        match row {
            Ok((o, l2)) => {
                run.bins = Some(o.bins);
                run.l2 = Some(l2);
                run.gap = Some(o.bins - l2);
                run.replans = Some(o.replans);
                run.fallback_items = Some(o.fallback_items);
            }
            Err(e) => run.error = e,
        }
        let timing = TimingRow {
            instance: p.id.clone(),
            policy: solver.to_string(),
            runtime_ms,
        };
        (run, timing)
    })?;
    let (runs, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let aggregates = aggregate(config, &runs);
    Ok(RunReport {
        runs,
        aggregates,
        timings,
    })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Half-width of the two-sided 95% Student-t interval for the mean.
pub fn ci95_half_width(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?.inverse_cdf(0.975);
    Some(t * (var / n as f64).sqrt())
}

fn aggregate(config: &ExperimentConfig, runs: &[RunRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for d in &config.datasets {
        for solver in &config.policies {
            let policy = solver.to_string();
            let rows: Vec<&RunRow> = runs
                .iter()
                .filter(|r| r.dataset == d.name && r.policy == policy)
                .collect();
            let ok: Vec<&RunRow> = rows.iter().copied().filter(|r| r.error.is_empty()).collect();
            if rows.is_empty() {
                continue;
            }
            let pick = |f: fn(&RunRow) -> Option<f64>| ok.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
            let gaps = pick(|r| r.gap.map(|g| g as f64));
            out.push(AggregateRow {
                dataset: d.name.clone(),
                policy,
                runs: ok.len(),
                errors: rows.len() - ok.len(),
                mean_bins: mean(&pick(|r| r.bins.map(|b| b as f64))),
                mean_gap: mean(&gaps),
                ci95: ci95_half_width(&gaps),
                mean_replans: mean(&pick(|r| r.replans.map(|b| b as f64))),
            });
        }
    }
    out
}
