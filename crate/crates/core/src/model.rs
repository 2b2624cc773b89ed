//! Domain types shared across the crate: item types, instances, patterns,
//! plans, bins and packing solutions.
//!
//! Item types are addressed internally by their zero-based position in the
//! instance's type table. The text format uses one-based ids.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};

/// One entry of the type table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ItemType {
    /// One-based, dense id as written in instance files.
    pub id: usize,
    pub size: u32,
}

/// Bin capacity, type table and arrival sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    capacity: u32,
    types: Vec<ItemType>,
    sequence: Vec<usize>,
}

impl Instance {
    /// Builds an instance from a list of sizes (one type per entry, in order)
    /// and a sequence of zero-based type indices.
    pub fn new(capacity: u32, sizes: &[u32], sequence: Vec<usize>) -> Result<Self> {
        let types = sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| ItemType { id: i + 1, size })
            .collect();
        let instance = Instance {
            capacity,
            types,
            sequence,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Builds an instance from raw item sizes in arrival order. Types are
    /// declared in order of first appearance.
    pub fn from_item_sizes(capacity: u32, items: &[u32]) -> Result<Self> {
        let mut sizes = Vec::new();
        let mut index = HashMap::new();
        let sequence = items
            .iter()
            .map(|&s| {
                *index.entry(s).or_insert_with(|| {
                    sizes.push(s);
                    sizes.len() - 1
                })
            })
            .collect();
        Instance::new(capacity, &sizes, sequence)
    }

    fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::InvalidInstance("bin capacity must be positive".into()));
        }
        for (i, ty) in self.types.iter().enumerate() {
            if ty.id != i + 1 {
                return Err(Error::InvalidInstance(format!(
                    "type ids must be dense and ordered, expected {} got {}",
                    i + 1,
                    ty.id
                )));
            }
            if ty.size == 0 || ty.size > self.capacity {
                return Err(Error::InvalidInstance(format!(
                    "type {} has size {} outside [1, {}]",
                    ty.id, ty.size, self.capacity
                )));
            }
        }
        if let Some(&bad) = self.sequence.iter().find(|&&t| t >= self.types.len()) {
            return Err(Error::InvalidInstance(format!(
                "sequence refers to undeclared type id {}",
                bad + 1
            )));
        }
        Ok(())
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn types(&self) -> &[ItemType] {
        &self.types
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn sizes(&self) -> Vec<u32> {
        self.types.iter().map(|t| t.size).collect()
    }

    pub fn size_of(&self, type_index: usize) -> u32 {
        self.types[type_index].size
    }

    /// Arrival sequence as zero-based type indices.
    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Item sizes in arrival order.
    pub fn item_sizes(&self) -> impl Iterator<Item = u32> + '_ {
        self.sequence.iter().map(move |&t| self.types[t].size)
    }

    /// Number of arrivals of each type.
    pub fn type_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.types.len()];
        for &t in &self.sequence {
            counts[t] += 1;
        }
        counts
    }

    pub fn total_size(&self) -> u64 {
        self.item_sizes().map(u64::from).sum()
    }

    /// Same type table and capacity, different arrival sequence.
    pub fn with_sequence(&self, sequence: Vec<usize>) -> Result<Self> {
        let instance = Instance {
            capacity: self.capacity,
            types: self.types.clone(),
            sequence,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Serializes to the whitespace-separated text format:
    /// `B T N`, then `id size` per type, then the N type ids on one line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 + 8 * self.types.len() + 4 * self.sequence.len());
        let _ = writeln!(
            out,
            "{} {} {}",
            self.capacity,
            self.types.len(),
            self.sequence.len()
        );
        for ty in &self.types {
            let _ = writeln!(out, "{} {}", ty.id, ty.size);
        }
        if !self.sequence.is_empty() {
            for (i, &t) in self.sequence.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", t + 1);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_ascii_whitespace().enumerate();
        let mut next = |what: &str| -> Result<u64> {
            let (i, tok) = tokens.next().ok_or_else(|| Error::Parse {
                token: usize::MAX,
                msg: format!("unexpected end of input, expected {what}"),
            })?;
            tok.parse::<u64>().map_err(|e| Error::Parse {
                token: i,
                msg: format!("{what}: {e} ({tok:?})"),
            })
        };
        let capacity = next("bin capacity")?;
        let num_types = next("type count")? as usize;
        let n = next("item count")? as usize;
        let capacity = u32::try_from(capacity)
            .map_err(|_| Error::InvalidInstance(format!("bin capacity {capacity} too large")))?;
        let mut types = Vec::with_capacity(num_types);
        for _ in 0..num_types {
            let id = next("type id")? as usize;
            let size = next("type size")?;
            let size = u32::try_from(size)
                .map_err(|_| Error::InvalidInstance(format!("type size {size} too large")))?;
            types.push(ItemType { id, size });
        }
        let mut sequence = Vec::with_capacity(n);
        for _ in 0..n {
            let id = next("sequence entry")? as usize;
            if id == 0 {
                return Err(Error::InvalidInstance("type ids are one-based".into()));
            }
            sequence.push(id - 1);
        }
        let instance = Instance {
            capacity,
            types,
            sequence,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Instance::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Per-type count vector describing the content of one bin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    counts: Vec<u32>,
}

impl Pattern {
    pub fn new(counts: Vec<u32>) -> Self {
        Pattern { counts }
    }

    pub fn zero(num_types: usize) -> Self {
        Pattern {
            counts: vec![0; num_types],
        }
    }

    pub fn singleton(num_types: usize, type_index: usize, count: u32) -> Self {
        let mut counts = vec![0; num_types];
        counts[type_index] = count;
        Pattern { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, type_index: usize) -> u32 {
        self.counts[type_index]
    }

    pub fn contains(&self, type_index: usize) -> bool {
        self.counts[type_index] > 0
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn num_items(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn total_size(&self, sizes: &[u32]) -> u64 {
        weighted_size(&self.counts, sizes)
    }

    /// Sizes of the packed items in nonincreasing order joined by `+`,
    /// e.g. `5+3+2`. Empty patterns render as `-`.
    pub fn label(&self, instance: &Instance) -> String {
        content_label(&self.counts, instance)
    }
}

pub(crate) fn weighted_size(counts: &[u32], sizes: &[u32]) -> u64 {
    counts
        .iter()
        .zip(sizes)
        .map(|(&c, &s)| u64::from(c) * u64::from(s))
        .sum()
}

pub(crate) fn content_label(counts: &[u32], instance: &Instance) -> String {
    let mut items: Vec<u32> = counts
        .iter()
        .enumerate()
        .flat_map(|(t, &c)| std::iter::repeat_n(instance.size_of(t), c as usize))
        .collect();
    if items.is_empty() {
        return "-".to_string();
    }
    items.sort_unstable_by(|a, b| b.cmp(a));
    let mut out = String::new();
    for (i, s) in items.iter().enumerate() {
        if i > 0 {
            out.push('+');
        }
        let _ = write!(out, "{s}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternViolation {
    #[error("pattern has {got} counts but the instance declares {expected} types")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pattern size {total} exceeds capacity {capacity} by {}", total - capacity)]
    Overflow { total: u64, capacity: u64 },
    #[error("pattern is empty")]
    Empty,
}

/// Checks that a pattern fits one bin and packs at least one item.
pub fn validate_pattern(pattern: &Pattern, instance: &Instance) -> Result<(), PatternViolation> {
    if pattern.counts.len() != instance.num_types() {
        return Err(PatternViolation::LengthMismatch {
            expected: instance.num_types(),
            got: pattern.counts.len(),
        });
    }
    if pattern.is_zero() {
        return Err(PatternViolation::Empty);
    }
    let total = pattern.total_size(&instance.sizes());
    let capacity = u64::from(instance.capacity());
    if total > capacity {
        return Err(PatternViolation::Overflow { total, capacity });
    }
    Ok(())
}

/// Fraction of the bin capacity occupied by `counts`.
pub fn fill_rate(counts: &[u32], instance: &Instance) -> f64 {
    let used: u64 = counts
        .iter()
        .enumerate()
        .map(|(t, &c)| u64::from(c) * u64::from(instance.size_of(t)))
        .sum();
    used as f64 / f64::from(instance.capacity())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    pub pattern: Pattern,
    pub quota: u32,
    pub remaining: u32,
}

/// Patterns with planned usage quotas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plan {
    entries: Vec<PlanEntry>,
}

impl Plan {
    pub fn empty() -> Self {
        Plan::default()
    }

    /// Builds a plan from parallel pattern/quota lists. Zero quotas are
    /// dropped and duplicate patterns merge their quotas, keeping the
    /// position of the first occurrence.
    pub fn from_quotas(patterns: &[Pattern], quotas: &[u32]) -> Self {
        let mut entries: Vec<PlanEntry> = Vec::new();
        let mut seen: HashMap<&Pattern, usize> = HashMap::new();
        for (pattern, &quota) in patterns.iter().zip(quotas) {
            if quota == 0 {
                continue;
            }
            match seen.get(pattern) {
                Some(&i) => {
                    entries[i].quota += quota;
                    entries[i].remaining += quota;
                }
                None => {
                    seen.insert(pattern, entries.len());
                    entries.push(PlanEntry {
                        pattern: pattern.clone(),
                        quota,
                        remaining: quota,
                    });
                }
            }
        }
        Plan { entries }
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [PlanEntry] {
        &mut self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_quota(&self) -> u32 {
        self.entries.iter().map(|e| e.quota).sum()
    }

    pub fn total_remaining(&self) -> u32 {
        self.entries.iter().map(|e| e.remaining).sum()
    }

    /// Per-type coverage `sum_h p_t^h z^h` of the planned quotas.
    pub fn coverage(&self, num_types: usize) -> Vec<u64> {
        let mut cover = vec![0u64; num_types];
        for e in &self.entries {
            for (t, &c) in e.pattern.counts().iter().enumerate() {
                cover[t] += u64::from(c) * u64::from(e.quota);
            }
        }
        cover
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinMode {
    /// Opened for a plan pattern; `pending` counts the planned items that
    /// have not arrived yet.
    Assigned { pattern: Pattern, pending: Vec<u32> },
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub id: usize,
    pub content: Vec<u32>,
    pub residual: u32,
    pub mode: BinMode,
    /// Pattern the bin was opened for; kept after the bin turns free.
    pub opened_for: Option<Pattern>,
}

impl Bin {
    pub fn is_assigned(&self) -> bool {
        matches!(self.mode, BinMode::Assigned { .. })
    }

    /// Remaining planned size of an assigned bin, zero for free bins.
    pub fn pending_size(&self, sizes: &[u32]) -> u64 {
        match &self.mode {
            BinMode::Assigned { pending, .. } => weighted_size(pending, sizes),
            BinMode::Free => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cause {
    PlanMatch,
    PlanOpen,
    Fallback,
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cause::PlanMatch => "plan-match",
            Cause::PlanOpen => "plan-open",
            Cause::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub step: usize,
    pub type_index: usize,
    pub bin: usize,
    pub cause: Cause,
}

/// Bins in opening order plus the per-item placement log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackingSolution {
    pub bins: Vec<Bin>,
    pub log: Vec<Placement>,
}

impl PackingSolution {
    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    /// Rebuilds bin contents by replaying the log against the instance.
    pub fn replay(&self, instance: &Instance) -> Result<Vec<Vec<u32>>> {
        let t = instance.num_types();
        let mut contents: Vec<Vec<u32>> = Vec::new();
        let mut load: Vec<u64> = Vec::new();
        if self.log.len() != instance.len() {
            return Err(Error::InvalidInstance(format!(
                "log has {} placements for {} items",
                self.log.len(),
                instance.len()
            )));
        }
        for (step, (p, &ty)) in self.log.iter().zip(instance.sequence()).enumerate() {
            if p.step != step || p.type_index != ty {
                return Err(Error::InvalidInstance(format!(
                    "log entry {step} does not match the arrival sequence"
                )));
            }
            if p.bin > contents.len() {
                return Err(Error::InvalidInstance(format!(
                    "bin {} used before bin {} was opened",
                    p.bin,
                    contents.len()
                )));
            }
            if p.bin == contents.len() {
                contents.push(vec![0; t]);
                load.push(0);
            }
            contents[p.bin][ty] += 1;
            load[p.bin] += u64::from(instance.size_of(ty));
            if load[p.bin] > u64::from(instance.capacity()) {
                return Err(Error::InvalidInstance(format!(
                    "bin {} exceeds capacity at step {step}",
                    p.bin
                )));
            }
        }
        Ok(contents)
    }

    /// Verifies capacity, conservation and log/bin consistency.
    pub fn check(&self, instance: &Instance) -> Result<()> {
        let replayed = self.replay(instance)?;
        if replayed.len() != self.bins.len() {
            return Err(Error::InvalidInstance(format!(
                "replay opens {} bins, solution holds {}",
                replayed.len(),
                self.bins.len()
            )));
        }
        let sizes = instance.sizes();
        for (bin, content) in self.bins.iter().zip(&replayed) {
            if &bin.content != content {
                return Err(Error::InvalidInstance(format!(
                    "bin {} content differs from replay",
                    bin.id
                )));
            }
            let used = weighted_size(content, &sizes);
            if u64::from(bin.residual) + used != u64::from(instance.capacity()) {
                return Err(Error::InvalidInstance(format!(
                    "bin {} residual is inconsistent",
                    bin.id
                )));
            }
            if let BinMode::Assigned { pattern, pending } = &bin.mode {
                let matches = content
                    .iter()
                    .zip(pending)
                    .zip(pattern.counts())
                    .all(|((&c, &p), &q)| c + p == q);
                if !matches {
                    return Err(Error::InvalidInstance(format!(
                        "bin {} content and pending slots do not add up to its pattern",
                        bin.id
                    )));
                }
            }
        }
        Ok(())
    }
}
