//! Fill-rate and pattern statistics over finished packings.

use std::collections::HashMap;

use crate::model::{fill_rate, BinMode, Instance, PackingSolution, Pattern};

#[derive(Debug, Clone, PartialEq)]
pub struct FillRateRow {
    pub bin: usize,
    /// Arrival step of the first item placed in the bin.
    pub open_step: usize,
    pub fill_rate: f64,
    /// `"pattern"` for bins still following a plan pattern, `"free"` otherwise.
    pub mode: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub pattern: Pattern,
    pub label: String,
    pub count: usize,
    pub fill_rate: f64,
}

/// Distinct final bin contents with multiplicities, in order of first
/// appearance.
pub fn content_histogram(solution: &PackingSolution) -> Vec<(Pattern, usize)> {
    let mut index: HashMap<&[u32], usize> = HashMap::new();
    let mut out: Vec<(Pattern, usize)> = Vec::new();
    for bin in &solution.bins {
        match index.get(bin.content.as_slice()) {
            Some(&i) => out[i].1 += 1,
            None => {
                index.insert(&bin.content, out.len());
                out.push((Pattern::new(bin.content.clone()), 1));
            }
        }
    }
    out
}

pub fn fill_rate_series(solution: &PackingSolution, instance: &Instance) -> Vec<FillRateRow> {
    let mut open_step = vec![usize::MAX; solution.bins.len()];
    for p in &solution.log {
        if let Some(s) = open_step.get_mut(p.bin) {
            *s = (*s).min(p.step);
        }
    }
    solution
        .bins
        .iter()
        .zip(open_step)
        .enumerate()
        .map(|(i, (bin, step))| FillRateRow {
            bin: i,
            open_step: if step == usize::MAX { 0 } else { step },
            fill_rate: fill_rate(&bin.content, instance),
            mode: match bin.mode {
                BinMode::Assigned { .. } => "pattern",
                BinMode::Free => "free",
            },
        })
        .collect()
}

/// Realised patterns sorted by ascending fill rate; ties keep first-seen order.
pub fn pattern_histogram(solution: &PackingSolution, instance: &Instance) -> Vec<HistogramRow> {
    let mut rows: Vec<HistogramRow> = content_histogram(solution)
        .into_iter()
        .map(|(pattern, count)| HistogramRow {
            label: pattern.label(instance),
            fill_rate: fill_rate(pattern.counts(), instance),
            pattern,
            count,
        })
        .collect();
    rows.sort_by(|a, b| a.fill_rate.total_cmp(&b.fill_rate));
    rows
}

/// Share of `a`'s bins whose pattern also occurs in `b`, counting each
/// pattern at most `min(count_a, count_b)` times.
pub fn histogram_overlap(a: &[(Pattern, usize)], b: &[(Pattern, usize)]) -> f64 {
    let total: usize = a.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return 0.0;
    }
    let lookup: HashMap<&Pattern, usize> = b.iter().map(|(p, c)| (p, *c)).collect();
    let shared: usize = a
        .iter()
        .map(|(p, c)| (*c).min(lookup.get(p).copied().unwrap_or(0)))
        .sum();
    shared as f64 / total as f64
}
