//! Online estimation of the item-type distribution.
//!
//! A Gaussian kernel of shared bandwidth is centred at the size of every item
//! in the memory window; the summed density evaluated at each declared type
//! size, normalised over the types, is the estimated distribution.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::planner::DemandForecast;

/// Probability mass over the declared item types.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDistribution {
    probs: Vec<f64>,
}

impl TypeDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidParams("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if !probs.is_empty() && (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("probabilities sum to {total}")));
        }
        Ok(TypeDistribution { probs })
    }

    /// Normalises nonnegative weights; all-zero weights are rejected.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidParams("weights must be >= 0 with a positive sum".into()));
        }
        Ok(TypeDistribution {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(num_types: usize) -> Self {
        TypeDistribution {
            probs: vec![1.0 / num_types as f64; num_types],
        }
    }

    /// Relative type frequencies of an instance's full sequence.
    pub fn empirical(instance: &Instance) -> Result<Self> {
        let counts: Vec<f64> = instance.type_counts().into_iter().map(f64::from).collect();
        TypeDistribution::from_weights(&counts)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Expected item size `sum_t s_t D(t)`.
    pub fn mean_size(&self, instance: &Instance) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(t, p)| p * f64::from(instance.size_of(t)))
            .sum()
    }
}

/// FIFO buffer of the last `capacity` observed type indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryWindow {
    capacity: usize,
    buffer: VecDeque<usize>,
}

impl MemoryWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "memory window needs a positive capacity");
        MemoryWindow {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
        }
    }

    /// Appends an observation, returning the evicted one when full.
    pub fn push(&mut self, type_index: usize) -> Option<usize> {
        let evicted = if self.buffer.len() == self.capacity {
            self.buffer.pop_front()
        } else {
            None
        };
        self.buffer.push_back(type_index);
        evicted
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.buffer.iter().copied()
    }
}

/// `max(1, 1.06 * stdev * n^(-1/5))` over the sizes in the window (sample
/// standard deviation, `n` = current window length).
pub fn silverman_bandwidth(window: &MemoryWindow, instance: &Instance) -> f64 {
    let n = window.len();
    if n < 2 {
        return 1.0;
    }
    let sizes: Vec<f64> = window.iter().map(|t| f64::from(instance.size_of(t))).collect();
    let mean = sizes.iter().sum::<f64>() / n as f64;
    let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    bandwidth_rule(var.sqrt(), n)
}

fn bandwidth_rule(stdev: f64, n: usize) -> f64 {
    (1.06 * stdev * (n as f64).powf(-0.2)).max(1.0)
}

fn kernel(dx: f64, bandwidth: f64) -> f64 {
    let z = dx / bandwidth;
    (-0.5 * z * z).exp()
}

/// Full KDE evaluation at every declared type size.
pub fn estimate_distribution(
    window: &MemoryWindow,
    instance: &Instance,
    bandwidth: f64,
) -> Result<TypeDistribution> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let density: Vec<f64> = instance
        .types()
        .iter()
        .map(|ty| {
            window
                .iter()
                .map(|u| kernel(f64::from(ty.size) - f64::from(instance.size_of(u)), bandwidth))
                .sum()
        })
        .collect();
    TypeDistribution::from_weights(&density)
}

/// `KL(p || q)` after adding `epsilon` to every entry and renormalising.
pub fn kl_divergence(p: &TypeDistribution, q: &TypeDistribution, epsilon: f64) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions over different type sets");
    let n = p.len() as f64;
    let zp = 1.0 + n * epsilon;
    let zq = 1.0 + n * epsilon;
    let kl: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| {
            let a = (a + epsilon) / zp;
            let b = (b + epsilon) / zq;
            a * (a / b).ln()
        })
        .sum();
    kl.max(0.0)
}

/// `q_t = D(t) * (L - i)` for position `i` within a section of length `L`.
pub fn forecast_demands(dist: &TypeDistribution, section_length: usize, position: usize) -> DemandForecast {
    assert!(position <= section_length, "position beyond section end");
    let left = (section_length - position) as f64;
    DemandForecast(dist.probs.iter().map(|p| p * left).collect())
}

/// Incrementally maintained KDE over a sliding memory window.
///
/// Each type keeps a density accumulator updated in `O(T)` per observed or
/// evicted item. The bandwidth is refreshed by the Silverman rule on the first
/// observation and then once every `k` observations, rebuilding the
/// accumulators; between refreshes the estimate equals a full recomputation
/// at the current bandwidth.
#[derive(Debug, Clone)]
pub struct KdeEstimator {
    window: MemoryWindow,
    sizes: Vec<f64>,
    bandwidth: f64,
    /// Row-major `T x T` kernel weights between type sizes.
    kernel: Vec<f64>,
    density: Vec<f64>,
    counts: Vec<u32>,
    sum: f64,
    sum_sq: f64,
    since_refresh: usize,
}

impl KdeEstimator {
    pub fn new(instance: &Instance, memory_length: usize) -> Self {
        let t = instance.num_types();
        let mut est = KdeEstimator {
            window: MemoryWindow::new(memory_length),
            sizes: instance.types().iter().map(|ty| f64::from(ty.size)).collect(),
            bandwidth: 1.0,
            kernel: vec![0.0; t * t],
            density: vec![0.0; t],
            counts: vec![0; t],
            sum: 0.0,
            sum_sq: 0.0,
            since_refresh: 0,
        };
        est.rebuild_kernel();
        est
    }

    pub fn window(&self) -> &MemoryWindow {
        &self.window
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    fn rebuild_kernel(&mut self) {
        let t = self.sizes.len();
        for u in 0..t {
            for v in 0..t {
                self.kernel[u * t + v] = kernel(self.sizes[u] - self.sizes[v], self.bandwidth);
            }
        }
    }

    fn apply(&mut self, type_index: usize, sign: f64) {
        let t = self.sizes.len();
        let row = &self.kernel[type_index * t..(type_index + 1) * t];
        for (d, &k) in self.density.iter_mut().zip(row) {
            *d += sign * k;
        }
    }

    pub fn observe(&mut self, type_index: usize) {
        if let Some(old) = self.window.push(type_index) {
            self.apply(old, -1.0);
            self.counts[old] -= 1;
            let s = self.sizes[old];
            self.sum -= s;
            self.sum_sq -= s * s;
        }
        self.apply(type_index, 1.0);
        self.counts[type_index] += 1;
        let s = self.sizes[type_index];
        self.sum += s;
        self.sum_sq += s * s;
        self.since_refresh += 1;
        if self.window.len() == 1 || self.since_refresh >= self.window.capacity() {
            self.refresh_bandwidth();
        }
    }

    /// Recomputes the bandwidth from the window and rebuilds the accumulators.
    pub fn refresh_bandwidth(&mut self) {
        let n = self.window.len();
        self.bandwidth = if n < 2 {
            1.0
        } else {
            let nf = n as f64;
            let var = ((self.sum_sq - self.sum * self.sum / nf) / (nf - 1.0)).max(0.0);
            bandwidth_rule(var.sqrt(), n)
        };
        self.rebuild_kernel();
        let t = self.sizes.len();
        for (v, d) in self.density.iter_mut().enumerate() {
            *d = (0..t)
                .map(|u| f64::from(self.counts[u]) * self.kernel[u * t + v])
                .sum();
        }
        self.since_refresh = 0;
    }

    pub fn distribution(&self) -> Result<TypeDistribution> {
        if self.window.is_empty() {
            return Err(Error::EmptyWindow);
        }
        TypeDistribution::from_weights(&self.density)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_items_peak_at_their_type() {
        let inst = Instance::new(100, &[10, 20, 30, 40], vec![]).unwrap();
        let mut w = MemoryWindow::new(10);
        for _ in 0..5 {
            w.push(2);
        }
        let d = estimate_distribution(&w, &inst, silverman_bandwidth(&w, &inst)).unwrap();
        let max = d.probs().iter().cloned().fold(0.0, f64::max);
        assert_eq!(d.probs()[2], max);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_point_window() {
        let inst = Instance::new(100, &[10, 90], vec![]).unwrap();
        let mut w = MemoryWindow::new(4);
        for t in [0, 1, 0, 1] {
            w.push(t);
        }
        let d = estimate_distribution(&w, &inst, 1.0).unwrap();
        assert!((d.probs()[0] - 0.5).abs() < 1e-6);
        assert!((d.probs()[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn empty_window_errors() {
        let inst = Instance::new(100, &[10], vec![]).unwrap();
        let w = MemoryWindow::new(3);
        assert!(matches!(estimate_distribution(&w, &inst, 1.0), Err(Error::EmptyWindow)));
    }

    #[test]
    fn window_evicts_fifo() {
        let mut w = MemoryWindow::new(2);
        assert_eq!(w.push(1), None);
        assert_eq!(w.push(2), None);
        assert_eq!(w.push(3), Some(1));
        assert_eq!(w.iter().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn kl_cases() {
        let d = TypeDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(kl_divergence(&d, &d, 1e-6).abs() < 1e-15);
        let p = TypeDistribution::new(vec![1.0, 0.0]).unwrap();
        let q = TypeDistribution::new(vec![0.5, 0.5]).unwrap();
        assert!((kl_divergence(&p, &q, 1e-6) - 2f64.ln()).abs() < 1e-3);
        assert_eq!(kl_divergence(&q, &q.clone(), 1e-6), 0.0);
    }

    #[test]
    fn forecast_cases() {
        let u = TypeDistribution::uniform(4);
        assert_eq!(forecast_demands(&u, 1000, 200).0, vec![200.0; 4]);
        assert_eq!(forecast_demands(&u, 1000, 1000).0, vec![0.0; 4]);
        let d = TypeDistribution::new(vec![0.7, 0.3]).unwrap();
        let q = forecast_demands(&d, 10, 0).0;
        assert!((q[0] - 7.0).abs() < 1e-12 && (q[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn incremental_matches_full_recompute() {
        let sizes: Vec<u32> = (1..=30).map(|s| s * 3).collect();
        let inst = Instance::new(100, &sizes, vec![]).unwrap();
        let mut est = KdeEstimator::new(&inst, 17);
        let mut x: u64 = 7;
        for _ in 0..500 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            est.observe((x >> 33) as usize % sizes.len());
            let full = estimate_distribution(est.window(), &inst, est.bandwidth()).unwrap();
            let inc = est.distribution().unwrap();
            for (a, b) in full.probs().iter().zip(inc.probs()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
