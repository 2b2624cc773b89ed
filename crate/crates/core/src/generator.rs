//! Seeded instance generators.
//!
//! Random numbers come from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Every draw uses the top 53 bits of
//! one 64-bit output as a double `u` in `[0, 1)`, and the samplers are plain
//! inversion or transformation formulas, so instances can be regenerated
//! bit-for-bit from another language:
//!
//! * uniform `{lo..=hi}`: `lo + floor(u * (hi - lo + 1))`
//! * normal: Box-Muller cosine branch on `(1 - u1, u2)`, rounded then clamped
//! * binomial: sum of `n` Bernoulli draws `u < p`, plus `offset`
//! * poisson: sequential-search inversion, clamped
//! * weibull: `scale * (-ln(1 - u))^(1 / shape)`, rounded then clamped
//! * categorical and mixture weights: cumulative inversion
//! * periodic: the phase for item `i` is `(i / section_size) % phases.len()`

use std::collections::BTreeSet;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::TypeDistribution;
use crate::model::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    /// Integer sizes uniform on `lo..=hi`.
    Uniform { lo: u32, hi: u32 },
    Normal {
        mean: f64,
        stdev: f64,
        lo: u32,
        hi: u32,
    },
    /// `offset + Binomial(n, p)`.
    Binomial { n: u32, p: f64, offset: u32 },
    Poisson { lambda: f64, lo: u32, hi: u32 },
    Weibull {
        shape: f64,
        scale: f64,
        lo: u32,
        hi: u32,
    },
    /// Explicit sizes with nonnegative weights (normalised).
    Categorical { sizes: Vec<u32>, weights: Vec<f64> },
    Mixture {
        weights: Vec<f64>,
        components: Vec<DistributionSpec>,
    },
    /// Switches to the next phase every `section_size` items, cycling.
    Periodic {
        section_size: usize,
        phases: Vec<DistributionSpec>,
    },
}

fn check_range(lo: u32, hi: u32, capacity: u32) -> Result<()> {
    if lo == 0 || lo > hi || hi >= capacity {
        return Err(Error::InvalidSpec(format!(
            "size range [{lo}, {hi}] must lie within [1, {}]",
            capacity.saturating_sub(1)
        )));
    }
    Ok(())
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty()
        || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || !(weights.iter().sum::<f64>() > 0.0)
    {
        return Err(Error::InvalidSpec(
            "weights must be nonnegative with a positive sum".into(),
        ));
    }
    Ok(())
}

fn unit(rng: &mut Xoshiro256PlusPlus) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn clamp_round(x: f64, lo: u32, hi: u32) -> u32 {
    let r = x.round();
    if r.is_nan() || r <= f64::from(lo) {
        lo
    } else if r >= f64::from(hi) {
        hi
    } else {
        r as u32
    }
}

impl DistributionSpec {
    pub fn validate(&self, capacity: u32) -> Result<()> {
        match self {
            DistributionSpec::Uniform { lo, hi } => check_range(*lo, *hi, capacity),
            DistributionSpec::Normal { stdev, lo, hi, mean } => {
                if !(*stdev > 0.0) || !mean.is_finite() {
                    return Err(Error::InvalidSpec("normal needs finite mean and stdev > 0".into()));
                }
                check_range(*lo, *hi, capacity)
            }
            DistributionSpec::Binomial { n, p, offset } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidSpec(format!("binomial p = {p}")));
                }
                check_range(*offset, offset + n, capacity)
            }
            DistributionSpec::Poisson { lambda, lo, hi } => {
                if !(*lambda > 0.0) || *lambda > 500.0 {
                    return Err(Error::InvalidSpec(format!("poisson lambda = {lambda}")));
                }
                check_range(*lo, *hi, capacity)
            }
            DistributionSpec::Weibull {
                shape,
                scale,
                lo,
                hi,
            } => {
                if !(*shape > 0.0) || !(*scale > 0.0) {
                    return Err(Error::InvalidSpec("weibull needs shape, scale > 0".into()));
                }
                check_range(*lo, *hi, capacity)
            }
            DistributionSpec::Categorical { sizes, weights } => {
                if sizes.len() != weights.len() {
                    return Err(Error::InvalidSpec("sizes and weights differ in length".into()));
                }
                check_weights(weights)?;
                for &s in sizes {
                    check_range(s, s, capacity)?;
                }
                Ok(())
            }
            DistributionSpec::Mixture {
                weights,
                components,
            } => {
                if weights.len() != components.len() {
                    return Err(Error::InvalidSpec(
                        "mixture weights and components differ in length".into(),
                    ));
                }
                check_weights(weights)?;
                components.iter().try_for_each(|c| c.validate(capacity))
            }
            DistributionSpec::Periodic {
                section_size,
                phases,
            } => {
                if *section_size == 0 || phases.is_empty() {
                    return Err(Error::InvalidSpec(
                        "periodic needs section_size > 0 and at least one phase".into(),
                    ));
                }
                phases.iter().try_for_each(|c| c.validate(capacity))
            }
        }
    }

    /// Every size this distribution can emit.
    pub fn support(&self) -> BTreeSet<u32> {
        match self {
            DistributionSpec::Uniform { lo, hi }
            | DistributionSpec::Normal { lo, hi, .. }
            | DistributionSpec::Poisson { lo, hi, .. }
            | DistributionSpec::Weibull { lo, hi, .. } => (*lo..=*hi).collect(),
            DistributionSpec::Binomial { n, offset, .. } => (*offset..=offset + n).collect(),
            DistributionSpec::Categorical { sizes, weights } => sizes
                .iter()
                .zip(weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&s, _)| s)
                .collect(),
            DistributionSpec::Mixture { components, .. } => {
                components.iter().flat_map(|c| c.support()).collect()
            }
            DistributionSpec::Periodic { phases, .. } => {
                phases.iter().flat_map(|c| c.support()).collect()
            }
        }
    }

    /// Index of the active phase for item `index` (0 for stationary specs).
    pub fn phase_at(&self, index: usize) -> usize {
        match self {
            DistributionSpec::Periodic {
                section_size,
                phases,
            } => (index / section_size) % phases.len(),
            _ => 0,
        }
    }

    fn sample(&self, rng: &mut Xoshiro256PlusPlus, index: usize) -> u32 {
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                let span = f64::from(hi - lo + 1);
                (lo + (unit(rng) * span) as u32).min(*hi)
            }
            DistributionSpec::Normal {
                mean,
                stdev,
                lo,
                hi,
            } => {
                let u1 = 1.0 - unit(rng);
                let u2 = unit(rng);
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                clamp_round(mean + stdev * z, *lo, *hi)
            }
            DistributionSpec::Binomial { n, p, offset } => {
                offset + (0..*n).filter(|_| unit(rng) < *p).count() as u32
            }
            DistributionSpec::Poisson { lambda, lo, hi } => {
                let u = unit(rng);
                let mut k = 0u32;
                let mut term = (-lambda).exp();
                let mut cdf = term;
                while u >= cdf && k < *hi {
                    k += 1;
                    term *= lambda / f64::from(k);
                    cdf += term;
                }
                k.clamp(*lo, *hi)
            }
            DistributionSpec::Weibull {
                shape,
                scale,
                lo,
                hi,
            } => {
                let u = unit(rng);
                clamp_round(scale * (-(1.0 - u).ln()).powf(1.0 / shape), *lo, *hi)
            }
            DistributionSpec::Categorical { sizes, weights } => sizes[pick(weights, unit(rng))],
            DistributionSpec::Mixture {
                weights,
                components,
            } => {
                let c = pick(weights, unit(rng));
                components[c].sample(rng, index)
            }
            DistributionSpec::Periodic { phases, .. } => phases[self.phase_at(index)].sample(rng, index),
        }
    }

    /// Probability of each size in `sizes` (after rounding and clamping).
    /// Periodic specs report the average over their phases.
    pub fn pmf(&self, sizes: &[u32]) -> Vec<f64> {
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                let p = 1.0 / f64::from(hi - lo + 1);
                sizes
                    .iter()
                    .map(|s| if (lo..=hi).contains(&s) { p } else { 0.0 })
                    .collect()
            }
            DistributionSpec::Normal {
                mean,
                stdev,
                lo,
                hi,
            } => {
                let normal = Normal::new(*mean, *stdev).expect("validated");
                binned(sizes, *lo, *hi, |x| normal.cdf(x))
            }
            DistributionSpec::Weibull {
                shape,
                scale,
                lo,
                hi,
            } => binned(sizes, *lo, *hi, |x| {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-(x / scale).powf(*shape)).exp()
                }
            }),
            DistributionSpec::Binomial { n, p, offset } => sizes
                .iter()
                .map(|&s| {
                    if s < *offset || s > offset + n {
                        0.0
                    } else {
                        binomial_pmf(*n, *p, s - offset)
                    }
                })
                .collect(),
            DistributionSpec::Poisson { lambda, lo, hi } => {
                let pmf = |k: u32| {
                    (f64::from(k) * lambda.ln() - lambda - ln_factorial(k)).exp()
                };
                let below_hi: f64 = (0..*hi).map(pmf).sum();
                sizes
                    .iter()
                    .map(|&s| {
                        if s < *lo || s > *hi {
                            0.0
                        } else if s == *hi {
                            if lo == hi {
                                1.0
                            } else {
                                (1.0 - below_hi).max(0.0)
                            }
                        } else if s == *lo {
                            (0..=s).map(pmf).sum()
                        } else {
                            pmf(s)
                        }
                    })
                    .collect()
            }
            DistributionSpec::Categorical {
                sizes: cs,
                weights,
            } => {
                let total: f64 = weights.iter().sum();
                sizes
                    .iter()
                    .map(|s| {
                        cs.iter()
                            .zip(weights)
                            .filter(|(c, _)| *c == s)
                            .map(|(_, w)| w / total)
                            .sum()
                    })
                    .collect()
            }
            DistributionSpec::Mixture {
                weights,
                components,
            } => {
                let total: f64 = weights.iter().sum();
                let mut out = vec![0.0; sizes.len()];
                for (w, c) in weights.iter().zip(components) {
                    for (o, p) in out.iter_mut().zip(c.pmf(sizes)) {
                        *o += w / total * p;
                    }
                }
                out
            }
            DistributionSpec::Periodic { phases, .. } => {
                let mut out = vec![0.0; sizes.len()];
                for c in phases {
                    for (o, p) in out.iter_mut().zip(c.pmf(sizes)) {
                        *o += p / phases.len() as f64;
                    }
                }
                out
            }
        }
    }

    /// The distribution over an instance's type table.
    pub fn type_distribution(&self, instance: &Instance) -> Result<TypeDistribution> {
        TypeDistribution::from_weights(&self.pmf(&instance.sizes()))
    }
}

/// Mass of rounding `X` to each integer size, with the tails below `lo` and
/// above `hi` folded onto the endpoints.
fn binned(sizes: &[u32], lo: u32, hi: u32, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    sizes
        .iter()
        .map(|&s| {
            if s < lo || s > hi {
                return 0.0;
            }
            let upper = if s == hi { 1.0 } else { cdf(f64::from(s) + 0.5) };
            let lower = if s == lo { 0.0 } else { cdf(f64::from(s) - 0.5) };
            (upper - lower).max(0.0)
        })
        .collect()
}

fn ln_factorial(k: u32) -> f64 {
    (1..=k).map(|i| f64::from(i).ln()).sum()
}

fn binomial_pmf(n: u32, p: f64, k: u32) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_c = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    (ln_c + f64::from(k) * p.ln() + f64::from(n - k) * (1.0 - p).ln()).exp()
}

/// Draws `n_items` sizes and builds an instance whose type table lists every
/// size in the distribution's support in ascending order.
pub fn sample_instance(spec: &DistributionSpec, capacity: u32, n_items: usize, seed: u64) -> Result<Instance> {
    spec.validate(capacity)?;
    let support: Vec<u32> = spec.support().into_iter().collect();
    let mut index = vec![usize::MAX; capacity as usize];
    for (i, &s) in support.iter().enumerate() {
        index[s as usize] = i;
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let sequence = (0..n_items)
        .map(|i| index[spec.sample(&mut rng, i) as usize])
        .collect();
    Instance::new(capacity, &support, sequence)
}

/// A named generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_capacity")]
    pub bin_capacity: u32,
    /// Set when the parameters still await transcription from their source.
    #[serde(default)]
    pub placeholder: bool,
    #[serde(default)]
    pub provenance: Option<String>,
    pub spec: DistributionSpec,
}

fn default_capacity() -> u32 {
    100
}

impl Preset {
    pub fn from_toml(text: &str) -> Result<Self> {
        let preset: Preset = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        preset.spec.validate(preset.bin_capacity)?;
        Ok(preset)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Preset::from_toml(&std::fs::read_to_string(path)?)
    }
}

macro_rules! preset_files {
    ($($file:literal),* $(,)?) => {
        &[$(include_str!(concat!("../presets/", $file, ".toml"))),*]
    };
}

const PRESET_FILES: &[&str] = preset_files![
    "uniform",
    "uniform-b",
    "uniform-s",
    "uniform-c",
    "normal",
    "normal-b",
    "normal-s",
    "normal-c",
    "weibull-0.5",
    "weibull-1.0",
    "weibull-1.5",
    "weibull-2.0",
    "weibull-5.0",
    "weibull-periodic",
    "binomial-ps",
    "binomial-pb",
    "poisson-periodic",
    "bimodal",
    "burke-dual",
    "bw1",
    "lw1",
    "pp1",
];

/// Shipped preset catalog.
pub fn presets() -> Vec<Preset> {
    PRESET_FILES
        .iter()
        .map(|text| Preset::from_toml(text).expect("shipped preset parses"))
        .collect()
}

pub fn preset(name: &str) -> Result<Preset> {
    presets()
        .into_iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))
}
