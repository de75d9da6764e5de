//! Stationary bootstrap (geometric block lengths, circular wrap) for
//! time-ordered score series.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    /// Mean block length; `None` selects `ceil(n^(1/3))`.
    pub mean_block_len: Option<f64>,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { n_boot: 2000, mean_block_len: None, level: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub sd: f64,
}

pub fn default_block_length(n: usize) -> f64 {
    (n as f64).cbrt().ceil().max(1.0)
}

/// One stationary-bootstrap resample of `0..n` as `(start, len)` blocks whose
/// lengths sum to `n`. Each position starts a new block with probability
/// `1 / mean_block_len`.
pub fn resample_blocks<R: Rng>(n: usize, mean_block_len: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let restart = 1.0 / mean_block_len.max(1.0);
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        if i == 0 || rng.random::<f64>() < restart {
            blocks.push((rng.random_range(0..n), 1));
        } else {
            blocks.last_mut().expect("first position opens a block").1 += 1;
        }
    }
    blocks
}

fn resample_indices<R: Rng>(n: usize, mean_block_len: f64, rng: &mut R) -> Vec<usize> {
    resample_blocks(n, mean_block_len, rng)
        .into_iter()
        .flat_map(|(start, len)| (0..len).map(move |j| (start + j) % n))
        .collect()
}

fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Invalid(format!("confidence level {level} outside (0, 1)")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Bootstrap standard deviation of `stat` evaluated on resampled index sets.
/// Every resample draws from its own seeded stream, so the result does not
/// depend on thread scheduling.
fn bootstrap_sd<F>(n: usize, cfg: &BootstrapConfig, stat: F) -> Result<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if cfg.n_boot < 2 {
        return Err(Error::Invalid("at least two bootstrap samples are required".into()));
    }
    let block = cfg.mean_block_len.unwrap_or_else(|| default_block_length(n));
    if !(block >= 1.0) {
        return Err(Error::Invalid(format!("mean block length {block} must be at least 1")));
    }
    let stats: Vec<f64> = (0..cfg.n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(cfg.seed, &[b as u64]);
            stat(&resample_indices(n, block, &mut rng))
        })
        .collect();
    let m = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (stats.len() - 1) as f64;
    Ok(var.sqrt())
}

fn interval(point: f64, sd: f64, level: f64) -> Result<ConfidenceInterval> {
    let z = z_value(level)?;
    Ok(ConfidenceInterval { point, lo: point - z * sd, hi: point + z * sd, sd })
}

/// Normal-approximation CI for the mean of a time-ordered series, with the
/// standard deviation taken from stationary-bootstrap resamples.
pub fn stationary_bootstrap_ci(series: &[f64], cfg: &BootstrapConfig) -> Result<ConfidenceInterval> {
    if series.len() < 2 {
        return Err(Error::Invalid("bootstrap needs a series of length at least 2".into()));
    }
    let n = series.len();
    let point = series.iter().sum::<f64>() / n as f64;
    if series.iter().all(|&v| v == series[0]) {
        return interval(point, 0.0, cfg.level);
    }
    let sd = bootstrap_sd(n, cfg, |idx| idx.iter().map(|&i| series[i]).sum::<f64>() / n as f64)?;
    interval(point, sd, cfg.level)
}

/// CI for the skill score `1 - mean(scores) / mean(reference)`, resampling the
/// paired series jointly.
pub fn paired_skill_ci(scores: &[f64], reference: &[f64], cfg: &BootstrapConfig) -> Result<ConfidenceInterval> {
    if scores.len() != reference.len() {
        return Err(Error::Invalid("paired series differ in length".into()));
    }
    if scores.len() < 2 {
        return Err(Error::Invalid("bootstrap needs a series of length at least 2".into()));
    }
    let skill = |idx: &mut dyn Iterator<Item = usize>| {
        let (s, r) = idx.fold((0.0, 0.0), |(s, r), i| (s + scores[i], r + reference[i]));
        if r > 0.0 {
            1.0 - s / r
        } else {
            0.0
        }
    };
    let n = scores.len();
    let point = skill(&mut (0..n));
    let degenerate = scores.iter().zip(reference).all(|(s, r)| s == r)
        || (scores.iter().all(|&v| v == scores[0]) && reference.iter().all(|&v| v == reference[0]));
    if degenerate {
        return interval(point, 0.0, cfg.level);
    }
    let sd = bootstrap_sd(n, cfg, |idx| skill(&mut idx.iter().copied()))?;
    interval(point, sd, cfg.level)
}
