use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::ClassIndex;

use super::PredictiveDistribution;

/// Randomized PIT `F(x-) + u p(x)`.
pub fn pit_value(f: &PredictiveDistribution, x: ClassIndex, u: f64) -> f64 {
    (f.cdf_below(x) + u * f.prob(x)).clamp(0.0, 1.0)
}

/// Equal-width bin counts on [0, 1]; the value 1 falls in the last bin.
pub fn pit_histogram(values: &[f64], n_bins: usize) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::Invalid("PIT histogram of an empty sample".into()));
    }
    if n_bins == 0 {
        return Err(Error::Invalid("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0; n_bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Invalid(format!("PIT value {v} outside [0, 1]")));
        }
        let bin = ((v * n_bins as f64) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sided Kolmogorov-Smirnov test against U(0, 1) with the asymptotic
/// Kolmogorov distribution (Stephens' small-sample correction on the argument).
pub fn ks_uniformity(values: &[f64]) -> Result<KsResult> {
    if values.is_empty() {
        return Err(Error::Invalid("KS test of an empty sample".into()));
    }
    let mut v = values.to_vec();
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Invalid("KS uniformity test needs values in [0, 1]".into()));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let statistic = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let i = i as f64;
            ((i + 1.0) / n - x).max(x - i / n)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    Ok(KsResult { statistic, p_value: kolmogorov_survival(lambda) })
}

/// P(K > lambda) for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= l) = sqrt(2π)/l Σ exp(-(2j-1)² π² / (8 l²)), fast for small l
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|j| {
                let m = (2 * j - 1) as f64;
                (c * m * m).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let j = j as f64;
                let sign = if j as i64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * j * j * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}
