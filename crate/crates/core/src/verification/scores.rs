use crate::error::{Error, Result};
use crate::scale::{ClassIndex, N_CLASSES};

use super::PredictiveDistribution;

/// Probability that a year-rare class is observed at least once a year.
pub const DEFAULT_LOGS_PI: f64 = 0.01;

/// CRPS in metres of a discrete forecast against an observed class:
/// `Σ p_k |y_k - x| - Σ_{k>l} p_k p_l (y_k - y_l)`.
///
/// The pairwise term is accumulated with running sums over the ordered scale,
/// `Σ_k p_k (y_k P_{<k} - S_{<k})`, which is the same double sum in O(84).
pub fn crps(f: &PredictiveDistribution, x: ClassIndex) -> f64 {
    let ys = f.values();
    let obs = x.value();
    let mut abs_err = 0.0;
    let mut spread = 0.0;
    let mut mass_below = 0.0;
    let mut moment_below = 0.0;
    for (&p, &y) in f.pmf().iter().zip(ys.iter()) {
        abs_err += p * (y - obs).abs();
        spread += p * (y * mass_below - moment_below);
        mass_below += p;
        moment_below += p * y;
    }
    (abs_err - spread).max(0.0)
}

/// Floor probability `1 - (1 - pi)^(1/365)`.
pub fn logs_floor(pi: f64) -> f64 {
    -((-pi).ln_1p() / 365.0).exp_m1()
}

/// Logarithmic score in nats after flooring every class at
/// [`logs_floor`]`(pi)` and renormalizing.
pub fn logs(f: &PredictiveDistribution, x: ClassIndex, pi: f64) -> f64 {
    let floor = logs_floor(pi);
    let total: f64 = f.pmf().iter().map(|&p| p.max(floor)).sum();
    -(f.prob(x).max(floor) / total).ln()
}

/// Central prediction interval `(lo, hi)` in metres: the smallest scale values
/// whose CDF reaches `(1 - level)/2` and `(1 + level)/2`.
pub fn central_interval(f: &PredictiveDistribution, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Invalid(format!("interval level {level} outside (0, 1)")));
    }
    let tail = (1.0 - level) / 2.0;
    let cdf = f.cdf();
    let ys = f.values();
    // absorbs summation rounding when the CDF lands exactly on a level
    let eps = 1e-12;
    let quantile = |q: f64| {
        let i = cdf.iter().position(|&c| c >= q - eps).unwrap_or(N_CLASSES - 1);
        ys[i]
    };
    Ok((quantile(tail), quantile(1.0 - tail)))
}

pub fn mean_of(f: &PredictiveDistribution) -> f64 {
    f.pmf().iter().zip(f.values().iter()).map(|(p, y)| p * y).sum()
}

/// Root mean squared difference between predictive means and observed values.
pub fn rmse_of_mean(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Invalid("RMSE of an empty case list".into()));
    }
    let sse: f64 = pairs.iter().map(|(m, o)| (m - o).powi(2)).sum();
    Ok((sse / pairs.len() as f64).sqrt())
}

pub fn skill_score(mean_score: f64, mean_score_ref: f64) -> Result<f64> {
    if !(mean_score_ref > 0.0) || !mean_score_ref.is_finite() {
        return Err(Error::Invalid(format!("reference score {mean_score_ref} must be positive")));
    }
    Ok(1.0 - mean_score / mean_score_ref)
}
