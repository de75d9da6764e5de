//! Scoring rules and diagnostics for discrete visibility forecasts.

mod bootstrap;
mod io;
mod pit;
mod report;
mod scores;

pub use bootstrap::{
    default_block_length, paired_skill_ci, resample_blocks, stationary_bootstrap_ci, BootstrapConfig,
    ConfidenceInterval,
};
pub use io::{read_predictions, write_predictions, Prediction};
pub use pit::{ks_uniformity, pit_histogram, pit_value, KsResult};
pub use report::{aggregate_report, LeadScores, ReportConfig, ScoreReport, SkillEntry};
pub use scores::{
    central_interval, crps, logs, logs_floor, mean_of, rmse_of_mean, skill_score, DEFAULT_LOGS_PI,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::{scale_values, ClassIndex, N_CLASSES};

const SUM_TOL: f64 = 1e-9;

/// A probability mass function over the 84 visibility classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PredictiveDistribution {
    pmf: Vec<f64>,
}

impl PredictiveDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() != N_CLASSES {
            return Err(Error::Dimension { expected: N_CLASSES, got: pmf.len() });
        }
        if pmf.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Invalid("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(PredictiveDistribution { pmf })
    }

    pub fn point_mass(k: ClassIndex) -> Self {
        let mut pmf = vec![0.0; N_CLASSES];
        pmf[k.offset()] = 1.0;
        PredictiveDistribution { pmf }
    }

    pub fn uniform() -> Self {
        PredictiveDistribution { pmf: vec![1.0 / N_CLASSES as f64; N_CLASSES] }
    }

    /// Equal-weight empirical distribution of the given classes.
    pub fn empirical<I: IntoIterator<Item = ClassIndex>>(classes: I) -> Result<Self> {
        let mut counts = [0usize; N_CLASSES];
        let mut n = 0usize;
        for k in classes {
            counts[k.offset()] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::Invalid("empirical distribution of an empty sample".into()));
        }
        Ok(PredictiveDistribution { pmf: counts.iter().map(|&c| c as f64 / n as f64).collect() })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, k: ClassIndex) -> f64 {
        self.pmf[k.offset()]
    }

    /// Cumulative probabilities P(Y <= y_k) for k = 1..84.
    pub fn cdf(&self) -> Vec<f64> {
        self.pmf
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    /// P(Y < y_k).
    pub fn cdf_below(&self, k: ClassIndex) -> f64 {
        self.pmf[..k.offset()].iter().sum()
    }

    pub fn support(&self) -> impl Iterator<Item = ClassIndex> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| ClassIndex::new(i + 1).expect("in range"))
    }

    pub fn values(&self) -> &'static [f64; N_CLASSES] {
        scale_values().values()
    }
}

impl TryFrom<Vec<f64>> for PredictiveDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        PredictiveDistribution::new(v)
    }
}

impl From<PredictiveDistribution> for Vec<f64> {
    fn from(d: PredictiveDistribution) -> Vec<f64> {
        d.pmf
    }
}
