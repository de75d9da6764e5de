//! Predictor vectors built from one ensemble forecast.
//!
//! Components, in order: normalized HRES (optional), normalized control run,
//! mean of the 50 normalized exchangeable members, variance of the 51-member
//! operational ensemble, the fractions of operational members at or below
//! 1000 m, in (1000, 2000] m and above 30000 m, and the annual harmonics
//! sin(2πd/365), cos(2πd/365).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::{ForecastCase, ForecastRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub use_hres: bool,
    /// Raw-metre thresholds for the three member fractions.
    pub thresholds: [f64; 3],
    pub normalizer: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { use_hres: false, thresholds: [1000.0, 2000.0, 30_000.0], normalizer: 70_000.0 }
    }
}

impl FeatureConfig {
    pub fn with_hres() -> Self {
        FeatureConfig { use_hres: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let [t1, t2, t3] = self.thresholds;
        if !(0.0 < t1 && t1 < t2 && t2 < t3 && t3 < self.normalizer) {
            return Err(Error::Invalid(format!(
                "feature thresholds must satisfy 0 < t1 < t2 < t3 < normalizer, got {:?} / {}",
                self.thresholds, self.normalizer
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        if self.use_hres {
            9
        } else {
            8
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut n = Vec::with_capacity(9);
        if self.use_hres {
            n.push("hres");
        }
        n.extend(["ctrl", "ens_mean", "ens_var", "p_low", "p_mid", "p_high", "sin_doy", "cos_doy"]);
        n
    }

    /// Positions of the forecast-level covariates (HRES, CTRL, ensemble mean),
    /// the ones conventionally held to a non-negative effect on visibility.
    pub fn forecast_level_indices(&self) -> Vec<usize> {
        if self.use_hres {
            vec![0, 1, 2]
        } else {
            vec![0, 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn extract_features(case: &ForecastCase, cfg: &FeatureConfig) -> Result<FeatureVector> {
    features_for(&case.forecast, case.day_of_year, cfg)
}

/// Feature vector of a forecast valid on the given day of the year.
pub fn features_for(f: &ForecastRecord, day_of_year: u32, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let members = f
        .members
        .as_deref()
        .ok_or_else(|| Error::Invalid("forecast has no exchangeable members".into()))?;
    let norm = cfg.normalizer;
    let [t1, t2, t3] = cfg.thresholds;
    let mut x = Vec::with_capacity(cfg.dim());
    if cfg.use_hres {
        let hres = f
            .hres
            .ok_or_else(|| Error::Invalid("HRES forecast required by the feature configuration".into()))?;
        x.push(hres / norm);
    }
    x.push(f.ctrl / norm);
    x.push(members.iter().sum::<f64>() / members.len() as f64 / norm);

    let operational: Vec<f64> = std::iter::once(f.ctrl).chain(members.iter().copied()).collect();
    let n = operational.len() as f64;
    let mean = operational.iter().map(|v| v / norm).sum::<f64>() / n;
    let var = operational.iter().map(|v| (v / norm - mean).powi(2)).sum::<f64>() / (n - 1.0);
    x.push(var);

    let frac = |pred: &dyn Fn(f64) -> bool| operational.iter().filter(|&&v| pred(v)).count() as f64 / n;
    x.push(frac(&|v| v <= t1));
    x.push(frac(&|v| v > t1 && v <= t2));
    x.push(frac(&|v| v > t3));

    let phase = 2.0 * PI * f64::from(day_of_year) / 365.0;
    x.push(phase.sin());
    x.push(phase.cos());

    let fv = FeatureVector(x);
    check(&fv, cfg)?;
    Ok(fv)
}

fn check(x: &FeatureVector, cfg: &FeatureConfig) -> Result<()> {
    let level = if cfg.use_hres { 3 } else { 2 };
    for (i, &v) in x.0.iter().enumerate().take(level) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Invalid(format!(
                "normalized forecast component `{}` = {v} outside [0, 1]",
                cfg.names()[i]
            )));
        }
    }
    if x.0[level] < 0.0 {
        return Err(Error::Invalid("negative ensemble variance".into()));
    }
    Ok(())
}
