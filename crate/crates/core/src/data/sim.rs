//! Synthetic visibility dataset generator.
//!
//! Each station carries a latent log-visibility on a 6-hourly grid made of a
//! station mean, an annual cycle, a diurnal cycle and a stationary AR(1)
//! anomaly. Observations are the rounded-down exponential of the latent
//! truth. Forecasts share one error draw per (station, init, lead) on top of a
//! constant bias, and members scatter around it with a spread that is only a
//! fraction (`dispersion`) of the error scale, which gives a biased and
//! underdispersed raw ensemble.

use std::f64::consts::PI;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{day_of_year, ForecastRecord, ObservationRecord, StationMeta, N_MEMBERS};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::scale::{round_down, MAX_VISIBILITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_stations: usize,
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub lead_times_h: Vec<u32>,
    pub with_hres: bool,
    /// Additive bias of the forecasts in log-visibility.
    pub bias: f64,
    /// Forecast error standard deviation (log units) at lead zero.
    pub noise_scale: f64,
    /// Relative growth of the error scale per 24 h of lead time.
    pub noise_growth_per_day: f64,
    /// Member spread as a fraction of the error scale.
    pub dispersion: f64,
    /// AR(1) coefficient of the anomaly per 6 h step.
    pub ar_coef: f64,
    /// Stationary standard deviation of the anomaly.
    pub anomaly_sd: f64,
    /// Range of station mean visibility in metres.
    pub station_median_range: (f64, f64),
    pub seasonal_amplitude_range: (f64, f64),
    pub diurnal_amplitude_range: (f64, f64),
    /// Probability that a forecast row lacks its exchangeable members.
    pub missing_members_rate: f64,
    /// Probability that an observation is missing.
    pub missing_obs_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_stations: 10,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
            n_days: 730,
            lead_times_h: vec![6, 24, 48, 72],
            with_hres: false,
            bias: -1.0,
            noise_scale: 0.7,
            noise_growth_per_day: 0.15,
            dispersion: 0.3,
            ar_coef: 0.9,
            anomaly_sd: 0.9,
            station_median_range: (4000.0, 15000.0),
            seasonal_amplitude_range: (0.2, 0.6),
            diurnal_amplitude_range: (0.1, 0.4),
            missing_members_rate: 0.0,
            missing_obs_rate: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Invalid(format!("simulation config: {m}")));
        if self.n_stations == 0 {
            return fail("n_stations must be positive");
        }
        if self.n_days == 0 {
            return fail("date range is empty");
        }
        if self.lead_times_h.is_empty() {
            return fail("no lead times");
        }
        if self.lead_times_h.iter().any(|&l| l == 0 || l % 6 != 0) {
            return fail("lead times must be positive multiples of 6 h");
        }
        if self.noise_scale < 0.0 || self.dispersion < 0.0 || self.anomaly_sd < 0.0 {
            return fail("scales must be non-negative");
        }
        if !(self.ar_coef.abs() < 1.0) {
            return fail("ar_coef must lie in (-1, 1)");
        }
        let (lo, hi) = self.station_median_range;
        if !(lo > 0.0 && lo <= hi) {
            return fail("station_median_range must be positive and ordered");
        }
        for r in [self.missing_members_rate, self.missing_obs_rate] {
            if !(0.0..=1.0).contains(&r) {
                return fail("missing rates must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start_date + Duration::days(self.n_days as i64 - 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimDataset {
    pub forecasts: Vec<ForecastRecord>,
    pub observations: Vec<ObservationRecord>,
    pub stations: Vec<StationMeta>,
}

struct StationClimate {
    mean_log: f64,
    seasonal: f64,
    diurnal: f64,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        lo
    } else {
        Uniform::new(lo, hi).expect("ordered bounds").sample(rng)
    }
}

const STATION_STREAM: u64 = 0x57a7;

pub fn station_id(i: usize) -> String {
    format!("S{:03}", i + 1)
}

/// Generates a deterministic dataset for the given seed.
pub fn simulate_dataset(cfg: &SimConfig, seed: u64) -> Result<SimDataset> {
    cfg.validate()?;
    let max_lead = *cfg.lead_times_h.iter().max().expect("validated non-empty");
    let steps_per_day = 4;
    let n_steps = cfg.n_days * steps_per_day + (max_lead / 6) as usize + 1;
    let t0: NaiveDateTime = cfg.start_date.and_hms_opt(0, 0, 0).expect("midnight");
    let mut lead_times = cfg.lead_times_h.clone();
    lead_times.sort_unstable();
    lead_times.dedup();

    let mut out = SimDataset::default();
    let innovation_sd = cfg.anomaly_sd * (1.0 - cfg.ar_coef * cfg.ar_coef).sqrt();

    for s in 0..cfg.n_stations {
        let id = station_id(s);
        let mut rng = rng_for(seed, &[STATION_STREAM, s as u64]);
        let (lo, hi) = cfg.station_median_range;
        let climate = StationClimate {
            mean_log: uniform(&mut rng, (lo.ln(), hi.ln())),
            seasonal: uniform(&mut rng, cfg.seasonal_amplitude_range),
            diurnal: uniform(&mut rng, cfg.diurnal_amplitude_range),
        };
        out.stations.push(StationMeta {
            station_id: id.clone(),
            latitude: uniform(&mut rng, (47.0, 55.0)),
            longitude: uniform(&mut rng, (6.0, 20.0)),
        });

        let mut anomaly = cfg.anomaly_sd * normal(&mut rng);
        let mut latent = Vec::with_capacity(n_steps);
        for step in 0..n_steps {
            if step > 0 {
                anomaly = cfg.ar_coef * anomaly + innovation_sd * normal(&mut rng);
            }
            let time = t0 + Duration::hours(6 * step as i64);
            let d = f64::from(day_of_year(time.date()));
            let hour = (6 * step % 24) as f64;
            let z = climate.mean_log
                - climate.seasonal * (2.0 * PI * (d - 15.0) / 365.0).cos()
                - climate.diurnal * (2.0 * PI * (hour - 6.0) / 24.0).cos()
                + anomaly;
            latent.push(z);
            let missing = cfg.missing_obs_rate > 0.0 && rng.random::<f64>() < cfg.missing_obs_rate;
            if !missing {
                out.observations.push(ObservationRecord {
                    station_id: id.clone(),
                    valid_time: time,
                    visibility_class: round_down(clamp_meters(z))?,
                });
            }
        }

        for day in 0..cfg.n_days {
            let init_time = t0 + Duration::days(day as i64);
            for &lead in &lead_times {
                let z = latent[day * steps_per_day + (lead / 6) as usize];
                let sigma = cfg.noise_scale * (1.0 + cfg.noise_growth_per_day * f64::from(lead) / 24.0);
                let center = z + cfg.bias + sigma * normal(&mut rng);
                let spread = cfg.dispersion * sigma;
                let ctrl = clamp_meters(center + spread * normal(&mut rng));
                let members: Vec<f64> =
                    (0..N_MEMBERS).map(|_| clamp_meters(center + spread * normal(&mut rng))).collect();
                let hres = cfg
                    .with_hres
                    .then(|| clamp_meters(center + 0.5 * spread * normal(&mut rng)));
                let missing = cfg.missing_members_rate > 0.0 && rng.random::<f64>() < cfg.missing_members_rate;
                out.forecasts.push(ForecastRecord {
                    station_id: id.clone(),
                    init_time,
                    lead_h: lead,
                    hres,
                    ctrl,
                    members: (!missing).then_some(members),
                });
            }
        }
    }
    Ok(out)
}

fn clamp_meters(log_v: f64) -> f64 {
    log_v.exp().min(MAX_VISIBILITY)
}
