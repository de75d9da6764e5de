//! Reference forecasts: observed climatology and the raw ensemble.

use chrono::Timelike;

use super::window::TrainingWindow;
use crate::data::{ForecastRecord, ObservationRecord};
use crate::error::{Error, Result};
use crate::scale::round_down;
use crate::verification::PredictiveDistribution;

/// Empirical distribution of a station's observations inside the window,
/// optionally restricted to one UTC hour of the day.
pub fn climatology_forecast(
    observations: &[ObservationRecord],
    station_id: &str,
    window: &TrainingWindow,
    hour: Option<u32>,
) -> Result<PredictiveDistribution> {
    let classes = observations
        .iter()
        .filter(|o| o.station_id == station_id && window.contains(o.valid_time.date()))
        .filter(|o| hour.is_none_or(|h| o.valid_time.hour() == h))
        .map(|o| o.visibility_class);
    PredictiveDistribution::empirical(classes).map_err(|_| {
        Error::Invalid(format!(
            "station {station_id} has no observations between {} and {}",
            window.start, window.end
        ))
    })
}

/// Equal-weight distribution of all members (HRES when present, control and
/// the 50 exchangeable members), each rounded down to the scale.
pub fn raw_ensemble_distribution(f: &ForecastRecord) -> Result<PredictiveDistribution> {
    let members = f
        .members
        .as_ref()
        .ok_or_else(|| Error::Invalid(format!("forecast {} {} has no members", f.station_id, f.init_time)))?;
    let values = f.hres.iter().chain(std::iter::once(&f.ctrl)).chain(members);
    let classes = values.map(|&v| round_down(v)).collect::<Result<Vec<_>>>()?;
    PredictiveDistribution::empirical(classes)
}
