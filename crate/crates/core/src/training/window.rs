use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub length_days: u32,
}

impl TrainingWindow {
    /// The `length_days` calendar days ending the day before `target`.
    pub fn preceding(target: NaiveDate, length_days: u32) -> Result<Self> {
        if length_days == 0 {
            return Err(Error::Invalid("window length must be at least one day".into()));
        }
        let end = target - Duration::days(1);
        let start = target - Duration::days(i64::from(length_days));
        Ok(TrainingWindow { start, end, length_days })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindow {
    pub target: NaiveDate,
    pub window: TrainingWindow,
    /// `false` when the window reaches back before the first day of data.
    pub feasible: bool,
}

pub fn rolling_windows(
    target_dates: &[NaiveDate],
    length_days: u32,
    data_start: Option<NaiveDate>,
) -> Result<Vec<RollingWindow>> {
    target_dates
        .iter()
        .map(|&target| {
            let window = TrainingWindow::preceding(target, length_days)?;
            let feasible = data_start.is_none_or(|s| window.start >= s);
            Ok(RollingWindow { target, window, feasible })
        })
        .collect()
}
