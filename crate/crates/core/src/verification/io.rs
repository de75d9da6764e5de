//! Predictions CSV: `station_id,init_time,lead_h,obs_class,p1..p84`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::data::{format_time, parse_time};
use crate::error::{Error, Result};
use crate::scale::{ClassIndex, N_CLASSES};

use super::PredictiveDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub station_id: String,
    pub init_time: NaiveDateTime,
    pub lead_h: u32,
    pub obs_class: ClassIndex,
    pub pmf: PredictiveDistribution,
}

impl Prediction {
    pub fn valid_time(&self) -> NaiveDateTime {
        self.init_time + chrono::Duration::hours(i64::from(self.lead_h))
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["station_id", "init_time", "lead_h", "obs_class"].map(String::from).to_vec();
    h.extend((1..=N_CLASSES).map(|k| format!("p{k}")));
    h
}

pub fn write_predictions(path: impl AsRef<Path>, predictions: &[Prediction]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(header())?;
    for p in predictions {
        let mut row = vec![
            p.station_id.clone(),
            format_time(p.init_time),
            p.lead_h.to_string(),
            p.obs_class.to_string(),
        ];
        row.extend(p.pmf.pmf().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let expected = header();
    let got: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got != expected {
        return Err(Error::Parse { path: path.into(), row: 0, msg: "unexpected predictions header".into() });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let err = |msg: String| Error::Parse { path: path.into(), row: i + 1, msg };
        if rec.len() != expected.len() {
            return Err(err(format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        let init_time = parse_time(&rec[1]).ok_or_else(|| err(format!("bad time `{}`", &rec[1])))?;
        let lead_h = rec[2].trim().parse().map_err(|_| err(format!("bad lead `{}`", &rec[2])))?;
        let obs_class = rec[3]
            .trim()
            .parse::<usize>()
            .map_err(|_| err(format!("bad class `{}`", &rec[3])))
            .and_then(|k| ClassIndex::new(k).map_err(|e| err(e.to_string())))?;
        let probs = (4..4 + N_CLASSES)
            .map(|j| rec[j].trim().parse::<f64>().map_err(|_| err(format!("bad probability `{}`", &rec[j]))))
            .collect::<Result<Vec<_>>>()?;
        let pmf = PredictiveDistribution::new(probs).map_err(|e| err(e.to_string()))?;
        out.push(Prediction { station_id: rec[0].trim().to_string(), init_time, lead_h, obs_class, pmf });
    }
    Ok(out)
}
