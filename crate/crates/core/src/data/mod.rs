//! Forecast and observation records, the CSV file contracts, and case joining.
//!
//! File contracts (UTF-8, `\n` line endings, `.` decimal separator):
//!
//! * `forecasts.csv`: `station_id,init_time,lead_h,hres,ctrl,m01..m50`
//! * `observations.csv`: `station_id,valid_time,visibility_m`
//! * `stations.csv`: `station_id,lat,lon`
//!
//! Times are ISO-8601 UTC. An empty `hres` cell means the high-resolution run
//! is absent; a row whose 50 member cells are all empty has no exchangeable
//! members and is dropped at join time.

pub mod sim;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::{round_down, ClassIndex};

pub const N_MEMBERS: usize = 50;

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub station_id: String,
    pub init_time: NaiveDateTime,
    pub lead_h: u32,
    pub hres: Option<f64>,
    pub ctrl: f64,
    /// The 50 exchangeable members, `None` when the run is missing.
    pub members: Option<Vec<f64>>,
}

impl ForecastRecord {
    pub fn valid_time(&self) -> NaiveDateTime {
        self.init_time + Duration::hours(i64::from(self.lead_h))
    }

    pub fn validate(&self) -> Result<()> {
        if self.lead_h == 0 || self.lead_h % 6 != 0 {
            return Err(Error::Invalid(format!(
                "lead time {} h is not a positive multiple of 6",
                self.lead_h
            )));
        }
        if let Some(m) = &self.members {
            if m.len() != N_MEMBERS {
                return Err(Error::Invalid(format!(
                    "expected {N_MEMBERS} members, got {}",
                    m.len()
                )));
            }
        }
        let all = self
            .hres
            .iter()
            .chain(std::iter::once(&self.ctrl))
            .chain(self.members.iter().flatten());
        for &v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Invalid(format!("forecast value {v} is not a non-negative number")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub station_id: String,
    pub valid_time: NaiveDateTime,
    pub visibility_class: ClassIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub station_id: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastCase {
    pub forecast: ForecastRecord,
    pub observation: ObservationRecord,
    /// Day of the year of the valid time, always on a 365-day calendar.
    pub day_of_year: u32,
}

impl ForecastCase {
    pub fn station_id(&self) -> &str {
        &self.forecast.station_id
    }

    pub fn valid_time(&self) -> NaiveDateTime {
        self.observation.valid_time
    }

    pub fn observed(&self) -> ClassIndex {
        self.observation.visibility_class
    }
}

/// Day of the year in 1..=365. In leap years Feb 29 shares day 59 with Feb 28
/// and later days shift down by one, so Dec 31 is always 365.
pub fn day_of_year(date: NaiveDate) -> u32 {
    let ord = date.ordinal();
    if date.leap_year() && ord >= 60 {
        ord - 1
    } else {
        ord
    }
}

pub fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_time(t: NaiveDateTime) -> String {
    t.format(TIME_FORMAT).to_string()
}

fn forecast_header() -> Vec<String> {
    let mut h: Vec<String> = ["station_id", "init_time", "lead_h", "hres", "ctrl"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=N_MEMBERS).map(|i| format!("m{i:02}")));
    h
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, path: &Path, expected: &[String]) -> Result<()> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    for (i, col) in got.iter().enumerate() {
        match expected.get(i) {
            Some(e) if e == col => {}
            Some(e) => {
                return Err(Error::Parse {
                    path: path.into(),
                    row: 0,
                    msg: format!("column {} is `{col}`, expected `{e}`", i + 1),
                })
            }
            None => {
                return Err(Error::Parse {
                    path: path.into(),
                    row: 0,
                    msg: format!("unknown column `{col}`"),
                })
            }
        }
    }
    if got.len() < expected.len() {
        return Err(Error::Parse {
            path: path.into(),
            row: 0,
            msg: format!("missing column `{}`", expected[got.len()]),
        });
    }
    Ok(())
}

struct RowCtx<'a> {
    path: &'a Path,
    row: usize,
}

impl RowCtx<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.path.into(), row: self.row, msg: msg.into() }
    }

    fn meters(&self, cell: &str, name: &str) -> Result<f64> {
        let v: f64 = cell
            .trim()
            .parse()
            .map_err(|_| self.err(format!("{name}: `{cell}` is not a number")))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(self.err(format!("{name}: {v} is negative or not finite")));
        }
        Ok(v)
    }

    fn time(&self, cell: &str) -> Result<NaiveDateTime> {
        parse_time(cell).ok_or_else(|| self.err(format!("`{cell}` is not an ISO-8601 time")))
    }
}

pub fn load_forecasts(path: impl AsRef<Path>) -> Result<Vec<ForecastRecord>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let header = forecast_header();
    check_header(&mut reader, path, &header)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let ctx = RowCtx { path, row: i + 1 };
        if rec.len() != header.len() {
            return Err(ctx.err(format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let station_id = rec[0].trim().to_string();
        let init_time = ctx.time(&rec[1])?;
        let lead_h: u32 = rec[2]
            .trim()
            .parse()
            .map_err(|_| ctx.err(format!("lead_h: `{}` is not an integer", &rec[2])))?;
        let hres = match rec[3].trim() {
            "" => None,
            c => Some(ctx.meters(c, "hres")?),
        };
        let ctrl = ctx.meters(&rec[4], "ctrl")?;
        let cells: Vec<&str> = (5..5 + N_MEMBERS).map(|j| rec[j].trim()).collect();
        let members = if cells.iter().all(|c| c.is_empty()) {
            None
        } else {
            let mut m = Vec::with_capacity(N_MEMBERS);
            for (j, c) in cells.iter().enumerate() {
                if c.is_empty() {
                    return Err(ctx.err(format!("member m{:02} is empty", j + 1)));
                }
                m.push(ctx.meters(c, &header[5 + j])?);
            }
            Some(m)
        };
        let record = ForecastRecord { station_id, init_time, lead_h, hres, ctrl, members };
        record.validate().map_err(|e| ctx.err(e.to_string()))?;
        if !seen.insert((record.station_id.clone(), record.init_time, record.lead_h)) {
            return Err(ctx.err("duplicate (station_id, init_time, lead_h) key"));
        }
        out.push(record);
    }
    Ok(out)
}

/// Loads observations, rounding each value down onto the reporting scale.
/// Rows with an empty visibility cell are treated as missing and skipped.
pub fn load_observations(path: impl AsRef<Path>) -> Result<Vec<ObservationRecord>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let header: Vec<String> = ["station_id", "valid_time", "visibility_m"].map(String::from).to_vec();
    check_header(&mut reader, path, &header)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let ctx = RowCtx { path, row: i + 1 };
        if rec.len() != header.len() {
            return Err(ctx.err(format!("expected 3 fields, found {}", rec.len())));
        }
        if rec[2].trim().is_empty() {
            continue;
        }
        let station_id = rec[0].trim().to_string();
        let valid_time = ctx.time(&rec[1])?;
        let v = ctx.meters(&rec[2], "visibility_m")?;
        let visibility_class = round_down(v).map_err(|e| ctx.err(e.to_string()))?;
        if !seen.insert((station_id.clone(), valid_time)) {
            return Err(ctx.err("duplicate (station_id, valid_time) key"));
        }
        out.push(ObservationRecord { station_id, valid_time, visibility_class });
    }
    Ok(out)
}

pub fn load_stations(path: impl AsRef<Path>) -> Result<Vec<StationMeta>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let header: Vec<String> = ["station_id", "lat", "lon"].map(String::from).to_vec();
    check_header(&mut reader, path, &header)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let ctx = RowCtx { path, row: i + 1 };
        if rec.len() != header.len() {
            return Err(ctx.err(format!("expected 3 fields, found {}", rec.len())));
        }
        let station_id = rec[0].trim().to_string();
        let parse = |c: &str, name: &str, bound: f64| -> Result<f64> {
            let v: f64 = c.trim().parse().map_err(|_| ctx.err(format!("{name}: `{c}` is not a number")))?;
            if v.abs() > bound {
                return Err(ctx.err(format!("{name} {v} outside ±{bound}")));
            }
            Ok(v)
        };
        let latitude = parse(&rec[1], "lat", 90.0)?;
        let longitude = parse(&rec[2], "lon", 180.0)?;
        if !seen.insert(station_id.clone()) {
            return Err(ctx.err(format!("duplicate station `{station_id}`")));
        }
        out.push(StationMeta { station_id, latitude, longitude });
    }
    Ok(out)
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn flush<W: Write>(w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn write_forecasts(path: impl AsRef<Path>, forecasts: &[ForecastRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(forecast_header())?;
    for f in forecasts {
        let mut row = vec![
            f.station_id.clone(),
            format_time(f.init_time),
            f.lead_h.to_string(),
            f.hres.map(|v| v.to_string()).unwrap_or_default(),
            f.ctrl.to_string(),
        ];
        match &f.members {
            Some(m) => row.extend(m.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), N_MEMBERS)),
        }
        w.write_record(&row)?;
    }
    flush(w, path)
}

/// Writes observations as the metre value of their class.
pub fn write_observations(path: impl AsRef<Path>, observations: &[ObservationRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["station_id", "valid_time", "visibility_m"])?;
    for o in observations {
        w.write_record([
            o.station_id.clone(),
            format_time(o.valid_time),
            o.visibility_class.value().to_string(),
        ])?;
    }
    flush(w, path)
}

pub fn write_stations(path: impl AsRef<Path>, stations: &[StationMeta]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["station_id", "lat", "lon"])?;
    for s in stations {
        w.write_record([s.station_id.clone(), s.latitude.to_string(), s.longitude.to_string()])?;
    }
    flush(w, path)
}

#[derive(Debug, Clone, Default)]
pub struct JoinOutcome {
    pub cases: Vec<ForecastCase>,
    pub dropped_no_observation: usize,
    pub dropped_no_members: usize,
    pub drops_by_station: BTreeMap<String, usize>,
}

impl JoinOutcome {
    pub fn dropped(&self) -> usize {
        self.dropped_no_observation + self.dropped_no_members
    }
}

/// Inner join of forecasts and observations on (station, valid time).
/// Forecasts without a matching observation or without exchangeable members
/// are dropped and counted; the output keeps the forecast order.
pub fn join_cases(forecasts: &[ForecastRecord], observations: &[ObservationRecord]) -> JoinOutcome {
    let index: HashMap<(&str, NaiveDateTime), &ObservationRecord> = observations
        .iter()
        .map(|o| ((o.station_id.as_str(), o.valid_time), o))
        .collect();
    let mut out = JoinOutcome::default();
    for f in forecasts {
        let obs = index.get(&(f.station_id.as_str(), f.valid_time()));
        let dropped = match (obs, &f.members) {
            (None, _) => {
                out.dropped_no_observation += 1;
                true
            }
            (Some(_), None) => {
                out.dropped_no_members += 1;
                true
            }
            (Some(o), Some(_)) => {
                out.cases.push(ForecastCase {
                    forecast: f.clone(),
                    observation: (*o).clone(),
                    day_of_year: day_of_year(o.valid_time.date()),
                });
                false
            }
        };
        if dropped {
            *out.drops_by_station.entry(f.station_id.clone()).or_default() += 1;
        }
    }
    for (station, n) in &out.drops_by_station {
        log::info!("station {station}: dropped {n} incomplete forecast cases");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> NaiveDateTime {
        parse_time(s).unwrap()
    }

    fn forecast(station: &str, init: &str, lead: u32, v: f64) -> ForecastRecord {
        ForecastRecord {
            station_id: station.into(),
            init_time: t(init),
            lead_h: lead,
            hres: None,
            ctrl: v,
            members: Some(vec![v; N_MEMBERS]),
        }
    }

    fn obs(station: &str, valid: &str, k: usize) -> ObservationRecord {
        ObservationRecord {
            station_id: station.into(),
            valid_time: t(valid),
            visibility_class: ClassIndex::new(k).unwrap(),
        }
    }

    fn write_file(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn day_of_year_uses_365_day_calendar() {
        let d = |y, m, dd| NaiveDate::from_ymd_opt(y, m, dd).unwrap();
        assert_eq!(day_of_year(d(2021, 1, 1)), 1);
        assert_eq!(day_of_year(d(2021, 12, 31)), 365);
        assert_eq!(day_of_year(d(2020, 2, 28)), 59);
        assert_eq!(day_of_year(d(2020, 2, 29)), 59);
        assert_eq!(day_of_year(d(2020, 3, 1)), 60);
        assert_eq!(day_of_year(d(2020, 12, 31)), 365);
    }

    #[test]
    fn observation_rounds_down_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "obs.csv",
            "station_id,valid_time,visibility_m\nA,2021-01-01T06:00:00Z,5500\nA,2021-01-01T12:00:00Z,\n",
        );
        let o = load_observations(&p).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o[0].visibility_class.value(), 5000.0);
    }

    #[test]
    fn empty_files_load_empty() {
        let dir = tempfile::tempdir().unwrap();
        let header = forecast_header().join(",") + "\n";
        let p = write_file(dir.path(), "f.csv", &header);
        assert!(load_forecasts(&p).unwrap().is_empty());
        let p = write_file(dir.path(), "o.csv", "station_id,valid_time,visibility_m\n");
        assert!(load_observations(&p).unwrap().is_empty());
    }

    #[test]
    fn short_member_row_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = forecast_header().join(",") + "\n";
        let good: Vec<String> = std::iter::repeat_n("1000".to_string(), 50).collect();
        body += &format!("A,2021-01-01T00:00:00Z,6,,1000,{}\n", good.join(","));
        body += &format!("A,2021-01-01T00:00:00Z,12,,1000,{}\n", good[..49].join(","));
        let p = write_file(dir.path(), "f.csv", &body);
        match load_forecasts(&p) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_column_and_duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "s.csv", "station_id,lat,lon,alt\nA,50,10,100\n");
        assert!(load_stations(&p).is_err());
        let p = write_file(
            dir.path(),
            "o.csv",
            "station_id,valid_time,visibility_m\nA,2021-01-01T06:00:00Z,100\nA,2021-01-01T06:00:00Z,200\n",
        );
        assert!(matches!(load_observations(&p), Err(Error::Parse { row: 2, .. })));
        let p = write_file(dir.path(), "s2.csv", "station_id,lat,lon\nA,95,10\n");
        assert!(load_stations(&p).is_err());
    }

    #[test]
    fn missing_members_are_absent_not_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = forecast_header().join(",") + "\n";
        body += &format!("A,2021-01-01T00:00:00Z,6,1200,1000{}\n", ",".repeat(50));
        let p = write_file(dir.path(), "f.csv", &body);
        let f = load_forecasts(&p).unwrap();
        assert_eq!(f[0].members, None);
        assert_eq!(f[0].hres, Some(1200.0));
    }

    #[test]
    fn join_counts_drops() {
        let fc: Vec<_> = (0..10)
            .map(|d| forecast("A", &format!("2021-01-{:02}T00:00:00Z", d + 1), 6, 1000.0))
            .collect();
        let ob: Vec<_> = (0..9)
            .map(|d| obs("A", &format!("2021-01-{:02}T06:00:00Z", d + 1), 10))
            .collect();
        let j = join_cases(&fc, &ob);
        assert_eq!(j.cases.len(), 9);
        assert_eq!(j.dropped(), 1);
        assert_eq!(j.drops_by_station["A"], 1);
        assert_eq!(j.cases[0].day_of_year, 1);

        let mut no_members = fc[0].clone();
        no_members.members = None;
        let j = join_cases(&[no_members], &ob);
        assert!(j.cases.is_empty());
        assert_eq!(j.dropped_no_members, 1);

        let other: Vec<_> = ob.iter().map(|o| ObservationRecord { station_id: "B".into(), ..o.clone() }).collect();
        assert!(join_cases(&fc, &other).cases.is_empty());
    }

    proptest! {
        #[test]
        fn cases_survive_round_trip(
            vals in proptest::collection::vec(0.0f64..90_000.0, 52),
            obs_m in 0.0f64..80_000.0,
            lead in 1u32..20,
            with_hres in any::<bool>(),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let f = ForecastRecord {
                station_id: "S1".into(),
                init_time: t("2021-03-04T00:00:00Z"),
                lead_h: lead * 6,
                hres: with_hres.then_some(vals[51]),
                ctrl: vals[50],
                members: Some(vals[..50].to_vec()),
            };
            let o = ObservationRecord {
                station_id: "S1".into(),
                valid_time: f.valid_time(),
                visibility_class: round_down(obs_m).unwrap(),
            };
            let before = join_cases(std::slice::from_ref(&f), std::slice::from_ref(&o)).cases;
            write_forecasts(dir.path().join("f.csv"), &[f]).unwrap();
            write_observations(dir.path().join("o.csv"), &[o]).unwrap();
            let f2 = load_forecasts(dir.path().join("f.csv")).unwrap();
            let o2 = load_observations(dir.path().join("o.csv")).unwrap();
            let after = join_cases(&f2, &o2).cases;
            prop_assert_eq!(before, after);
        }
    }

    #[test]
    fn join_never_exceeds_inputs() {
        let fc = vec![forecast("A", "2021-01-01T00:00:00Z", 6, 10.0), forecast("A", "2021-01-01T00:00:00Z", 12, 10.0)];
        let ob = vec![obs("A", "2021-01-01T06:00:00Z", 3)];
        let j = join_cases(&fc, &ob);
        assert!(j.cases.len() <= fc.len().min(ob.len()));
    }
}
