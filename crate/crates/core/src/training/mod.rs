//! Rolling-window experiments: per-lead-time model fits under local,
//! semi-local (k-means clusters) and regional pooling, plus the climatology
//! and raw-ensemble reference forecasts for every verified case.
//!
//! A target date is an initialization date. Its training set holds the cases
//! of the same lead time whose valid date falls inside the window of
//! `training_length_days` days ending the day before the target.

pub mod cluster;
pub mod reference;
pub mod window;

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cluster::{climatology_features, kmeans_clusters};
pub use reference::{climatology_forecast, raw_ensemble_distribution};
pub use window::{rolling_windows, RollingWindow, TrainingWindow};

use crate::data::{join_cases, ForecastCase, ForecastRecord, ObservationRecord};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig, FeatureVector};
use crate::mlp::{mlp_forward, train_mlp, MlpArchitecture, MlpDocument, MlpParams, MlpTrainConfig};
use crate::polr::{fit_polr, polr_pmf, PolrDocument, PolrFitConfig, PolrParams};
use crate::rng::{derive_seed, hash_str};
use crate::scale::{ClassIndex, N_CLASSES};
use crate::verification::{Prediction, PredictiveDistribution};

const CLUSTER_STREAM: u64 = 0xc1;
const MLP_STREAM: u64 = 0x31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Polr,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Polr => "polr",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polr" => Ok(ModelKind::Polr),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::Invalid(format!("unknown model `{s}` (expected polr or mlp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Local,
    SemiLocal,
    Regional,
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(SchemeKind::Local),
            "semi_local" | "semilocal" | "semi-local" => Ok(SchemeKind::SemiLocal),
            "regional" => Ok(SchemeKind::Regional),
            _ => Err(Error::Invalid(format!("unknown scheme `{s}` (expected local, semi_local or regional)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpatialScheme {
    pub kind: SchemeKind,
    /// Initial number of clusters for the semi-local scheme.
    pub n_clusters: usize,
    pub min_cluster_size: usize,
}

impl Default for SpatialScheme {
    fn default() -> Self {
        SpatialScheme { kind: SchemeKind::Local, n_clusters: 4, min_cluster_size: 4 }
    }
}

impl SpatialScheme {
    pub fn local() -> Self {
        Self::default()
    }

    pub fn regional() -> Self {
        SpatialScheme { kind: SchemeKind::Regional, ..Self::default() }
    }

    pub fn semi_local(n_clusters: usize) -> Self {
        SpatialScheme { kind: SchemeKind::SemiLocal, n_clusters, ..Self::default() }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            SchemeKind::Local => "local",
            SchemeKind::SemiLocal => "semilocal",
            SchemeKind::Regional => "regional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub scheme: SpatialScheme,
    pub training_length_days: u32,
    pub climatology_length_days: u32,
    /// Build the climatology from observations at the valid time's UTC hour only.
    pub climatology_same_hour: bool,
    /// Lead times to process; empty means all lead times in the data.
    pub lead_times_h: Vec<u32>,
    /// First and last target dates; by default the first date with a full
    /// training window and the last initialization date in the data.
    pub verification_start: Option<NaiveDate>,
    pub verification_end: Option<NaiveDate>,
    /// Refit every n target dates; predictions in between use the latest fit.
    pub refit_every_days: u32,
    pub features: FeatureConfig,
    /// Hold the forecast-level covariates to a non-negative visibility effect.
    pub sign_constraint: bool,
    pub polr: PolrFitConfig,
    /// The seed field is ignored; each fit derives its own from `seed`.
    pub mlp: MlpTrainConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::Polr,
            scheme: SpatialScheme::default(),
            training_length_days: 350,
            climatology_length_days: 30,
            climatology_same_hour: true,
            lead_times_h: Vec::new(),
            verification_start: None,
            verification_end: None,
            refit_every_days: 1,
            features: FeatureConfig::default(),
            sign_constraint: true,
            polr: PolrFitConfig::default(),
            mlp: MlpTrainConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.mlp.validate()?;
        let fail = |m: String| Err(Error::Invalid(format!("experiment config: {m}")));
        if self.training_length_days == 0 || self.climatology_length_days == 0 {
            return fail("window lengths must be positive".into());
        }
        if self.refit_every_days == 0 {
            return fail("refit_every_days must be positive".into());
        }
        if self.scheme.n_clusters == 0 || self.scheme.min_cluster_size == 0 {
            return fail("n_clusters and min_cluster_size must be positive".into());
        }
        if let (Some(a), Some(b)) = (self.verification_start, self.verification_end) {
            if a > b {
                return fail(format!("verification period {a}..{b} is empty"));
            }
        }
        Ok(())
    }

    fn polr_fit_config(&self) -> PolrFitConfig {
        let constrained = if self.sign_constraint { self.features.forecast_level_indices() } else { Vec::new() };
        PolrFitConfig { n_classes: N_CLASSES, constrained_nonnegative: constrained, ..self.polr.clone() }
    }
}

/// The set of stations a fit is responsible for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    Station(String),
    Cluster(usize),
    Regional,
}

impl Scope {
    pub fn label(&self) -> String {
        match self {
            Scope::Station(s) => s.clone(),
            Scope::Cluster(c) => format!("c{c}"),
            Scope::Regional => "all".into(),
        }
    }

    fn seed_key(&self) -> u64 {
        match self {
            Scope::Station(s) => hash_str(s),
            Scope::Cluster(c) => *c as u64,
            Scope::Regional => 0,
        }
    }
}

/// One model fit and the cases it predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTask {
    pub fit_date: NaiveDate,
    pub window: TrainingWindow,
    pub lead_h: u32,
    pub scope: Scope,
    /// Stations whose cases form the training pool.
    pool: Vec<usize>,
    /// Case indices predicted with this fit.
    targets: Vec<usize>,
}

impl FitTask {
    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Polr(PolrParams),
    Mlp(MlpParams),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Polr(_) => ModelKind::Polr,
            FittedModel::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<PredictiveDistribution> {
        match self {
            FittedModel::Polr(p) => polr_pmf(p, x),
            FittedModel::Mlp(p) => mlp_forward(p, x),
        }
    }

    pub fn to_json(&self, features: &FeatureConfig) -> Result<String> {
        let s = match self {
            FittedModel::Polr(p) => serde_json::to_string_pretty(&PolrDocument::new(p, features))?,
            FittedModel::Mlp(p) => serde_json::to_string_pretty(&MlpDocument::new(p, features))?,
        };
        Ok(s)
    }

    /// Parses a parameter document and checks it against the expected
    /// feature layout.
    pub fn from_json(s: &str, features: &FeatureConfig) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let (model, doc_features) = match value.get("model").and_then(|m| m.as_str()) {
            Some("polr") => {
                let doc: PolrDocument = serde_json::from_value(value)?;
                (FittedModel::Polr(doc.params()?), doc.features)
            }
            Some("mlp") => {
                let doc: MlpDocument = serde_json::from_value(value)?;
                (FittedModel::Mlp(doc.params()?), doc.features)
            }
            other => return Err(Error::Invalid(format!("unknown model document {other:?}"))),
        };
        if &doc_features != features {
            return Err(Error::Invalid("parameter document was fitted with a different feature layout".into()));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub fit_date: NaiveDate,
    pub lead_h: u32,
    pub scope: String,
    pub message: String,
}

/// Model and reference forecasts for one verified case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseForecast {
    pub station_id: String,
    pub init_time: NaiveDateTime,
    pub lead_h: u32,
    pub obs_class: ClassIndex,
    pub model: PredictiveDistribution,
    pub climatology: PredictiveDistribution,
    pub raw: PredictiveDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastSource {
    Model,
    Climatology,
    Raw,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    /// Sorted by station, initialization time and lead time.
    pub cases: Vec<CaseForecast>,
    pub failures: Vec<FitFailure>,
    pub n_tasks: usize,
    /// Cases skipped because the station had no observations in the
    /// climatology window.
    pub dropped_no_climatology: usize,
}

impl ExperimentOutput {
    pub fn predictions(&self, source: ForecastSource) -> Vec<Prediction> {
        self.cases
            .iter()
            .map(|c| Prediction {
                station_id: c.station_id.clone(),
                init_time: c.init_time,
                lead_h: c.lead_h,
                obs_class: c.obs_class,
                pmf: match source {
                    ForecastSource::Model => c.model.clone(),
                    ForecastSource::Climatology => c.climatology.clone(),
                    ForecastSource::Raw => c.raw.clone(),
                },
            })
            .collect()
    }
}

/// Prepared data for an experiment: joined cases in canonical order with
/// their features, and per-station observation series.
pub struct Experiment {
    cfg: ExperimentConfig,
    stations: Vec<String>,
    cases: Vec<ForecastCase>,
    features: Vec<FeatureVector>,
    /// Case indices per (station, lead), ordered by initialization time.
    series: HashMap<(usize, u32), Vec<usize>>,
    observations: Vec<ObservationRecord>,
    obs_by_station: Vec<Vec<(NaiveDateTime, ClassIndex)>>,
    leads: Vec<u32>,
    targets: Vec<NaiveDate>,
}

fn day_key(d: NaiveDate) -> u64 {
    d.num_days_from_ce() as u64
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig, forecasts: &[ForecastRecord], observations: &[ObservationRecord]) -> Result<Self> {
        cfg.validate()?;
        let joined = join_cases(forecasts, observations);
        let mut cases = joined.cases;
        if !cfg.lead_times_h.is_empty() {
            cases.retain(|c| cfg.lead_times_h.contains(&c.forecast.lead_h));
        }
        if cases.is_empty() {
            return Err(Error::Invalid("no forecast cases with observations and members".into()));
        }
        cases.sort_by(|a, b| {
            (a.station_id(), a.forecast.init_time, a.forecast.lead_h)
                .cmp(&(b.station_id(), b.forecast.init_time, b.forecast.lead_h))
        });
        if cases.windows(2).any(|w| {
            (w[0].station_id(), w[0].forecast.init_time, w[0].forecast.lead_h)
                == (w[1].station_id(), w[1].forecast.init_time, w[1].forecast.lead_h)
        }) {
            return Err(Error::Invalid("duplicate forecast cases".into()));
        }
        let features = cases
            .par_iter()
            .map(|c| extract_features(c, &cfg.features))
            .collect::<Result<Vec<_>>>()?;

        let mut stations: Vec<String> = cases.iter().map(|c| c.station_id().to_string()).collect();
        stations.extend(observations.iter().map(|o| o.station_id.clone()));
        stations.sort();
        stations.dedup();
        let station_index: HashMap<&str, usize> = stations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

        let mut series: HashMap<(usize, u32), Vec<usize>> = HashMap::new();
        for (i, c) in cases.iter().enumerate() {
            series.entry((station_index[c.station_id()], c.forecast.lead_h)).or_default().push(i);
        }
        let mut leads: Vec<u32> = cases.iter().map(|c| c.forecast.lead_h).collect();
        leads.sort_unstable();
        leads.dedup();

        let mut obs_by_station = vec![Vec::new(); stations.len()];
        for o in observations {
            obs_by_station[station_index[o.station_id.as_str()]].push((o.valid_time, o.visibility_class));
        }
        obs_by_station.iter_mut().for_each(|v| v.sort());

        let data_start = observations
            .iter()
            .map(|o| o.valid_time.date())
            .min()
            .ok_or_else(|| Error::Invalid("no observations".into()))?;
        let last_init = cases.iter().map(|c| c.forecast.init_time.date()).max().expect("non-empty");
        let start = cfg
            .verification_start
            .unwrap_or(data_start + Duration::days(i64::from(cfg.training_length_days)));
        let end = cfg.verification_end.unwrap_or(last_init);
        if start > end {
            return Err(Error::Invalid(format!(
                "no target dates: data end {last_init} precedes the first date with a full training window {start}"
            )));
        }
        let targets: Vec<NaiveDate> = start.iter_days().take_while(|d| *d <= end).collect();
        let windows = rolling_windows(&targets, cfg.training_length_days, Some(data_start))?;
        if let Some(bad) = windows.iter().find(|w| !w.feasible) {
            return Err(Error::Invalid(format!(
                "training window {}..{} for target {} starts before the data ({data_start})",
                bad.window.start, bad.window.end, bad.target
            )));
        }

        Ok(Experiment {
            cfg,
            stations,
            cases,
            features,
            series,
            observations: observations.to_vec(),
            obs_by_station,
            leads,
            targets,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn lead_times(&self) -> &[u32] {
        &self.leads
    }

    pub fn target_dates(&self) -> &[NaiveDate] {
        &self.targets
    }

    pub fn n_cases(&self) -> usize {
        self.cases.len()
    }

    fn fit_dates(&self) -> Vec<(NaiveDate, NaiveDate)> {
        let step = self.cfg.refit_every_days as usize;
        let last = *self.targets.last().expect("non-empty");
        self.targets
            .iter()
            .step_by(step)
            .map(|&d| (d, (d + Duration::days(step as i64 - 1)).min(last)))
            .collect()
    }

    /// Station groups for a fit date: `(scope, pool, predicted stations)`.
    fn scopes(&self, window: &TrainingWindow, fit_date: NaiveDate) -> Result<Vec<(Scope, Vec<usize>, Vec<usize>)>> {
        let all: Vec<usize> = (0..self.stations.len()).collect();
        Ok(match self.cfg.scheme.kind {
            SchemeKind::Regional => vec![(Scope::Regional, all.clone(), all)],
            SchemeKind::Local => all.iter().map(|&s| (Scope::Station(self.stations[s].clone()), vec![s], vec![s])).collect(),
            SchemeKind::SemiLocal => {
                let feats = climatology_features(&self.observations, window);
                let seed = derive_seed(self.cfg.seed, &[CLUSTER_STREAM, day_key(fit_date)]);
                let clusters = kmeans_clusters(&feats, self.cfg.scheme.n_clusters, self.cfg.scheme.min_cluster_size, seed)?;
                let index: BTreeMap<&str, usize> = self.stations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
                let mut out: Vec<(Scope, Vec<usize>, Vec<usize>)> = clusters
                    .iter()
                    .enumerate()
                    .map(|(c, members)| {
                        let idx: Vec<usize> = members.iter().map(|s| index[s.as_str()]).collect();
                        (Scope::Cluster(c), idx.clone(), idx)
                    })
                    .collect();
                let orphans: Vec<usize> = all.iter().copied().filter(|&s| !feats.contains_key(&self.stations[s])).collect();
                if !orphans.is_empty() {
                    log::warn!(
                        "{fit_date}: {} station(s) without observations in the window use the regional pool",
                        orphans.len()
                    );
                    out.push((Scope::Regional, all, orphans));
                }
                out
            }
        })
    }

    /// All fit tasks in a fixed order: by fit date, lead time, then scope.
    /// Tasks without cases to predict are omitted.
    pub fn plan(&self) -> Result<Vec<FitTask>> {
        let mut tasks = Vec::new();
        for (fit_date, last_date) in self.fit_dates() {
            let window = TrainingWindow::preceding(fit_date, self.cfg.training_length_days)?;
            let scopes = self.scopes(&window, fit_date)?;
            for &lead in &self.leads {
                for (scope, pool, predicted) in &scopes {
                    let targets: Vec<usize> = predicted
                        .iter()
                        .flat_map(|&s| self.cases_initialized(s, lead, fit_date, last_date))
                        .collect();
                    if !targets.is_empty() {
                        tasks.push(FitTask {
                            fit_date,
                            window,
                            lead_h: lead,
                            scope: scope.clone(),
                            pool: pool.clone(),
                            targets,
                        });
                    }
                }
            }
        }
        Ok(tasks)
    }

    fn series_range(&self, station: usize, lead: u32, key: impl Fn(&ForecastCase) -> NaiveDate, from: NaiveDate, to: NaiveDate) -> &[usize] {
        let Some(s) = self.series.get(&(station, lead)) else {
            return &[];
        };
        let lo = s.partition_point(|&i| key(&self.cases[i]) < from);
        let hi = s.partition_point(|&i| key(&self.cases[i]) <= to);
        &s[lo..hi.max(lo)]
    }

    fn cases_initialized(&self, station: usize, lead: u32, from: NaiveDate, to: NaiveDate) -> Vec<usize> {
        self.series_range(station, lead, |c| c.forecast.init_time.date(), from, to).to_vec()
    }

    fn training_indices<'a>(&'a self, task: &'a FitTask) -> impl Iterator<Item = usize> + 'a {
        task.pool
            .iter()
            .flat_map(|&s| self.series_range(s, task.lead_h, |c| c.valid_time().date(), task.window.start, task.window.end))
            .copied()
    }

    /// Training cases of a task in canonical order (station, then time).
    pub fn training_cases(&self, task: &FitTask) -> Vec<&ForecastCase> {
        self.training_indices(task).map(|i| &self.cases[i]).collect()
    }

    /// Cases predicted by a task.
    pub fn target_cases(&self, task: &FitTask) -> Vec<&ForecastCase> {
        task.targets.iter().map(|&i| &self.cases[i]).collect()
    }

    pub fn training_set(&self, task: &FitTask) -> Vec<(FeatureVector, ClassIndex)> {
        self.training_indices(task).map(|i| (self.features[i].clone(), self.cases[i].observed())).collect()
    }

    pub fn fit(&self, task: &FitTask) -> Result<FittedModel> {
        let data = self.training_set(task);
        if data.is_empty() {
            return Err(Error::Invalid("no training cases in the window".into()));
        }
        match self.cfg.model {
            ModelKind::Polr => fit_polr(&data, &self.cfg.polr_fit_config()).map(FittedModel::Polr),
            ModelKind::Mlp => {
                let seed = derive_seed(self.cfg.seed, &[MLP_STREAM, day_key(task.fit_date), u64::from(task.lead_h), task.scope.seed_key()]);
                let cfg = MlpTrainConfig { seed, ..self.cfg.mlp.clone() };
                train_mlp(&data, MlpArchitecture::for_features(&self.cfg.features), &cfg).map(FittedModel::Mlp)
            }
        }
    }

    fn climatology_for(&self, case: &ForecastCase) -> Option<PredictiveDistribution> {
        let station = self.stations.binary_search_by(|s| s.as_str().cmp(case.station_id())).ok()?;
        let window = TrainingWindow::preceding(case.forecast.init_time.date(), self.cfg.climatology_length_days).ok()?;
        let obs = &self.obs_by_station[station];
        let lo = obs.partition_point(|(t, _)| t.date() < window.start);
        let hi = obs.partition_point(|(t, _)| t.date() <= window.end);
        let hour = case.valid_time().hour();
        let classes = obs[lo..hi]
            .iter()
            .filter(|(t, _)| !self.cfg.climatology_same_hour || t.hour() == hour)
            .map(|&(_, k)| k);
        PredictiveDistribution::empirical(classes).ok()
    }

    /// Model and reference forecasts for the task's cases. Cases without a
    /// climatology are skipped; their count is returned alongside.
    pub fn predict(&self, task: &FitTask, model: &FittedModel) -> Result<(Vec<CaseForecast>, usize)> {
        let mut out = Vec::with_capacity(task.targets.len());
        let mut dropped = 0;
        for &i in &task.targets {
            let case = &self.cases[i];
            let Some(climatology) = self.climatology_for(case) else {
                dropped += 1;
                continue;
            };
            out.push(CaseForecast {
                station_id: case.station_id().to_string(),
                init_time: case.forecast.init_time,
                lead_h: case.forecast.lead_h,
                obs_class: case.observed(),
                model: model.predict(&self.features[i])?,
                climatology,
                raw: raw_ensemble_distribution(&case.forecast)?,
            });
        }
        Ok((out, dropped))
    }

    /// `{model}_{scheme}_{lead}_{scope}_{date}.json`
    pub fn param_file_name(&self, task: &FitTask) -> String {
        format!(
            "{}_{}_{}_{}_{}.json",
            self.cfg.model.name(),
            self.cfg.scheme.label(),
            task.lead_h,
            task.scope.label(),
            task.fit_date.format("%Y-%m-%d")
        )
    }

    fn failure(task: &FitTask, e: &Error) -> FitFailure {
        log::warn!("fit {} lead {} h scope {} failed: {e}", task.fit_date, task.lead_h, task.scope.label());
        FitFailure { fit_date: task.fit_date, lead_h: task.lead_h, scope: task.scope.label(), message: e.to_string() }
    }

    /// Runs every task given a way to obtain its model, in parallel, and
    /// assembles the output in canonical order.
    pub fn run_with<F>(&self, tasks: &[FitTask], model_for: F) -> Result<ExperimentOutput>
    where
        F: Fn(&FitTask) -> Result<FittedModel> + Sync,
    {
        let results: Vec<std::result::Result<(Vec<CaseForecast>, usize), FitFailure>> = tasks
            .par_iter()
            .map(|task| model_for(task).and_then(|m| self.predict(task, &m)).map_err(|e| Self::failure(task, &e)))
            .collect();
        let mut out = ExperimentOutput { n_tasks: tasks.len(), ..Default::default() };
        for r in results {
            match r {
                Ok((cases, dropped)) => {
                    out.cases.extend(cases);
                    out.dropped_no_climatology += dropped;
                }
                Err(f) => out.failures.push(f),
            }
        }
        out.cases.sort_by(|a, b| (&a.station_id, a.init_time, a.lead_h).cmp(&(&b.station_id, b.init_time, b.lead_h)));
        if out.dropped_no_climatology > 0 {
            log::warn!("{} case(s) skipped for lack of a climatology", out.dropped_no_climatology);
        }
        Ok(out)
    }

    pub fn run(&self) -> Result<ExperimentOutput> {
        let tasks = self.plan()?;
        self.run_with(&tasks, |t| self.fit(t))
    }
}

/// Plans, fits and predicts a whole experiment.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    forecasts: &[ForecastRecord],
    observations: &[ObservationRecord],
) -> Result<ExperimentOutput> {
    Experiment::new(cfg.clone(), forecasts, observations)?.run()
}
