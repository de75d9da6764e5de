use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use viscal::data::sim::simulate_dataset;
use viscal::data::{load_forecasts, load_observations, write_forecasts, write_observations, write_stations};
use viscal::training::{Experiment, FitFailure, FittedModel, ForecastSource, ModelKind, SchemeKind};
use viscal::verification::{aggregate_report, read_predictions, write_predictions, Prediction, ScoreReport};
use viscal::Error;

use crate::config::RunConfig;
use crate::layout::Layout;

pub const CLIMATOLOGY: &str = "climatology";
pub const RAW: &str = "raw";

/// Settings shared by all subcommands after flag overrides.
pub struct RunContext {
    pub cfg: RunConfig,
    pub layout: Layout,
    pub seed: Option<u64>,
    pub model: Option<ModelKind>,
    pub scheme: Option<SchemeKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure,
}

fn require_seed(ctx: &RunContext) -> Result<u64> {
    ctx.seed.or(ctx.cfg.seed).ok_or_else(|| Error::Invalid("a seed is required (--seed or `seed` in the config)".into()).into())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    Ok(sha256_hex(&bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.to_path_buf(), e))?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    config_sha256: String,
    n_stations: usize,
    n_forecasts: usize,
    n_observations: usize,
    files: BTreeMap<String, String>,
}

pub fn simulate(ctx: &RunContext) -> Result<Outcome> {
    let seed = require_seed(ctx)?;
    let sim = &ctx.cfg.simulation;
    sim.validate()?;
    let data = simulate_dataset(sim, seed)?;
    let dir = ctx.layout.data()?;
    let files = [
        ("forecasts.csv", dir.join("forecasts.csv")),
        ("observations.csv", dir.join("observations.csv")),
        ("stations.csv", dir.join("stations.csv")),
    ];
    write_forecasts(&files[0].1, &data.forecasts)?;
    write_observations(&files[1].1, &data.observations)?;
    write_stations(&files[2].1, &data.stations)?;

    let config_json = serde_json::to_string(sim).map_err(Error::from)?;
    let mut hashes = BTreeMap::new();
    for (name, path) in &files {
        hashes.insert(name.to_string(), file_sha256(path)?);
    }
    let manifest = Manifest {
        seed,
        config_sha256: sha256_hex(config_json.as_bytes()),
        n_stations: data.stations.len(),
        n_forecasts: data.forecasts.len(),
        n_observations: data.observations.len(),
        files: hashes,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    log::info!(
        "simulated {} stations, {} forecasts, {} observations into {}",
        manifest.n_stations,
        manifest.n_forecasts,
        manifest.n_observations,
        dir.display()
    );
    Ok(Outcome::Success)
}

fn experiment(ctx: &RunContext, seed: u64) -> Result<Experiment> {
    let mut cfg = ctx.cfg.experiment.clone();
    cfg.seed = seed;
    if let Some(m) = ctx.model {
        cfg.model = m;
    }
    if let Some(s) = ctx.scheme {
        cfg.scheme.kind = s;
    }
    let fpath = ctx.layout.forecasts_csv(&ctx.cfg);
    let opath = ctx.layout.observations_csv(&ctx.cfg);
    let forecasts = load_forecasts(&fpath)?;
    let observations = load_observations(&opath)?;
    log::info!("loaded {} forecasts and {} observations", forecasts.len(), observations.len());
    Ok(Experiment::new(cfg, &forecasts, &observations)?)
}

fn run_tag(exp: &Experiment) -> String {
    let cfg = exp.config();
    format!("{}_{}", cfg.model.name(), cfg.scheme.label())
}

fn report_failures(path: &Path, failures: &[FitFailure], n_tasks: usize) -> Result<Outcome> {
    write_json(path, &failures)?;
    if failures.is_empty() {
        return Ok(Outcome::Success);
    }
    log::warn!("{} of {n_tasks} fit tasks failed; see {}", failures.len(), path.display());
    Ok(Outcome::PartialFailure)
}

pub fn train(ctx: &RunContext) -> Result<Outcome> {
    let seed = require_seed(ctx)?;
    let exp = experiment(ctx, seed)?;
    let tasks = exp.plan()?;
    let dir = ctx.layout.params()?;
    log::info!("fitting {} tasks", tasks.len());
    let fits: Vec<viscal::Result<FittedModel>> = tasks.par_iter().map(|t| exp.fit(t)).collect();

    let mut failures = Vec::new();
    for (task, fit) in tasks.iter().zip(fits) {
        let path = dir.join(exp.param_file_name(task));
        match fit {
            Ok(model) => {
                let mut text = model.to_json(&exp.config().features)?;
                text.push('\n');
                fs::write(&path, text).map_err(|e| Error::io(path.clone(), e))?;
            }
            Err(e) => {
                // never leave a stale fit from an earlier run behind
                if path.exists() {
                    fs::remove_file(&path).map_err(|e| Error::io(path.clone(), e))?;
                }
                failures.push(FitFailure {
                    fit_date: task.fit_date,
                    lead_h: task.lead_h,
                    scope: task.scope.label(),
                    message: e.to_string(),
                });
            }
        }
    }
    log::info!("wrote {} parameter files to {}", tasks.len() - failures.len(), dir.display());
    report_failures(&dir.join(format!("failures_train_{}.json", run_tag(&exp))), &failures, tasks.len())
}

pub fn predict(ctx: &RunContext) -> Result<Outcome> {
    let seed = require_seed(ctx)?;
    let exp = experiment(ctx, seed)?;
    let tasks = exp.plan()?;
    let params = ctx.layout.params()?;
    let features = exp.config().features.clone();
    let out = exp.run_with(&tasks, |task| {
        let path = params.join(exp.param_file_name(task));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(path.clone(), e))?;
        let model = FittedModel::from_json(&text, &features)?;
        if model.kind() != exp.config().model {
            return Err(Error::Invalid(format!("{} holds a {} model", path.display(), model.kind().name())));
        }
        Ok(model)
    })?;
    let dir = ctx.layout.predictions()?;
    let tag = run_tag(&exp);
    write_predictions(dir.join(format!("{tag}.csv")), &out.predictions(ForecastSource::Model))?;
    write_predictions(dir.join(format!("{CLIMATOLOGY}.csv")), &out.predictions(ForecastSource::Climatology))?;
    write_predictions(dir.join(format!("{RAW}.csv")), &out.predictions(ForecastSource::Raw))?;
    log::info!("wrote {} predicted cases for {tag}", out.cases.len());
    report_failures(&dir.join(format!("failures_predict_{tag}.json")), &out.failures, out.n_tasks)
}

type Key = (String, chrono::NaiveDateTime, u32);

fn key(p: &Prediction) -> Key {
    (p.station_id.clone(), p.init_time, p.lead_h)
}

/// Restricts every forecast set to the cases present in all of them.
fn align(sets: &mut [(String, Vec<Prediction>)]) {
    let mut common: BTreeSet<Key> = sets[0].1.iter().map(key).collect();
    for (_, preds) in sets.iter().skip(1) {
        let keys: BTreeSet<Key> = preds.iter().map(key).collect();
        common.retain(|k| keys.contains(k));
    }
    for (name, preds) in sets.iter_mut() {
        let before = preds.len();
        preds.retain(|p| common.contains(&key(p)));
        if preds.len() < before {
            log::warn!("{name}: {} case(s) not shared by all forecast sets left out", before - preds.len());
        }
    }
}

pub fn verify(ctx: &RunContext) -> Result<Outcome> {
    let dir = ctx.layout.predictions()?;
    let prefix = ctx.model.map(ModelKind::name);
    let scheme = ctx.scheme.map(|s| viscal::training::SpatialScheme { kind: s, ..Default::default() }.label());
    let mut model_files = Vec::new();
    let entries = fs::read_dir(&dir).map_err(|e| Error::io(dir.clone(), e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir.clone(), e))?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
        if path.extension().and_then(|e| e.to_str()) != Some("csv") || stem == CLIMATOLOGY || stem == RAW {
            continue;
        }
        let mut parts = stem.splitn(2, '_');
        let (m, s) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        if prefix.is_some_and(|p| p != m) || scheme.is_some_and(|sc| sc != s) {
            continue;
        }
        model_files.push((stem, path));
    }
    model_files.sort();
    if model_files.is_empty() {
        return Err(Error::Invalid(format!("no model predictions found in {}", dir.display())).into());
    }

    let mut sets = Vec::new();
    for (name, path) in &model_files {
        sets.push((name.clone(), read_predictions(path)?));
    }
    let n_models = sets.len();
    for name in [CLIMATOLOGY, RAW] {
        sets.push((name.to_string(), read_predictions(dir.join(format!("{name}.csv")))?));
    }
    align(&mut sets);
    let references = sets.split_off(n_models);

    let mut report_cfg = ctx.cfg.report.clone();
    if let Some(seed) = ctx.seed.or(ctx.cfg.seed) {
        report_cfg.bootstrap.seed = seed;
    }
    let report = aggregate_report(&sets, &references, &report_cfg)?;
    let out = ctx.layout.verification()?;
    report.write_csv(out.join("scores.csv"))?;
    report.write_json(out.join("scores.json"))?;
    report.write_pit_csv(out.join("pit.csv"))?;
    log::info!("verified {} forecast set(s) into {}", sets.len() + references.len(), out.display());
    Ok(Outcome::Success)
}

fn lead_label(lead: Option<u32>) -> String {
    lead.map_or_else(|| "all".into(), |l| l.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path.to_path_buf(), e))?;
    Ok(())
}

/// Percentage of a model's mean score relative to a reference.
pub fn ratio_pct(score: f64, reference: f64) -> f64 {
    100.0 * score / reference
}

pub fn report(ctx: &RunContext) -> Result<Outcome> {
    let src = ctx.layout.root_file("verification/scores.json");
    let text = fs::read_to_string(&src).map_err(|e| Error::io(src.clone(), e))?;
    let scores: ScoreReport = serde_json::from_str(&text).map_err(Error::from).context("parsing scores.json")?;
    let dir = ctx.layout.report()?;

    let path = dir.join("score_curves.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["lead_h", "model", "mean_crps", "mean_logs", "coverage90", "mean_width", "rmse_mean", "n_cases"])
        .map_err(Error::from)?;
    for r in &scores.rows {
        w.write_record([
            lead_label(r.lead_h),
            r.model.clone(),
            r.mean_crps.to_string(),
            r.mean_logs.to_string(),
            r.coverage.to_string(),
            r.mean_width.to_string(),
            r.rmse_mean.to_string(),
            r.n_cases.to_string(),
        ])
        .map_err(Error::from)?;
    }
    finish(w, &path)?;

    let path = dir.join("skill_curves.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["lead_h", "model", "reference", "crpss", "crpss_lo", "crpss_hi", "logss", "logss_lo", "logss_hi"])
        .map_err(Error::from)?;
    for r in &scores.rows {
        for s in r.skills.iter().filter(|s| s.reference != r.model) {
            let mut rec = vec![lead_label(r.lead_h), r.model.clone(), s.reference.clone()];
            rec.extend([s.crpss, s.crpss_lo, s.crpss_hi, s.logss, s.logss_lo, s.logss_hi].map(|v| v.to_string()));
            w.write_record(&rec).map_err(Error::from)?;
        }
    }
    finish(w, &path)?;

    let reference = ctx.cfg.ratio_reference.clone().unwrap_or_else(|| RAW.to_string());
    let path = dir.join("ratios.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["lead_h", "model", "reference", "crps_pct", "logs_pct"]).map_err(Error::from)?;
    println!("{:>6}  {:<24} {:>10} {:>10}", "lead_h", "model", "CRPS %", "LogS %");
    for r in &scores.rows {
        let Some(base) = scores.get(&reference, r.lead_h) else {
            return Err(Error::Invalid(format!("reference `{reference}` missing from the scores")).into());
        };
        let (c, l) = (ratio_pct(r.mean_crps, base.mean_crps), ratio_pct(r.mean_logs, base.mean_logs));
        w.write_record([lead_label(r.lead_h), r.model.clone(), reference.clone(), c.to_string(), l.to_string()])
            .map_err(Error::from)?;
        println!("{:>6}  {:<24} {:>10.2} {:>10.2}", lead_label(r.lead_h), r.model, c, l);
    }
    finish(w, &path)?;
    log::info!("report tables written to {}", dir.display());
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_the_reference_is_fifty_percent() {
        assert_eq!(ratio_pct(1500.0, 3000.0), 50.0);
        assert_eq!(ratio_pct(3000.0, 3000.0), 100.0);
    }

    #[test]
    fn time_keys_format() {
        let t = viscal::data::parse_time("2022-01-02T06:00:00Z").unwrap();
        assert_eq!(viscal::data::format_time(t), "2022-01-02T06:00:00Z");
    }
}
