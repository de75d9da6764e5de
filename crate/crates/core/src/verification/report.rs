use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, hash_str, rng_for};

use super::bootstrap::{paired_skill_ci, BootstrapConfig, ConfidenceInterval};
use super::pit::{ks_uniformity, pit_histogram, pit_value, KsResult};
use super::scores::{central_interval, crps, logs, mean_of, rmse_of_mean, skill_score, DEFAULT_LOGS_PI};
use super::Prediction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub logs_pi: f64,
    pub interval_level: f64,
    pub pit_bins: usize,
    pub bootstrap: BootstrapConfig,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { logs_pi: DEFAULT_LOGS_PI, interval_level: 0.9, pit_bins: 10, bootstrap: BootstrapConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillEntry {
    pub reference: String,
    pub crpss: f64,
    pub crpss_lo: f64,
    pub crpss_hi: f64,
    pub logss: f64,
    pub logss_lo: f64,
    pub logss_hi: f64,
}

/// Scores of one forecast set at one lead time (`lead_h = None` pools all
/// lead times).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadScores {
    pub lead_h: Option<u32>,
    pub model: String,
    pub n_cases: usize,
    pub mean_crps: f64,
    pub mean_logs: f64,
    pub coverage: f64,
    pub mean_width: f64,
    pub rmse_mean: f64,
    pub pit_counts: Vec<usize>,
    pub pit_ks: KsResult,
    pub skills: Vec<SkillEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub interval_level: f64,
    pub rows: Vec<LeadScores>,
}

struct CaseScores {
    crps: Vec<f64>,
    logs: Vec<f64>,
    covered: Vec<bool>,
    width: Vec<f64>,
    mean_err: Vec<(f64, f64)>,
    pit: Vec<f64>,
}

type Key = (NaiveDateTime, String, NaiveDateTime, u32);

fn key_of(p: &Prediction) -> Key {
    (p.valid_time(), p.station_id.clone(), p.init_time, p.lead_h)
}

fn pit_draw(seed: u64, p: &Prediction) -> f64 {
    let mut rng = rng_for(seed, &[hash_str(&p.station_id), p.init_time.and_utc().timestamp() as u64, u64::from(p.lead_h)]);
    rng.random()
}

fn score_cases(preds: &[&Prediction], cfg: &ReportConfig) -> Result<CaseScores> {
    let mut s = CaseScores {
        crps: Vec::with_capacity(preds.len()),
        logs: Vec::with_capacity(preds.len()),
        covered: Vec::with_capacity(preds.len()),
        width: Vec::with_capacity(preds.len()),
        mean_err: Vec::with_capacity(preds.len()),
        pit: Vec::with_capacity(preds.len()),
    };
    for p in preds {
        let obs = p.obs_class.value();
        s.crps.push(crps(&p.pmf, p.obs_class));
        s.logs.push(logs(&p.pmf, p.obs_class, cfg.logs_pi));
        let (lo, hi) = central_interval(&p.pmf, cfg.interval_level)?;
        s.covered.push(lo <= obs && obs <= hi);
        s.width.push(hi - lo);
        s.mean_err.push((mean_of(&p.pmf), obs));
        s.pit.push(pit_value(&p.pmf, p.obs_class, pit_draw(cfg.bootstrap.seed, p)));
    }
    Ok(s)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn skill_ci(scores: &[f64], reference: &[f64], cfg: &BootstrapConfig, seed: u64) -> Result<ConfidenceInterval> {
    let point = skill_score(mean(scores), mean(reference)).unwrap_or(f64::NAN);
    if scores.len() < 2 || point.is_nan() {
        return Ok(ConfidenceInterval { point, lo: point, hi: point, sd: 0.0 });
    }
    let cfg = BootstrapConfig { seed, ..cfg.clone() };
    let ci = paired_skill_ci(scores, reference, &cfg)?;
    Ok(ConfidenceInterval { point, ..ci })
}

/// Per-lead-time scores of every forecast set, with skill scores against each
/// reference. All sets must cover the same cases with the same observations.
/// Score series are bootstrapped in valid-time order within each lead time.
pub fn aggregate_report(
    models: &[(String, Vec<Prediction>)],
    references: &[(String, Vec<Prediction>)],
    cfg: &ReportConfig,
) -> Result<ScoreReport> {
    let sets: Vec<&(String, Vec<Prediction>)> = models.iter().chain(references).collect();
    let first = sets.first().ok_or_else(|| Error::Invalid("nothing to verify".into()))?;
    if first.1.is_empty() {
        return Err(Error::Invalid(format!("forecast set `{}` is empty", first.0)));
    }

    let mut indexed: Vec<BTreeMap<Key, &Prediction>> = Vec::with_capacity(sets.len());
    for (name, preds) in &sets {
        let map: BTreeMap<Key, &Prediction> = preds.iter().map(|p| (key_of(p), p)).collect();
        if map.len() != preds.len() {
            return Err(Error::Invalid(format!("forecast set `{name}` has duplicate cases")));
        }
        indexed.push(map);
    }
    let base = &indexed[0];
    for ((name, _), map) in sets.iter().zip(&indexed).skip(1) {
        if map.len() != base.len() {
            return Err(Error::Invalid(format!("forecast set `{name}` is misaligned with `{}`", first.0)));
        }
        for (k, p) in map {
            match base.get(k) {
                Some(b) if b.obs_class == p.obs_class => {}
                _ => {
                    return Err(Error::Invalid(format!(
                        "forecast set `{name}` is misaligned with `{}` at {} {} +{}h",
                        first.0, k.1, k.2, k.3
                    )))
                }
            }
        }
    }

    let leads: BTreeSet<u32> = base.keys().map(|k| k.3).collect();
    let mut groups: Vec<Option<u32>> = leads.iter().copied().map(Some).collect();
    if leads.len() > 1 {
        groups.push(None);
    }

    let mut rows = Vec::new();
    for (g, lead) in groups.iter().enumerate() {
        let keys: Vec<&Key> = base.keys().filter(|k| lead.is_none_or(|l| k.3 == l)).collect();
        let scored: Vec<CaseScores> = indexed
            .iter()
            .map(|map| {
                let preds: Vec<&Prediction> = keys.iter().map(|k| map[*k]).collect();
                score_cases(&preds, cfg)
            })
            .collect::<Result<_>>()?;
        for (si, ((name, _), s)) in sets.iter().zip(&scored).enumerate() {
            let n = keys.len();
            let mut skills = Vec::new();
            for (ri, (ref_name, _)) in references.iter().enumerate() {
                let r = &scored[models.len() + ri];
                let seed = |score: u64| derive_seed(cfg.bootstrap.seed, &[score, g as u64, si as u64, ri as u64]);
                let crpss = skill_ci(&s.crps, &r.crps, &cfg.bootstrap, seed(1))?;
                let logss = skill_ci(&s.logs, &r.logs, &cfg.bootstrap, seed(2))?;
                skills.push(SkillEntry {
                    reference: ref_name.clone(),
                    crpss: crpss.point,
                    crpss_lo: crpss.lo,
                    crpss_hi: crpss.hi,
                    logss: logss.point,
                    logss_lo: logss.lo,
                    logss_hi: logss.hi,
                });
            }
            rows.push(LeadScores {
                lead_h: *lead,
                model: name.clone(),
                n_cases: n,
                mean_crps: mean(&s.crps),
                mean_logs: mean(&s.logs),
                coverage: s.covered.iter().filter(|&&c| c).count() as f64 / n as f64,
                mean_width: mean(&s.width),
                rmse_mean: rmse_of_mean(&s.mean_err)?,
                pit_counts: pit_histogram(&s.pit, cfg.pit_bins)?,
                pit_ks: ks_uniformity(&s.pit)?,
                skills,
            });
        }
    }
    Ok(ScoreReport { interval_level: cfg.interval_level, rows })
}

fn lead_label(lead: Option<u32>) -> String {
    lead.map_or_else(|| "all".to_string(), |l| l.to_string())
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn finish(w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

impl ScoreReport {
    pub fn rows_for<'a>(&'a self, model: &'a str) -> impl Iterator<Item = &'a LeadScores> {
        self.rows.iter().filter(move |r| r.model == model)
    }

    pub fn get(&self, model: &str, lead_h: Option<u32>) -> Option<&LeadScores> {
        self.rows.iter().find(|r| r.model == model && r.lead_h == lead_h)
    }

    pub fn references(&self) -> Vec<String> {
        self.rows.first().map(|r| r.skills.iter().map(|s| s.reference.clone()).collect()).unwrap_or_default()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let mut header: Vec<String> =
            ["lead_h", "model", "mean_crps", "mean_logs", "coverage90", "mean_width", "rmse_mean"].map(String::from).to_vec();
        for r in self.references() {
            header.push(format!("crpss_vs_{r}"));
            header.extend(["crpss_lo", "crpss_hi"].map(String::from));
            header.push(format!("logss_vs_{r}"));
            header.extend(["logss_lo", "logss_hi"].map(String::from));
        }
        header.push("n_cases".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                lead_label(row.lead_h),
                row.model.clone(),
                row.mean_crps.to_string(),
                row.mean_logs.to_string(),
                row.coverage.to_string(),
                row.mean_width.to_string(),
                row.rmse_mean.to_string(),
            ];
            for s in &row.skills {
                rec.extend([s.crpss, s.crpss_lo, s.crpss_hi, s.logss, s.logss_lo, s.logss_hi].map(|v| v.to_string()));
            }
            rec.push(row.n_cases.to_string());
            w.write_record(&rec)?;
        }
        finish(w, path)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))
    }

    /// PIT bin table: `model,lead_h,bin,lo,hi,count,ks_statistic,ks_p_value`.
    pub fn write_pit_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        w.write_record(["model", "lead_h", "bin", "lo", "hi", "count", "ks_statistic", "ks_p_value"])?;
        for row in &self.rows {
            let nb = row.pit_counts.len();
            for (b, c) in row.pit_counts.iter().enumerate() {
                w.write_record([
                    row.model.clone(),
                    lead_label(row.lead_h),
                    (b + 1).to_string(),
                    (b as f64 / nb as f64).to_string(),
                    ((b + 1) as f64 / nb as f64).to_string(),
                    c.to_string(),
                    row.pit_ks.statistic.to_string(),
                    row.pit_ks.p_value.to_string(),
                ])?;
            }
        }
        finish(w, path)
    }
}
