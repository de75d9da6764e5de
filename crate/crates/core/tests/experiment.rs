use chrono::{NaiveDate, NaiveTime};
use viscal::data::sim::{simulate_dataset, SimConfig, SimDataset};
use viscal::mlp::MlpTrainConfig;
use viscal::scale::ClassIndex;
use viscal::training::{
    climatology_forecast, raw_ensemble_distribution, run_experiment, Experiment, ExperimentConfig, ForecastSource,
    ModelKind, Scope, SpatialScheme, TrainingWindow,
};
use viscal::verification::{central_interval, crps};

fn small_data(n_stations: usize, n_days: usize, seed: u64) -> SimDataset {
    let cfg = SimConfig { n_stations, n_days, lead_times_h: vec![24, 48], ..SimConfig::default() };
    simulate_dataset(&cfg, seed).unwrap()
}

fn small_config(scheme: SpatialScheme) -> ExperimentConfig {
    ExperimentConfig { scheme, refit_every_days: 10, seed: 3, ..ExperimentConfig::default() }
}

#[test]
fn local_pools_one_station_without_leakage() {
    let d = small_data(3, 375, 1);
    let e = Experiment::new(small_config(SpatialScheme::local()), &d.forecasts, &d.observations).unwrap();
    assert_eq!(e.target_dates().first(), Some(&NaiveDate::from_ymd_opt(2021, 12, 17).unwrap()));
    let tasks = e.plan().unwrap();
    assert_eq!(tasks.len(), 3 * 2 * 3);
    for t in &tasks {
        let Scope::Station(id) = &t.scope else { panic!("local scope expected") };
        let train = e.training_cases(t);
        assert!(!train.is_empty());
        let cutoff = t.fit_date.and_time(NaiveTime::MIN);
        for c in &train {
            assert_eq!(c.station_id(), id);
            assert_eq!(c.forecast.lead_h, t.lead_h);
            assert!(c.valid_time() < cutoff);
            assert!(t.window.contains(c.valid_time().date()));
        }
        for c in e.target_cases(t) {
            assert_eq!(c.station_id(), id);
            assert!(c.forecast.init_time >= cutoff);
        }
    }
}

#[test]
fn task_arithmetic_and_file_names() {
    let d = small_data(3, 360, 2);
    let target = NaiveDate::from_ymd_opt(2021, 12, 20).unwrap();
    let one_day = |scheme| ExperimentConfig {
        scheme,
        verification_start: Some(target),
        verification_end: Some(target),
        ..ExperimentConfig::default()
    };
    let e = Experiment::new(one_day(SpatialScheme::local()), &d.forecasts, &d.observations).unwrap();
    let tasks = e.plan().unwrap();
    assert_eq!(tasks.len(), 6);
    let mut names: Vec<String> = tasks.iter().map(|t| e.param_file_name(t)).collect();
    assert!(names.contains(&"polr_local_24_S002_2021-12-20.json".to_string()));
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 6);

    let e = Experiment::new(one_day(SpatialScheme::regional()), &d.forecasts, &d.observations).unwrap();
    let tasks = e.plan().unwrap();
    assert_eq!(tasks.len(), 2);
    assert_eq!(e.param_file_name(&tasks[1]), "polr_regional_48_all_2021-12-20.json");
    // every station, the full window: 350 days per station at lead 24
    assert_eq!(e.training_set(&tasks[0]).len(), 3 * 350);
}

#[test]
fn infeasible_window_is_rejected() {
    let d = small_data(2, 100, 3);
    let cfg = ExperimentConfig { verification_start: Some(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap()), ..Default::default() };
    assert!(Experiment::new(cfg, &d.forecasts, &d.observations).is_err());
    assert!(Experiment::new(ExperimentConfig::default(), &d.forecasts, &d.observations).is_err());
}

#[test]
fn regional_output_ignores_input_order() {
    let d = small_data(4, 365, 4);
    let cfg = small_config(SpatialScheme::regional());
    let a = run_experiment(&cfg, &d.forecasts, &d.observations).unwrap();
    let mut f = d.forecasts.clone();
    let mut o = d.observations.clone();
    f.reverse();
    o.reverse();
    let b = run_experiment(&cfg, &f, &o).unwrap();
    assert!(!a.cases.is_empty());
    assert!(a.failures.is_empty());
    assert_eq!(a, b);
}

#[test]
fn semi_local_with_one_cluster_matches_regional() {
    let d = small_data(6, 365, 5);
    let regional = run_experiment(&small_config(SpatialScheme::regional()), &d.forecasts, &d.observations).unwrap();
    let semi = run_experiment(&small_config(SpatialScheme::semi_local(1)), &d.forecasts, &d.observations).unwrap();
    assert_eq!(regional.cases.len(), semi.cases.len());
    for (r, s) in regional.cases.iter().zip(&semi.cases) {
        let bits = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(r.model.pmf()), bits(s.model.pmf()));
    }
}

#[test]
fn failed_fits_are_recorded_and_the_run_continues() {
    let mut d = small_data(3, 365, 6);
    let fixed = ClassIndex::new(40).unwrap();
    d.observations.iter_mut().filter(|o| o.station_id == "S001").for_each(|o| o.visibility_class = fixed);
    let out = run_experiment(&small_config(SpatialScheme::local()), &d.forecasts, &d.observations).unwrap();
    assert_eq!(out.failures.len(), 2 * 2);
    assert!(out.failures.iter().all(|f| f.scope == "S001"));
    assert!(out.cases.iter().all(|c| c.station_id != "S001"));
    assert!(out.cases.iter().any(|c| c.station_id == "S002"));
}

#[test]
fn mlp_experiment_is_deterministic() {
    let d = small_data(4, 365, 7);
    let cfg = ExperimentConfig {
        model: ModelKind::Mlp,
        mlp: MlpTrainConfig { max_epochs: 20, ..Default::default() },
        lead_times_h: vec![24],
        ..small_config(SpatialScheme::regional())
    };
    let a = run_experiment(&cfg, &d.forecasts, &d.observations).unwrap();
    let b = run_experiment(&cfg, &d.forecasts, &d.observations).unwrap();
    assert!(a.failures.is_empty());
    assert_eq!(a, b);
    assert!(a.cases.iter().all(|c| c.lead_h == 24));
    assert_eq!(a.predictions(ForecastSource::Model).len(), a.cases.len());
}

/// References on the default synthetic set, computed straight from the data:
/// the underdispersed raw ensemble loses to a 30-day same-hour climatology.
#[test]
fn climatology_beats_raw_on_default_synthetic_set() {
    let d = simulate_dataset(&SimConfig::default(), 11).unwrap();
    let first_target = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
    let by_station = |s: &str| d.observations.iter().filter(|o| o.station_id == s).cloned().collect::<Vec<_>>();
    let stations: Vec<String> = d.stations.iter().map(|s| s.station_id.clone()).collect();
    let obs: Vec<Vec<_>> = stations.iter().map(|s| by_station(s)).collect();
    let obs_index: std::collections::HashMap<_, _> =
        d.observations.iter().map(|o| ((o.station_id.clone(), o.valid_time), o.visibility_class)).collect();

    let (mut clim_crps, mut raw_crps, mut raw_cover, mut n) = (0.0, 0.0, 0usize, 0usize);
    for f in d.forecasts.iter().filter(|f| f.init_time.date() >= first_target) {
        let Some(&x) = obs_index.get(&(f.station_id.clone(), f.valid_time())) else { continue };
        let s = stations.iter().position(|s| *s == f.station_id).unwrap();
        let w = TrainingWindow::preceding(f.init_time.date(), 30).unwrap();
        let clim = climatology_forecast(&obs[s], &f.station_id, &w, Some(chrono::Timelike::hour(&f.valid_time()))).unwrap();
        let raw = raw_ensemble_distribution(f).unwrap();
        clim_crps += crps(&clim, x);
        raw_crps += crps(&raw, x);
        let (lo, hi) = central_interval(&raw, 0.9).unwrap();
        raw_cover += usize::from(lo <= x.value() && x.value() <= hi);
        n += 1;
    }
    assert!(n > 10_000);
    assert!(clim_crps < raw_crps, "climatology {} vs raw {}", clim_crps / n as f64, raw_crps / n as f64);
    assert!((raw_cover as f64) < 0.7 * n as f64);
}
