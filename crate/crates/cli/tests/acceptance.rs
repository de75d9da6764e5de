//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line with its
//! measured value and runtime, then asserts. Tests hold a shared lock so the
//! reported runtimes are not inflated by each other.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};
use tempfile::TempDir;

use viscal::data::sim::{simulate_dataset, SimConfig};
use viscal::data::join_cases;
use viscal::features::FeatureVector;
use viscal::mlp::{mlp_loss_grad, MlpArchitecture, MlpParams};
use viscal::polr::{fit_polr, polr_nll_grad, PolrFitConfig, PolrParams};
use viscal::scale::{round_down, scale_values, value_of};
use viscal::training::{raw_ensemble_distribution, run_experiment, ExperimentConfig, SpatialScheme};
use viscal::verification::{
    central_interval, crps, ks_uniformity, logs_floor, pit_histogram, pit_value, resample_blocks,
    stationary_bootstrap_ci, BootstrapConfig, PredictiveDistribution,
};
use viscal::{ClassIndex, N_CLASSES};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    let tag = if pass { "PASS" } else { "FAIL" };
    // written past the test harness's output capture so the line shows up
    // in a plain `cargo test` run
    let line = format!("[{tag}] {id:>2} {name}: {detail} ({:.1} s)\n", elapsed.as_secs_f64());
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn k(c: usize) -> ClassIndex {
    ClassIndex::new(c).unwrap()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn random_pmf<R: Rng>(rng: &mut R) -> PredictiveDistribution {
    let sparse = rng.random_bool(0.5);
    let mut w: Vec<f64> = (0..N_CLASSES)
        .map(|_| if sparse && rng.random_bool(0.8) { 0.0 } else { rng.random::<f64>().powi(3) })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.random_range(0..N_CLASSES)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    PredictiveDistribution::new(w.iter().map(|v| v / total).collect()).unwrap()
}

/// `∫ (F(y) - 1{y >= x})² dy` with `F` constant between consecutive scale
/// values and zero integrand above the top class.
fn crps_integral(pmf: &[f64], x: f64) -> f64 {
    let v = scale_values().values();
    let mut cdf = 0.0;
    let mut total = 0.0;
    for i in 0..N_CLASSES - 1 {
        cdf += pmf[i];
        let step = if v[i] >= x { 1.0 } else { 0.0 };
        total += (cdf - step).powi(2) * (v[i + 1] - v[i]);
    }
    total
}

#[test]
fn c01_crps_matches_integral_form() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let f = random_pmf(&mut rng);
        let x = k(rng.random_range(1..=N_CLASSES));
        worst = worst.max((crps(&f, x) - crps_integral(f.pmf(), x.value())).abs());
    }
    let el = t.elapsed();
    let pass = worst < 1e-9 && el < Duration::from_secs(10);
    verdict(1, "CRPS pairwise form vs CDF integral", pass, &format!("max |diff| {worst:.2e} m over 1000 pairs"), el);
    assert!(pass);
}

#[test]
fn c02_logs_floor_constant() {
    let _g = serial();
    let t = Instant::now();
    let p = logs_floor(0.01);
    let exact = 1.0 - 0.99f64.powf(1.0 / 365.0);
    let shown = format!("{p:.2e}");
    let pass = shown == "2.75e-5" && (p - exact).abs() < 1e-12;
    verdict(2, "LogS floor", pass, &format!("p_min {shown}, |diff| {:.1e}", (p - exact).abs()), t.elapsed());
    assert!(pass);
}

fn polr_sample<R: Rng>(rng: &mut R, alpha: &[f64], beta: &[f64], scale: f64) -> (FeatureVector, ClassIndex) {
    let x: Vec<f64> = beta.iter().map(|_| scale * normal(rng)).collect();
    let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
    let u: f64 = rng.random();
    let class = alpha.iter().position(|&a| u <= logistic(a + eta)).unwrap_or(alpha.len()) + 1;
    (FeatureVector::new(x), k(class))
}

#[test]
fn c03_polr_gradient() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n_classes = rng.random_range(3..=12);
        let m = rng.random_range(1..=4);
        let mut alpha = vec![rng.random_range(-3.0..-1.0)];
        for _ in 1..n_classes - 1 {
            let last = *alpha.last().unwrap();
            alpha.push(last + rng.random_range(0.1..1.0));
        }
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data: Vec<_> = (0..rng.random_range(10..60)).map(|_| polr_sample(&mut rng, &alpha, &beta, 1.0)).collect();
        // evaluate away from the generating parameters
        let params = PolrParams::new(
            alpha.iter().map(|a| a + 0.2 * normal(&mut rng)).scan(f64::NEG_INFINITY, |prev, a| {
                *prev = a.max(*prev + 0.05);
                Some(*prev)
            }).collect(),
            beta.iter().map(|b| b + 0.3 * normal(&mut rng)).collect(),
        )
        .unwrap();
        let (_, grad) = polr_nll_grad(&params, &data).unwrap();
        let theta = params.to_theta();
        let nt = params.thresholds.len();
        let nll = |th: &[f64]| polr_nll_grad(&PolrParams::from_theta(th, nt, vec![true; m]), &data).unwrap().0;
        for i in 0..theta.len() {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (nll(&up) - nll(&dn)) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3));
        }
    }
    let el = t.elapsed();
    let pass = worst < 1e-5 && el < Duration::from_secs(30);
    verdict(3, "POLR gradient", pass, &format!("max relative error {worst:.2e} over 20 instances"), el);
    assert!(pass);
}

#[test]
fn c04_polr_parameter_recovery() {
    let _g = serial();
    let t = Instant::now();
    let alpha: Vec<f64> = (0..9).map(|i| -2.4 + 0.6 * i as f64).collect();
    let beta = [0.8, -0.5, 0.3];
    let cfg = PolrFitConfig { n_classes: 10, ..PolrFitConfig::default() };
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let data: Vec<_> = (0..50_000).map(|_| polr_sample(&mut rng, &alpha, &beta, 1.0)).collect();
        let fit = fit_polr(&data, &cfg).unwrap();
        for (b, truth) in fit.coefficients.iter().zip(beta) {
            worst = worst.max((b - truth).abs());
        }
    }
    let el = t.elapsed();
    let pass = worst <= 0.05 && el < Duration::from_secs(120);
    verdict(4, "POLR parameter recovery", pass, &format!("max |beta error| {worst:.4} over 5 seeds"), el);
    assert!(pass);
}

#[test]
fn c05_sign_constraint_excludes_wrong_sign_covariate() {
    let _g = serial();
    let t = Instant::now();
    let alpha: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
    // covariate 1 lowers visibility (positive coefficient), 0 and 2 raise it
    let beta = [-0.8, 0.3, -0.4];
    let cfg = PolrFitConfig { n_classes: 10, constrained_nonnegative: vec![0, 1, 2], ..PolrFitConfig::default() };
    let mut excluded = 0;
    let mut others_kept = true;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let data: Vec<_> = (0..5_000).map(|_| polr_sample(&mut rng, &alpha, &beta, 1.0)).collect();
        let fit = fit_polr(&data, &cfg).unwrap();
        if !fit.active_mask[1] && fit.coefficients[1] == 0.0 {
            excluded += 1;
        }
        others_kept &= fit.active_mask[0] && fit.active_mask[2];
    }
    let el = t.elapsed();
    let pass = excluded >= 4 && others_kept && el < Duration::from_secs(120);
    verdict(5, "sign-constraint exclusion", pass, &format!("excluded in {excluded}/5 runs, correct-sign covariates kept: {others_kept}"), el);
    assert!(pass);
}

#[test]
fn c06_mlp_gradient() {
    let _g = serial();
    let t = Instant::now();
    let arch = MlpArchitecture { input_dim: 8, hidden: [25, 25], output_dim: N_CLASSES };
    let params = MlpParams::random(arch, 0.5, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let batch: Vec<_> = (0..12)
        .map(|_| (FeatureVector::new((0..8).map(|_| normal(&mut rng)).collect()), k(rng.random_range(1..=N_CLASSES))))
        .collect();
    let (_, grad) = mlp_loss_grad(&params, &batch).unwrap();
    let g = grad.to_vec();
    let w = params.to_vec();
    let h = 1e-6;
    let loss = |v: &[f64]| mlp_loss_grad(&MlpParams::from_vec(arch, v).unwrap(), &batch).unwrap().0;
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let (mut up, mut dn) = (w.clone(), w.clone());
        up[i] += h;
        dn[i] -= h;
        let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3));
    }
    let el = t.elapsed();
    let pass = worst < 1e-5 && el < Duration::from_secs(60);
    verdict(6, "MLP gradient", pass, &format!("max relative error {worst:.2e} over {} weights", w.len()), el);
    assert!(pass);
}

/// Class probabilities of `round_down(min(exp(z), max))` with `z ~ N(mu, sd)`.
fn discretized_lognormal(mu: f64, sd: f64) -> PredictiveDistribution {
    let n = Normal::new(mu, sd).unwrap();
    let v = scale_values().values();
    let below = |i: usize| if i == 0 { 0.0 } else if i == N_CLASSES { 1.0 } else { n.cdf(v[i].ln()) };
    let pmf: Vec<f64> = (0..N_CLASSES).map(|i| below(i + 1) - below(i)).collect();
    let total: f64 = pmf.iter().sum();
    PredictiveDistribution::new(pmf.iter().map(|p| p / total).collect()).unwrap()
}

#[test]
fn c07_pit_calibration() {
    let _g = serial();
    let t = Instant::now();
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let calibrated: Vec<f64> = (0..n)
        .map(|_| {
            let mu = rng.random_range(6.0f64..10.5);
            let sd = rng.random_range(0.3..1.2);
            let z = mu + sd * normal(&mut rng);
            let obs = round_down(z.exp().min(70_000.0)).unwrap();
            pit_value(&discretized_lognormal(mu, sd), obs, rng.random())
        })
        .collect();
    let ks_true = ks_uniformity(&calibrated).unwrap();

    let data = simulate_dataset(&SimConfig::default(), 7).unwrap();
    let cases = join_cases(&data.forecasts, &data.observations).cases;
    let raw: Vec<f64> = cases
        .iter()
        .step_by(cases.len() / n)
        .take(n)
        .map(|c| pit_value(&raw_ensemble_distribution(&c.forecast).unwrap(), c.observed(), rng.random()))
        .collect();
    let ks_raw = ks_uniformity(&raw).unwrap();
    let hist = pit_histogram(&raw, 10).unwrap();
    let edge = (hist[0] + hist[9]) as f64 / raw.len() as f64;
    let el = t.elapsed();
    let pass = raw.len() == n
        && ks_true.p_value > 0.01
        && ks_raw.p_value < 1e-6
        && edge > 0.25
        && el < Duration::from_secs(120);
    verdict(
        7,
        "PIT calibration",
        pass,
        &format!(
            "true-distribution KS p {:.3}, raw KS p {:.1e}, raw outer-decile mass {:.1}%",
            ks_true.p_value,
            ks_raw.p_value,
            100.0 * edge
        ),
        el,
    );
    assert!(pass);
}

#[derive(Default)]
struct LeadStats {
    crps: [f64; 3],
    covered: [usize; 2],
    n: usize,
}

#[test]
fn c08_default_benchmark_ordering_and_coverage() {
    let _g = serial();
    let t = Instant::now();
    let data = simulate_dataset(&SimConfig::default(), 2021).unwrap();
    let cfg = ExperimentConfig { seed: 2021, ..ExperimentConfig::default() };
    let out = run_experiment(&cfg, &data.forecasts, &data.observations).unwrap();
    let mut by_lead: BTreeMap<u32, LeadStats> = BTreeMap::new();
    for c in &out.cases {
        let s = by_lead.entry(c.lead_h).or_default();
        let x = c.obs_class;
        s.crps[0] += crps(&c.model, x);
        s.crps[1] += crps(&c.climatology, x);
        s.crps[2] += crps(&c.raw, x);
        for (slot, f) in [&c.model, &c.raw].into_iter().enumerate() {
            let (lo, hi) = central_interval(f, 0.9).unwrap();
            s.covered[slot] += usize::from(lo <= x.value() && x.value() <= hi);
        }
        s.n += 1;
    }
    let el = t.elapsed();
    let mut pass = out.failures.is_empty() && by_lead.len() == 4 && el < Duration::from_secs(900);
    let mut detail = Vec::new();
    for (lead, s) in &by_lead {
        let n = s.n as f64;
        let [m, c, r] = s.crps.map(|v| v / n);
        let cov_m = s.covered[0] as f64 / n;
        let cov_r = s.covered[1] as f64 / n;
        pass &= m < c && c < r && (0.88..=0.94).contains(&cov_m) && cov_r < 0.70;
        detail.push(format!(
            "{lead} h: CRPS {m:.0} < {c:.0} < {r:.0}, coverage {:.1}% vs raw {:.1}%",
            100.0 * cov_m,
            100.0 * cov_r
        ));
    }
    verdict(8, "default benchmark", pass, &format!(
            "{} fit failures{}; {}",
            out.failures.len(),
            out.failures.first().map(|f| format!(" (first: {})", f.message)).unwrap_or_default(),
            detail.join("; ")
        ), el);
    assert!(pass);
}

#[test]
fn c09_semi_local_single_cluster_is_regional() {
    let _g = serial();
    let t = Instant::now();
    let data = simulate_dataset(&SimConfig::default(), 9).unwrap();
    let run = |scheme: SpatialScheme| {
        let cfg = ExperimentConfig { scheme, refit_every_days: 7, seed: 9, ..ExperimentConfig::default() };
        run_experiment(&cfg, &data.forecasts, &data.observations).unwrap()
    };
    let regional = run(SpatialScheme::regional());
    let semi = run(SpatialScheme::semi_local(1));
    let same_cases = regional.cases.len() == semi.cases.len();
    let identical = same_cases
        && regional.cases.iter().zip(&semi.cases).all(|(a, b)| {
            a.station_id == b.station_id
                && a.init_time == b.init_time
                && a.lead_h == b.lead_h
                && a.model.pmf().iter().zip(b.model.pmf()).all(|(p, q)| p.to_bits() == q.to_bits())
        });
    let el = t.elapsed();
    let pass = identical && !regional.cases.is_empty() && regional.failures.is_empty();
    verdict(9, "semi-local k = 1 equals regional", pass, &format!("{} cases compared bitwise, identical: {identical}", regional.cases.len()), el);
    assert!(pass);
}

#[test]
fn c10_stationary_bootstrap() {
    let _g = serial();
    let t = Instant::now();
    let target = 8.0;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut blocks, mut positions) = (0usize, 0usize);
    while positions < 1_000_000 {
        let draw = resample_blocks(10_000, target, &mut rng);
        blocks += draw.len();
        positions += draw.iter().map(|b| b.1).sum::<usize>();
    }
    let mean_len = positions as f64 / blocks as f64;
    let len_err = (mean_len / target - 1.0).abs();

    let n = 2000;
    let mut widths = Vec::new();
    for rep in 0..20u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + rep);
        let series: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let cfg = BootstrapConfig { n_boot: 1000, seed: rep, ..BootstrapConfig::default() };
        let ci = stationary_bootstrap_ci(&series, &cfg).unwrap();
        widths.push(ci.hi - ci.lo);
    }
    let analytic = 2.0 * 1.96 / (n as f64).sqrt();
    let mean_width = widths.iter().sum::<f64>() / widths.len() as f64;
    let width_err = (mean_width / analytic - 1.0).abs();
    let el = t.elapsed();
    let pass = len_err < 0.05 && width_err < 0.10 && el < Duration::from_secs(60);
    verdict(
        10,
        "stationary bootstrap",
        pass,
        &format!(
            "mean block length {mean_len:.3} vs {target} ({:.2}%), CI width {mean_width:.5} vs {analytic:.5} ({:.2}%)",
            100.0 * len_err,
            100.0 * width_err
        ),
        el,
    );
    assert!(pass);
}

fn hash_tree(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for dir in ["data", "params", "predictions", "verification"] {
        let mut entries: Vec<_> = fs::read_dir(root.join(dir)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            let name = format!("{dir}/{}", p.file_name().unwrap().to_string_lossy());
            out.insert(name, hex::encode(Sha256::digest(fs::read(&p).unwrap())));
        }
    }
    out
}

fn pipeline(root: &Path, jobs: &str) -> bool {
    let cfg = root.join("config.json");
    fs::write(
        &cfg,
        r#"{
  "simulation": {"n_stations": 4, "n_days": 380},
  "experiment": {"refit_every_days": 10},
  "report": {"bootstrap": {"n_boot": 200}}
}"#,
    )
    .unwrap();
    ["simulate", "train", "predict", "verify"].iter().all(|cmd| {
        Command::new(env!("CARGO_BIN_EXE_viscal"))
            .args([cmd, "--seed", "11", "--jobs", jobs, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(root)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap()
            .success()
    })
}

#[test]
fn c11_pipeline_is_deterministic_across_jobs() {
    let _g = serial();
    let t = Instant::now();
    let runs: Vec<(TempDir, bool)> = ["1", "3", "3"]
        .iter()
        .map(|jobs| {
            let d = TempDir::new().unwrap();
            let ok = pipeline(d.path(), jobs);
            (d, ok)
        })
        .collect();
    let ok = runs.iter().all(|r| r.1);
    let hashes: Vec<_> = runs.iter().filter(|r| r.1).map(|r| hash_tree(r.0.path())).collect();
    let n_files = hashes.first().map_or(0, BTreeMap::len);
    let mismatched: Vec<String> = if hashes.len() == 3 {
        let first: HashMap<_, _> = hashes[0].iter().collect();
        hashes[1..]
            .iter()
            .flat_map(|h| h.iter().filter(|(k, v)| first.get(k) != Some(v)).map(|(k, _)| k.clone()))
            .collect()
    } else {
        Vec::new()
    };
    let el = t.elapsed();
    let pass = ok && n_files > 10 && mismatched.is_empty() && hashes.iter().all(|h| h.len() == n_files);
    verdict(
        11,
        "pipeline determinism",
        pass,
        &format!("{n_files} files hashed over --jobs 1, 3 and a rerun, mismatches: {mismatched:?}"),
        el,
    );
    assert!(pass);
}

#[test]
fn scale_sanity_for_oracles() {
    assert_eq!(value_of(k(1)), 0.0);
    assert_eq!(value_of(k(N_CLASSES)), 70_000.0);
    assert_eq!(discretized_lognormal(8.0, 0.5).pmf().len(), N_CLASSES);
}
