//! Proportional-odds logistic regression over ordered visibility classes.
//!
//! The cumulative distribution is `P(Y <= y_k | x) = logistic(α_k + xᵀβ)` for
//! k < K, with `P(Y <= y_K) = 1`. Only K - 1 thresholds are identifiable.
//! Fitting runs in the coordinates `(α_1, log(α_2 - α_1), …, log(α_{K-1} -
//! α_{K-2}), β)`, so the thresholds stay ordered by construction.
//!
//! Under this sign convention a positive coefficient raises the probability of
//! low visibility. The sign constraint on forecast-level covariates therefore
//! requires `-β_j >= 0`, i.e. a non-negative effect of the forecast on the
//! predicted visibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector};
use crate::optim::{minimize, BfgsOptions};
use crate::scale::{ClassIndex, N_CLASSES};
use crate::verification::PredictiveDistribution;

const LOG_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)
const INIT_LOGIT_CLIP: f64 = 15.0;
const INIT_MIN_GAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolrParams {
    pub thresholds: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// `false` marks covariates removed by the sign-constraint procedure;
    /// their coefficients are exactly zero.
    pub active_mask: Vec<bool>,
}

impl PolrParams {
    pub fn new(thresholds: Vec<f64>, coefficients: Vec<f64>) -> Result<Self> {
        let m = coefficients.len();
        let p = PolrParams { thresholds, coefficients, active_mask: vec![true; m] };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::Invalid("POLR needs at least one threshold".into()));
        }
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) || self.thresholds.iter().any(|t| t.is_nan()) {
            return Err(Error::Invalid("POLR thresholds must be strictly increasing".into()));
        }
        if self.active_mask.len() != self.coefficients.len() {
            return Err(Error::Dimension { expected: self.coefficients.len(), got: self.active_mask.len() });
        }
        if self.coefficients.iter().zip(&self.active_mask).any(|(&b, &a)| !a && b != 0.0) {
            return Err(Error::Invalid("masked-out coefficients must be zero".into()));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Effect of each covariate on visibility (`-β`).
    pub fn visibility_effects(&self) -> Vec<f64> {
        self.coefficients.iter().map(|b| -b).collect()
    }

    fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }

    /// Unconstrained coordinates `(α_1, log(α_2 - α_1), …, β)`.
    pub fn to_theta(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.thresholds.len() + self.dim());
        theta.push(self.thresholds[0]);
        theta.extend(self.thresholds.windows(2).map(|w| (w[1] - w[0]).ln()));
        theta.extend_from_slice(&self.coefficients);
        theta
    }

    /// Inverse of [`PolrParams::to_theta`]; masked-out coefficients are zeroed.
    pub fn from_theta(theta: &[f64], n_thresholds: usize, active_mask: Vec<bool>) -> Self {
        let mut thresholds = Vec::with_capacity(n_thresholds);
        let mut a = theta[0];
        thresholds.push(a);
        for &t in &theta[1..n_thresholds] {
            a += t.exp();
            thresholds.push(a);
        }
        let coefficients = theta[n_thresholds..]
            .iter()
            .zip(&active_mask)
            .map(|(&b, &on)| if on { b } else { 0.0 })
            .collect();
        PolrParams { thresholds, coefficients, active_mask }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z)
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Cumulative probabilities for classes 1..=K; the last entry is exactly 1.
pub fn polr_cdf(params: &PolrParams, x: &[f64]) -> Result<Vec<f64>> {
    let eta = params.linear_predictor(x)?;
    let mut cdf: Vec<f64> = params.thresholds.iter().map(|a| sigmoid(a + eta)).collect();
    cdf.push(1.0);
    Ok(cdf)
}

/// Class probabilities for classes 1..=K, computed per class in a form that
/// avoids cancellation between nearby cumulative values.
pub fn polr_probs(params: &PolrParams, x: &[f64]) -> Result<Vec<f64>> {
    let eta = params.linear_predictor(x)?;
    let k = params.n_classes();
    Ok((1..=k).map(|c| class_log_prob(params, eta, c).0.exp()).collect())
}

/// Predictive distribution on the 84-class visibility scale.
pub fn polr_pmf(params: &PolrParams, x: &FeatureVector) -> Result<PredictiveDistribution> {
    if params.n_classes() != N_CLASSES {
        return Err(Error::Dimension { expected: N_CLASSES, got: params.n_classes() });
    }
    let mut p = polr_probs(params, x.as_slice())?;
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    PredictiveDistribution::new(p)
}

/// Log-probability of class `c` (1-based) and its derivatives with respect to
/// the upper and lower cumulative logits.
fn class_log_prob(params: &PolrParams, eta: f64, c: usize) -> (f64, f64, f64) {
    let k = params.n_classes();
    let th = &params.thresholds;
    let (logp, ga, gb) = if k == 1 {
        (0.0, 0.0, 0.0)
    } else if c == 1 {
        let a = th[0] + eta;
        (-softplus(-a), sigmoid(-a), 0.0)
    } else if c == k {
        let b = th[k - 2] + eta;
        (-softplus(b), 0.0, -sigmoid(b))
    } else {
        let a = th[c - 1] + eta;
        let b = th[c - 2] + eta;
        let d = a - b;
        let inv = 1.0 / d.exp_m1();
        let logp = -softplus(-a) - softplus(b) + (-(-d).exp_m1()).ln();
        (logp, sigmoid(-a) + inv, -sigmoid(b) - inv)
    };
    (logp.max(LOG_FLOOR), ga, gb)
}

/// A training case: covariates and the observed class.
pub type PolrSample = (FeatureVector, ClassIndex);

fn check_dataset(params: &PolrParams, data: &[PolrSample]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Invalid("empty POLR dataset".into()));
    }
    for (x, c) in data {
        if x.len() != params.dim() {
            return Err(Error::Dimension { expected: params.dim(), got: x.len() });
        }
        if c.get() > params.n_classes() {
            return Err(Error::Invalid(format!("class {c} beyond the {}-class scale", params.n_classes())));
        }
    }
    Ok(())
}

/// Negative log-likelihood and its gradient in the reparametrized
/// coordinates `(α_1, log-gaps, β)`.
pub fn polr_nll_grad(params: &PolrParams, data: &[PolrSample]) -> Result<(f64, Vec<f64>)> {
    check_dataset(params, data)?;
    Ok(nll_grad_unchecked(params, data))
}

fn nll_grad_unchecked(params: &PolrParams, data: &[PolrSample]) -> (f64, Vec<f64>) {
    let nt = params.thresholds.len();
    let m = params.dim();
    let mut nll = 0.0;
    let mut d_alpha = vec![0.0; nt];
    let mut d_beta = vec![0.0; m];
    for (x, c) in data {
        let x = x.as_slice();
        let eta: f64 = x.iter().zip(&params.coefficients).map(|(a, b)| a * b).sum();
        let c = c.get();
        let (logp, ga, gb) = class_log_prob(params, eta, c);
        nll -= logp;
        if c <= nt {
            d_alpha[c - 1] -= ga;
        }
        if c >= 2 {
            d_alpha[c - 2] -= gb;
        }
        let ge = ga + gb;
        for (d, xi) in d_beta.iter_mut().zip(x) {
            *d -= ge * xi;
        }
    }
    let mut grad = Vec::with_capacity(nt + m);
    // α_j = θ_1 + Σ_{i=2..j} exp(θ_i): ∂/∂θ_i = exp(θ_i) Σ_{j>=i} ∂/∂α_j
    let mut suffix = vec![0.0; nt];
    let mut acc = 0.0;
    for j in (0..nt).rev() {
        acc += d_alpha[j];
        suffix[j] = acc;
    }
    grad.push(suffix[0]);
    for i in 1..nt {
        let gap = params.thresholds[i] - params.thresholds[i - 1];
        grad.push(gap * suffix[i]);
    }
    grad.extend(d_beta);
    (nll, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolrFitConfig {
    pub n_classes: usize,
    /// Covariates whose visibility effect `-β_j` must be non-negative.
    pub constrained_nonnegative: Vec<usize>,
    pub max_iter: usize,
    /// Tolerance on the largest gradient component of the mean NLL.
    pub grad_tol: f64,
    /// Largest change of any coordinate in one quasi-Newton step.
    pub max_step: f64,
}

impl Default for PolrFitConfig {
    fn default() -> Self {
        PolrFitConfig { n_classes: N_CLASSES, constrained_nonnegative: Vec::new(), max_iter: 10_000, grad_tol: 1e-6, max_step: 5.0 }
    }
}

impl PolrFitConfig {
    /// Constraint set for the forecast-level covariates of a feature layout.
    pub fn for_features(features: &FeatureConfig) -> Self {
        PolrFitConfig { constrained_nonnegative: features.forecast_level_indices(), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStage {
    /// Covariate excluded before this stage was fitted.
    pub excluded: Option<usize>,
    pub nll: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolrFit {
    pub params: PolrParams,
    pub stages: Vec<FitStage>,
}

/// Empirical cumulative logits with a 1/(2n) continuity correction, clipped
/// and spread so that they are strictly increasing.
fn initial_thresholds(data: &[PolrSample], n_classes: usize) -> Vec<f64> {
    let n = data.len() as f64;
    let mut counts = vec![0usize; n_classes];
    for (_, c) in data {
        counts[c.offset()] += 1;
    }
    let eps = 0.5 / n;
    let mut cum = 0usize;
    let mut out: Vec<f64> = Vec::with_capacity(n_classes - 1);
    for &count in &counts[..n_classes - 1] {
        cum += count;
        let q = (cum as f64 / n).clamp(eps, 1.0 - eps);
        let mut a = (q / (1.0 - q)).ln().clamp(-INIT_LOGIT_CLIP, INIT_LOGIT_CLIP);
        if let Some(&prev) = out.last() {
            a = a.max(prev + INIT_MIN_GAP);
        }
        out.push(a);
    }
    out
}

/// Distance by which thresholds bounding unobserved edge classes are pushed
/// outward from the nearest fitted threshold.
const EDGE_MARGIN: f64 = 40.0;
/// Spacing of collapsed thresholds around unobserved interior classes.
const COLLAPSED_GAP: f64 = 1e-9;

/// Maximum-likelihood fit with the iterative sign-constraint procedure: after
/// each fit, the constrained covariate with the most negative visibility
/// effect is removed and the model refitted from the previous optimum, until
/// every remaining constrained covariate satisfies the constraint.
///
/// The likelihood is maximized over the observed classes only. An unobserved
/// class has zero probability at the optimum, which the full parametrization
/// only reaches in the limit of a vanishing threshold gap (interior classes)
/// or an infinite threshold (edge classes). The fitted thresholds are
/// expanded to the full scale with those limits replaced by a gap of 1e-9 and
/// an outward margin of 40 on the logit scale.
pub fn fit_polr_detailed(data: &[PolrSample], cfg: &PolrFitConfig) -> Result<PolrFit> {
    let first = data.first().ok_or_else(|| Error::Invalid("empty POLR dataset".into()))?;
    if cfg.n_classes < 2 {
        return Err(Error::Invalid("POLR needs at least two classes".into()));
    }
    let m = first.0.len();
    if let Some(&j) = cfg.constrained_nonnegative.iter().find(|&&j| j >= m) {
        return Err(Error::Invalid(format!("constrained covariate {j} outside 0..{m}")));
    }
    check_dataset(&PolrParams { thresholds: vec![0.0; cfg.n_classes - 1], coefficients: vec![0.0; m], active_mask: vec![true; m] }, data)?;

    // observed classes, ascending, and the reduced index of each
    let mut seen = vec![false; cfg.n_classes];
    data.iter().for_each(|(_, c)| seen[c.offset()] = true);
    let observed: Vec<usize> = (1..=cfg.n_classes).filter(|&c| seen[c - 1]).collect();
    if observed.len() < 2 {
        return Err(Error::Invalid("degenerate dataset: a single observed class".into()));
    }
    let mut reduced_of = vec![0usize; cfg.n_classes + 1];
    for (r, &c) in observed.iter().enumerate() {
        reduced_of[c] = r + 1;
    }
    let reduced: Vec<PolrSample> = data
        .iter()
        .map(|(x, c)| (x.clone(), ClassIndex::new(reduced_of[c.get()]).expect("reduced class in range")))
        .collect();
    let fit = fit_reduced(&reduced, observed.len(), m, cfg)?;
    let thresholds = expand_thresholds(&fit.params.thresholds, &observed, cfg.n_classes);
    let params = PolrParams { thresholds, ..fit.params };
    params.validate()?;
    Ok(PolrFit { params, stages: fit.stages })
}

/// Maps thresholds fitted on the observed classes back to the full scale.
/// `reduced[r]` is the upper threshold of observed class `observed[r]`.
fn expand_thresholds(reduced: &[f64], observed: &[usize], n_classes: usize) -> Vec<f64> {
    let mut full = vec![f64::NAN; n_classes - 1];
    // upper threshold of every full class up to the last observed one
    let mut r = 0;
    for c in observed[0]..observed[observed.len() - 1] {
        if c == observed[r + 1] {
            r += 1;
        }
        // classes observed[r]..observed[r+1]-1 share the upper threshold of observed[r]
        full[c - 1] = reduced[r] + (c - observed[r]) as f64 * COLLAPSED_GAP;
    }
    let lowest = full[observed[0] - 1];
    for c in (1..observed[0]).rev() {
        full[c - 1] = lowest - EDGE_MARGIN - (observed[0] - 1 - c) as f64;
    }
    let last = observed[observed.len() - 1];
    if last < n_classes {
        let top = full[last - 2];
        for c in last..n_classes {
            full[c - 1] = top + EDGE_MARGIN + (c - last) as f64;
        }
    }
    full
}

fn fit_reduced(data: &[PolrSample], n_classes: usize, m: usize, cfg: &PolrFitConfig) -> Result<PolrFit> {
    let nt = n_classes - 1;
    let mut params = PolrParams {
        thresholds: initial_thresholds(data, n_classes),
        coefficients: vec![0.0; m],
        active_mask: vec![true; m],
    };

    let n = data.len() as f64;
    let opts = BfgsOptions { max_iter: cfg.max_iter, grad_tol: cfg.grad_tol, max_step: cfg.max_step };
    let mut stages = Vec::new();
    let mut excluded = None;
    loop {
        let mask = params.active_mask.clone();
        let free: Vec<usize> = (0..nt).chain((0..m).filter(|&j| mask[j]).map(|j| nt + j)).collect();
        let full = params.to_theta();
        let x0: Vec<f64> = free.iter().map(|&i| full[i]).collect();
        let out = minimize(
            |z| {
                let mut theta = full.clone();
                for (&i, &v) in free.iter().zip(z) {
                    theta[i] = v;
                }
                let p = PolrParams::from_theta(&theta, nt, mask.clone());
                let (f, g) = nll_grad_unchecked(&p, data);
                (f / n, free.iter().map(|&i| g[i] / n).collect())
            },
            x0,
            &opts,
        );
        if !out.converged {
            return Err(Error::NotConverged { iterations: out.iterations, grad_norm: out.grad_norm });
        }
        let mut theta = full;
        for (&i, &v) in free.iter().zip(&out.x) {
            theta[i] = v;
        }
        params = PolrParams::from_theta(&theta, nt, mask);
        stages.push(FitStage { excluded, nll: out.f * n, grad_norm: out.grad_norm, iterations: out.iterations });

        let worst = cfg
            .constrained_nonnegative
            .iter()
            .copied()
            .filter(|&j| params.active_mask[j] && params.coefficients[j] > 0.0)
            .max_by(|&a, &b| params.coefficients[a].total_cmp(&params.coefficients[b]));
        match worst {
            Some(j) => {
                params.active_mask[j] = false;
                params.coefficients[j] = 0.0;
                excluded = Some(j);
            }
            None => break,
        }
    }
    Ok(PolrFit { params, stages })
}

pub fn fit_polr(data: &[PolrSample], cfg: &PolrFitConfig) -> Result<PolrParams> {
    fit_polr_detailed(data, cfg).map(|f| f.params)
}

/// Versioned JSON document for fitted POLR parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolrDocument {
    pub format_version: u32,
    pub model: String,
    pub thresholds: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub active_mask: Vec<bool>,
    pub features: FeatureConfig,
}

impl PolrDocument {
    pub const VERSION: u32 = 1;

    pub fn new(params: &PolrParams, features: &FeatureConfig) -> Self {
        PolrDocument {
            format_version: Self::VERSION,
            model: "polr".into(),
            thresholds: params.thresholds.clone(),
            coefficients: params.coefficients.clone(),
            active_mask: params.active_mask.clone(),
            features: features.clone(),
        }
    }

    pub fn params(&self) -> Result<PolrParams> {
        if self.format_version != Self::VERSION || self.model != "polr" {
            return Err(Error::Invalid(format!(
                "unsupported parameter document `{}` v{}",
                self.model, self.format_version
            )));
        }
        let p = PolrParams {
            thresholds: self.thresholds.clone(),
            coefficients: self.coefficients.clone(),
            active_mask: self.active_mask.clone(),
        };
        p.validate()?;
        Ok(p)
    }
}
