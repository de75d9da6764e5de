//! Feedforward classifier over the visibility classes: two logistic hidden
//! layers and a softmax output, trained by full-batch gradient descent on the
//! mean cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector};
use crate::scale::{ClassIndex, N_CLASSES};
use crate::verification::PredictiveDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: [usize; 2],
    pub output_dim: usize,
}

impl MlpArchitecture {
    pub fn for_features(features: &FeatureConfig) -> Self {
        MlpArchitecture { input_dim: features.dim(), hidden: [25, 25], output_dim: N_CLASSES }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.contains(&0) || self.output_dim < 2 {
            return Err(Error::Invalid(format!("invalid MLP architecture {self:?}")));
        }
        Ok(())
    }

    fn layer_shapes(&self) -> [(usize, usize); 3] {
        [
            (self.hidden[0], self.input_dim),
            (self.hidden[1], self.hidden[0]),
            (self.output_dim, self.hidden[1]),
        ]
    }

    /// Total number of weights and biases.
    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Shape (outputs, inputs).
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub arch: MlpArchitecture,
    pub layers: [Layer; 3],
}

impl MlpParams {
    pub fn zeros(arch: MlpArchitecture) -> Self {
        let layers = arch.layer_shapes().map(|(o, i)| Layer { weights: Array2::zeros((o, i)), bias: Array1::zeros(o) });
        MlpParams { arch, layers }
    }

    /// Weights and biases drawn uniformly from `[-scale, scale]`, layer by
    /// layer, weights (row-major) before biases.
    pub fn random(arch: MlpArchitecture, scale: f64, seed: u64) -> Result<Self> {
        arch.validate()?;
        if !(scale > 0.0) {
            return Err(Error::Invalid("init_scale must be positive".into()));
        }
        let dist = Uniform::new_inclusive(-scale, scale).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(arch);
        for layer in &mut p.layers {
            layer.weights.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
            layer.bias.iter_mut().for_each(|b| *b = dist.sample(&mut rng));
        }
        Ok(p)
    }

    /// Flattens all parameters in the order used by [`MlpParams::random`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.arch.n_params());
        for layer in &self.layers {
            v.extend(layer.weights.iter());
            v.extend(layer.bias.iter());
        }
        v
    }

    pub fn from_vec(arch: MlpArchitecture, values: &[f64]) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.n_params() {
            return Err(Error::Dimension { expected: arch.n_params(), got: values.len() });
        }
        let mut p = Self::zeros(arch);
        let mut it = values.iter().copied();
        for layer in &mut p.layers {
            layer.weights.iter_mut().zip(&mut it).for_each(|(w, v)| *w = v);
            layer.bias.iter_mut().zip(&mut it).for_each(|(b, v)| *b = v);
        }
        Ok(p)
    }

    fn axpy(&mut self, a: f64, other: &MlpParams) {
        for (l, g) in self.layers.iter_mut().zip(&other.layers) {
            l.weights.scaled_add(a, &g.weights);
            l.bias.scaled_add(a, &g.bias);
        }
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

struct Activations {
    h1: Array2<f64>,
    h2: Array2<f64>,
    /// Row-wise log-softmax of the output layer.
    log_p: Array2<f64>,
}

fn affine(x: ArrayView2<f64>, layer: &Layer) -> Array2<f64> {
    x.dot(&layer.weights.t()) + &layer.bias
}

fn forward_batch(params: &MlpParams, x: ArrayView2<f64>) -> Activations {
    let [l1, l2, l3] = &params.layers;
    let h1 = affine(x, l1).mapv_into(sigmoid);
    let h2 = affine(h1.view(), l2).mapv_into(sigmoid);
    let mut log_p = affine(h2.view(), l3);
    for mut row in log_p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|z| z - lse);
    }
    Activations { h1, h2, log_p }
}

fn check_input(params: &MlpParams, x: &[f64]) -> Result<()> {
    if x.len() != params.arch.input_dim {
        return Err(Error::Dimension { expected: params.arch.input_dim, got: x.len() });
    }
    Ok(())
}

/// Class probabilities for one input.
pub fn mlp_probs(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let xs = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
    let act = forward_batch(params, xs);
    let mut p: Vec<f64> = act.log_p.row(0).iter().map(|l| l.exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// Predictive distribution on the 84-class scale.
pub fn mlp_forward(params: &MlpParams, x: &FeatureVector) -> Result<PredictiveDistribution> {
    if params.arch.output_dim != N_CLASSES {
        return Err(Error::Dimension { expected: N_CLASSES, got: params.arch.output_dim });
    }
    PredictiveDistribution::new(mlp_probs(params, x.as_slice())?)
}

pub type MlpSample = (FeatureVector, ClassIndex);

struct Batch {
    x: Array2<f64>,
    y: Vec<usize>,
}

fn to_batch(params: &MlpParams, batch: &[MlpSample]) -> Result<Batch> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty MLP batch".into()));
    }
    let d = params.arch.input_dim;
    let mut x = Array2::zeros((batch.len(), d));
    let mut y = Vec::with_capacity(batch.len());
    for (i, (f, c)) in batch.iter().enumerate() {
        check_input(params, f.as_slice())?;
        if c.get() > params.arch.output_dim {
            return Err(Error::Invalid(format!("class {c} beyond {} outputs", params.arch.output_dim)));
        }
        x.row_mut(i).iter_mut().zip(f.as_slice()).for_each(|(a, &b)| *a = b);
        y.push(c.offset());
    }
    Ok(Batch { x, y })
}

fn loss_grad(params: &MlpParams, b: &Batch) -> (f64, MlpParams) {
    let n = b.y.len() as f64;
    let act = forward_batch(params, b.x.view());
    let loss = -b.y.iter().enumerate().map(|(i, &c)| act.log_p[[i, c]]).sum::<f64>() / n;

    // d loss / d logits = (softmax - onehot) / n
    let mut dz3 = act.log_p.mapv(f64::exp);
    for (i, &c) in b.y.iter().enumerate() {
        dz3[[i, c]] -= 1.0;
    }
    dz3 /= n;
    let [_, l2, l3] = &params.layers;
    let dh2 = dz3.dot(&l3.weights);
    let dz2 = dh2 * &act.h2 * &act.h2.mapv(|h| 1.0 - h);
    let dh1 = dz2.dot(&l2.weights);
    let dz1 = dh1 * &act.h1 * &act.h1.mapv(|h| 1.0 - h);

    let layer = |dz: &Array2<f64>, input: ArrayView2<f64>| Layer { weights: dz.t().dot(&input), bias: dz.sum_axis(Axis(0)) };
    let grad = MlpParams {
        arch: params.arch,
        layers: [layer(&dz1, b.x.view()), layer(&dz2, act.h1.view()), layer(&dz3, act.h2.view())],
    };
    (loss, grad)
}

/// Mean cross-entropy over the batch and its gradient, laid out like the
/// parameters.
pub fn mlp_loss_grad(params: &MlpParams, batch: &[MlpSample]) -> Result<(f64, MlpParams)> {
    let b = to_batch(params, batch)?;
    Ok(loss_grad(params, &b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpTrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        MlpTrainConfig { max_epochs: 200, learning_rate: 0.2, seed: 0, init_scale: 0.5 }
    }
}

impl MlpTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.max_epochs == 0 || !(self.init_scale > 0.0) {
            return Err(Error::Invalid(format!("invalid MLP training config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpFit {
    pub params: MlpParams,
    /// Loss before each epoch's update, followed by the final loss.
    pub loss_trace: Vec<f64>,
}

pub fn train_mlp_detailed(dataset: &[MlpSample], arch: MlpArchitecture, cfg: &MlpTrainConfig) -> Result<MlpFit> {
    cfg.validate()?;
    let mut params = MlpParams::random(arch, cfg.init_scale, cfg.seed)?;
    let batch = to_batch(&params, dataset)?;
    let mut loss_trace = Vec::with_capacity(cfg.max_epochs + 1);
    for epoch in 0..=cfg.max_epochs {
        let (loss, grad) = loss_grad(&params, &batch);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        loss_trace.push(loss);
        if epoch < cfg.max_epochs {
            params.axpy(-cfg.learning_rate, &grad);
        }
    }
    Ok(MlpFit { params, loss_trace })
}

pub fn train_mlp(dataset: &[MlpSample], arch: MlpArchitecture, cfg: &MlpTrainConfig) -> Result<MlpParams> {
    train_mlp_detailed(dataset, arch, cfg).map(|f| f.params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub rows: usize,
    pub cols: usize,
    /// Row-major weights.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Versioned JSON document for trained MLP parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDocument {
    pub format_version: u32,
    pub model: String,
    pub architecture: MlpArchitecture,
    pub hidden_activation: String,
    pub layers: Vec<LayerDocument>,
    pub features: FeatureConfig,
}

impl MlpDocument {
    pub const VERSION: u32 = 1;

    pub fn new(params: &MlpParams, features: &FeatureConfig) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| LayerDocument {
                rows: l.weights.nrows(),
                cols: l.weights.ncols(),
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect();
        MlpDocument {
            format_version: Self::VERSION,
            model: "mlp".into(),
            architecture: params.arch,
            hidden_activation: "logistic".into(),
            layers,
            features: features.clone(),
        }
    }

    pub fn params(&self) -> Result<MlpParams> {
        if self.format_version != Self::VERSION || self.model != "mlp" || self.hidden_activation != "logistic" {
            return Err(Error::Invalid(format!(
                "unsupported parameter document `{}` v{}",
                self.model, self.format_version
            )));
        }
        self.architecture.validate()?;
        if self.layers.len() != 3 {
            return Err(Error::Dimension { expected: 3, got: self.layers.len() });
        }
        let mut p = MlpParams::zeros(self.architecture);
        for (layer, doc) in p.layers.iter_mut().zip(&self.layers) {
            let shape = layer.weights.dim();
            if (doc.rows, doc.cols) != shape || doc.weights.len() != shape.0 * shape.1 || doc.bias.len() != shape.0 {
                return Err(Error::Invalid(format!("layer shape does not match architecture {:?}", shape)));
            }
            layer.weights = Array2::from_shape_vec(shape, doc.weights.clone()).expect("checked shape");
            layer.bias = Array1::from(doc.bias.clone());
        }
        Ok(p)
    }
}
