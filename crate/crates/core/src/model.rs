//! Small trainable model families and the training-stage pipeline:
//! candidate evaluation, reference-weighted pre-aggregation, seeded
//! mini-batch training, and gradient-ascent unlearning.
//!
//! Two families are built in — multinomial logistic regression and a
//! one-hidden-layer tanh MLP — both with analytic gradients that are checked
//! against central finite differences in the test suite.

use crate::encoding;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Abort threshold for gradient ascent: any parameter beyond this magnitude
/// is treated as divergence.
pub const MAX_PARAM_MAGNITUDE: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("feature dimension mismatch: model expects {expected}, data has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("parameter vector shapes differ")]
    ShapeMismatch,
    #[error("parameter vector has wrong length: shape wants {expected}, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("invalid training settings: {0}")]
    InvalidSettings(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },
    #[error("invalid candidate selection: n={n}, k={k}, population={population}")]
    InvalidSelection { n: usize, k: usize, population: usize },
    #[error("reference count of zero is not aggregatable")]
    ZeroReferenceCount,
    #[error("non-finite parameter values")]
    NonFiniteParams,
}

/// Model-family identifier fixing the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelShape {
    /// Multinomial logistic regression: row-major `classes x features`
    /// weights followed by `classes` biases.
    Linear { features: usize, classes: usize },
    /// One hidden tanh layer: `hidden x features` + `hidden` biases, then
    /// `classes x hidden` + `classes` biases.
    Mlp {
        features: usize,
        hidden: usize,
        classes: usize,
    },
}

impl ModelShape {
    pub fn features(&self) -> usize {
        match *self {
            ModelShape::Linear { features, .. } | ModelShape::Mlp { features, .. } => features,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            ModelShape::Linear { classes, .. } | ModelShape::Mlp { classes, .. } => classes,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            ModelShape::Linear { features, classes } => classes * features + classes,
            ModelShape::Mlp {
                features,
                hidden,
                classes,
            } => hidden * features + hidden + classes * hidden + classes,
        }
    }
}

/// Flat parameter vector tagged with its family layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub shape: ModelShape,
}

impl ParamVector {
    pub fn zeros(shape: ModelShape) -> Self {
        Self {
            values: vec![0.0; shape.param_count()],
            shape,
        }
    }

    pub fn new(shape: ModelShape, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != shape.param_count() {
            return Err(ModelError::BadLength {
                expected: shape.param_count(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteParams);
        }
        Ok(Self { values, shape })
    }

    /// Seeded Gaussian initialization with standard deviation `scale`.
    pub fn seeded_init(shape: ModelShape, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).expect("scale is finite");
        let values = (0..shape.param_count())
            .map(|_| normal.sample(&mut rng))
            .collect();
        Self { values, shape }
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector, ModelError> {
        if self.shape != other.shape {
            return Err(ModelError::ShapeMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ParamVector {
            values,
            shape: self.shape,
        })
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector, ModelError> {
        if self.shape != other.shape {
            return Err(ModelError::ShapeMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ParamVector {
            values,
            shape: self.shape,
        })
    }

    pub fn scale(&self, factor: f64) -> ParamVector {
        ParamVector {
            values: self.values.iter().map(|v| v * factor).collect(),
            shape: self.shape,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Wire format: count-prefixed little-endian `f64`s (values only; the
    /// shape travels in the scenario, not the blob).
    pub fn to_bytes(&self) -> Vec<u8> {
        encoding::encode_f64_vec(&self.values)
    }

    pub fn from_bytes(shape: ModelShape, bytes: &[u8]) -> Result<Self, ModelError> {
        let values = encoding::decode_f64_vec(bytes).ok_or(ModelError::BadLength {
            expected: shape.param_count(),
            got: 0,
        })?;
        Self::new(shape, values)
    }
}

/// Labeled samples with a fixed class count and uniform feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<(Vec<f64>, usize)>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<(Vec<f64>, usize)>, num_classes: usize) -> Result<Self, ModelError> {
        if num_classes == 0 {
            return Err(ModelError::InvalidSettings("num_classes must be > 0".into()));
        }
        if let Some(dim) = samples.first().map(|(x, _)| x.len()) {
            for (x, label) in &samples {
                if x.len() != dim {
                    return Err(ModelError::DimensionMismatch {
                        expected: dim,
                        got: x.len(),
                    });
                }
                if *label >= num_classes {
                    return Err(ModelError::LabelOutOfRange {
                        label: *label,
                        classes: num_classes,
                    });
                }
            }
        }
        Ok(Self {
            samples,
            num_classes,
        })
    }

    pub fn samples(&self) -> &[(Vec<f64>, usize)] {
        &self.samples
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.samples.first().map(|(x, _)| x.len())
    }

    /// Samples whose label satisfies the predicate; class count is kept.
    pub fn filter_labels(&self, keep: impl Fn(usize) -> bool) -> Dataset {
        Dataset {
            samples: self
                .samples
                .iter()
                .filter(|(_, label)| keep(*label))
                .cloned()
                .collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Geometry of the built-in blob generator.
///
/// Class centers sit on distinct coordinate axes, pushed into the positive
/// orthant by `center_offset` and jittered per seed. The construction keeps
/// classes linearly separable for any seed as long as `noise_std` is small
/// relative to `center_spread`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobConfig {
    pub classes: usize,
    pub features: usize,
    pub center_offset: f64,
    pub center_spread: f64,
    pub center_jitter: f64,
    pub noise_std: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            features: 4,
            center_offset: 3.0,
            center_spread: 3.0,
            center_jitter: 0.3,
            noise_std: 0.5,
        }
    }
}

/// Class centers for the blob generator, shared by every user of a scenario.
pub fn blob_centers(cfg: &BlobConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, cfg.center_jitter.max(f64::MIN_POSITIVE))
        .expect("jitter is finite");
    (0..cfg.classes)
        .map(|c| {
            (0..cfg.features)
                .map(|d| {
                    let mut v = cfg.center_offset;
                    if d == c % cfg.features {
                        v += cfg.center_spread * (1 + c / cfg.features) as f64;
                    }
                    if cfg.center_jitter > 0.0 {
                        v += jitter.sample(&mut rng);
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// Draws `per_class` noisy samples around each center.
pub fn sample_blobs(
    cfg: &BlobConfig,
    centers: &[Vec<f64>],
    per_class: usize,
    seed: u64,
) -> Result<Dataset, ModelError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|_| {
        ModelError::InvalidSettings("noise_std must be finite and non-negative".into())
    })?;
    let mut samples = Vec::with_capacity(centers.len() * per_class);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let x = center.iter().map(|c| c + noise.sample(&mut rng)).collect();
            samples.push((x, label));
        }
    }
    Dataset::new(samples, cfg.classes)
}

/// Convenience wrapper: centers from `center_seed`, samples from `sample_seed`.
pub fn gaussian_blobs(
    cfg: &BlobConfig,
    per_class: usize,
    center_seed: u64,
    sample_seed: u64,
) -> Result<Dataset, ModelError> {
    let centers = blob_centers(cfg, center_seed);
    sample_blobs(cfg, &centers, per_class, sample_seed)
}

/// Training hyperparameters attached to every model node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl TrainSettings {
    fn validate(&self) -> Result<(), ModelError> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(ModelError::InvalidSettings(
                "learning_rate must be positive and finite".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidSettings("batch_size must be > 0".into()));
        }
        Ok(())
    }
}

fn check_compat(model: &ParamVector, data: &Dataset) -> Result<(), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let dim = data.feature_dim().expect("non-empty dataset has a dim");
    if dim != model.shape.features() {
        return Err(ModelError::DimensionMismatch {
            expected: model.shape.features(),
            got: dim,
        });
    }
    if data.num_classes() > model.shape.classes() {
        return Err(ModelError::LabelOutOfRange {
            label: data.num_classes() - 1,
            classes: model.shape.classes(),
        });
    }
    Ok(())
}

fn logits(model: &ParamVector, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match model.shape {
        ModelShape::Linear { features, classes } => {
            let w = &model.values[..classes * features];
            let b = &model.values[classes * features..];
            let z = (0..classes)
                .map(|c| {
                    b[c] + w[c * features..(c + 1) * features]
                        .iter()
                        .zip(x)
                        .map(|(wi, xi)| wi * xi)
                        .sum::<f64>()
                })
                .collect();
            (Vec::new(), z)
        }
        ModelShape::Mlp {
            features,
            hidden,
            classes,
        } => {
            let (w1, rest) = model.values.split_at(hidden * features);
            let (b1, rest) = rest.split_at(hidden);
            let (w2, b2) = rest.split_at(classes * hidden);
            let h: Vec<f64> = (0..hidden)
                .map(|j| {
                    (b1[j]
                        + w1[j * features..(j + 1) * features]
                            .iter()
                            .zip(x)
                            .map(|(wi, xi)| wi * xi)
                            .sum::<f64>())
                    .tanh()
                })
                .collect();
            let z = (0..classes)
                .map(|c| {
                    b2[c] + w2[c * hidden..(c + 1) * hidden]
                        .iter()
                        .zip(&h)
                        .map(|(wi, hi)| wi * hi)
                        .sum::<f64>()
                })
                .collect();
            (h, z)
        }
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean cross-entropy over the indexed samples plus the analytic gradient.
fn loss_and_gradient_on(
    model: &ParamVector,
    data: &Dataset,
    indices: &[usize],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.values.len()];
    let mut loss = 0.0;
    let inv = 1.0 / indices.len() as f64;
    for &i in indices {
        let (x, label) = &data.samples()[i];
        let (h, z) = logits(model, x);
        loss += (log_sum_exp(&z) - z[*label]) * inv;
        let mut dz = softmax(&z);
        dz[*label] -= 1.0;
        for v in dz.iter_mut() {
            *v *= inv;
        }
        match model.shape {
            ModelShape::Linear { features, classes } => {
                let (gw, gb) = grad.split_at_mut(classes * features);
                for c in 0..classes {
                    for d in 0..features {
                        gw[c * features + d] += dz[c] * x[d];
                    }
                    gb[c] += dz[c];
                }
            }
            ModelShape::Mlp {
                features,
                hidden,
                classes,
            } => {
                let w2_off = hidden * features + hidden;
                // dh = W2^T dz, then back through tanh.
                let w2 = &model.values[w2_off..w2_off + classes * hidden];
                let mut dpre: Vec<f64> = (0..hidden)
                    .map(|j| {
                        (0..classes)
                            .map(|c| w2[c * hidden + j] * dz[c])
                            .sum::<f64>()
                    })
                    .collect();
                for (j, v) in dpre.iter_mut().enumerate() {
                    *v *= 1.0 - h[j] * h[j];
                }
                for j in 0..hidden {
                    for d in 0..features {
                        grad[j * features + d] += dpre[j] * x[d];
                    }
                    grad[hidden * features + j] += dpre[j];
                }
                for c in 0..classes {
                    for j in 0..hidden {
                        grad[w2_off + c * hidden + j] += dz[c] * h[j];
                    }
                    grad[w2_off + classes * hidden + c] += dz[c];
                }
            }
        }
    }
    (loss, grad)
}

/// Mean cross-entropy of the model on the whole dataset.
pub fn loss(model: &ParamVector, data: &Dataset) -> Result<f64, ModelError> {
    check_compat(model, data)?;
    let indices: Vec<usize> = (0..data.len()).collect();
    Ok(loss_and_gradient_on(model, data, &indices).0)
}

/// Analytic gradient of [`loss`] with respect to every parameter.
pub fn loss_gradient(model: &ParamVector, data: &Dataset) -> Result<Vec<f64>, ModelError> {
    check_compat(model, data)?;
    let indices: Vec<usize> = (0..data.len()).collect();
    Ok(loss_and_gradient_on(model, data, &indices).1)
}

/// Fraction of samples whose argmax prediction matches the label.
/// Ties resolve to the lowest class index, keeping evaluation deterministic.
pub fn evaluate(model: &ParamVector, data: &Dataset) -> Result<f64, ModelError> {
    check_compat(model, data)?;
    let mut correct = 0usize;
    for (x, label) in data.samples() {
        let (_, z) = logits(model, x);
        let mut best = 0usize;
        for (c, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = c;
            }
        }
        if best == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Evaluates a uniform random `k`-subset of `models` on `data` and returns
/// the `n` most accurate, ties broken by lower id.
pub fn select_candidates<I: Ord + Copy>(
    models: &[(I, ParamVector)],
    data: &Dataset,
    k: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(I, f64)>, ModelError> {
    if n > k || k > models.len() {
        return Err(ModelError::InvalidSelection {
            n,
            k,
            population: models.len(),
        });
    }
    // Partial Fisher-Yates draw of k distinct indices.
    let mut pool: Vec<usize> = (0..models.len()).collect();
    let mut drawn = Vec::with_capacity(k);
    for _ in 0..k {
        let j = rng.gen_range(0..pool.len());
        drawn.push(pool.swap_remove(j));
    }
    let mut scored: Vec<(I, f64)> = drawn
        .into_iter()
        .map(|i| {
            let (id, params) = &models[i];
            evaluate(params, data).map(|acc| (*id, acc))
        })
        .collect::<Result<_, _>>()?;
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("accuracies are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(n);
    Ok(scored)
}

/// Reference-weighted pre-aggregation: the elementwise sum of each parent
/// scaled by the reciprocal of its own reference count.
pub fn pre_aggregate(referenced: &[(ParamVector, usize)]) -> Result<ParamVector, ModelError> {
    let (first, _) = referenced.first().ok_or(ModelError::EmptyDataset)?;
    let shape = first.shape;
    let mut values = vec![0.0; shape.param_count()];
    for (params, count) in referenced {
        if params.shape != shape {
            return Err(ModelError::ShapeMismatch);
        }
        if *count == 0 {
            return Err(ModelError::ZeroReferenceCount);
        }
        let w = 1.0 / *count as f64;
        for (acc, v) in values.iter_mut().zip(&params.values) {
            *acc += w * v;
        }
    }
    Ok(ParamVector { values, shape })
}

#[derive(Clone, Copy)]
enum Direction {
    Descent,
    Ascent,
}

fn run_epochs(
    start: &ParamVector,
    settings: &TrainSettings,
    data: &Dataset,
    direction: Direction,
) -> Result<ParamVector, ModelError> {
    settings.validate()?;
    check_compat(start, data)?;
    if !start.is_finite() {
        return Err(ModelError::NonFiniteParams);
    }
    let mut params = start.clone();
    if settings.epochs == 0 {
        return Ok(params);
    }
    let sign = match direction {
        Direction::Descent => -1.0,
        Direction::Ascent => 1.0,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(settings.rng_seed);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..settings.epochs {
        indices.shuffle(&mut rng);
        for batch in indices.chunks(settings.batch_size) {
            let (batch_loss, grad) = loss_and_gradient_on(&params, data, batch);
            if !batch_loss.is_finite() {
                return Err(ModelError::Divergence {
                    epoch,
                    detail: format!("non-finite loss {batch_loss}"),
                });
            }
            for (p, g) in params.values.iter_mut().zip(&grad) {
                *p += sign * settings.learning_rate * g;
            }
        }
        if let Direction::Ascent = direction {
            let max = params.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max > MAX_PARAM_MAGNITUDE {
                return Err(ModelError::Divergence {
                    epoch,
                    detail: format!("parameter magnitude {max:.3e} exceeds guard"),
                });
            }
        }
    }
    if !params.is_finite() {
        return Err(ModelError::Divergence {
            epoch: settings.epochs,
            detail: "non-finite parameters after final epoch".into(),
        });
    }
    Ok(params)
}

/// Seeded mini-batch gradient descent on cross-entropy.
pub fn train(
    start: &ParamVector,
    settings: &TrainSettings,
    data: &Dataset,
) -> Result<ParamVector, ModelError> {
    run_epochs(start, settings, data, Direction::Descent)
}

/// Gradient ascent on the forget set. Returns `(updated, delta)` with
/// `updated = model + delta` holding exactly.
pub fn sga_unlearn(
    model: &ParamVector,
    forget: &Dataset,
    settings: &TrainSettings,
) -> Result<(ParamVector, ParamVector), ModelError> {
    let ascended = run_epochs(model, settings, forget, Direction::Ascent)?;
    let delta = ascended.sub(model)?;
    let updated = model.add(&delta)?;
    Ok((updated, delta))
}
