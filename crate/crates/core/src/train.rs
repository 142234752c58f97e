//! Training harness: binds a model (quantum or classical) to the DP
//! optimizer and the accountant, and emits reproducible reports.
//!
//! Reproducibility contract: a (config, seed, thread count) triple fully
//! determines the report. The master seed feeds the four named streams in
//! [`crate::rng`]; mini-batch gradient fan-out joins in example-index order.
//! Wall-clock time is kept out of the serialized report so identical runs
//! produce identical bytes.

use crate::accountant::{training_epsilon, AccountantError};
use crate::circuits::{self, CircuitError, VqcModel};
use crate::data::{self, DataError, LabeledExample, SplitSpec};
use crate::mlp::{MlpError, MlpModel};
use crate::optim::{dp_minibatch_update, OptimError, PrivacyConfig, RmspropState};
use crate::{par, rng};
use log::warn;
use rand::seq::SliceRandom;
use rand::RngCore;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Accountant(#[from] AccountantError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file {path}: {reason}")]
    ModelFile { path: String, reason: String },
    #[error("evaluation set is empty")]
    EmptySet,
    #[error("boundary bounds are degenerate")]
    BadBounds,
    #[error("boundary resolution must be at least 2, got {0}")]
    BadResolution(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Blobs,
    Moons,
    Circles,
    Mnist01,
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "blobs" => Ok(Task::Blobs),
            "moons" => Ok(Task::Moons),
            "circles" => Ok(Task::Circles),
            "mnist01" => Ok(Task::Mnist01),
            other => Err(format!(
                "unknown task {other:?} (expected blobs, moons, circles, or mnist01)"
            )),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Task::Blobs => "blobs",
            Task::Moons => "moons",
            Task::Circles => "circles",
            Task::Mnist01 => "mnist01",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Vqc,
    Mlp,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vqc" => Ok(ModelKind::Vqc),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(format!("unknown model {other:?} (expected vqc or mlp)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Vqc => "vqc",
            ModelKind::Mlp => "mlp",
        })
    }
}

fn default_epochs() -> usize {
    30
}
fn default_batch_size() -> usize {
    32
}
fn default_lr() -> f64 {
    0.05
}
fn default_rmsprop_alpha() -> f64 {
    0.9
}
fn default_rmsprop_eps() -> f64 {
    1e-8
}
fn default_momentum() -> f64 {
    0.5
}
fn default_n_samples() -> usize {
    200
}
fn default_mlp_hidden() -> usize {
    7
}

/// Everything a training run depends on. The numeric defaults are the shared
/// experiment hyperparameters: lr 0.05, momentum 0.5, batch 32, RMSprop
/// smoothing 0.9 and eps 1e-8, 30 epochs, 200 planar samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub model: ModelKind,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_rmsprop_alpha")]
    pub rmsprop_alpha: f64,
    #[serde(default = "default_rmsprop_eps")]
    pub rmsprop_eps: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub privacy: Option<PrivacyConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub mnist_images: Option<PathBuf>,
    #[serde(default)]
    pub mnist_labels: Option<PathBuf>,
    /// Image-task training subset; `None` means the 1000-example default.
    #[serde(default)]
    pub train_subset: Option<usize>,
    /// Image-task test subset; `None` means the 500-example default.
    #[serde(default)]
    pub test_subset: Option<usize>,
    /// Train on the full filtered image set instead of the subsets.
    #[serde(default)]
    pub full_mnist: bool,
    /// Hidden width of the planar MLP baseline.
    #[serde(default = "default_mlp_hidden")]
    pub mlp_hidden: usize,
}

impl TrainConfig {
    pub fn new(task: Task, model: ModelKind, seed: u64) -> Self {
        Self {
            task,
            model,
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            lr: default_lr(),
            rmsprop_alpha: default_rmsprop_alpha(),
            rmsprop_eps: default_rmsprop_eps(),
            momentum: default_momentum(),
            privacy: None,
            seed,
            n_samples: default_n_samples(),
            mnist_images: None,
            mnist_labels: None,
            train_subset: None,
            test_subset: None,
            full_mnist: false,
            mlp_hidden: default_mlp_hidden(),
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size is zero".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(TrainError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.rmsprop_alpha) {
            return Err(TrainError::InvalidConfig(format!(
                "rmsprop_alpha must lie in (0,1), got {}",
                self.rmsprop_alpha
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::InvalidConfig(format!(
                "momentum must lie in [0,1), got {}",
                self.momentum
            )));
        }
        if let Some(p) = &self.privacy {
            p.validate()?;
            if !self.batch_size.is_multiple_of(p.microbatch_size) {
                return Err(TrainError::InvalidConfig(format!(
                    "microbatch size {} does not divide batch size {}",
                    p.microbatch_size, self.batch_size
                )));
            }
        }
        if self.task == Task::Mnist01
            && (self.mnist_images.is_none() || self.mnist_labels.is_none())
        {
            return Err(TrainError::InvalidConfig(
                "task mnist01 needs --mnist-images and --mnist-labels".into(),
            ));
        }
        Ok(())
    }
}

/// A trained (or trainable) classifier of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Vqc(VqcModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn param_count(&self) -> usize {
        match self {
            TrainedModel::Vqc(m) => m.param_count(),
            TrainedModel::Mlp(m) => m.param_count(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            TrainedModel::Vqc(m) => &m.params,
            TrainedModel::Mlp(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut Vec<f64> {
        match self {
            TrainedModel::Vqc(m) => &mut m.params,
            TrainedModel::Mlp(m) => &mut m.params,
        }
    }

    /// Class probabilities with an explicit parameter vector.
    pub fn probs_with(&self, params: &[f64], x: &[f64]) -> Result<[f64; 2], TrainError> {
        match self {
            TrainedModel::Vqc(m) => Ok(circuits::predict_proba(circuits::model_forward_with(
                m, params, x,
            )?)),
            TrainedModel::Mlp(m) => Ok(m.forward_with(params, x)?),
        }
    }

    pub fn probs(&self, x: &[f64]) -> Result<[f64; 2], TrainError> {
        self.probs_with(self.params(), x)
    }

    /// Loss gradient of one example with an explicit parameter vector.
    pub fn loss_grad_with(
        &self,
        params: &[f64],
        x: &[f64],
        label: usize,
    ) -> Result<Vec<f64>, TrainError> {
        match self {
            TrainedModel::Vqc(m) => Ok(circuits::param_shift_grad_with(m, params, x, label)?),
            TrainedModel::Mlp(m) => Ok(m.grad_with(params, x, label)?),
        }
    }
}

/// Hyperparameters of one `fit` call.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub rmsprop_alpha: f64,
    pub rmsprop_eps: f64,
    pub momentum: f64,
    pub privacy: Option<PrivacyConfig>,
}

impl FitSettings {
    pub fn from_config(config: &TrainConfig) -> Self {
        Self {
            epochs: config.epochs,
            batch_size: config.batch_size,
            lr: config.lr,
            rmsprop_alpha: config.rmsprop_alpha,
            rmsprop_eps: config.rmsprop_eps,
            momentum: config.momentum,
            privacy: config.privacy.clone(),
        }
    }
}

/// Per-epoch curves recorded during `fit`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub test_acc: Vec<f64>,
}

fn dataset_metrics(
    model: &TrainedModel,
    params: &[f64],
    set: &[LabeledExample],
) -> Result<(f64, f64), TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptySet);
    }
    let rows = par::map_slice(set, |ex| {
        let probs = model
            .probs_with(params, &ex.features)
            .expect("model was validated against this dataset");
        let loss = -probs[ex.label as usize].clamp(1e-12, 1.0).ln();
        let correct = usize::from(probs[1] > probs[0]) == ex.label as usize;
        (loss, correct)
    });
    let n = rows.len() as f64;
    let loss = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let acc = rows.iter().filter(|r| r.1).count() as f64 / rows.len() as f64;
    Ok((loss, acc))
}

/// Train `model` in place. Mini-batches are drawn by reshuffling the training
/// indices each epoch and dropping the trailing partial batch; each batch
/// goes through the (possibly degenerate) DP update.
pub fn fit(
    model: &mut TrainedModel,
    train_set: &[LabeledExample],
    test_set: &[LabeledExample],
    settings: &FitSettings,
    shuffle_rng: &mut ChaCha12Rng,
    noise_rng: &mut ChaCha12Rng,
) -> Result<FitMetrics, TrainError> {
    if train_set.is_empty() || test_set.is_empty() {
        return Err(TrainError::EmptySet);
    }
    if settings.batch_size == 0 || settings.batch_size > train_set.len() {
        return Err(TrainError::InvalidConfig(format!(
            "batch size {} incompatible with {} training examples",
            settings.batch_size,
            train_set.len()
        )));
    }
    let privacy = settings
        .privacy
        .clone()
        .unwrap_or_else(|| PrivacyConfig::non_private(settings.batch_size));
    privacy.validate()?;
    if !settings.batch_size.is_multiple_of(privacy.microbatch_size) {
        return Err(OptimError::MicrobatchMismatch {
            batch: settings.batch_size,
            micro: privacy.microbatch_size,
        }
        .into());
    }

    // one validation probe per set; afterwards gradient closures may unwrap
    model.probs(&train_set[0].features)?;
    model.probs(&test_set[0].features)?;

    let mut theta = std::mem::take(model.params_mut());
    let mut opt = RmspropState::new(
        theta.len(),
        settings.lr,
        settings.rmsprop_alpha,
        settings.momentum,
        settings.rmsprop_eps,
    );
    let grad_fn = |params: &[f64], ex: &&LabeledExample| {
        model
            .loss_grad_with(params, &ex.features, ex.label as usize)
            .expect("model was validated against this dataset")
    };

    let mut metrics = FitMetrics::default();
    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for _ in 0..settings.epochs {
        indices.shuffle(shuffle_rng);
        for chunk in indices.chunks_exact(settings.batch_size) {
            let batch: Vec<&LabeledExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            dp_minibatch_update(&mut theta, &batch, &grad_fn, &privacy, &mut opt, noise_rng)?;
        }
        let (train_loss, train_acc) = dataset_metrics(model, &theta, train_set)?;
        let (test_loss, test_acc) = dataset_metrics(model, &theta, test_set)?;
        metrics.train_loss.push(train_loss);
        metrics.train_acc.push(train_acc);
        metrics.test_loss.push(test_loss);
        metrics.test_acc.push(test_acc);
    }

    *model.params_mut() = theta;
    Ok(metrics)
}

/// Fraction of examples whose argmax class matches the label.
pub fn evaluate<F>(probs_fn: F, set: &[LabeledExample]) -> Result<f64, TrainError>
where
    F: Fn(&[f64]) -> [f64; 2] + Sync,
{
    if set.is_empty() {
        return Err(TrainError::EmptySet);
    }
    let correct = par::map_slice(set, |ex| {
        let p = probs_fn(&ex.features);
        usize::from(p[1] > p[0]) == ex.label as usize
    });
    Ok(correct.iter().filter(|&&c| c).count() as f64 / set.len() as f64)
}

/// Probability of class 1 on an inclusive `resolution x resolution` grid over
/// the given `(xmin, xmax, ymin, ymax)` bounds. Rows are emitted x1-major.
pub fn boundary_grid<F>(
    probs_fn: F,
    bounds: (f64, f64, f64, f64),
    resolution: usize,
) -> Result<Vec<(f64, f64, f64)>, TrainError>
where
    F: Fn(&[f64]) -> [f64; 2] + Sync,
{
    let (xmin, xmax, ymin, ymax) = bounds;
    if resolution < 2 {
        return Err(TrainError::BadResolution(resolution));
    }
    if !(xmin < xmax && ymin < ymax) {
        return Err(TrainError::BadBounds);
    }
    let step = (resolution - 1) as f64;
    Ok(par::map_range(resolution * resolution, |idx| {
        let i = idx / resolution;
        let j = idx % resolution;
        let x1 = xmin + (xmax - xmin) * i as f64 / step;
        let x2 = ymin + (ymax - ymin) * j as f64 / step;
        (x1, x2, probs_fn(&[x1, x2])[1])
    }))
}

/// Everything `train` produces: the serializable report and the fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: TrainedModel,
}

/// Run record. `wall_seconds` is informational and deliberately excluded
/// from serialization so that identical (config, seed, threads) runs write
/// byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub seed: u64,
    pub epochs: usize,
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub test_acc: Vec<f64>,
    pub final_test_acc: f64,
    pub epsilon: Option<f64>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Mirror of the per-epoch curves for plotting:
    /// `epoch,train_loss,train_acc,test_loss,test_acc`.
    pub fn write_metrics_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut out = String::from("epoch,train_loss,train_acc,test_loss,test_acc\n");
        for e in 0..self.train_loss.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e + 1,
                self.train_loss[e],
                self.train_acc[e],
                self.test_loss[e],
                self.test_acc[e]
            ));
        }
        fs::write(path, out).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Assemble the task's dataset as (train, test), deterministically from the
/// config seed.
pub fn build_dataset(
    config: &TrainConfig,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>), TrainError> {
    let data_seed = rng::stream_seed(config.seed, rng::STREAM_DATA);
    let mut shuffle_rng = rng::stream_rng(config.seed, rng::STREAM_SHUFFLE);
    let split_seed = shuffle_rng.next_u64();
    match config.task {
        Task::Blobs | Task::Moons | Task::Circles => {
            let examples = match config.task {
                Task::Blobs => data::make_blobs(config.n_samples, data_seed)?,
                Task::Moons => {
                    data::make_moons(config.n_samples, data::DEFAULT_MOONS_NOISE, data_seed)?
                }
                Task::Circles => data::make_circles(
                    config.n_samples,
                    data::DEFAULT_CIRCLES_FACTOR,
                    data::DEFAULT_CIRCLES_NOISE,
                    data_seed,
                )?,
                Task::Mnist01 => unreachable!(),
            };
            let (train, _validate, test) = data::split(
                examples,
                &SplitSpec {
                    fractions: (0.6, 0.2, 0.2),
                    seed: split_seed,
                },
            )?;
            Ok((train, test))
        }
        Task::Mnist01 => {
            let images = config.mnist_images.as_ref().expect("validated");
            let labels = config.mnist_labels.as_ref().expect("validated");
            let examples = data::load_mnist_idx(images, labels)?;
            let mut examples = data::filter_binary_and_pad(examples);
            let before = examples.len();
            examples.retain(|ex| ex.features.iter().any(|&v| v != 0.0));
            if examples.len() != before {
                warn!(
                    "dropped {} all-zero images that cannot be amplitude encoded",
                    before - examples.len()
                );
            }
            let (mut train, _unused, mut test) = data::split(
                examples,
                &SplitSpec {
                    fractions: (0.6, 0.0, 0.4),
                    seed: split_seed,
                },
            )?;
            if !config.full_mnist {
                train.truncate(config.train_subset.unwrap_or(1000));
                test.truncate(config.test_subset.unwrap_or(500));
            }
            Ok((train, test))
        }
    }
}

/// Build the untrained model the config asks for, initialized from the
/// `init` stream.
pub fn build_model(config: &TrainConfig) -> Result<TrainedModel, TrainError> {
    let mut init_rng = rng::stream_rng(config.seed, rng::STREAM_INIT);
    match (config.model, config.task) {
        (ModelKind::Vqc, Task::Mnist01) => {
            let mut model = circuits::build_mnist_model();
            model.init_params(&mut init_rng);
            Ok(TrainedModel::Vqc(model))
        }
        (ModelKind::Vqc, _) => {
            let mut model = circuits::build_2d_model();
            model.init_params(&mut init_rng);
            Ok(TrainedModel::Vqc(model))
        }
        (ModelKind::Mlp, Task::Mnist01) => Ok(TrainedModel::Mlp(MlpModel::init(
            &[1024, 1, 2],
            &mut init_rng,
        )?)),
        (ModelKind::Mlp, _) => Ok(TrainedModel::Mlp(MlpModel::init(
            &[2, config.mlp_hidden, 2],
            &mut init_rng,
        )?)),
    }
}

/// Full training run: data, model, fit, final evaluation, and the privacy
/// guarantee when a privacy config is present.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let started = Instant::now();
    let (train_set, test_set) = build_dataset(config)?;
    if let Some(p) = &config.privacy {
        if p.delta > 1.0 / train_set.len() as f64 {
            warn!(
                "delta {} exceeds 1/n = {}; the guarantee is weaker than recommended",
                p.delta,
                1.0 / train_set.len() as f64
            );
        }
    }
    let mut model = build_model(config)?;

    let mut shuffle_rng = rng::stream_rng(config.seed, rng::STREAM_SHUFFLE);
    let _split_seed = shuffle_rng.next_u64(); // consumed by build_dataset
    let mut noise_rng = rng::stream_rng(config.seed, rng::STREAM_NOISE);

    let settings = FitSettings::from_config(config);
    let metrics = fit(
        &mut model,
        &train_set,
        &test_set,
        &settings,
        &mut shuffle_rng,
        &mut noise_rng,
    )?;

    let final_test_acc = evaluate(|x| model.probs(x).expect("model was validated"), &test_set)?;

    let epsilon = match &config.privacy {
        Some(p) => {
            let steps = config.epochs * (train_set.len() / config.batch_size);
            if steps == 0 {
                Some(0.0)
            } else {
                Some(
                    training_epsilon(
                        train_set.len(),
                        config.batch_size,
                        config.epochs,
                        p.noise_multiplier,
                        p.delta,
                    )?
                    .epsilon,
                )
            }
        }
        None => None,
    };

    let report = TrainReport {
        config: config.clone(),
        seed: config.seed,
        epochs: config.epochs,
        train_loss: metrics.train_loss,
        train_acc: metrics.train_acc,
        test_loss: metrics.test_loss,
        test_acc: metrics.test_acc,
        final_test_acc,
        epsilon,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { report, model })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

/// Versioned JSON persistence; parameters round-trip exactly.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), TrainError> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&file).expect("model serialization cannot fail");
    let mut f = fs::File::create(path).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(json.as_bytes())
        .map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, TrainError> {
    let text = fs::read_to_string(path).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| TrainError::ModelFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(TrainError::ModelFile {
            path: path.display().to_string(),
            reason: format!(
                "format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            ),
        });
    }
    if let TrainedModel::Vqc(m) = &file.model {
        m.validate().map_err(|e| TrainError::ModelFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    }
    Ok(file.model)
}
