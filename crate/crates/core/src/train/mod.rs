//! Training with early stopping, prediction and evaluation.

mod metrics;
mod sweep;
mod synthetic;

pub use metrics::{f1_report, generalization_gap, write_reports_csv, EvalReport, ReportMeta, COUNT_KEYS, ERR_KEY};
pub use sweep::{sweep, SweepCell, SweepConfig, SweepResult, SweepRow, DEFAULT_SIZES};
pub use synthetic::{DistractorMode, SyntheticConfig, SyntheticTask};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ablate::{flatten, AblateError};
use crate::embed::{assemble_input, EmbedError, EmbeddingTable};
use crate::lexicon::{ErrorLabel, Instance};
use crate::nn::{cosine, margin_loss, AdamConfig, AdamState, ModelKind, Network, NnError};
use crate::seed::{derive_seed, derived_rng, Tag};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("no embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("embedding error: {0}")]
    Embed(EmbedError),
    #[error("{0}")]
    Ablate(#[from] AblateError),
    #[error("numeric failure: {0}")]
    Numeric(#[from] NnError),
    #[error("non-finite loss at epoch {0}")]
    NonFinite(usize),
    #[error("training size {size} exceeds the {available} available instances")]
    SizeExceedsData { size: usize, available: usize },
    #[error("model sets differ: {0}")]
    ModelSetMismatch(String),
    #[error("no predictions to score")]
    EmptyPredictions,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<EmbedError> for TrainError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::MissingEmbedding(text) => TrainError::MissingEmbedding(text),
            other => TrainError::Embed(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub model: ModelKind,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 120,
            lr: 0.001,
            batch_size: 100,
            patience: 10,
            runs: 3,
            base_seed: 42,
            model: ModelKind::Cnn,
            dim: 768,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("runs", self.runs),
            ("dim", self.dim),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(TrainError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }

    /// Seed of run `r`.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

/// An instance reduced to numbers: the 7×dim context and the seven option
/// vectors in presentation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: Vec<f32>,
    pub options: Vec<Vec<f32>>,
    pub labels: Vec<ErrorLabel>,
    pub correct_index: usize,
}

impl Example {
    fn negatives(&self) -> Vec<&[f32]> {
        (0..self.options.len()).filter(|&i| i != self.correct_index).map(|i| self.options[i].as_slice()).collect()
    }
}

/// Look up every context slot and option of an (already restructured)
/// instance in the embedding table.
pub fn prepare(instance: &Instance, table: &EmbeddingTable) -> Result<Example> {
    let input = assemble_input(table, &flatten(&instance.context)?)?;
    let options = instance
        .answers
        .options
        .iter()
        .map(|o| table.lookup(&o.text).map(<[f32]>::to_vec))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Example {
        id: instance.id.clone(),
        input: input.data().to_vec(),
        options,
        labels: instance.answers.options.iter().map(|o| o.label).collect(),
        correct_index: instance.answers.correct_index,
    })
}

pub fn prepare_all(instances: &[Instance], table: &EmbeddingTable) -> Result<Vec<Example>> {
    instances.iter().map(|i| prepare(i, table)).collect()
}

/// One epoch of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_micro_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for record in &self.epochs {
            w.serialize(record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience-based stopping on a monitored value where lower is better.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, stale: 0 }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, value: f64) -> StopDecision {
        if value < self.best {
            self.best = value;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::NoImprovement
        }
    }
}

/// Mean margin loss over `examples`.
pub fn mean_loss(net: &Network<f32>, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(TrainError::EmptyDataset("no examples to score".into()));
    }
    let mut total = 0.0f64;
    for ex in examples {
        let pred = net.forward(&ex.input)?;
        total += margin_loss(&pred, &ex.options[ex.correct_index], &ex.negatives())?.0 as f64;
    }
    Ok(total / examples.len() as f64)
}

/// One mini-batch: mean loss and accumulated mean gradient.
fn batch_gradient(net: &Network<f32>, batch: &[&Example], grads: &mut Network<f32>) -> Result<f64> {
    grads.fill_zero();
    let scale = 1.0 / batch.len() as f32;
    let mut total = 0.0f64;
    for ex in batch {
        let trace = net.forward_trace(&ex.input)?;
        let (loss, mut d_out) = margin_loss(&trace.output, &ex.options[ex.correct_index], &ex.negatives())?;
        total += loss as f64;
        d_out.iter_mut().for_each(|d| *d *= scale);
        net.backward(&ex.input, &trace, &d_out, grads)?;
    }
    Ok(total / batch.len() as f64)
}

/// Train one model with seed `seed`. Returns the parameters of the epoch with
/// the lowest validation loss.
pub fn train(
    config: &TrainConfig,
    seed: u64,
    train_set: &[Example],
    val_set: &[Example],
) -> Result<(Network<f32>, History)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset("training set".into()));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptyDataset("validation set".into()));
    }
    check_dims(config.dim, train_set.iter().chain(val_set))?;
    let mut net = Network::<f32>::new(config.model, config.dim, derive_seed(seed, &[Tag::Str("init")]))?;
    let mut grads = net.zeros_like();
    let mut adam = AdamState::new(AdamConfig { lr: config.lr, ..AdamConfig::default() }, &net);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = net.clone();
    let mut history = History::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut derived_rng(seed, &[Tag::Str("epoch"), Tag::from(epoch)]));
        let mut weighted = 0.0f64;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            weighted += batch_gradient(&net, &batch, &mut grads)? * batch.len() as f64;
            adam.update(&mut net, &grads)?;
        }
        let train_loss = weighted / train_set.len() as f64;
        let val_loss = mean_loss(&net, val_set)?;
        let val_micro_f1 = accuracy(&net, val_set)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(TrainError::NonFinite(epoch));
        }
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss, val_micro_f1 });
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} f1 {val_micro_f1:.3}");
        match stopper.observe(val_loss) {
            StopDecision::Improved => {
                best = net.clone();
                history.best_epoch = epoch;
            }
            StopDecision::NoImprovement => {}
            StopDecision::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}

fn check_dims<'a>(dim: usize, examples: impl Iterator<Item = &'a Example>) -> Result<()> {
    for ex in examples {
        let ok = ex.input.len() == 7 * dim && ex.options.len() == 7 && ex.options.iter().all(|o| o.len() == dim);
        if !ok || ex.correct_index >= 7 {
            return Err(TrainError::Embed(EmbedError::DimMismatch {
                expected: dim,
                found: ex.options.first().map_or(0, Vec::len),
            }));
        }
    }
    Ok(())
}

/// Option with the highest cosine to the predicted vector, ties to the lowest
/// index, plus all seven scores.
pub fn predict(net: &Network<f32>, example: &Example) -> Result<(usize, Vec<f64>)> {
    let pred: Vec<f64> = net.forward(&example.input)?.into_iter().map(f64::from).collect();
    choose(&pred, &example.options)
}

pub(crate) fn choose(pred: &[f64], options: &[Vec<f32>]) -> Result<(usize, Vec<f64>)> {
    let mut scores = Vec::with_capacity(options.len());
    for option in options {
        let o: Vec<f64> = option.iter().map(|&x| x as f64).collect();
        scores.push(cosine(&o, pred)?);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

/// Chosen option labels for every example.
pub fn predict_labels(net: &Network<f32>, examples: &[Example]) -> Result<Vec<Option<ErrorLabel>>> {
    examples.iter().map(|ex| Ok(Some(ex.labels[predict(net, ex)?.0]))).collect()
}

fn accuracy(net: &Network<f32>, examples: &[Example]) -> Result<f64> {
    let mut hits = 0usize;
    for ex in examples {
        if predict(net, ex)?.0 == ex.correct_index {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}

/// Predict and score `examples`.
pub fn evaluate(net: &Network<f32>, examples: &[Example], meta: ReportMeta) -> Result<EvalReport> {
    f1_report(&predict_labels(net, examples)?, meta)
}
