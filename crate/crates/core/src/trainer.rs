//! Mini-batch Adam training with a training-accuracy stopping rule and
//! best-dev-accuracy checkpointing, plus evaluation and prediction helpers.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};

use crate::checkpoint::{save_checkpoint, Checkpoint, CheckpointMeta};
use crate::corpus::make_batches;
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, Metrics};
use crate::models::{Classifier, Mode};
use crate::nn::{AdamConfig, AdamState};
use crate::preprocess::{encode_text, EncodedExample, Vocabulary};
use crate::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub target_train_accuracy: f64,
    pub seed: u64,
    /// Overwritten each time dev accuracy reaches a new maximum.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            lr: 0.001,
            max_epochs: 100,
            target_train_accuracy: 0.98,
            seed: 0,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(self.target_train_accuracy > 0.0 && self.target_train_accuracy <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target training accuracy {} outside (0, 1]",
                self.target_train_accuracy
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example cross-entropy over the epoch.
    pub train_loss: f64,
    /// Running accuracy over the epoch's batches (dropout active).
    pub train_acc: f64,
    pub dev_acc: f64,
    pub dev_f1: f64,
}

impl EpochRecord {
    pub fn to_line(&self) -> String {
        format!(
            "epoch={} train_loss={:.6} train_acc={:.6} dev_acc={:.6} dev_f1={:.6}",
            self.epoch, self.train_loss, self.train_acc, self.dev_acc, self.dev_f1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
    /// Whether the training-accuracy target ended the run before `max_epochs`.
    pub reached_target: bool,
}

impl TrainHistory {
    /// One `key=value` line per epoch.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}", r.to_line());
        }
        out
    }
}

/// What gets written alongside the weights when a checkpoint is saved.
#[derive(Debug, Clone, Copy)]
pub struct CheckpointContext<'a> {
    pub vocab: &'a Vocabulary,
    pub label_names: &'a [String],
    pub task_id: &'a str,
}

fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

fn check_labels(data: &[EncodedExample], classes: usize) -> Result<()> {
    if let Some(ex) = data.iter().find(|ex| ex.label >= classes) {
        return Err(Error::InvalidConfig(format!(
            "label index {} but the model has {classes} classes",
            ex.label
        )));
    }
    Ok(())
}

/// Adds the 1-based epoch and batch to non-finite diagnostics.
fn locate(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} at epoch {epoch}, batch {}", batch + 1)),
        other => other,
    }
}

pub fn train(
    model: &mut dyn Classifier<f32>,
    train_set: &[EncodedExample],
    dev_set: &[EncodedExample],
    cfg: &TrainConfig,
    ctx: CheckpointContext<'_>,
) -> Result<TrainHistory> {
    train_with_progress(model, train_set, dev_set, cfg, ctx, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with_progress(
    model: &mut dyn Classifier<f32>,
    train_set: &[EncodedExample],
    dev_set: &[EncodedExample],
    cfg: &TrainConfig,
    ctx: CheckpointContext<'_>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let classes = model.config().num_classes;
    check_labels(train_set, classes)?;
    check_labels(dev_set, classes)?;
    if ctx.label_names.len() != classes {
        return Err(Error::InvalidConfig(format!(
            "{} label names for a {classes}-class model",
            ctx.label_names.len()
        )));
    }

    // one generator drives both the per-epoch shuffles and every dropout mask
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut grads = model.params().zero_grads();
    let mut history = TrainHistory {
        best_val_accuracy: f64::NEG_INFINITY,
        ..TrainHistory::default()
    };

    for epoch in 1..=cfg.max_epochs {
        let plan = make_batches(train_set.len(), cfg.batch_size, rng.gen(), true)?;
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (b, batch) in plan.batches().enumerate() {
            grads.fill_zero();
            let scale = 1.0 / batch.len() as f32;
            for &i in batch {
                let ex = &train_set[i];
                let step = model
                    .accumulate_gradients(&ex.ids, ex.label, Mode::Training(&mut rng), scale, &mut grads)
                    .map_err(|e| locate(e, epoch, b))?;
                if !step.loss.is_finite() {
                    return Err(locate(Error::NonFinite("training loss".into()), epoch, b));
                }
                loss_sum += f64::from(step.loss);
                correct += usize::from(argmax(&step.probs) == ex.label);
            }
            adam.step(model.params_mut(), &grads).map_err(|e| locate(e, epoch, b))?;
        }

        let n = train_set.len() as f64;
        let dev = evaluate(&*model, dev_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            dev_acc: dev.metrics.accuracy,
            dev_f1: dev.metrics.weighted_f1,
        };
        if record.dev_acc > history.best_val_accuracy {
            history.best_val_accuracy = record.dev_acc;
            history.best_epoch = epoch;
            if let Some(path) = &cfg.checkpoint_path {
                let meta = CheckpointMeta {
                    task_id: ctx.task_id.to_string(),
                    best_val_accuracy: Some(record.dev_acc),
                    best_epoch: Some(epoch),
                };
                save_checkpoint(path, &*model, ctx.vocab, ctx.label_names, &meta)?;
            }
        }
        on_epoch(&record);
        let done = record.train_acc >= cfg.target_train_accuracy;
        history.records.push(record);
        if done {
            history.reached_target = true;
            break;
        }
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub metrics: Metrics,
}

/// Inference-mode argmax predictions and metrics against the stored labels.
pub fn evaluate(model: &dyn Classifier<f32>, data: &[EncodedExample]) -> Result<Evaluation> {
    let classes = model.config().num_classes;
    let mut predictions = Vec::with_capacity(data.len());
    for ex in data {
        predictions.push(argmax(&model.predict_proba(&ex.ids)?));
    }
    let truth: Vec<usize> = data.iter().map(|ex| ex.label).collect();
    let metrics = compute_metrics(&truth, &predictions, classes)?;
    Ok(Evaluation { predictions, metrics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub index: usize,
    pub probs: Vec<f32>,
}

/// Cleans, encodes and classifies raw texts. No short-text filtering is applied.
pub fn predict<S: AsRef<str>>(checkpoint: &Checkpoint, texts: &[S]) -> Result<Vec<Prediction>> {
    let seq_len = checkpoint.model.config().seq_len;
    texts
        .iter()
        .map(|text| {
            let ids = encode_text(text.as_ref(), &checkpoint.vocab, seq_len);
            let probs = checkpoint.model.predict_proba(&ids)?;
            let index = argmax(&probs);
            Ok(Prediction {
                label: checkpoint.label_names[index].clone(),
                index,
                probs,
            })
        })
        .collect()
}
