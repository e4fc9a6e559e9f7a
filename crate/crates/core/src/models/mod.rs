//! Classifier architectures and the name-keyed registry that builds them.
//!
//! Every architecture implements [`Network`] (forward with a private cache,
//! hand-written backward). The blanket [`Classifier`] impl turns that into the
//! object-safe surface the trainer, checkpointing and CLI work with, so new
//! architectures only need a `Network` impl and a registry entry.

mod bilstm;
mod blocks;
mod cnn;
mod config;
mod hybrid;
mod registry;

pub use bilstm::{build_bilstm, BiLstmClassifier};
pub use cnn::{build_cnn, CnnClassifier};
pub use config::ModelConfig;
pub use hybrid::{build_cnn_bilstm, CnnBiLstmClassifier};
pub use registry::{build_model, canonical_name, ArchitectureEntry, Builder, Registry};

use crate::error::{Error, Result};
use rand::SeedableRng;

use crate::nn::{
    check_gradients, cross_entropy_from_logits, softmax, softmax_cross_entropy_grad, GradCheckReport, Gradients,
    ParamSet, Scalar, Tensor,
};
use crate::preprocess::TokenId;
use crate::SeededRng;

pub const CNN: &str = "cnn";
pub const BILSTM: &str = "bilstm";
pub const CNN_BILSTM: &str = "cnn_bilstm";

/// Inference disables dropout; training draws dropout masks from the given generator.
pub enum Mode<'a> {
    Inference,
    Training(&'a mut SeededRng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Training(_))
    }
}

/// Optional record of intermediate tensor shapes during a forward pass.
#[derive(Debug, Default)]
pub struct ShapeTrace {
    enabled: bool,
    entries: Vec<(&'static str, Vec<usize>)>,
}

impl ShapeTrace {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn enabled() -> Self {
        Self {
            enabled: true,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, stage: &'static str, shape: &[usize]) {
        if self.enabled {
            self.entries.push((stage, shape.to_vec()));
        }
    }

    pub fn into_entries(self) -> Vec<(&'static str, Vec<usize>)> {
        self.entries
    }
}

/// Per-architecture forward/backward.
pub trait Network<T: Scalar>: Send + Sync {
    type Cache;

    fn architecture(&self) -> &'static str;
    fn config(&self) -> &ModelConfig;
    fn params(&self) -> &ParamSet<T>;
    fn params_mut(&mut self) -> &mut ParamSet<T>;

    /// Logits for one encoded sequence.
    fn forward(&self, ids: &[TokenId], mode: Mode<'_>, trace: &mut ShapeTrace) -> Result<(Vec<T>, Self::Cache)>;

    /// Accumulates parameter gradients for upstream logit gradients `dlogits`.
    fn backward(&self, ids: &[TokenId], cache: Self::Cache, dlogits: &[T], grads: &mut Gradients<T>) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub loss: T,
    pub probs: Vec<T>,
}

/// Object-safe classifier surface.
pub trait Classifier<T: Scalar>: Send + Sync {
    fn architecture(&self) -> &'static str;
    fn config(&self) -> &ModelConfig;
    fn params(&self) -> &ParamSet<T>;
    fn params_mut(&mut self) -> &mut ParamSet<T>;

    fn logits(&self, ids: &[TokenId]) -> Result<Vec<T>>;

    /// Cross-entropy loss of one example (training mode applies dropout).
    fn loss(&self, ids: &[TokenId], label: usize, mode: Mode<'_>) -> Result<T>;

    /// Forward + backward for one example; gradients of `scale · loss` are
    /// added into `grads`.
    fn accumulate_gradients(
        &self,
        ids: &[TokenId],
        label: usize,
        mode: Mode<'_>,
        scale: T,
        grads: &mut Gradients<T>,
    ) -> Result<Step<T>>;

    /// Shapes of every intermediate stage for one inference pass.
    fn shape_trace(&self, ids: &[TokenId]) -> Result<Vec<(&'static str, Vec<usize>)>>;

    fn predict_proba(&self, ids: &[TokenId]) -> Result<Vec<T>> {
        softmax(&self.logits(ids)?)
    }

    /// `[batch, C]` probability rows.
    fn predict_batch(&self, batch: &[Vec<TokenId>]) -> Result<Tensor<T>> {
        let c = self.config().num_classes;
        let mut data = Vec::with_capacity(batch.len() * c);
        for ids in batch {
            data.extend(self.predict_proba(ids)?);
        }
        Tensor::new(vec![batch.len(), c], data)
    }

    fn num_parameters(&self) -> usize {
        self.params().num_elements()
    }
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::OutOfRange {
            index: label,
            size: classes,
        });
    }
    Ok(())
}

impl<T: Scalar, N: Network<T>> Classifier<T> for N {
    fn architecture(&self) -> &'static str {
        Network::architecture(self)
    }

    fn config(&self) -> &ModelConfig {
        Network::config(self)
    }

    fn params(&self) -> &ParamSet<T> {
        Network::params(self)
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        Network::params_mut(self)
    }

    fn logits(&self, ids: &[TokenId]) -> Result<Vec<T>> {
        Ok(self.forward(ids, Mode::Inference, &mut ShapeTrace::disabled())?.0)
    }

    fn loss(&self, ids: &[TokenId], label: usize, mode: Mode<'_>) -> Result<T> {
        check_label(label, Network::config(self).num_classes)?;
        let (logits, _) = self.forward(ids, mode, &mut ShapeTrace::disabled())?;
        cross_entropy_from_logits(&logits, label)
    }

    fn accumulate_gradients(
        &self,
        ids: &[TokenId],
        label: usize,
        mode: Mode<'_>,
        scale: T,
        grads: &mut Gradients<T>,
    ) -> Result<Step<T>> {
        check_label(label, Network::config(self).num_classes)?;
        let (logits, cache) = self.forward(ids, mode, &mut ShapeTrace::disabled())?;
        let loss = cross_entropy_from_logits(&logits, label)?;
        let probs = softmax(&logits)?;
        let dlogits: Vec<T> = softmax_cross_entropy_grad(&probs, label)
            .into_iter()
            .map(|g| g * scale)
            .collect();
        self.backward(ids, cache, &dlogits, grads)?;
        Ok(Step { loss, probs })
    }

    fn shape_trace(&self, ids: &[TokenId]) -> Result<Vec<(&'static str, Vec<usize>)>> {
        let mut trace = ShapeTrace::enabled();
        self.forward(ids, Mode::Inference, &mut trace)?;
        Ok(trace.into_entries())
    }
}

fn mode_for(rng: &mut Option<SeededRng>) -> Mode<'_> {
    match rng {
        Some(r) => Mode::Training(r),
        None => Mode::Inference,
    }
}

/// Central finite-difference check of a whole model's cross-entropy on one
/// example. With `dropout_seed`, every evaluation reuses the same dropout masks;
/// without it the model runs in inference mode.
pub fn check_model_gradients(
    model: &mut dyn Classifier<f64>,
    ids: &[TokenId],
    label: usize,
    dropout_seed: Option<u64>,
    eps: f64,
) -> Result<GradCheckReport> {
    let fresh = || dropout_seed.map(SeededRng::seed_from_u64);
    let mut grads = model.params().zero_grads();
    model.accumulate_gradients(ids, label, mode_for(&mut fresh()), 1.0, &mut grads)?;

    let mut probe = model.params().clone();
    let mut failure = None;
    let report = check_gradients(
        &mut probe,
        &grads,
        |p| {
            model.params_mut().clone_from(p);
            match model.loss(ids, label, mode_for(&mut fresh())) {
                Ok(l) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        eps,
    );
    model.params_mut().clone_from(&probe);
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
