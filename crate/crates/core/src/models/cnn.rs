//! Two-stage convolutional classifier:
//! embedding → (conv + relu → max-pool) × 2 → flatten → dense softmax.

use rand::SeedableRng;

use super::blocks::{check_architecture, check_sequence, ConvPool, ConvPoolCache, Dense, Embedding};
use super::{Mode, ModelConfig, Network, ShapeTrace, CNN};
use crate::error::{Error, Result};
use crate::nn::{Gradients, ParamSet, Scalar, Tensor};
use crate::preprocess::TokenId;
use crate::SeededRng;

pub struct CnnClassifier<T> {
    config: ModelConfig,
    params: ParamSet<T>,
    embedding: Embedding,
    stage1: ConvPool,
    stage2: ConvPool,
    dense: Dense,
    flat_width: usize,
}

pub struct CnnCache<T> {
    stage1: ConvPoolCache<T>,
    stage2: ConvPoolCache<T>,
    flat: Tensor<T>,
}

impl<T: Scalar> CnnClassifier<T> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        check_architecture(&config.architecture, CNN)?;
        config.validate()?;
        let (_, pooled1) = config.conv_pool_len(config.seq_len).ok_or_else(too_short(config))?;
        let (_, pooled2) = config.conv_pool_len(pooled1).ok_or_else(too_short(config))?;
        let flat_width = pooled2 * config.filters;

        let mut rng = SeededRng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let embedding = Embedding::new(&mut params, config.vocab_size, config.embedding_dim, &mut rng);
        let stage1 = ConvPool::new(
            &mut params,
            "conv1",
            config.embedding_dim,
            config.filters,
            config.kernel,
            config.pool,
            &mut rng,
        );
        let stage2 = ConvPool::new(
            &mut params,
            "conv2",
            config.filters,
            config.filters,
            config.kernel,
            config.pool,
            &mut rng,
        );
        let dense = Dense::new(&mut params, flat_width, config.num_classes, &mut rng);
        Ok(Self {
            config: config.clone(),
            params,
            embedding,
            stage1,
            stage2,
            dense,
            flat_width,
        })
    }

    pub fn flat_width(&self) -> usize {
        self.flat_width
    }
}

fn too_short(config: &ModelConfig) -> impl FnOnce() -> Error + '_ {
    move || {
        Error::InvalidConfig(format!(
            "seq_len {} too short for two conv({}) + pool({}) stages",
            config.seq_len, config.kernel, config.pool
        ))
    }
}

pub fn build_cnn<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<CnnClassifier<T>> {
    CnnClassifier::new(config, seed)
}

impl<T: Scalar> Network<T> for CnnClassifier<T> {
    type Cache = CnnCache<T>;

    fn architecture(&self) -> &'static str {
        CNN
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    fn forward(&self, ids: &[TokenId], _mode: Mode<'_>, trace: &mut ShapeTrace) -> Result<(Vec<T>, CnnCache<T>)> {
        check_sequence(ids, self.config.seq_len)?;
        let emb = self.embedding.forward(&self.params, ids)?;
        trace.record("embedding", emb.shape());
        let stage1 = self.stage1.forward(&self.params, emb)?;
        trace.record("conv1", stage1.conv_output().shape());
        trace.record("pool1", stage1.output().shape());
        let stage2 = self.stage2.forward(&self.params, stage1.output().clone())?;
        trace.record("conv2", stage2.conv_output().shape());
        trace.record("pool2", stage2.output().shape());
        let flat = stage2.output().clone().reshape(&[self.flat_width])?;
        trace.record("flatten", flat.shape());
        let logits = self.dense.forward(&self.params, &flat)?;
        trace.record("logits", &[logits.len()]);
        Ok((logits, CnnCache { stage1, stage2, flat }))
    }

    fn backward(&self, ids: &[TokenId], cache: CnnCache<T>, dlogits: &[T], grads: &mut Gradients<T>) -> Result<()> {
        let dflat = self.dense.backward(&self.params, &cache.flat, dlogits, grads);
        let dpool2 = dflat.reshape(cache.stage2.output().shape())?;
        let dpool1 = self.stage2.backward(&self.params, &cache.stage2, &dpool2, grads);
        let demb = self.stage1.backward(&self.params, &cache.stage1, &dpool1, grads);
        self.embedding.backward(ids, &demb, grads);
        Ok(())
    }
}
