//! Sequential CNN + BiLSTM classifier:
//! embedding → conv + relu → max-pool → BiLSTM (final state) → dropout → dense softmax.

use rand::SeedableRng;

use super::blocks::{
    check_architecture, check_sequence, BiLstm, BiLstmBlockCache, ConvPool, ConvPoolCache, Dense, Dropout, Embedding,
};
use super::{Mode, ModelConfig, Network, ShapeTrace, CNN_BILSTM};
use crate::error::{Error, Result};
use crate::nn::{Dropped, Gradients, ParamSet, Scalar};
use crate::preprocess::TokenId;
use crate::SeededRng;

pub struct CnnBiLstmClassifier<T> {
    config: ModelConfig,
    params: ParamSet<T>,
    embedding: Embedding,
    conv: ConvPool,
    bilstm: BiLstm,
    dropout: Dropout,
    dense: Dense,
    timesteps: usize,
}

pub struct CnnBiLstmCache<T> {
    conv: ConvPoolCache<T>,
    bilstm: BiLstmBlockCache<T>,
    drop: Dropped<T>,
}

impl<T: Scalar> CnnBiLstmClassifier<T> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        check_architecture(&config.architecture, CNN_BILSTM)?;
        config.validate()?;
        let (_, timesteps) = config.conv_pool_len(config.seq_len).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "seq_len {} too short for conv({}) + pool({})",
                config.seq_len, config.kernel, config.pool
            ))
        })?;
        let mut rng = SeededRng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let embedding = Embedding::new(&mut params, config.vocab_size, config.embedding_dim, &mut rng);
        let conv = ConvPool::new(
            &mut params,
            "conv1",
            config.embedding_dim,
            config.filters,
            config.kernel,
            config.pool,
            &mut rng,
        );
        let bilstm = BiLstm::new(&mut params, "bilstm1", config.filters, config.lstm_units, false, &mut rng);
        let dense = Dense::new(&mut params, 2 * config.lstm_units, config.num_classes, &mut rng);
        Ok(Self {
            config: config.clone(),
            params,
            embedding,
            conv,
            bilstm,
            dropout: Dropout {
                rate: config.dropout_rate,
            },
            dense,
            timesteps,
        })
    }

    /// Number of pooled steps fed into the recurrent layer.
    pub fn timesteps(&self) -> usize {
        self.timesteps
    }
}

pub fn build_cnn_bilstm<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<CnnBiLstmClassifier<T>> {
    CnnBiLstmClassifier::new(config, seed)
}

impl<T: Scalar> Network<T> for CnnBiLstmClassifier<T> {
    type Cache = CnnBiLstmCache<T>;

    fn architecture(&self) -> &'static str {
        CNN_BILSTM
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

    fn forward(
        &self,
        ids: &[TokenId],
        mut mode: Mode<'_>,
        trace: &mut ShapeTrace,
    ) -> Result<(Vec<T>, CnnBiLstmCache<T>)> {
        check_sequence(ids, self.config.seq_len)?;
        let emb = self.embedding.forward(&self.params, ids)?;
        trace.record("embedding", emb.shape());
        let conv = self.conv.forward(&self.params, emb)?;
        trace.record("conv1", conv.conv_output().shape());
        trace.record("pool1", conv.output().shape());
        let (h, bilstm) = self.bilstm.forward(&self.params, conv.output().clone())?;
        trace.record("bilstm1", h.shape());
        let drop = self.dropout.forward(&h, &mut mode)?;
        let logits = self.dense.forward(&self.params, &drop.out)?;
        trace.record("logits", &[logits.len()]);
        Ok((logits, CnnBiLstmCache { conv, bilstm, drop }))
    }

    fn backward(
        &self,
        ids: &[TokenId],
        cache: CnnBiLstmCache<T>,
        dlogits: &[T],
        grads: &mut Gradients<T>,
    ) -> Result<()> {
        let dh = self.dense.backward(&self.params, &cache.drop.out, dlogits, grads);
        let dh = self.dropout.backward(&cache.drop, &dh);
        let dpool = self.bilstm.backward(&self.params, &cache.bilstm, &dh, grads);
        let demb = self.conv.backward(&self.params, &cache.conv, &dpool, grads);
        self.embedding.backward(ids, &demb, grads);
        Ok(())
    }
}
