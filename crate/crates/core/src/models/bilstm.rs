//! Stacked bidirectional LSTM classifier:
//! embedding → BiLSTM (sequences) → dropout → BiLSTM (final state) → dropout → dense softmax.

use rand::SeedableRng;

use super::blocks::{check_architecture, check_sequence, BiLstm, BiLstmBlockCache, Dense, Dropout, Embedding};
use super::{Mode, ModelConfig, Network, ShapeTrace, BILSTM};
use crate::error::Result;
use crate::nn::{Dropped, Gradients, ParamSet, Scalar};
use crate::preprocess::TokenId;
use crate::SeededRng;

pub struct BiLstmClassifier<T> {
    config: ModelConfig,
    params: ParamSet<T>,
    embedding: Embedding,
    layer1: BiLstm,
    layer2: BiLstm,
    dropout: Dropout,
    dense: Dense,
}

pub struct BiLstmModelCache<T> {
    layer1: BiLstmBlockCache<T>,
    drop1: Dropped<T>,
    layer2: BiLstmBlockCache<T>,
    drop2: Dropped<T>,
}

impl<T: Scalar> BiLstmClassifier<T> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        check_architecture(&config.architecture, BILSTM)?;
        config.validate()?;
        let units = config.lstm_units;
        let mut rng = SeededRng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let embedding = Embedding::new(&mut params, config.vocab_size, config.embedding_dim, &mut rng);
        let layer1 = BiLstm::new(&mut params, "bilstm1", config.embedding_dim, units, true, &mut rng);
        let layer2 = BiLstm::new(&mut params, "bilstm2", 2 * units, units, false, &mut rng);
        let dense = Dense::new(&mut params, 2 * units, config.num_classes, &mut rng);
        Ok(Self {
            config: config.clone(),
            params,
            embedding,
            layer1,
            layer2,
            dropout: Dropout {
                rate: config.dropout_rate,
            },
            dense,
        })
    }
}

pub fn build_bilstm<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<BiLstmClassifier<T>> {
    BiLstmClassifier::new(config, seed)
}

impl<T: Scalar> Network<T> for BiLstmClassifier<T> {
    type Cache = BiLstmModelCache<T>;

    fn architecture(&self) -> &'static str {
        BILSTM
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
    ) -> Result<(Vec<T>, BiLstmModelCache<T>)> {
        check_sequence(ids, self.config.seq_len)?;
        let emb = self.embedding.forward(&self.params, ids)?;
        trace.record("embedding", emb.shape());
        let (h1, layer1) = self.layer1.forward(&self.params, emb)?;
        trace.record("bilstm1", h1.shape());
        let drop1 = self.dropout.forward(&h1, &mut mode)?;
        let (h2, layer2) = self.layer2.forward(&self.params, drop1.out.clone())?;
        trace.record("bilstm2", h2.shape());
        let drop2 = self.dropout.forward(&h2, &mut mode)?;
        let logits = self.dense.forward(&self.params, &drop2.out)?;
        trace.record("logits", &[logits.len()]);
        Ok((
            logits,
            BiLstmModelCache {
                layer1,
                drop1,
                layer2,
                drop2,
            },
        ))
    }

    fn backward(
        &self,
        ids: &[TokenId],
        cache: BiLstmModelCache<T>,
        dlogits: &[T],
        grads: &mut Gradients<T>,
    ) -> Result<()> {
        let dh2 = self.dense.backward(&self.params, &cache.drop2.out, dlogits, grads);
        let dh2 = self.dropout.backward(&cache.drop2, &dh2);
        let dh1 = self.layer2.backward(&self.params, &cache.layer2, &dh2, grads);
        let dh1 = self.dropout.backward(&cache.drop1, &dh1);
        let demb = self.layer1.backward(&self.params, &cache.layer1, &dh1, grads);
        self.embedding.backward(ids, &demb, grads);
        Ok(())
    }
}
