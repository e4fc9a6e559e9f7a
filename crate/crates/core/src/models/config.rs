use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture choice plus every width the models use. Defaults: embedding
/// 100, sequence length 100, 128 filters of width 5, pooling window 5, 128
/// LSTM units, dropout 0.2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: String,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub seq_len: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub lstm_units: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
}

impl ModelConfig {
    pub fn new(architecture: &str, vocab_size: usize, num_classes: usize) -> Self {
        Self {
            architecture: architecture.to_string(),
            vocab_size,
            embedding_dim: 100,
            seq_len: 100,
            filters: 128,
            kernel: 5,
            pool: 5,
            lstm_units: 128,
            dropout_rate: 0.2,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("seq_len", self.seq_len),
            ("filters", self.filters),
            ("kernel", self.kernel),
            ("pool", self.pool),
            ("lstm_units", self.lstm_units),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Length after one valid convolution followed by one pooling stage, or
    /// `None` if either stage would see too few steps.
    pub fn conv_pool_len(&self, len: usize) -> Option<(usize, usize)> {
        let conv = len.checked_sub(self.kernel)? + 1;
        if conv < self.pool {
            return None;
        }
        Some((conv, conv / self.pool))
    }
}
