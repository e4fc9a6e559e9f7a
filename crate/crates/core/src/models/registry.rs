use std::fmt;

use super::{
    build_bilstm, build_cnn, build_cnn_bilstm, Classifier, ModelConfig, BILSTM, CNN, CNN_BILSTM,
};
use crate::error::{Error, Result};
use crate::nn::Scalar;

pub type Builder<T> = fn(&ModelConfig, u64) -> Result<Box<dyn Classifier<T>>>;

pub struct ArchitectureEntry<T> {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: Builder<T>,
}

impl<T> fmt::Debug for ArchitectureEntry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ArchitectureEntry")
            .field("name", &self.name)
            .field("summary", &self.summary)
            .finish()
    }
}

/// Lower-cases and maps `-` to `_`, so `CNN-BiLSTM` resolves to `cnn_bilstm`.
pub fn canonical_name(name: &str) -> String {
    name.trim().to_lowercase().replace('-', "_")
}

/// Architectures selectable by name at runtime.
#[derive(Debug)]
pub struct Registry<T> {
    entries: Vec<ArchitectureEntry<T>>,
}

impl<T: Scalar> Default for Registry<T> {
    fn default() -> Self {
        Self::with_builtin()
    }
}

impl<T: Scalar> Registry<T> {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(ArchitectureEntry {
            name: CNN,
            summary: "two conv(5)+relu+maxpool(5) stages, flatten, softmax",
            build: |c, s| Ok(Box::new(build_cnn::<T>(c, s)?)),
        });
        r.register(ArchitectureEntry {
            name: BILSTM,
            summary: "two stacked bidirectional LSTM layers with dropout, softmax",
            build: |c, s| Ok(Box::new(build_bilstm::<T>(c, s)?)),
        });
        r.register(ArchitectureEntry {
            name: CNN_BILSTM,
            summary: "conv(5)+relu+maxpool(5) into one bidirectional LSTM, dropout, softmax",
            build: |c, s| Ok(Box::new(build_cnn_bilstm::<T>(c, s)?)),
        });
        r
    }

    /// Adds or replaces an entry.
    pub fn register(&mut self, entry: ArchitectureEntry<T>) {
        self.entries.retain(|e| e.name != entry.name);
        self.entries.push(entry);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn resolve(&self, name: &str) -> Result<&ArchitectureEntry<T>> {
        let key = canonical_name(name);
        self.entries
            .iter()
            .find(|e| e.name == key)
            .ok_or_else(|| Error::UnknownArchitecture(name.to_string()))
    }

    /// Builds the architecture named in `config` with deterministic initialization.
    pub fn build(&self, config: &ModelConfig, seed: u64) -> Result<Box<dyn Classifier<T>>> {
        let entry = self.resolve(&config.architecture)?;
        let mut config = config.clone();
        config.architecture = entry.name.to_string();
        (entry.build)(&config, seed)
    }
}

pub fn build_model<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<Box<dyn Classifier<T>>> {
    Registry::with_builtin().build(config, seed)
}
