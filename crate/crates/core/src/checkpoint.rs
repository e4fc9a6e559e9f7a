//! Binary checkpoint format.
//!
//! ```text
//! b"TTXC0001" | u64 LE manifest length | UTF-8 JSON manifest | f32 LE tensor data
//! ```
//!
//! The manifest carries the model configuration, label names, the serialized
//! vocabulary and one record per parameter tensor (name, shape, byte offset
//! into the data section). Tensors are stored row-major in manifest order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Classifier, ModelConfig, Registry};
use crate::nn::{ParamSet, Tensor};
use crate::preprocess::Vocabulary;

pub const MAGIC: &[u8; 8] = b"TTXC0001";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the data section.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub label_names: Vec<String>,
    pub vocabulary: String,
    pub params: Vec<ParamRecord>,
    pub task_id: String,
    pub best_val_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
}

/// Training metadata stored next to the weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointMeta {
    pub task_id: String,
    pub best_val_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
}

/// A loaded model with everything needed to encode new text for it.
pub struct Checkpoint {
    pub model: Box<dyn Classifier<f32>>,
    pub vocab: Vocabulary,
    pub label_names: Vec<String>,
    pub meta: CheckpointMeta,
}

impl std::fmt::Debug for Checkpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Checkpoint")
            .field("architecture", &self.model.architecture())
            .field("label_names", &self.label_names)
            .field("vocab_size", &self.vocab.size())
            .field("meta", &self.meta)
            .finish()
    }
}

pub fn encode_checkpoint(
    model: &dyn Classifier<f32>,
    vocab: &Vocabulary,
    label_names: &[String],
    meta: &CheckpointMeta,
) -> Result<Vec<u8>> {
    let mut records = Vec::new();
    let mut offset = 0;
    for p in model.params().iter() {
        records.push(ParamRecord {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset,
        });
        offset += p.value.len() * 4;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: model.config().clone(),
        label_names: label_names.to_vec(),
        vocabulary: vocab.to_text(),
        params: records,
        task_id: meta.task_id.clone(),
        best_val_accuracy: meta.best_val_accuracy,
        best_epoch: meta.best_epoch,
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;

    let mut out = Vec::with_capacity(16 + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.params().iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes to a sibling temporary file and renames it over `path`, so a crash
/// never leaves a half-written checkpoint behind.
pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &dyn Classifier<f32>,
    vocab: &Vocabulary,
    label_names: &[String],
    meta: &CheckpointMeta,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(model, vocab, label_names, meta)?;
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Parses only the header and manifest.
pub fn read_manifest(bytes: &[u8]) -> Result<(Manifest, &[u8])> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        // an older or newer format would share the prefix but not the version digits
        if bytes.len() >= 8 && &bytes[..4] == b"TTXC" && bytes[..8] != MAGIC[..] {
            let found = std::str::from_utf8(&bytes[4..8])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or(Error::BadCheckpointHeader)?;
            return Err(Error::CheckpointVersion {
                found,
                expected: FORMAT_VERSION,
            });
        }
        return Err(Error::BadCheckpointHeader);
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let rest = &bytes[16..];
    if len > rest.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "manifest length {len} exceeds file size"
        )));
    }
    let manifest: Manifest =
        serde_json::from_slice(&rest[..len]).map_err(|e| Error::CorruptCheckpoint(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok((manifest, &rest[len..]))
}

pub fn decode_checkpoint(bytes: &[u8], registry: &Registry<f32>) -> Result<Checkpoint> {
    let (manifest, data) = read_manifest(bytes)?;
    let mut params = ParamSet::new();
    let mut expected_offset = 0;
    for rec in &manifest.params {
        let count: usize = rec.shape.iter().product();
        if rec.offset != expected_offset {
            return Err(Error::CorruptCheckpoint(format!(
                "`{}` at offset {} (expected {expected_offset})",
                rec.name, rec.offset
            )));
        }
        let end = rec.offset + count * 4;
        let raw = data.get(rec.offset..end).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("data for `{}` truncated", rec.name))
        })?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        params.push(rec.name.clone(), Tensor::new(rec.shape.clone(), values)?);
        expected_offset = end;
    }
    if expected_offset != data.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes after tensor data",
            data.len() - expected_offset
        )));
    }

    let vocab = Vocabulary::from_text(&manifest.vocabulary)?;
    if vocab.size() != manifest.config.vocab_size {
        return Err(Error::CorruptCheckpoint(format!(
            "vocabulary has {} ids but the model expects {}",
            vocab.size(),
            manifest.config.vocab_size
        )));
    }
    if manifest.label_names.len() != manifest.config.num_classes {
        return Err(Error::CorruptCheckpoint(format!(
            "{} label names for {} classes",
            manifest.label_names.len(),
            manifest.config.num_classes
        )));
    }
    let mut model = registry.build(&manifest.config, 0)?;
    model
        .params_mut()
        .load_from(params)
        .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    Ok(Checkpoint {
        model,
        vocab,
        label_names: manifest.label_names,
        meta: CheckpointMeta {
            task_id: manifest.task_id,
            best_val_accuracy: manifest.best_val_accuracy,
            best_epoch: manifest.best_epoch,
        },
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    load_checkpoint_with(path, &Registry::with_builtin())
}

pub fn load_checkpoint_with(path: impl AsRef<Path>, registry: &Registry<f32>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, registry)
}
