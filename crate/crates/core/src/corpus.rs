//! Labeled dataset ingestion and deterministic mini-batching.
//!
//! Datasets are UTF-8 TSV files with one `text<TAB>label` example per line.
//! Label strings are mapped to class indices by order of first appearance in
//! the training file; evaluation splits reuse that map.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledCorpus {
    pub examples: Vec<Example>,
    pub label_names: Vec<String>,
    pub task_id: String,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Writes the corpus back out in the same TSV layout `load_dataset` reads.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for ex in &self.examples {
            writeln!(out, "{}\t{}", ex.text, self.label_names[ex.label])
                .expect("writing to Vec cannot fail");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn task_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Yields `(line_number, text, label)` for each data line of a TSV body.
fn parse_lines(content: &str, has_header: bool) -> Result<Vec<(usize, &str, &str)>> {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    let mut rows = Vec::new();
    let mut header_pending = has_header;
    for (i, line) in content.split('\n').enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let mut fields = line.split('\t');
        let (text, label) = match (fields.next(), fields.next(), fields.next()) {
            (Some(text), Some(label), None) => (text, label),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected exactly one TAB separator".into(),
                })
            }
        };
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty label field".into(),
            });
        }
        if text.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty text field".into(),
            });
        }
        rows.push((line_no, text, label));
    }
    Ok(rows)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a training split, assigning class indices by first appearance.
pub fn load_dataset(path: impl AsRef<Path>, has_header: bool) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let mut corpus = parse_corpus(&content, has_header, None)?;
    corpus.task_id = task_id_from_path(path);
    Ok(corpus)
}

/// Loads a dev/test split against an existing label map. Unknown labels are errors.
pub fn load_with_labels(
    path: impl AsRef<Path>,
    has_header: bool,
    label_names: &[String],
) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let mut corpus = parse_corpus(&content, has_header, Some(label_names))?;
    corpus.task_id = task_id_from_path(path);
    Ok(corpus)
}

/// Parses TSV text. With `fixed_labels` the label map is frozen; otherwise it
/// grows by first appearance.
pub fn parse_corpus(
    content: &str,
    has_header: bool,
    fixed_labels: Option<&[String]>,
) -> Result<LabeledCorpus> {
    let rows = parse_lines(content, has_header)?;
    let mut label_names: Vec<String> = fixed_labels.map(<[String]>::to_vec).unwrap_or_default();
    let mut index: HashMap<String, usize> = label_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.clone(), i))
        .collect();
    if index.len() != label_names.len() {
        return Err(Error::InvalidConfig("duplicate label names".into()));
    }

    let mut examples = Vec::with_capacity(rows.len());
    for (line, text, label) in rows {
        let id = match index.get(label) {
            Some(&id) => id,
            None if fixed_labels.is_some() => {
                return Err(Error::UnknownLabel {
                    label: label.to_string(),
                    line,
                })
            }
            None => {
                let id = label_names.len();
                label_names.push(label.to_string());
                index.insert(label.to_string(), id);
                id
            }
        };
        examples.push(Example {
            text: text.to_string(),
            label: id,
        });
    }
    Ok(LabeledCorpus {
        examples,
        label_names,
        task_id: String::new(),
    })
}

/// An ordering of example indices cut into fixed-size batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub indices: Vec<usize>,
    pub batch_size: usize,
    pub seed: u64,
}

impl BatchPlan {
    pub fn batches(&self) -> std::slice::Chunks<'_, usize> {
        self.indices.chunks(self.batch_size)
    }

    pub fn num_batches(&self) -> usize {
        self.indices.len().div_ceil(self.batch_size)
    }
}

pub fn make_batches(n: usize, batch_size: usize, seed: u64, shuffle: bool) -> Result<BatchPlan> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut indices: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
    }
    Ok(BatchPlan {
        indices,
        batch_size,
        seed,
    })
}
