//! Text cleaning, tokenization, vocabulary construction and fixed-length encoding.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD_ID: TokenId = 0;
pub const OOV_ID: TokenId = 1;
/// Token returned by [`Vocabulary::decode`] for the OOV index.
pub const OOV_TOKEN: &str = "<oov>";
pub const DEFAULT_SEQ_LEN: usize = 100;

const REMOVED_CHARS: [char; 11] = [',', '.', ';', ':', '"', '!', '#', '$', '%', '*', '@'];

/// Deletes punctuation and noise characters, then collapses whitespace.
pub fn clean_text(raw: &str) -> String {
    let stripped: String = raw.chars().filter(|c| !REMOVED_CHARS.contains(c)).collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retain {
    Keep,
    Discard,
}

/// Texts of fewer than two words are dropped from training data.
pub fn filter_short(tokens: &[String]) -> Retain {
    if tokens.len() < 2 {
        Retain::Discard
    } else {
        Retain::Keep
    }
}

/// Word/index map. Index 0 is padding, 1 is out-of-vocabulary, words start at 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_index: HashMap<String, TokenId>,
    index_to_word: Vec<String>,
}

impl Vocabulary {
    /// Orders words by descending frequency, ties broken by first appearance.
    pub fn build<T: AsRef<[S]>, S: AsRef<str>>(corpus: &[T]) -> Result<Self> {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut order = 0usize;
        for tokens in corpus {
            for tok in tokens.as_ref() {
                let entry = counts.entry(tok.as_ref()).or_insert_with(|| {
                    order += 1;
                    (0, order)
                });
                entry.0 += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(&str, usize, usize)> =
            counts.into_iter().map(|(w, (c, first))| (w, c, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        Self::from_words(ranked.into_iter().map(|(w, _, _)| w.to_string()).collect())
    }

    fn from_words(words: Vec<String>) -> Result<Self> {
        let mut word_to_index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if word_to_index.insert(w.clone(), (i + 2) as TokenId).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate vocabulary word `{w}`")));
            }
        }
        Ok(Self {
            word_to_index,
            index_to_word: words,
        })
    }

    /// Number of distinct corpus words (reserved indices excluded).
    pub fn num_words(&self) -> usize {
        self.index_to_word.len()
    }

    /// Embedding table rows needed: words plus the two reserved indices.
    pub fn size(&self) -> usize {
        self.num_words() + 2
    }

    pub fn index_of(&self, word: &str) -> TokenId {
        self.word_to_index.get(word).copied().unwrap_or(OOV_ID)
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        (id as usize)
            .checked_sub(2)
            .and_then(|i| self.index_to_word.get(i))
            .map(String::as_str)
    }

    /// Maps ids back to words, skipping padding and rendering OOV as [`OOV_TOKEN`].
    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .filter(|&&id| id != PAD_ID)
            .map(|&id| self.word(id).unwrap_or(OOV_TOKEN).to_string())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#vocab v1 K={}\n", self.num_words());
        for (i, w) in self.index_to_word.iter().enumerate() {
            writeln!(out, "{w}\t{}", i + 2).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing vocabulary header".into(),
        })?;
        let k: usize = header
            .strip_prefix("#vocab v1 K=")
            .and_then(|k| k.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("bad vocabulary header `{header}`"),
            })?;
        let mut words = Vec::with_capacity(k);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let (word, idx) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `word<TAB>index`".into(),
            })?;
            let idx: usize = idx.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad index `{idx}`"),
            })?;
            if idx != words.len() + 2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("index {idx} out of sequence"),
                });
            }
            words.push(word.to_string());
        }
        if words.len() != k {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares K={k} but {} words follow", words.len()),
            });
        }
        Self::from_words(words)
    }
}

/// Maps tokens to ids, pre-truncating to the last `max_len` and pre-padding with zeros.
pub fn encode_and_pad<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> Vec<TokenId> {
    let kept = &tokens[tokens.len().saturating_sub(max_len)..];
    let mut ids = vec![PAD_ID; max_len - kept.len()];
    ids.extend(kept.iter().map(|t| vocab.index_of(t.as_ref())));
    ids
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub ids: Vec<TokenId>,
    pub label: usize,
}

/// Full raw-text to fixed-length id pipeline.
pub fn encode_text(raw: &str, vocab: &Vocabulary, max_len: usize) -> Vec<TokenId> {
    encode_and_pad(&tokenize(&clean_text(raw)), vocab, max_len)
}

/// Cleans and filters a training split, builds the vocabulary on it and encodes it.
pub fn prepare_training(
    corpus: &LabeledCorpus,
    max_len: usize,
) -> Result<(Vocabulary, Vec<EncodedExample>)> {
    let kept: Vec<(Vec<String>, usize)> = corpus
        .examples
        .iter()
        .map(|ex| (tokenize(&clean_text(&ex.text)), ex.label))
        .filter(|(tokens, _)| filter_short(tokens) == Retain::Keep)
        .collect();
    let token_lists: Vec<&[String]> = kept.iter().map(|(t, _)| t.as_slice()).collect();
    let vocab = Vocabulary::build(&token_lists)?;
    let encoded = kept
        .iter()
        .map(|(tokens, label)| EncodedExample {
            ids: encode_and_pad(tokens, &vocab, max_len),
            label: *label,
        })
        .collect();
    Ok((vocab, encoded))
}

/// Encodes every example of an evaluation split; nothing is filtered.
pub fn encode_corpus(corpus: &LabeledCorpus, vocab: &Vocabulary, max_len: usize) -> Vec<EncodedExample> {
    corpus
        .examples
        .iter()
        .map(|ex| EncodedExample {
            ids: encode_text(&ex.text, vocab, max_len),
            label: ex.label,
        })
        .collect()
}
