#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textdomain::metrics::Metrics;
use textdomain::models::{check_model_gradients, ModelConfig, Registry, CNN};
use textdomain::nn::{GradCheckReport, DEFAULT_EPS};
use textdomain::preprocess::{encode_and_pad, encode_corpus, prepare_training, EncodedExample, Vocabulary};
use textdomain::toy::keyword_corpus;

pub const ARCHS: [&str; 3] = ["cnn", "bilstm", "cnn_bilstm"];

/// Reduced widths for finite-difference checks: V=50, seq_len=20, 8 filters and units.
///
/// Two conv(5)+pool(5) stages need at least 49 steps, so the CNN uses 50.
pub fn reduced_config(arch: &str) -> ModelConfig {
    let mut c = ModelConfig::new(arch, 50, 3);
    c.embedding_dim = 8;
    c.filters = 8;
    c.lstm_units = 8;
    c.seq_len = if arch == CNN { 50 } else { 20 };
    c
}

/// Twelve in-vocabulary ids (no pad or OOV), front-padded to `seq_len`.
pub fn twelve_tokens(seq_len: usize, vocab_size: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let ids: Vec<u32> = (0..12).map(|_| rng.gen_range(2..vocab_size as u32)).collect();
    let mut out = vec![0; seq_len - ids.len()];
    out.extend(ids);
    out
}

pub fn model_gradcheck(arch: &str, seed: u64, dropout: bool) -> GradCheckReport {
    let cfg = reduced_config(arch);
    let mut model = Registry::<f64>::with_builtin().build(&cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let ids = twelve_tokens(cfg.seq_len, cfg.vocab_size, &mut rng);
    let label = rng.gen_range(0..cfg.num_classes);
    let dropout_seed = dropout.then_some(seed);
    check_model_gradients(model.as_mut(), &ids, label, dropout_seed, DEFAULT_EPS).unwrap()
}

pub struct Toy {
    pub vocab: Vocabulary,
    pub train: Vec<EncodedExample>,
    pub dev: Vec<EncodedExample>,
    pub label_names: Vec<String>,
}

pub fn toy_data(train_size: usize, dev_size: usize, seed: u64, seq_len: usize) -> Toy {
    let train = keyword_corpus(train_size, seed);
    let dev = keyword_corpus(dev_size, seed + 1);
    let (vocab, train_set) = prepare_training(&train, seq_len).unwrap();
    let dev_set = encode_corpus(&dev, &vocab, seq_len);
    Toy {
        vocab,
        train: train_set,
        dev: dev_set,
        label_names: train.label_names,
    }
}

pub fn encode_words(words: &[&str], vocab: &Vocabulary, seq_len: usize) -> Vec<u32> {
    encode_and_pad(words, vocab, seq_len)
}

/// Counts each quantity separately with plain loops, straight from the definitions.
pub fn brute_force_metrics(t: &[usize], p: &[usize], c: usize) -> Metrics {
    let n = t.len();
    let mut m = Metrics {
        accuracy: 0.0,
        precision: vec![],
        recall: vec![],
        f1: vec![],
        support: vec![],
        weighted_precision: 0.0,
        weighted_recall: 0.0,
        weighted_f1: 0.0,
        confusion: vec![vec![0; c]; c],
    };
    let mut hits = 0;
    for i in 0..n {
        m.confusion[t[i]][p[i]] += 1;
        if t[i] == p[i] {
            hits += 1;
        }
    }
    m.accuracy = hits as f64 / n as f64;
    for k in 0..c {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for i in 0..n {
            match (t[i] == k, p[i] == k) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let prec = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rec = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        let support = tp + fn_;
        m.precision.push(prec);
        m.recall.push(rec);
        m.f1.push(f);
        m.support.push(support);
        m.weighted_precision += support as f64 / n as f64 * prec;
        m.weighted_recall += support as f64 / n as f64 * rec;
        m.weighted_f1 += support as f64 / n as f64 * f;
    }
    m
}

