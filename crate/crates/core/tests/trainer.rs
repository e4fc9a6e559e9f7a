mod common;

use std::path::Path;
use std::sync::OnceLock;

use common::{encode_words, toy_data, Toy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use textdomain::checkpoint::{load_checkpoint, load_checkpoint_with};
use textdomain::models::{
    build_model, ArchitectureEntry, Classifier, Mode, ModelConfig, Network, Registry, ShapeTrace,
};
use textdomain::nn::{Gradients, ParamSet, Tensor};
use textdomain::preprocess::EncodedExample;
use textdomain::trainer::{evaluate, predict, train, train_with_progress, CheckpointContext, TrainConfig};
use textdomain::Error;

/// Logits are a learned bias, independent of the input; `poison` makes them NaN.
struct BiasOnly {
    config: ModelConfig,
    params: ParamSet<f32>,
    poison: bool,
}

impl BiasOnly {
    fn new(config: &ModelConfig, favour: usize) -> Self {
        let mut params = ParamSet::new();
        let bias = (0..config.num_classes).map(|c| if c == favour { 1.0 } else { 0.0 }).collect();
        params.push("bias", Tensor::new(vec![config.num_classes], bias).unwrap());
        Self {
            config: config.clone(),
            params,
            poison: false,
        }
    }
}

impl Network<f32> for BiasOnly {
    type Cache = ();

    fn architecture(&self) -> &'static str {
        "bias_only"
    }
    fn config(&self) -> &ModelConfig {
        &self.config
    }
    fn params(&self) -> &ParamSet<f32> {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamSet<f32> {
        &mut self.params
    }
    fn forward(&self, _ids: &[u32], _mode: Mode<'_>, _t: &mut ShapeTrace) -> textdomain::Result<(Vec<f32>, ())> {
        let mut logits = self.params.iter().next().unwrap().value.data().to_vec();
        if self.poison {
            logits[0] = f32::NAN;
        }
        Ok((logits, ()))
    }
    fn backward(&self, _ids: &[u32], _c: (), d: &[f32], grads: &mut Gradients<f32>) -> textdomain::Result<()> {
        for (g, v) in grads.0[0].data_mut().iter_mut().zip(d) {
            *g += v;
        }
        Ok(())
    }
}

fn bias_config(classes: usize) -> ModelConfig {
    let mut c = ModelConfig::new("bias_only", 10, classes);
    c.seq_len = 4;
    c
}

fn examples(labels: &[usize]) -> Vec<EncodedExample> {
    labels.iter().map(|&label| EncodedExample { ids: vec![2; 4], label }).collect()
}

fn small_cnn(toy: &Toy, seq_len: usize) -> Box<dyn Classifier<f32>> {
    let mut cfg = ModelConfig::new("cnn", toy.vocab.size(), 4);
    cfg.embedding_dim = 16;
    cfg.filters = 16;
    cfg.seq_len = seq_len;
    build_model::<f32>(&cfg, 1).unwrap()
}

fn ctx(toy: &Toy) -> CheckpointContext<'_> {
    CheckpointContext {
        vocab: &toy.vocab,
        label_names: &toy.label_names,
        task_id: "toy",
    }
}

#[test]
fn constant_model_scores_half_on_balanced_data() {
    let model = BiasOnly::new(&bias_config(2), 0);
    let eval = evaluate(&model, &examples(&[0, 1, 0, 1, 1, 0])).unwrap();
    assert_eq!(eval.predictions, vec![0; 6]);
    assert_eq!(eval.metrics.accuracy, 0.5);

    let eval = evaluate(&model, &examples(&[0, 0, 0])).unwrap();
    let m = &eval.metrics;
    assert_eq!((m.accuracy, m.weighted_precision, m.weighted_recall, m.weighted_f1), (1.0, 1.0, 1.0, 1.0));
}

#[test]
fn evaluate_rejects_labels_beyond_the_model() {
    let model = BiasOnly::new(&bias_config(2), 0);
    assert!(matches!(
        evaluate(&model, &examples(&[0, 3])),
        Err(Error::OutOfRange { index: 3, size: 2 })
    ));
}

#[test]
fn registered_custom_architecture_trains_and_reloads() {
    let mut registry = Registry::<f32>::with_builtin();
    registry.register(ArchitectureEntry {
        name: "bias_only",
        summary: "input-independent logits",
        build: |c, _| Ok(Box::new(BiasOnly::new(c, 0))),
    });
    let toy = toy_data(8, 4, 0, 4);
    let mut config = bias_config(4);
    config.vocab_size = toy.vocab.size();
    let mut model = registry.build(&config, 0).unwrap();
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("m.ckpt");
    let cfg = TrainConfig {
        max_epochs: 3,
        checkpoint_path: Some(path.clone()),
        ..TrainConfig::default()
    };
    let history = train(model.as_mut(), &toy.train, &toy.dev, &cfg, ctx(&toy)).unwrap();
    assert_eq!(history.records.len(), 3);

    let ck = load_checkpoint_with(&path, &registry).unwrap();
    assert_eq!(ck.model.architecture(), "bias_only");
    assert!(matches!(load_checkpoint(&path), Err(Error::UnknownArchitecture(_))));
}

#[test]
fn non_finite_loss_aborts_with_location() {
    let mut model = BiasOnly::new(&bias_config(2), 0);
    model.poison = true;
    let toy = toy_data(8, 4, 0, 4);
    let labels = vec!["a".to_string(), "b".to_string()];
    let ctx = CheckpointContext {
        vocab: &toy.vocab,
        label_names: &labels,
        task_id: "x",
    };
    let err = train(&mut model, &examples(&[0, 1]), &examples(&[0]), &TrainConfig::default(), ctx).unwrap_err();
    match err {
        Error::NonFinite(msg) => assert!(msg.contains("epoch 1, batch 1"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rejects_empty_and_mismatched_data() {
    let toy = toy_data(8, 4, 0, 4);
    let mut model = BiasOnly::new(&bias_config(4), 0);
    let cfg = TrainConfig::default();
    assert!(matches!(
        train(&mut model, &[], &examples(&[0]), &cfg, ctx(&toy)),
        Err(Error::EmptyCorpus)
    ));
    assert!(matches!(
        train(&mut model, &examples(&[0]), &[], &cfg, ctx(&toy)),
        Err(Error::EmptyCorpus)
    ));
    assert!(train(&mut model, &examples(&[0, 5]), &examples(&[0]), &cfg, ctx(&toy)).is_err());
    let bad = TrainConfig {
        max_epochs: 0,
        ..TrainConfig::default()
    };
    assert!(matches!(
        train(&mut model, &examples(&[0]), &examples(&[0]), &bad, ctx(&toy)),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn unwritable_checkpoint_path_is_an_error() {
    let toy = toy_data(16, 8, 0, 50);
    let mut model = small_cnn(&toy, 50);
    let cfg = TrainConfig {
        max_epochs: 1,
        checkpoint_path: Some(Path::new("/nonexistent-dir/sub/model.ckpt").to_path_buf()),
        ..TrainConfig::default()
    };
    assert!(matches!(
        train(model.as_mut(), &toy.train, &toy.dev, &cfg, ctx(&toy)),
        Err(Error::Io { .. })
    ));
}

#[test]
fn one_epoch_cap_runs_exactly_one_epoch() {
    let toy = toy_data(40, 12, 3, 50);
    let mut model = small_cnn(&toy, 50);
    let cfg = TrainConfig {
        max_epochs: 1,
        ..TrainConfig::default()
    };
    let h = train(model.as_mut(), &toy.train, &toy.dev, &cfg, ctx(&toy)).unwrap();
    assert_eq!(h.records.len(), 1);
    assert_eq!(h.records[0].epoch, 1);
    assert_eq!(h.best_epoch, 1);
}

#[test]
fn same_seed_replays_identical_losses() {
    let toy = toy_data(60, 12, 4, 50);
    let run = |seed: u64| {
        let mut model = small_cnn(&toy, 50);
        let cfg = TrainConfig {
            max_epochs: 4,
            batch_size: 16,
            target_train_accuracy: 1.0,
            seed,
            ..TrainConfig::default()
        };
        let h = train(model.as_mut(), &toy.train, &toy.dev, &cfg, ctx(&toy)).unwrap();
        h.records.iter().map(|r| r.train_loss.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn checkpoint_tracks_best_dev_accuracy_and_loss_falls() {
    let toy = toy_data(120, 40, 5, 50);
    let mut model = small_cnn(&toy, 50);
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("best.ckpt");
    let cfg = TrainConfig {
        max_epochs: 15,
        batch_size: 32,
        target_train_accuracy: 1.0,
        seed: 2,
        checkpoint_path: Some(path.clone()),
        ..TrainConfig::default()
    };
    let mut running_best = f64::NEG_INFINITY;
    let history = train_with_progress(model.as_mut(), &toy.train, &toy.dev, &cfg, ctx(&toy), |r| {
        running_best = running_best.max(r.dev_acc);
        let on_disk = load_checkpoint(&path).unwrap();
        let acc = evaluate(on_disk.model.as_ref(), &toy.dev).unwrap().metrics.accuracy;
        assert_eq!(acc, running_best, "epoch {}", r.epoch);
    })
    .unwrap();

    let max = history.records.iter().map(|r| r.dev_acc).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(history.best_val_accuracy, max);
    let first_best = history.records.iter().find(|r| r.dev_acc == max).unwrap().epoch;
    assert_eq!(history.best_epoch, first_best);
    let meta = load_checkpoint(&path).unwrap().meta;
    assert_eq!(meta.best_epoch, Some(first_best));
    assert!(history.records.windows(2).all(|w| w[1].epoch == w[0].epoch + 1));

    // 3-epoch moving average of the training loss never rises after epoch 3
    let losses: Vec<f64> = history.records.iter().map(|r| r.train_loss).collect();
    let smooth: Vec<f64> = losses.windows(3).map(|w| w.iter().sum::<f64>() / 3.0).collect();
    for (i, w) in smooth.windows(2).enumerate().skip(1) {
        assert!(w[1] <= w[0], "smoothed loss rose at window {}: {losses:?}", i + 1);
    }
}

struct Trained {
    _dir: TempDir,
    path: std::path::PathBuf,
    model: Box<dyn Classifier<f32>>,
    toy: Toy,
}

/// Full-width CNN trained on the toy corpus once and shared by the prediction tests.
fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let toy = toy_data(200, 80, 0, 100);
        let mut model = build_model::<f32>(&ModelConfig::new("cnn", toy.vocab.size(), 4), 0).unwrap();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.ckpt");
        let cfg = TrainConfig {
            checkpoint_path: Some(path.clone()),
            ..TrainConfig::default()
        };
        let h = train(model.as_mut(), &toy.train, &toy.dev, &cfg, ctx(&toy)).unwrap();
        assert!(h.reached_target);
        let model = load_checkpoint(&path).unwrap().model;
        Trained {
            _dir: dir,
            path,
            model,
            toy,
        }
    })
}

#[test]
fn keyword_text_predicts_its_class() {
    let t = trained();
    let ck = load_checkpoint(&t.path).unwrap();
    let out = predict(&ck, &["database query index"]).unwrap();
    assert_eq!(out[0].label, "databases");
}

#[test]
fn out_of_vocabulary_text_still_gets_a_distribution() {
    let ck = load_checkpoint(&trained().path).unwrap();
    for text in ["zzzz qqqq wwww", "", "x"] {
        let p = &predict(&ck, &[text]).unwrap()[0];
        assert_eq!(p.probs.len(), 4);
        assert!((p.probs.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        assert!(ck.label_names.contains(&p.label));
    }
}

#[test]
fn reload_gives_bit_identical_predictions() {
    let t = trained();
    let reloaded = load_checkpoint(&t.path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let words: Vec<String> = (2..t.toy.vocab.size() as u32)
        .map(|i| t.toy.vocab.word(i).unwrap().to_string())
        .collect();
    for _ in 0..100 {
        let n = rng.gen_range(0..15);
        let text: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())].as_str()).collect();
        let ids = encode_words(&text, &t.toy.vocab, 100);
        let a = t.model.predict_proba(&ids).unwrap();
        let b = reloaded.model.predict_proba(&ids).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
