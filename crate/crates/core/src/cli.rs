//! Command-line surface. Each subcommand is a thin wrapper over library calls;
//! the binary only parses flags and maps errors to exit codes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::load_checkpoint;
use crate::corpus::{load_dataset, load_with_labels};
use crate::error::{Error, Result};
use crate::metrics::format_report;
use crate::models::{canonical_name, ModelConfig, Registry};
use crate::preprocess::{encode_corpus, prepare_training, DEFAULT_SEQ_LEN};
use crate::toy::keyword_corpus;
use crate::trainer::{evaluate, predict, train_with_progress, CheckpointContext, TrainConfig, TrainHistory};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.txt";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "textdomain", version, about = "Technical-domain text classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write `model.ckpt` and `history.txt` into `--out`.
    Train(TrainArgs),
    /// Score a labelled file with a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Classify raw texts, one per line.
    Predict(PredictArgs),
    /// Write a synthetic keyword-separable train/dev pair.
    Toy(ToyArgs),
}

fn model_names() -> PossibleValuesParser {
    let names: Vec<String> = Registry::<f32>::with_builtin()
        .names()
        .into_iter()
        .map(|n| n.replace('_', "-"))
        .collect();
    PossibleValuesParser::new(names)
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// TSV file of `text<TAB>label` lines.
    #[arg(long)]
    pub train_file: PathBuf,
    #[arg(long)]
    pub dev_file: PathBuf,
    #[arg(long, value_parser = model_names())]
    pub model: String,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Epoch cap; training stops earlier once training accuracy reaches 98%.
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = DEFAULT_SEQ_LEN)]
    pub seq_len: usize,
    /// Skip the first line of each data file.
    #[arg(long)]
    pub header: bool,
    /// Suppress per-epoch log lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Write one predicted label per line, in input order.
    #[arg(long)]
    pub pred_out: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One raw text per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub train_size: usize,
    #[arg(long, default_value_t = 80)]
    pub dev_size: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub history: TrainHistory,
    pub checkpoint: PathBuf,
    pub history_file: PathBuf,
    /// Dev metrics of the saved (best) checkpoint.
    pub report: String,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    let train_corpus = load_dataset(&args.train_file, args.header)?;
    let dev_corpus = load_with_labels(&args.dev_file, args.header, &train_corpus.label_names)?;
    let (vocab, train_set) = prepare_training(&train_corpus, args.seq_len)?;
    let dev_set = encode_corpus(&dev_corpus, &vocab, args.seq_len);

    let mut config = ModelConfig::new(&canonical_name(&args.model), vocab.size(), train_corpus.num_classes());
    config.embedding_dim = args.embedding_dim;
    config.seq_len = args.seq_len;
    let mut model = Registry::<f32>::with_builtin().build(&config, args.seed)?;

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let checkpoint = args.out.join(CHECKPOINT_FILE);
    let cfg = TrainConfig {
        batch_size: args.batch_size,
        lr: args.lr,
        max_epochs: args.epochs,
        seed: args.seed,
        checkpoint_path: Some(checkpoint.clone()),
        ..TrainConfig::default()
    };
    let ctx = CheckpointContext {
        vocab: &vocab,
        label_names: &train_corpus.label_names,
        task_id: &train_corpus.task_id,
    };
    let quiet = args.quiet;
    let history = train_with_progress(model.as_mut(), &train_set, &dev_set, &cfg, ctx, |r| {
        if !quiet {
            eprintln!("{}", r.to_line());
        }
    })?;
    let history_file = args.out.join(HISTORY_FILE);
    write_file(&history_file, &history.to_text())?;

    let best = load_checkpoint(&checkpoint)?;
    let eval = evaluate(best.model.as_ref(), &dev_set)?;
    let report = format_report(&eval.metrics, &best.label_names);
    Ok(TrainOutcome {
        history,
        checkpoint,
        history_file,
        report,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let data = load_with_labels(&args.data, args.header, &ck.label_names)?;
    let encoded = encode_corpus(&data, &ck.vocab, ck.model.config().seq_len);
    let eval = evaluate(ck.model.as_ref(), &encoded)?;
    if let Some(path) = &args.pred_out {
        let mut out = String::new();
        for &p in &eval.predictions {
            let _ = writeln!(out, "{}", ck.label_names[p]);
        }
        write_file(path, &out)?;
    }
    Ok(format_report(&eval.metrics, &ck.label_names))
}

/// Returns the prediction lines (`label<TAB>p0,p1,...`) joined with newlines.
pub fn cmd_predict(args: &PredictArgs) -> Result<String> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let input = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let texts: Vec<&str> = input.lines().collect();
    if texts.is_empty() {
        eprintln!("warning: {} has no input lines", args.input.display());
    }
    let mut out = String::new();
    for p in predict(&ck, &texts)? {
        let probs: Vec<String> = p.probs.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(out, "{}\t{}", p.label, probs.join(","));
    }
    match &args.output {
        Some(path) => write_file(path, &out)?,
        None => print!("{out}"),
    }
    Ok(out)
}

/// Writes `train.tsv` and `dev.tsv`; the dev split uses a derived seed so the
/// two never share a generator stream.
pub fn cmd_toy(args: &ToyArgs) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let train = args.out_dir.join("train.tsv");
    let dev = args.out_dir.join("dev.tsv");
    keyword_corpus(args.train_size, args.seed).write_tsv(&train)?;
    keyword_corpus(args.dev_size, args.seed.wrapping_add(1)).write_tsv(&dev)?;
    Ok((train, dev))
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|o| {
            print!("{}", o.report);
            eprintln!(
                "best dev accuracy {:.4} at epoch {}; wrote {} and {}",
                o.history.best_val_accuracy,
                o.history.best_epoch,
                o.checkpoint.display(),
                o.history_file.display()
            );
        }),
        Command::Evaluate(a) => cmd_evaluate(a).map(|r| print!("{r}")),
        Command::Predict(a) => cmd_predict(a).map(|_| ()),
        Command::Toy(a) => cmd_toy(a).map(|(t, d)| println!("{}\n{}", t.display(), d.display())),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
