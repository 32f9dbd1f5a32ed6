//! `hybridclf`: train, evaluate, cross-validate, resample and explain the
//! hybrid encoder + LSTM multilabel comment classifier.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error (including missing input files).

mod settings;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hybrid_core::data::{
    class_count_table, class_counts, load_dataset, stratified_split, write_dataset, DatasetSplit, Label,
    LabeledExample, Provenance, SamplingMode, NUM_LABELS,
};
use hybrid_core::explain::{explain_comment, explanations_text, explanations_tsv, ModelScorer, DEFAULT_SAMPLES};
use hybrid_core::metrics::{roc_auc, write_roc_files};
use hybrid_core::model::{load_checkpoint, save_checkpoint, HybridModel};
use hybrid_core::rng::SeedStream;
use hybrid_core::text::{build_vocab, clean, CleaningConfig, TextPipeline, Vocabulary};
use hybrid_core::train::{self, crossval, encode_examples};
use log::info;
use settings::Settings;

const CONFIG_FILE: &str = "config.txt";
const VOCAB_FILE: &str = "vocab.txt";
const DEFAULT_VOCAB_SIZE: usize = 8000;
const DEFAULT_MIN_FREQ: usize = 2;

#[derive(Parser)]
#[command(
    name = "hybridclf",
    version,
    about = "Multilabel comment classifier: transformer encoder + stacked LSTM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV (text,bully,sexual,religious,threat,spam).
    #[arg(long)]
    data: Option<PathBuf>,
    /// none | under | over
    #[arg(long)]
    sampling: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// desk | large
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Split, optionally resample, train, and save the best-validation checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a checkpoint on an original (never resampled) split file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        split: PathBuf,
    },
    /// k-fold cross-validation over the whole dataset.
    Crossval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Write a rebalanced training split and a before/after count table.
    Resample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-label word attributions for one comment.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        text: String,
        /// Comma-separated label names; all labels by default.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        /// Number of perturbed samples.
        #[arg(long)]
        samples: Option<usize>,
    },
}

/// Marks an error as caller-side (exit code 2).
#[derive(Debug)]
struct Usage;

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("usage error")
    }
}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| e.context(Usage))
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(anyhow::anyhow!("input file not found: {}", path.display()).context(Usage));
    }
    Ok(())
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.downcast_ref::<Usage>().is_some()
        || e.chain().any(|c| {
            matches!(
                c.downcast_ref::<hybrid_core::Error>(),
                Some(hybrid_core::Error::Config(_) | hybrid_core::Error::Parse { .. })
            )
        })
}

fn settings(common: &Common, fallback: Option<&Path>) -> Result<Settings> {
    usage((|| {
        let mut s = match (&common.config, fallback) {
            (Some(p), _) => {
                require_file(p)?;
                Settings::load(p)?
            }
            (None, Some(p)) if p.is_file() => Settings::load(p)?,
            _ => Settings::default(),
        };
        for pair in &common.set {
            s.set_pair(pair)?;
        }
        s.set("seed", &common.seed.to_string())?;
        if let Some(out) = &common.out {
            s.set("out", &out.display().to_string())?;
        }
        if common.sequential {
            s.set("sequential", "true")?;
        }
        Ok(s)
    })())
}

fn apply_data(s: &mut Settings, d: &DataArgs) -> Result<()> {
    if let Some(p) = &d.data {
        s.set("data", &p.display().to_string())?;
    }
    if let Some(m) = &d.sampling {
        s.set("sampling", m)?;
    }
    Ok(())
}

fn apply_train(s: &mut Settings, t: &TrainArgs) -> Result<()> {
    for (key, v) in [
        ("epochs", t.epochs.map(|v| v.to_string())),
        ("lr", t.lr.map(|v| v.to_string())),
        ("batch_size", t.batch_size.map(|v| v.to_string())),
        ("preset", t.preset.clone()),
    ] {
        if let Some(v) = v {
            s.set(key, &v)?;
        }
    }
    Ok(())
}

fn load_examples(s: &Settings) -> Result<Vec<LabeledExample>> {
    let path = usage(s.path("data").context("no dataset given (--data or `data` key)"))?;
    require_file(&path)?;
    let file = load_dataset(&path)?;
    info!(
        "{}: {} rows, {} duplicates and {} empty rows dropped",
        path.display(),
        file.stats.rows,
        file.stats.dropped_duplicates,
        file.stats.dropped_empty
    );
    if file.provenance != Provenance::Original {
        bail!("{} is a resampled file; pass the original dataset", path.display());
    }
    Ok(file.examples)
}

/// Split, then rebalance the training part only.
fn split_and_sample(s: &Settings, examples: &[LabeledExample]) -> Result<(DatasetSplit, DatasetSplit, SamplingMode)> {
    let seeds = SeedStream::new(s.require("seed")?);
    let split = stratified_split(examples, usage(s.ratios())?, seeds.derive("split").seed())?;
    let mode = usage(s.sampling())?;
    let (sampled, report) = mode.apply_to_split(split.clone(), seeds.derive("sampling").seed())?;
    if let Some(r) = report.filter(|r| !r.off_target.is_empty()) {
        info!("labels left off target by co-occurrence: {:?}", r.off_target);
    }
    Ok((split, sampled, mode))
}

fn count_table(original: &DatasetSplit, sampled: &DatasetSplit, mode: SamplingMode) -> String {
    let mut rows = vec![("train", "original", class_counts(&original.train))];
    if mode != SamplingMode::None {
        rows.push(("train", mode.provenance().as_str(), class_counts(&sampled.train)));
    }
    rows.push(("validation", "original", class_counts(&sampled.validation)));
    rows.push(("test", "original", class_counts(&sampled.test)));
    class_count_table(&rows)
}

fn build_pipeline(
    s: &Settings,
    cleaning: CleaningConfig,
    texts: &[LabeledExample],
    max_len: usize,
) -> Result<TextPipeline> {
    let cleaned: Vec<String> = texts.iter().map(|e| clean(&e.text, &cleaning)).collect();
    let vocab = build_vocab(
        &cleaned,
        usage(s.get_or("vocab_size", DEFAULT_VOCAB_SIZE))?,
        usage(s.get_or("min_freq", DEFAULT_MIN_FREQ))?,
    )?;
    info!("vocabulary: {} entries", vocab.len());
    Ok(TextPipeline::new(cleaning, vocab, max_len))
}

fn create_out(s: &Settings) -> Result<PathBuf> {
    let out = s.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

fn cmd_train(s: Settings) -> Result<()> {
    let tcfg = usage(s.train_config())?;
    let cleaning = usage(s.cleaning())?;
    let examples = load_examples(&s)?;
    let (original, split, mode) = split_and_sample(&s, &examples)?;
    let max_len = usage(s.max_len())?;
    let pipeline = build_pipeline(&s, cleaning, &split.train, max_len)?;
    let mcfg = usage(s.model_config(pipeline.vocab.len()))?;
    let seeds = SeedStream::new(tcfg.seed);
    let mut model = HybridModel::new(mcfg, seeds.derive("init").seed())?;
    info!(
        "{} train / {} validation / {} test examples, {} parameters",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        model.config.param_count()
    );
    let train_set = encode_examples(&pipeline, &split.train);
    let val = encode_examples(&pipeline, &split.validation);
    let run_cfg = hybrid_core::train::TrainConfig {
        seed: seeds.derive("train").seed(),
        ..tcfg
    };
    let outcome = train::train(&mut model, &train_set, Some(&val), &run_cfg)?;

    let out = create_out(&s)?;
    save_checkpoint(&model, &out.join("model.ckpt"))?;
    pipeline.vocab.save(&out.join(VOCAB_FILE))?;
    fs::write(out.join(CONFIG_FILE), s.to_text())?;
    train::write_curve(&out.join("curve.csv"), &outcome.history)?;
    write_dataset(&out.join("validation.csv"), &split.validation, Provenance::Original)?;
    write_dataset(&out.join("test.csv"), &split.test, Provenance::Original)?;
    fs::write(out.join("counts.tsv"), count_table(&original, &split, mode))?;
    match outcome.best_epoch {
        Some(e) => println!(
            "trained {} epochs, best validation epoch {e}; wrote {}",
            outcome.history.len(),
            out.display()
        ),
        None => println!("trained {} epochs; wrote {}", outcome.history.len(), out.display()),
    }
    Ok(())
}

fn load_model(checkpoint: &Path, s: &Settings) -> Result<(HybridModel, TextPipeline)> {
    require_file(checkpoint)?;
    let vocab_path = checkpoint.with_file_name(VOCAB_FILE);
    require_file(&vocab_path)?;
    let model = load_checkpoint(checkpoint)?;
    let vocab = Vocabulary::load(&vocab_path)?;
    if vocab.len() != model.config.encoder.vocab_size {
        bail!(
            "{} has {} entries but the checkpoint expects {}",
            vocab_path.display(),
            vocab.len(),
            model.config.encoder.vocab_size
        );
    }
    let pipeline = TextPipeline::new(usage(s.cleaning())?, vocab, model.max_len());
    Ok((model, pipeline))
}

fn cmd_evaluate(s: Settings, checkpoint: &Path, split: &Path) -> Result<()> {
    require_file(split)?;
    let file = load_dataset(split)?;
    if file.provenance != Provenance::Original {
        return Err(anyhow::anyhow!(
            "{} is {}; evaluation only runs on original held-out data",
            split.display(),
            file.provenance.as_str()
        )
        .context(Usage));
    }
    let (model, pipeline) = load_model(checkpoint, &s)?;
    let exec = usage(s.execution())?;
    let threshold = usage(s.get_or("threshold", hybrid_core::model::DEFAULT_THRESHOLD))?;
    let data = encode_examples(&pipeline, &file.examples);
    let (truth, probs) = train::score(&model, &data, exec)?;
    let report = hybrid_core::metrics::evaluate(&truth, &probs, threshold)?;
    let out = create_out(&s)?;
    report.write(&out.join("report.txt"))?;
    write_roc_files(&out, &roc_auc(&truth, &probs)?)?;
    print!("{}", report.to_text());
    Ok(())
}

fn cmd_crossval(s: Settings) -> Result<()> {
    let tcfg = usage(s.train_config())?;
    let k = usage(s.get_or("folds", 5usize))?;
    let cleaning = usage(s.cleaning())?;
    let examples = load_examples(&s)?;
    let max_len = usage(s.max_len())?;
    let pipeline = build_pipeline(&s, cleaning, &examples, max_len)?;
    let mcfg = usage(s.model_config(pipeline.vocab.len()))?;
    let sampling = usage(s.sampling())?;
    let outcome = crossval(&pipeline, &examples, k, &mcfg, sampling, &tcfg)?;

    let out = create_out(&s)?;
    for (i, f) in outcome.folds.iter().enumerate() {
        f.report.write(&out.join(format!("fold{}_report.txt", i + 1)))?;
        train::write_curve(&out.join(format!("fold{}_curve.csv", i + 1)), &f.history)?;
    }
    outcome.average.write(&out.join("crossval_report.txt"))?;
    let table = outcome.table();
    fs::write(out.join("crossval.tsv"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_resample(s: Settings) -> Result<()> {
    let examples = load_examples(&s)?;
    let (original, split, mode) = split_and_sample(&s, &examples)?;
    if mode == SamplingMode::None {
        return Err(anyhow::anyhow!("resample needs --sampling under or over").context(Usage));
    }
    let out = create_out(&s)?;
    write_dataset(
        &out.join(format!("train_{}.csv", mode.provenance().as_str())),
        &split.train,
        mode.provenance(),
    )?;
    write_dataset(&out.join("validation.csv"), &split.validation, Provenance::Original)?;
    write_dataset(&out.join("test.csv"), &split.test, Provenance::Original)?;
    let table = count_table(&original, &split, mode);
    fs::write(out.join("counts.tsv"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_explain(s: Settings, checkpoint: &Path, text: &str, labels: &[String], samples: Option<usize>) -> Result<()> {
    let labels: Vec<usize> = if labels.is_empty() {
        (0..NUM_LABELS).collect()
    } else {
        usage(
            labels
                .iter()
                .map(|l| Ok(Label::from_name(l.trim())?.index()))
                .collect::<Result<_>>(),
        )?
    };
    let n = match samples {
        Some(n) => n,
        None => usage(s.get_or("samples", DEFAULT_SAMPLES))?,
    };
    let (model, pipeline) = load_model(checkpoint, &s)?;
    let scorer = ModelScorer {
        model: &model,
        pipeline: &pipeline,
        exec: usage(s.execution())?,
    };
    let explanations = explain_comment(text, &scorer, &pipeline.cleaning, &labels, n, s.require("seed")?)?;
    let out = create_out(&s)?;
    let rendered = explanations_text(&explanations);
    fs::write(out.join("explanation.txt"), &rendered)?;
    fs::write(out.join("explanation.tsv"), explanations_tsv(&explanations))?;
    print!("{rendered}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, data, train } => {
            let mut s = settings(&common, None)?;
            usage(apply_data(&mut s, &data).and_then(|_| apply_train(&mut s, &train)))?;
            cmd_train(s)
        }
        Command::Evaluate {
            common,
            checkpoint,
            split,
        } => {
            let s = settings(&common, Some(&checkpoint.with_file_name(CONFIG_FILE)))?;
            cmd_evaluate(s, &checkpoint, &split)
        }
        Command::Crossval {
            common,
            data,
            train,
            folds,
        } => {
            let mut s = settings(&common, None)?;
            usage((|| {
                apply_data(&mut s, &data)?;
                apply_train(&mut s, &train)?;
                if let Some(k) = folds {
                    s.set("folds", &k.to_string())?;
                }
                Ok(())
            })())?;
            cmd_crossval(s)
        }
        Command::Resample { common, data } => {
            let mut s = settings(&common, None)?;
            usage(apply_data(&mut s, &data))?;
            cmd_resample(s)
        }
        Command::Explain {
            common,
            checkpoint,
            text,
            labels,
            samples,
        } => {
            let s = settings(&common, Some(&checkpoint.with_file_name(CONFIG_FILE)))?;
            cmd_explain(s, &checkpoint, &text, &labels, samples)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
