//! Minibatch training loop and the k-fold cross-validation harness.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::{kfold_partition, LabelVector, LabeledExample, SamplingMode};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::{self, MetricsReport};
use crate::model::{predict, HybridModel, Mode, ModelConfig};
use crate::optim::{clip_global_norm, global_grad_norm, AdamW, AdamWConfig, LinearWarmup};
use crate::rng::SeedStream;
use crate::text::{TextPipeline, TokenizedSequence};

/// An encoded input paired with its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub seq: TokenizedSequence,
    pub labels: LabelVector,
}

pub fn encode_examples(pipeline: &TextPipeline, examples: &[LabeledExample]) -> Vec<EncodedExample> {
    examples
        .iter()
        .map(|e| EncodedExample {
            seq: pipeline.encode_text(&e.text),
            labels: e.labels,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub warmup_ratio: f64,
    pub clip_norm: f64,
    pub threshold: f64,
    pub seed: u64,
    pub exec: Execution,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            warmup_ratio: 0.1,
            clip_norm: 1.0,
            threshold: 0.5,
            seed,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::config("clip norm must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config("threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// NaN when no validation data was given.
    pub val_loss: f64,
    /// Labelwise accuracy on the validation data.
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights the model holds on return (`None` for zero epochs).
    pub best_epoch: Option<usize>,
    pub steps: u64,
}

/// Mean loss and labelwise accuracy in eval mode.
pub fn evaluate_loss_acc(
    model: &HybridModel,
    data: &[EncodedExample],
    threshold: f64,
    exec: Execution,
) -> Result<(f64, f64)> {
    let (seqs, targets) = unzip(data);
    let logits = model.forward(&seqs, Mode::Eval, exec)?;
    let loss = crate::model::bce_loss(&logits, &crate::model::targets_tensor(&targets)?)?;
    let pred = predict(&logits, threshold);
    let truth: Vec<Vec<bool>> = targets.iter().map(|t| t.0.to_vec()).collect();
    let acc = metrics::multilabel_accuracy(&truth, &pred.labels, metrics::AccuracyMode::Labelwise)?;
    Ok((loss, acc))
}

fn unzip(data: &[EncodedExample]) -> (Vec<TokenizedSequence>, Vec<LabelVector>) {
    data.iter().map(|e| (e.seq.clone(), e.labels)).unzip()
}

/// Runs `cfg.epochs` epochs of shuffled minibatch AdamW. With validation data
/// the model ends holding the weights of its lowest-validation-loss epoch.
pub fn train(
    model: &mut HybridModel,
    train_set: &[EncodedExample],
    validation: Option<&[EncodedExample]>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let validation = validation.filter(|v| !v.is_empty());
    let steps_per_epoch = train_set.len().div_ceil(cfg.batch_size) as u64;
    let total = steps_per_epoch * cfg.epochs as u64;
    let schedule = LinearWarmup::new(cfg.optimizer.lr, cfg.warmup_ratio, total)?;
    let mut opt = AdamW::new(cfg.optimizer, &model.store)?;
    let seeds = SeedStream::new(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<crate::tensor::Tensor>)> = None;
    let mut step = 0u64;
    model.store.zero_grad();

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seeds.derive("shuffle").index(epoch as u64).rng());
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let seqs: Vec<TokenizedSequence> = chunk.iter().map(|&i| train_set[i].seq.clone()).collect();
            let targets: Vec<LabelVector> = chunk.iter().map(|&i| train_set[i].labels).collect();
            let mode = Mode::Train {
                seed: seeds.derive("dropout").index(step).seed(),
            };
            let loss = model.accumulate_batch_gradients(&seqs, &targets, mode, cfg.exec)?;
            let lr = schedule.lr(step);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step: step as usize,
                    diagnostics: format!(
                        "loss={loss} lr={lr} grad_norm={} batch={chunk:?}",
                        global_grad_norm(&model.store)
                    ),
                });
            }
            clip_global_norm(&mut model.store, cfg.clip_norm);
            opt.step(&mut model.store, lr);
            model.store.zero_grad();
            loss_sum += loss * chunk.len() as f64;
            step += 1;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_loss, val_acc) = match validation {
            Some(v) => evaluate_loss_acc(model, v, cfg.threshold, cfg.exec)?,
            None => (f64::NAN, f64::NAN),
        };
        log::info!("epoch {epoch}: train_loss={train_loss:.6} val_loss={val_loss:.6} val_acc={val_acc:.4}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
        });
        if validation.is_some() && best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.store.snapshot()));
        }
    }

    let best_epoch = match best {
        Some((_, epoch, weights)) => {
            model.store.restore(weights)?;
            Some(epoch)
        }
        None => (cfg.epochs > 0).then_some(cfg.epochs),
    };
    Ok(TrainOutcome {
        history,
        best_epoch,
        steps: step,
    })
}

/// `epoch,train_loss,val_loss,val_acc` rows.
pub fn curve_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
    for r in history {
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_acc);
    }
    s
}

pub fn write_curve(path: &Path, history: &[EpochRecord]) -> Result<()> {
    fs::write(path, curve_csv(history))?;
    Ok(())
}

/// Scores a batch in eval mode: ground truth rows and sigmoid probabilities.
pub fn score(model: &HybridModel, data: &[EncodedExample], exec: Execution) -> Result<(Vec<Vec<bool>>, Vec<Vec<f64>>)> {
    let (seqs, targets) = unzip(data);
    let logits = model.forward(&seqs, Mode::Eval, exec)?;
    let probs = predict(&logits, 0.5).probabilities;
    let rows = (0..probs.rows()).map(|i| probs.row(i).to_vec()).collect();
    Ok((targets.iter().map(|t| t.0.to_vec()).collect(), rows))
}

pub fn evaluate_model(
    model: &HybridModel,
    data: &[EncodedExample],
    threshold: f64,
    exec: Execution,
) -> Result<MetricsReport> {
    let (truth, probs) = score(model, data, exec)?;
    metrics::evaluate(&truth, &probs, threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub held_out: Vec<usize>,
    pub history: Vec<EpochRecord>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalOutcome {
    pub folds: Vec<FoldResult>,
    pub average: MetricsReport,
}

impl CrossvalOutcome {
    pub fn table(&self) -> String {
        let reports: Vec<MetricsReport> = self.folds.iter().map(|f| f.report.clone()).collect();
        metrics::crossval_table(&reports, &self.average)
    }
}

/// Trains one fresh model per fold and evaluates it on the held-out part.
/// Folds run through `exec`; each has its own model, optimizer and seed stream.
pub fn crossval(
    pipeline: &TextPipeline,
    examples: &[LabeledExample],
    k: usize,
    model_config: &ModelConfig,
    sampling: SamplingMode,
    cfg: &TrainConfig,
) -> Result<CrossvalOutcome> {
    let seeds = SeedStream::new(cfg.seed);
    let folds = kfold_partition(examples.len(), k, seeds.derive("folds").seed())?;
    let results = cfg.exec.try_map(folds.len(), |i| {
        let fold_seeds = seeds.derive("fold").index(i as u64);
        let (train_raw, held_raw) = folds[i].select(examples);
        let train_raw = sampling.apply(&train_raw, fold_seeds.derive("sampling").seed())?;
        let train_set = encode_examples(pipeline, &train_raw);
        let held = encode_examples(pipeline, &held_raw);
        let mut model = HybridModel::new(model_config.clone(), fold_seeds.derive("init").seed())?;
        let fold_cfg = TrainConfig {
            seed: fold_seeds.derive("train").seed(),
            ..cfg.clone()
        };
        let outcome = train(&mut model, &train_set, None, &fold_cfg)?;
        let report = evaluate_model(&model, &held, cfg.threshold, cfg.exec)?;
        log::info!("fold {}: labelwise accuracy {:.4}", i + 1, report.headline.accuracy);
        Ok::<_, Error>(FoldResult {
            held_out: folds[i].held_out.clone(),
            history: outcome.history,
            report,
        })
    })?;
    let reports: Vec<MetricsReport> = results.iter().map(|f| f.report.clone()).collect();
    let average = metrics::crossval_aggregate(&reports)?;
    Ok(CrossvalOutcome {
        folds: results,
        average,
    })
}
