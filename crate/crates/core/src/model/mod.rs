//! Encoder → stacked LSTM → dropout → affine head, with sigmoid outputs.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand_distr::{Distribution, Uniform};

use crate::data::{LabelVector, NUM_LABELS};
use crate::encoder::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::recurrent::{Lstm, LstmConfig, Readout};
use crate::rng::SeedStream;
use crate::tensor::{kernels, Graph, ParamId, ParamStore, Tensor, Var};
use crate::text::TokenizedSequence;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub lstm: LstmConfig,
    pub head_dropout: f64,
    pub num_labels: usize,
}

impl ModelConfig {
    /// 2 layers, d_model 32, 4 heads, d_ff 64, 16 tokens, LSTM hidden 16.
    pub fn desk(vocab_size: usize) -> Self {
        let encoder = EncoderConfig::desk(vocab_size);
        let lstm = LstmConfig::new(encoder.d_model, 16);
        Self {
            encoder,
            lstm,
            head_dropout: 0.3,
            num_labels: NUM_LABELS,
        }
    }

    /// 24-layer / 1024-wide encoder with a 256-unit LSTM.
    pub fn large(vocab_size: usize) -> Self {
        let encoder = EncoderConfig::large(vocab_size);
        let lstm = LstmConfig::new(encoder.d_model, 256);
        Self {
            encoder,
            lstm,
            head_dropout: 0.3,
            num_labels: NUM_LABELS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.lstm.validate()?;
        if self.lstm.input_dim != self.encoder.d_model {
            return Err(Error::config("LSTM input width must equal d_model"));
        }
        if self.num_labels != NUM_LABELS {
            return Err(Error::config(format!("label arity must be {NUM_LABELS}")));
        }
        if !(0.0..1.0).contains(&self.head_dropout) {
            return Err(Error::config("head dropout outside [0, 1)"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.lstm.param_count() + self.num_labels * self.lstm.hidden_dim + self.num_labels
    }

    /// Flat `key=value` lines, the inverse of [`ModelConfig::from_text`].
    pub fn to_text(&self) -> String {
        let e = &self.encoder;
        let l = &self.lstm;
        format!(
            "n_layers={}\nd_model={}\nn_heads={}\nd_ff={}\nmax_len={}\nvocab_size={}\ndropout_p={:?}\nn_segments={}\n\
             lstm_hidden={}\nlstm_layers={}\nlstm_dropout={:?}\nreadout={}\nhead_dropout={:?}\nnum_labels={}\n",
            e.n_layers,
            e.d_model,
            e.n_heads,
            e.d_ff,
            e.max_len,
            e.vocab_size,
            e.dropout_p,
            e.n_segments,
            l.hidden_dim,
            l.n_layers,
            l.interlayer_dropout_p,
            l.readout.as_str(),
            self.head_dropout,
            self.num_labels
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("malformed config line {line:?}")))?;
            kv.insert(k.trim(), v.trim());
        }
        fn get<T: std::str::FromStr>(kv: &std::collections::HashMap<&str, &str>, key: &str) -> Result<T> {
            kv.get(key)
                .ok_or_else(|| Error::config(format!("config lacks {key}")))?
                .parse()
                .map_err(|_| Error::config(format!("config value for {key} does not parse")))
        }
        let encoder = EncoderConfig {
            n_layers: get(&kv, "n_layers")?,
            d_model: get(&kv, "d_model")?,
            n_heads: get(&kv, "n_heads")?,
            d_ff: get(&kv, "d_ff")?,
            max_len: get(&kv, "max_len")?,
            vocab_size: get(&kv, "vocab_size")?,
            dropout_p: get(&kv, "dropout_p")?,
            n_segments: get(&kv, "n_segments")?,
        };
        let lstm = LstmConfig {
            input_dim: encoder.d_model,
            hidden_dim: get(&kv, "lstm_hidden")?,
            n_layers: get(&kv, "lstm_layers")?,
            interlayer_dropout_p: get(&kv, "lstm_dropout")?,
            readout: Readout::parse(&get::<String>(&kv, "readout")?)?,
        };
        let cfg = Self {
            encoder,
            lstm,
            head_dropout: get(&kv, "head_dropout")?,
            num_labels: get(&kv, "num_labels")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Forward-pass mode. Training mode seeds each example's dropout stream from
/// `seed` and the example's position in the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// The full classifier with its parameter registry.
#[derive(Debug, Clone)]
pub struct HybridModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub lstm: Lstm,
    pub head_w: ParamId,
    pub head_b: ParamId,
}

impl HybridModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeedStream::new(seed).derive("init").rng();
        let mut store = ParamStore::new();
        let encoder = Encoder::init(config.encoder.clone(), &mut store, &mut rng)?;
        let lstm = Lstm::init(config.lstm.clone(), &mut store, &mut rng)?;
        let h = config.lstm.hidden_dim;
        let bound = 1.0 / (h as f64).sqrt();
        let uniform = Uniform::new(-bound, bound).expect("bound > 0");
        let w: Vec<f64> = (0..config.num_labels * h).map(|_| uniform.sample(&mut rng)).collect();
        let head_w = store.register("head.w", Tensor::new(vec![config.num_labels, h], w)?, true)?;
        let head_b = store.register("head.b", Tensor::zeros(&[config.num_labels]), false)?;
        Ok(Self {
            config,
            store,
            encoder,
            lstm,
            head_w,
            head_b,
        })
    }

    pub fn max_len(&self) -> usize {
        self.config.encoder.max_len
    }

    /// Records one example's forward pass, returning its `1 × K` logits.
    pub fn logits_on<'p>(&'p self, g: &mut Graph<'p>, seq: &TokenizedSequence) -> Result<Var> {
        if seq.ids.len() != self.max_len() {
            return Err(Error::shape("forward", &[seq.ids.len()], &[self.max_len()]));
        }
        let store = &self.store;
        let hidden = self.encoder.encode_sequence(g, store, seq)?;
        let h_final = self.lstm.run_stacked(g, store, hidden, &seq.keep_mask())?;
        let dropped = g.dropout(h_final, self.config.head_dropout)?;
        let w = g.param(store, self.head_w);
        let wt = g.transpose(w)?;
        let b = g.param(store, self.head_b);
        let z = g.matmul(dropped, wt)?;
        g.add_row(z, b)
    }

    fn graph_for(&self, mode: Mode, index: usize) -> Graph<'_> {
        match mode {
            Mode::Eval => Graph::new(),
            Mode::Train { seed } => Graph::training(SeedStream::new(seed).index(index as u64).rng()),
        }
    }

    /// `B × K` logits. Examples are independent, so they may be scored in parallel.
    pub fn forward(&self, batch: &[TokenizedSequence], mode: Mode, exec: Execution) -> Result<Tensor> {
        if batch.is_empty() {
            return Err(Error::config("empty batch"));
        }
        let rows = exec.try_map(batch.len(), |i| {
            let mut g = self.graph_for(mode, i);
            let z = self.logits_on(&mut g, &batch[i])?;
            Ok::<_, Error>(g.value(z).to_vec())
        })?;
        Tensor::from_rows(&rows)
    }

    /// Loss contribution and parameter gradients of one example, with the
    /// loss scaled by `1 / batch_len` so per-example gradients sum to the batch gradient.
    pub fn example_gradients(
        &self,
        seq: &TokenizedSequence,
        target: &LabelVector,
        mode: Mode,
        index: usize,
        batch_len: usize,
    ) -> Result<(f64, Vec<(ParamId, Vec<f64>)>)> {
        let mut g = self.graph_for(mode, index);
        let z = self.logits_on(&mut g, seq)?;
        let y = Tensor::new(vec![1, NUM_LABELS], target.as_f64().to_vec())?;
        let loss = g.bce_with_logits(z, &y)?;
        let scaled = g.scale(loss, 1.0 / batch_len as f64);
        g.backward(scaled)?;
        let grads = g.param_grads().map(|(id, gr)| (id, gr.to_vec())).collect();
        Ok((g.scalar(scaled), grads))
    }

    /// Batch BCE and its gradient, accumulated into the registry grads.
    /// Per-example gradients are summed in batch order.
    pub fn accumulate_batch_gradients(
        &mut self,
        batch: &[TokenizedSequence],
        targets: &[LabelVector],
        mode: Mode,
        exec: Execution,
    ) -> Result<f64> {
        if batch.len() != targets.len() || batch.is_empty() {
            return Err(Error::shape("batch", &[batch.len()], &[targets.len()]));
        }
        let n = batch.len();
        let this = &*self;
        let parts = exec.try_map(n, |i| this.example_gradients(&batch[i], &targets[i], mode, i, n))?;
        let mut loss = 0.0;
        for (l, grads) in parts {
            loss += l;
            for (id, g) in grads {
                self.store.accumulate_grad(id, &g);
            }
        }
        Ok(loss)
    }

    /// Mean-over-batch BCE (sum over labels) without gradients.
    pub fn batch_loss(
        &self,
        batch: &[TokenizedSequence],
        targets: &[LabelVector],
        mode: Mode,
        exec: Execution,
    ) -> Result<f64> {
        let logits = self.forward(batch, mode, exec)?;
        let y = targets_tensor(targets)?;
        bce_loss(&logits, &y)
    }
}

pub fn targets_tensor(targets: &[LabelVector]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = targets.iter().map(|t| t.as_f64().to_vec()).collect();
    Tensor::from_rows(&rows)
}

/// Sigmoid probabilities and thresholded labels for a batch of logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBatch {
    pub logits: Tensor,
    pub probabilities: Tensor,
    pub labels: Vec<Vec<bool>>,
    pub threshold: f64,
}

/// `ŷ = σ(z)`, label set iff `ŷ ≥ threshold` (inclusive). Labels are independent.
pub fn predict(logits: &Tensor, threshold: f64) -> PredictionBatch {
    let probs: Vec<f64> = logits.data().iter().map(|&z| kernels::sigmoid(z)).collect();
    let k = logits.cols();
    let labels = probs
        .chunks(k)
        .map(|r| r.iter().map(|&p| p >= threshold).collect())
        .collect();
    PredictionBatch {
        logits: logits.clone(),
        probabilities: Tensor::new(logits.shape().to_vec(), probs).expect("same shape"),
        labels,
        threshold,
    }
}

/// Binary cross-entropy from logits, summed over labels and averaged over
/// the batch rows (not over rows × labels).
pub fn bce_loss(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    if logits.shape() != targets.shape() {
        return Err(Error::shape("bce_loss", logits.shape(), targets.shape()));
    }
    if let Some(bad) = targets.data().iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Data(format!("BCE target {bad} is not binary")));
    }
    let total: f64 = logits
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&z, &y)| kernels::bce_with_logit(z, y))
        .sum();
    Ok(total / logits.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        let mut c = ModelConfig::desk(12);
        c.encoder.max_len = 6;
        c.encoder.d_model = 8;
        c.encoder.n_heads = 2;
        c.encoder.d_ff = 12;
        c.lstm = LstmConfig::new(8, 4);
        c
    }

    fn seq(ids: &[usize], max_len: usize) -> TokenizedSequence {
        let mut v = ids.to_vec();
        v.resize(max_len, 0);
        TokenizedSequence {
            mask: (0..max_len).map(|j| u8::from(j < ids.len())).collect(),
            ids: v,
            original_token_count: ids.len(),
        }
    }

    #[test]
    fn param_count_formula() {
        for cfg in [tiny_config(), ModelConfig::desk(60)] {
            let m = HybridModel::new(cfg.clone(), 0).unwrap();
            assert_eq!(m.store.num_scalars(), cfg.param_count());
        }
    }

    #[test]
    fn zeroed_head_gives_zero_logits() {
        let mut m = HybridModel::new(tiny_config(), 1).unwrap();
        m.store.value_mut(m.head_w).data_mut().iter_mut().for_each(|v| *v = 0.0);
        let out = m
            .forward(
                &[seq(&[2, 5, 3], 6), seq(&[2, 3], 6)],
                Mode::Eval,
                Execution::Sequential,
            )
            .unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_example_matches_batch_row() {
        let m = HybridModel::new(tiny_config(), 2).unwrap();
        let batch: Vec<_> = (0..8).map(|i| seq(&[2, 4 + i % 6, 3], 6)).collect();
        let all = m.forward(&batch, Mode::Eval, Execution::Parallel).unwrap();
        for (i, s) in batch.iter().enumerate() {
            let one = m
                .forward(std::slice::from_ref(s), Mode::Eval, Execution::Sequential)
                .unwrap();
            assert_eq!(one.row(0), all.row(i));
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let m = HybridModel::new(tiny_config(), 2).unwrap();
        assert!(m
            .forward(&[seq(&[2, 3], 5)], Mode::Eval, Execution::Sequential)
            .is_err());
    }

    #[test]
    fn predict_threshold_is_inclusive() {
        let z = Tensor::new(vec![1, 2], vec![0.0, -10.0]).unwrap();
        let p = predict(&z, 0.5);
        assert_eq!(p.probabilities.data()[0], 0.5);
        assert_eq!(p.labels[0], vec![true, false]);
        let z = Tensor::new(vec![1, 5], vec![5.0; 5]).unwrap();
        assert_eq!(predict(&z, 0.5).labels[0], vec![true; 5]);
        let z = Tensor::new(vec![1, 2], vec![10.0, -10.0]).unwrap();
        assert_eq!(predict(&z, 0.5).labels[0], vec![true, false]);
    }

    #[test]
    fn bce_limits() {
        let z = Tensor::new(vec![1, 2], vec![30.0, -30.0]).unwrap();
        let y = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        assert!(bce_loss(&z, &y).unwrap() < 1e-9);
        let z = Tensor::zeros(&[3, 2]);
        let y = Tensor::new(vec![3, 2], vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((bce_loss(&z, &y).unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        let bad = Tensor::new(vec![1, 2], vec![0.5, 1.0]).unwrap();
        assert!(bce_loss(&Tensor::zeros(&[1, 2]), &bad).is_err());
    }

    #[test]
    fn config_text_roundtrip() {
        let mut c = ModelConfig::desk(77);
        c.lstm.readout = Readout::LastUnmasked;
        assert_eq!(ModelConfig::from_text(&c.to_text()).unwrap(), c);
    }
}
