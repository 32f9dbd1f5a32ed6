//! Transformer encoder: summed token/position/segment embeddings followed by
//! `n_layers` blocks of masked multi-head self-attention and a GELU
//! feed-forward network, each wrapped in dropout + residual + LayerNorm.
//!
//! Parameter count for a config (checked in tests):
//!
//! ```text
//! embeddings  d·(V + L + S) + 2d
//! per layer   4d² (Q, K, V, O) + 2·d·d_ff + d_ff + d (FFN) + 4d (two LayerNorms)
//! ```

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::text::TokenizedSequence;

pub const LAYER_NORM_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub dropout_p: f64,
    pub n_segments: usize,
}

impl EncoderConfig {
    /// Small preset that trains on one CPU core.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            n_layers: 2,
            d_model: 32,
            n_heads: 4,
            d_ff: 64,
            max_len: 16,
            vocab_size,
            dropout_p: 0.1,
            n_segments: 1,
        }
    }

    /// BERT-Large-sized preset (24 layers, 1024 hidden, 16 heads, 4096 FFN, 64 tokens).
    pub fn large(vocab_size: usize) -> Self {
        Self {
            n_layers: 24,
            d_model: 1024,
            n_heads: 16,
            d_ff: 4096,
            max_len: 64,
            vocab_size,
            dropout_p: 0.1,
            n_segments: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 || self.n_segments == 0 {
            return Err(Error::config("encoder dims must be positive"));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.max_len < 2 {
            return Err(Error::config("max_len must be at least 2"));
        }
        if self.vocab_size < 5 {
            return Err(Error::config("vocab_size too small"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout_p)));
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let emb = d * (self.vocab_size + self.max_len + self.n_segments) + 2 * d;
        let layer = 4 * d * d + 2 * d * self.d_ff + self.d_ff + d + 4 * d;
        emb + self.n_layers * layer
    }
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
    pub w_1: ParamId,
    pub b_1: ParamId,
    pub w_2: ParamId,
    pub b_2: ParamId,
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
}

/// Encoder weights (as registry handles) plus their config.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub token: ParamId,
    pub position: ParamId,
    pub segment: ParamId,
    pub ln_gain: ParamId,
    pub ln_bias: ParamId,
    pub layers: Vec<EncoderLayer>,
}

/// Output of one encoder block, with per-head attention weights kept for inspection.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub hidden: Var,
    pub attention: Vec<Var>,
}

fn trunc_normal(shape: &[usize], rng: &mut Rng) -> Tensor {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= 2.0 * INIT_STD {
                break v;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

impl Encoder {
    /// Registers all encoder parameters: truncated-normal weights (std 0.02),
    /// zero biases, unit LayerNorm gains.
    pub fn init(config: EncoderConfig, store: &mut ParamStore, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let token = store.register("embeddings.token", trunc_normal(&[config.vocab_size, d], rng), true)?;
        let position = store.register("embeddings.position", trunc_normal(&[config.max_len, d], rng), true)?;
        let segment = store.register("embeddings.segment", trunc_normal(&[config.n_segments, d], rng), true)?;
        let ln_gain = store.register("embeddings.ln.gain", Tensor::full(&[d], 1.0), false)?;
        let ln_bias = store.register("embeddings.ln.bias", Tensor::zeros(&[d]), false)?;
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let p = |s: &str| format!("encoder.layer{l}.{s}");
            layers.push(EncoderLayer {
                w_q: store.register(p("attn.w_q"), trunc_normal(&[d, d], rng), true)?,
                w_k: store.register(p("attn.w_k"), trunc_normal(&[d, d], rng), true)?,
                w_v: store.register(p("attn.w_v"), trunc_normal(&[d, d], rng), true)?,
                w_o: store.register(p("attn.w_o"), trunc_normal(&[d, d], rng), true)?,
                ln1_gain: store.register(p("attn.ln.gain"), Tensor::full(&[d], 1.0), false)?,
                ln1_bias: store.register(p("attn.ln.bias"), Tensor::zeros(&[d]), false)?,
                w_1: store.register(p("ffn.w_1"), trunc_normal(&[d, config.d_ff], rng), true)?,
                b_1: store.register(p("ffn.b_1"), Tensor::zeros(&[config.d_ff]), false)?,
                w_2: store.register(p("ffn.w_2"), trunc_normal(&[config.d_ff, d], rng), true)?,
                b_2: store.register(p("ffn.b_2"), Tensor::zeros(&[d]), false)?,
                ln2_gain: store.register(p("ffn.ln.gain"), Tensor::full(&[d], 1.0), false)?,
                ln2_bias: store.register(p("ffn.ln.bias"), Tensor::zeros(&[d]), false)?,
            });
        }
        Ok(Self {
            config,
            token,
            position,
            segment,
            ln_gain,
            ln_bias,
            layers,
        })
    }

    /// Every parameter handle, in registration order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.token, self.position, self.segment, self.ln_gain, self.ln_bias];
        for l in &self.layers {
            ids.extend([
                l.w_q, l.w_k, l.w_v, l.w_o, l.ln1_gain, l.ln1_bias, l.w_1, l.b_1, l.w_2, l.b_2, l.ln2_gain, l.ln2_bias,
            ]);
        }
        ids
    }

    /// Freezes the embeddings and the lowest `k` blocks (k = 0 freezes nothing).
    pub fn freeze_bottom(&self, store: &mut ParamStore, k: usize) -> Result<()> {
        if k > self.layers.len() {
            return Err(Error::config(format!(
                "cannot freeze {k} of {} encoder layers",
                self.layers.len()
            )));
        }
        if k == 0 {
            return Ok(());
        }
        let mut ids = vec![self.token, self.position, self.segment, self.ln_gain, self.ln_bias];
        for l in &self.layers[..k] {
            ids.extend([
                l.w_q, l.w_k, l.w_v, l.w_o, l.ln1_gain, l.ln1_bias, l.w_1, l.b_1, l.w_2, l.b_2, l.ln2_gain, l.ln2_bias,
            ]);
        }
        ids.into_iter().for_each(|id| store.set_trainable(id, false));
        Ok(())
    }

    /// `Dropout(LayerNorm(W[id] + P[pos] + E_seg[0]))` for every position.
    pub fn embed<'p>(&self, g: &mut Graph<'p>, store: &'p ParamStore, seq: &TokenizedSequence) -> Result<Var> {
        if seq.ids.len() != self.config.max_len {
            return Err(Error::shape("embed", &[seq.ids.len()], &[self.config.max_len]));
        }
        let token = g.param(store, self.token);
        let position = g.param(store, self.position);
        let segment = g.param(store, self.segment);
        let tok = g.embedding_lookup(token, &seq.ids)?;
        let positions: Vec<usize> = (0..self.config.max_len).collect();
        let pos = g.embedding_lookup(position, &positions)?;
        let seg = g.embedding_lookup(segment, &vec![0; self.config.max_len])?;
        let sum = g.add(tok, pos)?;
        let sum = g.add(sum, seg)?;
        let (gain, bias) = (g.param(store, self.ln_gain), g.param(store, self.ln_bias));
        let normed = g.layer_norm(sum, gain, bias, LAYER_NORM_EPS)?;
        g.dropout(normed, self.config.dropout_p)
    }

    /// One encoder block. `keep[j]` is false for padded key positions.
    pub fn layer<'p>(
        &self,
        g: &mut Graph<'p>,
        store: &'p ParamStore,
        index: usize,
        h: Var,
        keep: &[bool],
    ) -> Result<LayerOutput> {
        let lw = &self.layers[index];
        let cfg = &self.config;
        if keep.len() != g.shape(h)[0] {
            return Err(Error::shape("encoder mask", g.shape(h), &[keep.len()]));
        }
        let p = |g: &mut Graph<'p>, id| g.param(store, id);
        let (w_q, w_k, w_v, w_o) = (p(g, lw.w_q), p(g, lw.w_k), p(g, lw.w_v), p(g, lw.w_o));
        let q = g.matmul(h, w_q)?;
        let k = g.matmul(h, w_k)?;
        let v = g.matmul(h, w_v)?;
        let dk = cfg.d_head();
        let scale = 1.0 / (dk as f64).sqrt();
        let mut heads = Vec::with_capacity(cfg.n_heads);
        let mut attention = Vec::with_capacity(cfg.n_heads);
        for head in 0..cfg.n_heads {
            let qh = g.slice_cols(q, head * dk, dk)?;
            let kh = g.slice_cols(k, head * dk, dk)?;
            let vh = g.slice_cols(v, head * dk, dk)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale);
            let weights = g.softmax_lastdim(scores, Some(keep))?;
            heads.push(g.matmul(weights, vh)?);
            attention.push(weights);
        }
        let concat = g.concat_lastdim(&heads)?;
        let multi = g.matmul(concat, w_o)?;
        let multi = g.dropout(multi, cfg.dropout_p)?;
        let resid = g.add(h, multi)?;
        let (g1, b1) = (p(g, lw.ln1_gain), p(g, lw.ln1_bias));
        let h_attn = g.layer_norm(resid, g1, b1, LAYER_NORM_EPS)?;

        let (w1, bias1, w2, bias2) = (p(g, lw.w_1), p(g, lw.b_1), p(g, lw.w_2), p(g, lw.b_2));
        let ff = g.matmul(h_attn, w1)?;
        let ff = g.add_row(ff, bias1)?;
        let ff = g.gelu(ff);
        let ff = g.matmul(ff, w2)?;
        let ff = g.add_row(ff, bias2)?;
        let ff = g.dropout(ff, cfg.dropout_p)?;
        let resid = g.add(h_attn, ff)?;
        let (g2, b2) = (p(g, lw.ln2_gain), p(g, lw.ln2_bias));
        let hidden = g.layer_norm(resid, g2, b2, LAYER_NORM_EPS)?;
        Ok(LayerOutput { hidden, attention })
    }

    /// Embedding followed by every block; returns the `L × d` token representations.
    pub fn encode_sequence<'p>(
        &self,
        g: &mut Graph<'p>,
        store: &'p ParamStore,
        seq: &TokenizedSequence,
    ) -> Result<Var> {
        let keep = seq.keep_mask();
        let mut h = self.embed(g, store, seq)?;
        for l in 0..self.layers.len() {
            h = self.layer(g, store, l, h, &keep)?.hidden;
        }
        Ok(h)
    }
}
