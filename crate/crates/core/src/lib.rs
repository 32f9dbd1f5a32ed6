//! Hybrid transformer-encoder + stacked-LSTM multilabel text classifier.
//!
//! Everything, including the reverse-mode autodiff, is implemented in this
//! crate on plain `f64` buffers:
//!
//! * [`tensor`]: dense tensors and the gradient tape
//! * [`text`]: cleaning, greedy longest-match subword tokenizer, padding/masks
//! * [`data`]: dataset files, splits, under/oversampling, k-fold partitions
//! * [`encoder`], [`recurrent`], [`model`]: the network and its checkpoints
//! * [`optim`]: AdamW, global-norm clipping, warmup/decay schedule
//! * [`train`]: the minibatch training loop and cross-validation harness
//! * [`metrics`]: multilabel evaluation suite
//! * [`explain`]: per-label local surrogate explanations
//! * [`synthetic`]: a seeded toy corpus with planted trigger words

pub mod data;
pub mod encoder;
pub mod error;
pub mod exec;
pub mod explain;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod recurrent;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
