//! Comment cleaning, subword tokenization and fixed-length encoding.

mod clean;
mod encode;
mod vocab;

pub use clean::{clean, CleaningConfig, ScriptRange, WordRefiner};
pub use encode::{decode, encode, TokenizedSequence};
pub use vocab::{build_vocab, tokenize, Vocabulary, CLS, PAD, SEP, UNK};

/// Cleaning, tokenization and padding bundled for one model.
#[derive(Debug, Clone)]
pub struct TextPipeline {
    pub cleaning: CleaningConfig,
    pub vocab: Vocabulary,
    pub max_len: usize,
}

impl TextPipeline {
    pub fn new(cleaning: CleaningConfig, vocab: Vocabulary, max_len: usize) -> Self {
        Self {
            cleaning,
            vocab,
            max_len,
        }
    }

    pub fn encode_text(&self, raw: &str) -> TokenizedSequence {
        let cleaned = clean(raw, &self.cleaning);
        self.encode_cleaned(&cleaned)
    }

    /// Encodes text that has already been cleaned.
    pub fn encode_cleaned(&self, cleaned: &str) -> TokenizedSequence {
        encode(&tokenize(cleaned, &self.vocab), &self.vocab, self.max_len)
    }
}
