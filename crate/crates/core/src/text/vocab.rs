use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
const SPECIALS: [&str; 4] = [PAD, UNK, CLS, SEP];
const DEFAULT_MARKER: &str = "##";

/// Token ↔ id table. Ids are dense, `[PAD]` is always 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    marker: String,
    unk: usize,
    cls: usize,
    sep: usize,
}

impl Vocabulary {
    /// Builds from an ordered token list (position = id).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        let find = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::config(format!("vocabulary lacks special token {s}")))
        };
        if find(PAD)? != 0 {
            return Err(Error::config("[PAD] must have id 0"));
        }
        let (unk, cls, sep) = (find(UNK)?, find(CLS)?, find(SEP)?);
        Ok(Self {
            tokens,
            index,
            marker: DEFAULT_MARKER.to_string(),
            unk,
            cls,
            sep,
        })
    }

    /// Reads a vocabulary file: one token per line, line number = id.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_tokens(text.lines().map(String::from).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn with_marker(mut self, marker: impl Into<String>) -> Self {
        self.marker = marker.into();
        self
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn pad_id(&self) -> usize {
        0
    }

    pub fn unk_id(&self) -> usize {
        self.unk
    }

    pub fn cls_id(&self) -> usize {
        self.cls
    }

    pub fn sep_id(&self) -> usize {
        self.sep
    }
}

/// Frequency-ranked vocabulary over cleaned text.
///
/// Layout: the four specials, then every character piece seen in the corpus
/// (word-initial `c` and continuation `##c`), then whole words with count at
/// least `min_freq`. Within each group entries are ordered by descending count,
/// ties broken lexicographically. The list is cut at `max_size`.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], max_size: usize, min_freq: usize) -> Result<Vocabulary> {
    if max_size <= SPECIALS.len() {
        return Err(Error::config(format!(
            "max vocabulary size {max_size} leaves no room beyond the {} special tokens",
            SPECIALS.len()
        )));
    }
    if corpus.is_empty() {
        return Err(Error::config("cannot build a vocabulary from an empty corpus"));
    }
    let mut words: BTreeMap<&str, usize> = BTreeMap::new();
    let mut pieces: BTreeMap<String, usize> = BTreeMap::new();
    for line in corpus {
        for w in line.as_ref().split_whitespace() {
            *words.entry(w).or_default() += 1;
            for (i, c) in w.chars().enumerate() {
                let piece = if i == 0 {
                    c.to_string()
                } else {
                    format!("{DEFAULT_MARKER}{c}")
                };
                *pieces.entry(piece).or_default() += 1;
            }
        }
    }
    let ranked = |m: Vec<(String, usize)>| {
        let mut v = m;
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    };
    let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    let mut seen: std::collections::HashSet<String> = tokens.iter().cloned().collect();
    let piece_list = ranked(pieces.into_iter().collect());
    let word_list = ranked(
        words
            .into_iter()
            .filter(|(_, n)| *n >= min_freq)
            .map(|(w, n)| (w.to_string(), n))
            .collect(),
    );
    for (t, _) in piece_list.into_iter().chain(word_list) {
        if tokens.len() >= max_size {
            break;
        }
        if seen.insert(t.clone()) {
            tokens.push(t);
        }
    }
    Vocabulary::from_tokens(tokens)
}

/// `[CLS]` + greedy longest-match subword pieces of every word + `[SEP]`.
///
/// Pieces after the first in a word carry the continuation marker. A run of
/// characters that no vocabulary piece covers becomes a single `[UNK]`.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<String> {
    let mut out = vec![CLS.to_string()];
    for word in text.split_whitespace() {
        split_word(word, vocab, &mut out);
    }
    out.push(SEP.to_string());
    out
}

fn split_word(word: &str, vocab: &Vocabulary, out: &mut Vec<String>) {
    if vocab.contains(word) {
        out.push(word.to_string());
        return;
    }
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let mut start = 0;
    let mut in_unk = false;
    while start < n_chars {
        let mut matched = None;
        for end in (start + 1..=n_chars).rev() {
            let sub = &word[bounds[start]..bounds[end]];
            let piece = if start == 0 {
                sub.to_string()
            } else {
                format!("{}{sub}", vocab.marker())
            };
            if vocab.contains(&piece) {
                matched = Some((piece, end));
                break;
            }
        }
        match matched {
            Some((piece, end)) => {
                out.push(piece);
                in_unk = false;
                start = end;
            }
            None => {
                if !in_unk {
                    out.push(UNK.to_string());
                    in_unk = true;
                }
                start += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(extra: &[&str]) -> Vocabulary {
        let mut t: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        t.extend(extra.iter().map(|s| s.to_string()));
        Vocabulary::from_tokens(t).unwrap()
    }

    #[test]
    fn small_corpus_vocab() {
        let v = build_vocab(&["a a b"], 10, 1).unwrap();
        assert!(v.contains("a") && v.contains("b"));
        assert_eq!(v.len(), 6);
        assert_eq!(v.id(PAD), Some(0));
    }

    #[test]
    fn min_freq_falls_back_to_characters() {
        let v = build_vocab(&["ab ab cd"], 20, 2).unwrap();
        assert!(v.contains("ab"));
        assert!(!v.contains("cd"));
        assert_eq!(tokenize("cd", &v), vec![CLS, "c", "##d", SEP]);
        // single-character word survives only as a character piece
        let v = build_vocab(&["a a b"], 10, 2).unwrap();
        assert_eq!(tokenize("b", &v), vec![CLS, "b", SEP]);
    }

    #[test]
    fn build_is_deterministic() {
        let corpus = ["zeta alpha beta", "beta alpha", "gamma"];
        let a = build_vocab(&corpus, 30, 1).unwrap().to_file_string();
        let b = build_vocab(&corpus, 30, 1).unwrap().to_file_string();
        assert_eq!(a, b);
    }

    #[test]
    fn too_small_max_size() {
        assert!(matches!(build_vocab(&["a"], 4, 1), Err(Error::Config(_))));
    }

    #[test]
    fn tokenize_cases() {
        let v = vocab(&["play", "##ing", "p", "##l"]);
        assert_eq!(tokenize("", &v), vec![CLS, SEP]);
        assert_eq!(tokenize("play", &v), vec![CLS, "play", SEP]);
        assert_eq!(tokenize("playing", &v), vec![CLS, "play", "##ing", SEP]);
        assert_eq!(tokenize("zzz", &v), vec![CLS, UNK, SEP]);
        assert_eq!(tokenize("plxxing", &v), vec![CLS, "p", "##l", UNK, "##ing", SEP]);
    }

    #[test]
    fn file_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = build_vocab(&["আমি তুমি আমি"], 50, 1).unwrap();
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), v);

        let bad = Vocabulary::from_tokens(vec![UNK.into(), PAD.into(), CLS.into(), SEP.into()]);
        assert!(bad.is_err());
    }
}
