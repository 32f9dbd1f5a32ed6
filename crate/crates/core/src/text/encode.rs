use super::vocab::{Vocabulary, SEP};

/// Fixed-length id sequence with its attention mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSequence {
    pub ids: Vec<usize>,
    /// 1 for real tokens, 0 for padding; always a run of 1s then 0s.
    pub mask: Vec<u8>,
    /// Token count before padding or truncation.
    pub original_token_count: usize,
}

impl TokenizedSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of unmasked positions.
    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn keep_mask(&self) -> Vec<bool> {
        self.mask.iter().map(|&m| m == 1).collect()
    }
}

/// Maps tokens to ids and pads or truncates to `max_len`.
///
/// Truncation keeps the head (`max_len − 1` tokens) and forces `[SEP]` into
/// the final slot.
pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> TokenizedSequence {
    assert!(max_len >= 2, "max_len must leave room for [CLS] and [SEP]");
    let to_id = |t: &String| vocab.id(t).unwrap_or(vocab.unk_id());
    let mut ids: Vec<usize> = if tokens.len() > max_len {
        tokens[..max_len - 1]
            .iter()
            .map(to_id)
            .chain(std::iter::once(vocab.sep_id()))
            .collect()
    } else {
        tokens.iter().map(to_id).collect()
    };
    let valid = ids.len();
    ids.resize(max_len, vocab.pad_id());
    let mask = (0..max_len).map(|j| u8::from(j < valid)).collect();
    TokenizedSequence {
        ids,
        mask,
        original_token_count: tokens.len(),
    }
}

/// Tokens at unmasked positions.
pub fn decode(seq: &TokenizedSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.ids
        .iter()
        .zip(&seq.mask)
        .filter(|(_, &m)| m == 1)
        .map(|(&id, _)| vocab.token(id).unwrap_or(SEP).to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocab, tokenize, CLS};

    fn toks(n: usize) -> Vec<String> {
        let mut t = vec![CLS.to_string()];
        t.extend((0..n - 2).map(|_| "a".to_string()));
        t.push(SEP.to_string());
        t
    }

    #[test]
    fn padding_to_64() {
        let v = build_vocab(&["a"], 10, 1).unwrap();
        let s = encode(&toks(3), &v, 64);
        assert_eq!(s.ids.len(), 64);
        assert_eq!(&s.mask[..3], &[1, 1, 1]);
        assert!(s.mask[3..].iter().all(|&m| m == 0));
        assert_eq!(s.mask.len(), 64);
    }

    #[test]
    fn truncation_forces_sep() {
        let v = build_vocab(&["a"], 10, 1).unwrap();
        let s = encode(&toks(70), &v, 64);
        assert_eq!(s.ids.len(), 64);
        assert_eq!(*s.ids.last().unwrap(), v.sep_id());
        assert!(s.mask.iter().all(|&m| m == 1));
        assert_eq!(s.original_token_count, 70);
        assert_eq!(s.ids.iter().filter(|&&i| i == v.sep_id()).count(), 1);
    }

    #[test]
    fn exact_length_unchanged() {
        let v = build_vocab(&["a"], 10, 1).unwrap();
        let t = toks(64);
        let s = encode(&t, &v, 64);
        assert!(s.mask.iter().all(|&m| m == 1));
        assert_eq!(decode(&s, &v), t);
    }

    #[test]
    fn decode_restores_tokens() {
        let v = build_vocab(&["hello world"], 40, 1).unwrap();
        let t = tokenize("hello there world", &v);
        let s = encode(&t, &v, 16);
        assert_eq!(decode(&s, &v), t);
    }
}
