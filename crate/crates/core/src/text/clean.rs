use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Inclusive codepoint interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScriptRange {
    pub start: char,
    pub end: char,
}

impl ScriptRange {
    pub const fn new(start: char, end: char) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, c: char) -> bool {
        self.start <= c && c <= self.end
    }
}

/// Bengali block, U+0980..U+09FF.
pub const BENGALI: ScriptRange = ScriptRange::new('\u{0980}', '\u{09FF}');
/// Lowercase ASCII letters.
pub const LATIN_LOWER: ScriptRange = ScriptRange::new('a', 'z');

/// Hook for a per-word refinement step such as a stemmer or lemmatizer.
pub trait WordRefiner: Send + Sync {
    fn refine(&self, word: &str) -> String;
}

/// Settings for the four cleaning stages: normalization, noise stripping,
/// stopword removal and final refinement.
#[derive(Clone)]
pub struct CleaningConfig {
    ranges: Vec<ScriptRange>,
    stopwords: HashSet<String>,
    abbreviations: HashMap<String, String>,
    max_char_repeat: usize,
    refiner: Option<Arc<dyn WordRefiner>>,
}

impl fmt::Debug for CleaningConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CleaningConfig")
            .field("ranges", &self.ranges)
            .field("stopwords", &self.stopwords.len())
            .field("abbreviations", &self.abbreviations.len())
            .field("max_char_repeat", &self.max_char_repeat)
            .field("refiner", &self.refiner.is_some())
            .finish()
    }
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self::new(vec![BENGALI, LATIN_LOWER]).expect("static ranges are valid")
    }
}

impl CleaningConfig {
    /// Ranges are sorted and must not overlap.
    pub fn new(mut ranges: Vec<ScriptRange>) -> Result<Self> {
        ranges.sort();
        for r in &ranges {
            if r.start > r.end {
                return Err(Error::config(format!("empty script range {r:?}")));
            }
        }
        if ranges.windows(2).any(|w| w[1].start <= w[0].end) {
            return Err(Error::config("script ranges overlap"));
        }
        Ok(Self {
            ranges,
            stopwords: HashSet::new(),
            abbreviations: HashMap::new(),
            max_char_repeat: 2,
            refiner: None,
        })
    }

    /// Bengali script only.
    pub fn bangla() -> Self {
        Self::new(vec![BENGALI]).expect("static range")
    }

    /// Lowercase Latin letters only.
    pub fn latin() -> Self {
        Self::new(vec![LATIN_LOWER]).expect("static range")
    }

    pub fn ranges(&self) -> &[ScriptRange] {
        &self.ranges
    }

    pub fn max_char_repeat(&self) -> usize {
        self.max_char_repeat
    }

    pub fn with_max_char_repeat(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("max_char_repeat must be positive"));
        }
        self.max_char_repeat = n;
        Ok(self)
    }

    pub fn with_stopwords<I: IntoIterator<Item = S>, S: Into<String>>(mut self, words: I) -> Self {
        self.stopwords = words.into_iter().map(|w| w.into().to_lowercase()).collect();
        self
    }

    /// Abbreviation expansions. An expansion may not itself contain an
    /// abbreviation once cleaned; chained rules would make cleaning order
    /// dependent.
    pub fn with_abbreviations<I, K, V>(mut self, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let map: HashMap<String, String> = pairs
            .into_iter()
            .map(|(k, v)| (k.into().to_lowercase(), v.into().to_lowercase()))
            .collect();
        self.abbreviations = HashMap::new();
        for (k, v) in &map {
            let cleaned = pass(v, &self);
            if let Some(w) = cleaned.split(' ').find(|w| map.contains_key(*w)) {
                return Err(Error::config(format!(
                    "abbreviation {k} expands to text containing abbreviation {w}"
                )));
            }
        }
        self.abbreviations = map;
        Ok(self)
    }

    pub fn with_refiner(mut self, refiner: Arc<dyn WordRefiner>) -> Self {
        self.refiner = Some(refiner);
        self
    }

    /// Reads a stopword file: one word per line, blank lines and `#` comments ignored.
    pub fn load_stopwords(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let words: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Ok(self.with_stopwords(words))
    }

    /// Reads an abbreviation file: `short<TAB>expansion` (or `short=expansion`) per line.
    pub fn load_abbreviations(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .or_else(|| line.split_once('='))
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                    msg: "expected `short<TAB>expansion`".into(),
                })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        self.with_abbreviations(pairs)
    }

    fn allowed(&self, c: char) -> bool {
        !c.is_numeric() && self.ranges.iter().any(|r| r.contains(c))
    }
}

/// Full cleaning pipeline. The result may be empty.
///
/// The stage composition is applied until it reaches a fixed point (at most a
/// few rounds), so `clean(clean(t)) == clean(t)` even when noise stripping
/// exposes a new abbreviation.
pub fn clean(text: &str, cfg: &CleaningConfig) -> String {
    let mut cur = pass(text, cfg);
    for _ in 0..3 {
        let next = pass(&cur, cfg);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn pass(text: &str, cfg: &CleaningConfig) -> String {
    refine(&remove_stopwords(&strip_noise(&normalize(text, cfg), cfg), cfg), cfg)
}

/// Lowercase, cap character runs, expand abbreviations.
fn normalize(text: &str, cfg: &CleaningConfig) -> String {
    let lower = text.to_lowercase();
    let mut capped = String::with_capacity(lower.len());
    let mut prev = None;
    let mut run = 0;
    for c in lower.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= cfg.max_char_repeat {
            capped.push(c);
        }
    }
    capped
        .split_whitespace()
        .map(|w| cfg.abbreviations.get(w).map(String::as_str).unwrap_or(w))
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_url(word: &str) -> bool {
    word.starts_with("http://") || word.starts_with("https://") || word.starts_with("www.")
}

/// Drop URLs, then replace every character outside the allowed scripts
/// (digits and symbols included) with a space.
fn strip_noise(text: &str, cfg: &CleaningConfig) -> String {
    text.split_whitespace()
        .filter(|w| !is_url(w))
        .map(|w| {
            w.chars()
                .map(|c| if cfg.allowed(c) { c } else { ' ' })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn remove_stopwords(text: &str, cfg: &CleaningConfig) -> String {
    text.split_whitespace()
        .filter(|w| !cfg.stopwords.contains(*w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Optional per-word refinement, then trim and collapse whitespace.
fn refine(text: &str, cfg: &CleaningConfig) -> String {
    match &cfg.refiner {
        Some(r) => text
            .split_whitespace()
            .map(|w| r.refine(w))
            .collect::<Vec<_>>()
            .join(" ")
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" "),
        None => text.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}
