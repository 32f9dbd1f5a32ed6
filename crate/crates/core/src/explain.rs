//! Per-label local surrogate explanations: perturb a comment by dropping
//! whole words, score each variant, and fit a kernel-weighted linear model of
//! one label's probability on the word-presence bits.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::data::LABEL_NAMES;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{predict, HybridModel, Mode};
use crate::rng::SeedStream;
use crate::text::{clean, CleaningConfig, TextPipeline};

pub const DEFAULT_SAMPLES: usize = 200;
pub const MIN_SAMPLES: usize = 10;
/// Enumerate every mask when there are at most this many.
pub const EXHAUSTIVE_LIMIT: usize = 256;
pub const RIDGE: f64 = 1e-6;

/// Anything that maps texts to per-label probabilities.
pub trait TextScorer {
    fn probabilities(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Scores raw text with a trained model.
pub struct ModelScorer<'a> {
    pub model: &'a HybridModel,
    pub pipeline: &'a TextPipeline,
    pub exec: Execution,
}

impl TextScorer for ModelScorer<'_> {
    fn probabilities(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let seqs: Vec<_> = texts.iter().map(|t| self.pipeline.encode_text(t)).collect();
        let probs = predict(&self.model.forward(&seqs, Mode::Eval, self.exec)?, 0.5).probabilities;
        Ok((0..probs.rows()).map(|i| probs.row(i).to_vec()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbSample {
    /// `true` keeps the word at that position.
    pub mask: Vec<bool>,
    pub text: String,
}

fn render(words: &[String], mask: &[bool]) -> String {
    let kept: Vec<&str> = words
        .iter()
        .zip(mask)
        .filter(|(_, &k)| k)
        .map(|(w, _)| w.as_str())
        .collect();
    kept.join(" ")
}

/// Sample 0 keeps every word. When `2^m ≤ 256` all masks are enumerated
/// (ignoring `n`); otherwise each further sample drops each word with probability 0.5.
pub fn perturb_samples(words: &[String], n: usize, seed: u64) -> Result<Vec<PerturbSample>> {
    let m = words.len();
    if m == 0 {
        return Err(Error::Data("nothing to perturb: no words".into()));
    }
    if n < MIN_SAMPLES {
        return Err(Error::config(format!(
            "need at least {MIN_SAMPLES} perturbations, got {n}"
        )));
    }
    let masks: Vec<Vec<bool>> = if m < usize::BITS as usize && (1usize << m) <= EXHAUSTIVE_LIMIT {
        let full = (1usize << m) - 1;
        (0..=full)
            .rev()
            .map(|bits| (0..m).map(|j| bits >> j & 1 == 1).collect())
            .collect()
    } else {
        let mut rng = SeedStream::new(seed).derive("lime").rng();
        std::iter::once(vec![true; m])
            .chain((1..n).map(|_| (0..m).map(|_| rng.random_bool(0.5)).collect()))
            .collect()
    };
    Ok(masks
        .into_iter()
        .map(|mask| PerturbSample {
            text: render(words, &mask),
            mask,
        })
        .collect())
}

pub fn default_kernel_width(n_words: usize) -> f64 {
    0.75 * (n_words as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub intercept: f64,
    pub weights: Vec<f64>,
    /// Kernel-weighted coefficient of determination.
    pub r2: f64,
    /// The unregularized normal equations were singular.
    pub degenerate: bool,
}

/// Weighted ridge regression of `targets` on the mask bits. Sample weights are
/// `exp(−d²/σ²)` with `d` the number of dropped words, normalized to sum to 1.
/// The intercept is not penalized.
pub fn fit_surrogate(masks: &[Vec<bool>], targets: &[f64], sigma: f64) -> Result<Surrogate> {
    if masks.len() != targets.len() || masks.is_empty() {
        return Err(Error::shape("fit_surrogate", &[masks.len()], &[targets.len()]));
    }
    let m = masks[0].len();
    if masks.iter().any(|r| r.len() != m) {
        return Err(Error::Data("masks differ in length".into()));
    }
    let distinct: std::collections::HashSet<&Vec<bool>> = masks.iter().collect();
    if distinct.len() < 2 {
        return Err(Error::Data("surrogate fit needs at least two distinct masks".into()));
    }
    let raw: Vec<f64> = masks
        .iter()
        .map(|r| {
            let d = r.iter().filter(|&&b| !b).count() as f64;
            (-d * d / (sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();

    let p = m + 1;
    let x = DMatrix::from_fn(masks.len(), p, |i, j| {
        if j == 0 {
            1.0
        } else {
            f64::from(u8::from(masks[i][j - 1]))
        }
    });
    let xtw = DMatrix::from_fn(p, masks.len(), |j, i| x[(i, j)] * w[i]);
    let gram = &xtw * &x;
    let degenerate = gram.clone().svd(false, false).rank(1e-12) < p;
    let mut a = gram;
    for j in 1..p {
        a[(j, j)] += RIDGE;
    }
    let rhs = &xtw * DVector::from_column_slice(targets);
    let beta = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Data("surrogate normal equations are singular".into()))?;

    let fitted = &x * &beta;
    let y_mean: f64 = w.iter().zip(targets).map(|(wi, y)| wi * y).sum();
    let ss_res: f64 = (0..targets.len())
        .map(|i| w[i] * (targets[i] - fitted[i]).powi(2))
        .sum();
    let ss_tot: f64 = (0..targets.len()).map(|i| w[i] * (targets[i] - y_mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-24 {
        1.0
    } else {
        0.0
    };
    Ok(Surrogate {
        intercept: beta[0],
        weights: beta.iter().skip(1).copied().collect(),
        r2,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub label: usize,
    pub base_probability: f64,
    /// `(word, weight)` by descending |weight|; ties keep word order.
    pub weighted_tokens: Vec<(String, f64)>,
    pub n_perturbations: usize,
    pub r2: f64,
    pub intercept: f64,
    pub degenerate: bool,
}

impl Explanation {
    /// The word with the largest positive weight, if any is positive.
    pub fn top_positive(&self) -> Option<&str> {
        self.weighted_tokens
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t.as_str())
    }
}

/// Explains each requested label from one shared perturbation set.
pub fn explain_comment(
    text: &str,
    scorer: &dyn TextScorer,
    cleaning: &CleaningConfig,
    labels: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<Explanation>> {
    if labels.is_empty() {
        return Ok(Vec::new());
    }
    let cleaned = clean(text, cleaning);
    let words: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();
    if words.is_empty() {
        return Err(Error::Data(
            "comment is empty after cleaning; pass text containing words in the configured scripts".into(),
        ));
    }
    let samples = perturb_samples(&words, n, seed)?;
    let texts: Vec<String> = samples.iter().map(|s| s.text.clone()).collect();
    let probs = scorer.probabilities(&texts)?;
    let masks: Vec<Vec<bool>> = samples.into_iter().map(|s| s.mask).collect();
    let sigma = default_kernel_width(words.len());
    labels
        .iter()
        .map(|&label| {
            if probs[0].len() <= label {
                return Err(Error::Index {
                    id: label,
                    size: probs[0].len(),
                });
            }
            let y: Vec<f64> = probs.iter().map(|p| p[label]).collect();
            let fit = fit_surrogate(&masks, &y, sigma)?;
            let mut weighted: Vec<(String, f64)> = words.iter().cloned().zip(fit.weights.iter().copied()).collect();
            weighted.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            Ok(Explanation {
                label,
                base_probability: y[0],
                weighted_tokens: weighted,
                n_perturbations: masks.len(),
                r2: fit.r2,
                intercept: fit.intercept,
                degenerate: fit.degenerate,
            })
        })
        .collect()
}

fn label_name(j: usize) -> &'static str {
    LABEL_NAMES.get(j).copied().unwrap_or("?")
}

/// Human-readable block per label.
pub fn explanations_text(explanations: &[Explanation]) -> String {
    let mut s = String::new();
    for e in explanations {
        let _ = writeln!(
            s,
            "label={} probability={:.6} samples={} r2={:.4}{}",
            label_name(e.label),
            e.base_probability,
            e.n_perturbations,
            e.r2,
            if e.degenerate { " degenerate" } else { "" }
        );
        for (t, w) in &e.weighted_tokens {
            let _ = writeln!(s, "  {w:+.6}  {t}");
        }
        s.push('\n');
    }
    s
}

/// `label<TAB>rank<TAB>token<TAB>weight` rows for highlight rendering.
pub fn explanations_tsv(explanations: &[Explanation]) -> String {
    let mut s = String::from("label\trank\ttoken\tweight\n");
    for e in explanations {
        for (rank, (t, w)) in e.weighted_tokens.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", label_name(e.label), rank + 1, t, w);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn sample_zero_is_original_and_enumeration_is_complete() {
        let w = words("a b c");
        let s = perturb_samples(&w, 10, 0).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0].text, "a b c");
        assert_eq!(s.last().unwrap().text, "");
        let w = words("one");
        assert_eq!(perturb_samples(&w, 50, 0).unwrap().len(), 2);
    }

    #[test]
    fn random_sampling_is_seeded() {
        let w = words("a b c d e f g h i j");
        let a = perturb_samples(&w, 40, 7).unwrap();
        assert_eq!(a.len(), 40);
        assert!(a[0].mask.iter().all(|&b| b));
        assert_eq!(a, perturb_samples(&w, 40, 7).unwrap());
        assert_ne!(a, perturb_samples(&w, 40, 8).unwrap());
        assert!(perturb_samples(&w, 5, 7).is_err());
    }

    #[test]
    fn linear_target_recovers_equal_weights() {
        let w = words("a b c d");
        let s = perturb_samples(&w, 10, 0).unwrap();
        let masks: Vec<_> = s.iter().map(|x| x.mask.clone()).collect();
        let y: Vec<f64> = masks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count() as f64 / 4.0)
            .collect();
        let fit = fit_surrogate(&masks, &y, default_kernel_width(4)).unwrap();
        for c in &fit.weights {
            assert!((c - 0.25).abs() < 1e-4, "{c}");
        }
        assert!(fit.r2 > 0.999999);
        assert!(!fit.degenerate);
    }

    #[test]
    fn duplicated_samples_leave_fit_unchanged() {
        let masks = vec![
            vec![true, true],
            vec![true, false],
            vec![false, true],
            vec![false, false],
        ];
        let y = vec![0.9, 0.7, 0.3, 0.2];
        let a = fit_surrogate(&masks, &y, 1.0).unwrap();
        let masks2: Vec<_> = masks.iter().chain(&masks).cloned().collect();
        let y2: Vec<_> = y.iter().chain(&y).copied().collect();
        let b = fit_surrogate(&masks2, &y2, 1.0).unwrap();
        for (p, q) in a.weights.iter().zip(&b.weights) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_masks_rejected() {
        assert!(fit_surrogate(&[vec![true], vec![true]], &[0.1, 0.2], 1.0).is_err());
    }

    struct KeywordScorer;
    impl TextScorer for KeywordScorer {
        fn probabilities(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
            Ok(texts
                .iter()
                .map(|t| {
                    let has = |w: &str| t.split(' ').any(|x| x == w);
                    vec![
                        if has("kill") { 0.9 } else { 0.1 },
                        if has("buy") { 0.8 } else { 0.3 },
                        0.5,
                        0.5,
                        0.5,
                    ]
                })
                .collect())
        }
    }

    #[test]
    fn keyword_scorer_is_explained() {
        let cfg = CleaningConfig::latin();
        let out = explain_comment("i will kill you buy now", &KeywordScorer, &cfg, &[0, 1, 2], 200, 1).unwrap();
        assert_eq!(out[0].top_positive(), Some("kill"));
        assert_eq!(out[1].top_positive(), Some("buy"));
        assert!(out[2].weighted_tokens.iter().all(|(_, w)| w.abs() < 1e-6));
        let only = explain_comment("i will kill you buy now", &KeywordScorer, &cfg, &[1], 200, 1).unwrap();
        assert_eq!(only[0], out[1]);
        assert!(explain_comment("i will", &KeywordScorer, &cfg, &[], 200, 1)
            .unwrap()
            .is_empty());
        assert!(explain_comment("123 !!!", &KeywordScorer, &cfg, &[0], 200, 1).is_err());
        assert!(explanations_tsv(&out).contains("bully\t1\tkill\t"));
    }
}
