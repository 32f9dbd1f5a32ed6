//! Multilabel evaluation: Hamming loss, accuracy, P/R/F1, pooled MCC and
//! kappa, ROC/AUC, and cross-validation aggregation.
//!
//! Label matrices are row-major `N × K` slices of rows. Every function checks
//! that its inputs agree in shape.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::LABEL_NAMES;
use crate::error::{Error, Result};

fn dims<A, B>(a: &[Vec<A>], b: &[Vec<B>]) -> Result<(usize, usize)> {
    let k = a.first().map_or(0, Vec::len);
    let bad = a.len() != b.len() || a.is_empty() || k == 0;
    if bad || a.iter().zip(b).any(|(x, y)| x.len() != k || y.len() != k) {
        let shape = |n: usize, r: Option<usize>| vec![n, r.unwrap_or(0)];
        return Err(Error::shape(
            "metrics",
            &shape(a.len(), a.first().map(Vec::len)),
            &shape(b.len(), b.first().map(Vec::len)),
        ));
    }
    Ok((a.len(), k))
}

pub fn label_name(j: usize, k: usize) -> String {
    if k == LABEL_NAMES.len() {
        LABEL_NAMES[j].to_string()
    } else {
        format!("label{j}")
    }
}

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, truth: bool, pred: bool) {
        match (truth, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts for a single label column.
    pub fn for_label(t: &[Vec<bool>], p: &[Vec<bool>], j: usize) -> Self {
        let mut c = Self::default();
        for (tr, pr) in t.iter().zip(p) {
            c.add(tr[j], pr[j]);
        }
        c
    }

    /// Counts over all `N·K` cells.
    pub fn pooled(t: &[Vec<bool>], p: &[Vec<bool>]) -> Self {
        let mut c = Self::default();
        for (tr, pr) in t.iter().zip(p) {
            for (&a, &b) in tr.iter().zip(pr) {
                c.add(a, b);
            }
        }
        c
    }

    /// `(value, degenerate)`; degenerate when a marginal has zero variance.
    pub fn mcc(&self) -> (f64, bool) {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if den == 0.0 {
            return (0.0, true);
        }
        ((tp * tn - fp * fn_) / den.sqrt(), false)
    }

    pub fn kappa(&self) -> (f64, bool) {
        let n = self.total() as f64;
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let po = (tp + tn) / n;
        let pe = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
        if pe == 1.0 {
            return (0.0, true);
        }
        ((po - pe) / (1.0 - pe), false)
    }

    /// `(precision, recall, f1, zero_division)`.
    pub fn prf1(&self) -> (f64, f64, f64, bool) {
        let mut flagged = false;
        let mut ratio = |num: u64, den: u64| {
            if den == 0 {
                flagged = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let p = ratio(self.tp, self.tp + self.fp);
        let r = ratio(self.tp, self.tp + self.fn_);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f, flagged)
    }
}

/// Fraction of label cells where prediction and truth differ.
pub fn hamming_loss(t: &[Vec<bool>], p: &[Vec<bool>]) -> Result<f64> {
    let (n, k) = dims(t, p)?;
    let wrong: usize = t
        .iter()
        .zip(p)
        .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
        .sum();
    Ok(wrong as f64 / (n * k) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyMode {
    /// Whole label vector must match.
    Subset,
    /// Fraction of correct cells, `1 − hamming_loss`.
    Labelwise,
}

pub fn multilabel_accuracy(t: &[Vec<bool>], p: &[Vec<bool>], mode: AccuracyMode) -> Result<f64> {
    let (n, _) = dims(t, p)?;
    Ok(match mode {
        AccuracyMode::Subset => t.iter().zip(p).filter(|(a, b)| a == b).count() as f64 / n as f64,
        AccuracyMode::Labelwise => 1.0 - hamming_loss(t, p)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    Micro,
    Macro,
}

impl Averaging {
    pub fn as_str(self) -> &'static str {
        match self {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Labels (or, for micro, the pool as label 0) whose P or R had a zero denominator.
    pub zero_division: Vec<usize>,
}

/// Micro pools counts over all cells. Macro averages the per-label precision,
/// recall and F1 (so macro F1 is the mean of per-label F1, not the harmonic
/// mean of macro P and R).
pub fn prf1(t: &[Vec<bool>], p: &[Vec<bool>], averaging: Averaging) -> Result<Prf1> {
    let (_, k) = dims(t, p)?;
    match averaging {
        Averaging::Micro => {
            let (precision, recall, f1, z) = Confusion::pooled(t, p).prf1();
            Ok(Prf1 {
                precision,
                recall,
                f1,
                zero_division: if z { vec![0] } else { vec![] },
            })
        }
        Averaging::Macro => {
            let mut acc = [0.0; 3];
            let mut zero_division = Vec::new();
            for j in 0..k {
                let (pr, re, f, z) = Confusion::for_label(t, p, j).prf1();
                acc[0] += pr;
                acc[1] += re;
                acc[2] += f;
                if z {
                    zero_division.push(j);
                }
            }
            let k = k as f64;
            Ok(Prf1 {
                precision: acc[0] / k,
                recall: acc[1] / k,
                f1: acc[2] / k,
                zero_division,
            })
        }
    }
}

/// Matthews correlation over the pooled confusion table. Zero-variance marginals give 0.
pub fn mcc(t: &[Vec<bool>], p: &[Vec<bool>]) -> Result<f64> {
    dims(t, p)?;
    Ok(Confusion::pooled(t, p).mcc().0)
}

/// Cohen's kappa over the pooled confusion table. Chance agreement of 1 gives 0.
pub fn kappa(t: &[Vec<bool>], p: &[Vec<bool>]) -> Result<f64> {
    dims(t, p)?;
    Ok(Confusion::pooled(t, p).kappa().0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC for one label. `None` when only one class is present.
pub fn roc_curve(truth: &[bool], scores: &[f64]) -> Option<RocCurve> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area2 = 0.0; // twice the area, in count units
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as f64;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Some(RocCurve {
        points,
        auc: area2 / (2 * pos * neg) as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    pub curves: Vec<Option<RocCurve>>,
    /// Mean over labels that have both classes; `None` if no label does.
    pub macro_auc: Option<f64>,
    pub excluded: Vec<usize>,
}

pub fn roc_auc(t: &[Vec<bool>], scores: &[Vec<f64>]) -> Result<RocReport> {
    let (_, k) = dims(t, scores)?;
    if let Some(s) = scores.iter().flatten().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Data(format!("score {s} outside [0, 1]")));
    }
    let mut curves = Vec::with_capacity(k);
    let mut excluded = Vec::new();
    for j in 0..k {
        let truth: Vec<bool> = t.iter().map(|r| r[j]).collect();
        let col: Vec<f64> = scores.iter().map(|r| r[j]).collect();
        let c = roc_curve(&truth, &col);
        if c.is_none() {
            excluded.push(j);
        }
        curves.push(c);
    }
    let aucs: Vec<f64> = curves.iter().flatten().map(|c| c.auc).collect();
    let macro_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(RocReport {
        curves,
        macro_auc,
        excluded,
    })
}

/// The eight reported quantities. `auc` is NaN when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSet {
    pub accuracy: f64,
    pub hamming_loss: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub kappa: f64,
    pub auc: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 8] = [
        "accuracy",
        "hamming_loss",
        "precision",
        "recall",
        "f1",
        "mcc",
        "kappa",
        "auc",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.accuracy,
            self.hamming_loss,
            self.precision,
            self.recall,
            self.f1,
            self.mcc,
            self.kappa,
            self.auc,
        ]
    }

    pub fn from_values(v: [f64; 8]) -> Self {
        Self {
            accuracy: v[0],
            hamming_loss: v[1],
            precision: v[2],
            recall: v[3],
            f1: v[4],
            mcc: v[5],
            kappa: v[6],
            auc: v[7],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Labelwise accuracy, macro P/R/F1, pooled MCC and kappa, macro AUC.
    pub headline: MetricSet,
    pub subset_accuracy: f64,
    pub micro: Prf1,
    pub per_label: Vec<MetricSet>,
    pub n_examples: usize,
    pub averaging: Averaging,
    pub threshold: f64,
    pub flags: Vec<String>,
    /// Per-metric standard deviation across folds (aggregates only).
    pub std: Option<MetricSet>,
    pub subset_accuracy_std: Option<f64>,
}

/// Full report from ground truth and probabilities.
pub fn evaluate(t: &[Vec<bool>], scores: &[Vec<f64>], threshold: f64) -> Result<MetricsReport> {
    let (n, k) = dims(t, scores)?;
    let p: Vec<Vec<bool>> = scores
        .iter()
        .map(|r| r.iter().map(|&s| s >= threshold).collect())
        .collect();
    let roc = roc_auc(t, scores)?;
    let macro_prf = prf1(t, &p, Averaging::Macro)?;
    let micro = prf1(t, &p, Averaging::Micro)?;
    let pooled = Confusion::pooled(t, &p);
    let (mcc_v, mcc_deg) = pooled.mcc();
    let (kappa_v, kappa_deg) = pooled.kappa();

    let mut flags = Vec::new();
    for &j in &macro_prf.zero_division {
        flags.push(format!("zero_division:{}", label_name(j, k)));
    }
    if !micro.zero_division.is_empty() {
        flags.push("zero_division:micro".into());
    }
    if mcc_deg {
        flags.push("mcc_degenerate".into());
    }
    if kappa_deg {
        flags.push("kappa_degenerate".into());
    }
    for &j in &roc.excluded {
        flags.push(format!("auc_excluded:{}", label_name(j, k)));
    }

    let per_label = (0..k)
        .map(|j| {
            let c = Confusion::for_label(t, &p, j);
            let (pr, re, f1, _) = c.prf1();
            let acc = (c.tp + c.tn) as f64 / n as f64;
            MetricSet {
                accuracy: acc,
                hamming_loss: (c.fp + c.fn_) as f64 / n as f64,
                precision: pr,
                recall: re,
                f1,
                mcc: c.mcc().0,
                kappa: c.kappa().0,
                auc: roc.curves[j].as_ref().map_or(f64::NAN, |c| c.auc),
            }
        })
        .collect();

    let hamming = hamming_loss(t, &p)?;
    Ok(MetricsReport {
        headline: MetricSet {
            accuracy: 1.0 - hamming,
            hamming_loss: hamming,
            precision: macro_prf.precision,
            recall: macro_prf.recall,
            f1: macro_prf.f1,
            mcc: mcc_v,
            kappa: kappa_v,
            auc: roc.macro_auc.unwrap_or(f64::NAN),
        },
        subset_accuracy: multilabel_accuracy(t, &p, AccuracyMode::Subset)?,
        micro,
        per_label,
        n_examples: n,
        averaging: Averaging::Macro,
        threshold,
        flags,
        std: None,
        subset_accuracy_std: None,
    })
}

/// Arithmetic mean and sample standard deviation (n − 1), skipping NaNs.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate_sets(sets: &[MetricSet]) -> (MetricSet, MetricSet) {
    let mut mean = [0.0; 8];
    let mut std = [0.0; 8];
    for m in 0..8 {
        let col: Vec<f64> = sets.iter().map(|s| s.values()[m]).collect();
        (mean[m], std[m]) = mean_std(&col);
    }
    (MetricSet::from_values(mean), MetricSet::from_values(std))
}

/// Unweighted mean of fold reports, with the per-metric standard deviation.
pub fn crossval_aggregate(folds: &[MetricsReport]) -> Result<MetricsReport> {
    if folds.len() < 2 {
        return Err(Error::config("cross-validation needs at least two folds"));
    }
    let first = &folds[0];
    let k = first.per_label.len();
    if folds
        .iter()
        .any(|f| f.averaging != first.averaging || f.per_label.len() != k)
    {
        return Err(Error::config(
            "fold reports use different averaging modes or label sets",
        ));
    }
    let heads: Vec<MetricSet> = folds.iter().map(|f| f.headline).collect();
    let (headline, std) = aggregate_sets(&heads);
    let per_label = (0..k)
        .map(|j| aggregate_sets(&folds.iter().map(|f| f.per_label[j]).collect::<Vec<_>>()).0)
        .collect();
    let (subset_accuracy, subset_std) = mean_std(&folds.iter().map(|f| f.subset_accuracy).collect::<Vec<_>>());
    let micro = |get: fn(&Prf1) -> f64| mean_std(&folds.iter().map(|f| get(&f.micro)).collect::<Vec<_>>()).0;
    let mut flags: Vec<String> = Vec::new();
    for (i, f) in folds.iter().enumerate() {
        flags.extend(f.flags.iter().map(|fl| format!("fold{}:{fl}", i + 1)));
    }
    Ok(MetricsReport {
        headline,
        subset_accuracy,
        micro: Prf1 {
            precision: micro(|p| p.precision),
            recall: micro(|p| p.recall),
            f1: micro(|p| p.f1),
            zero_division: Vec::new(),
        },
        per_label,
        n_examples: folds.iter().map(|f| f.n_examples).sum(),
        averaging: first.averaging,
        threshold: first.threshold,
        flags,
        std: Some(std),
        subset_accuracy_std: Some(subset_std),
    })
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

impl MetricsReport {
    /// `key=value` header followed by a tab-separated per-label table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_examples={}", self.n_examples);
        let _ = writeln!(s, "averaging={}", self.averaging.as_str());
        let _ = writeln!(s, "threshold={}", self.threshold);
        for (name, v) in MetricSet::NAMES.iter().zip(self.headline.values()) {
            let _ = writeln!(s, "{name}={}", fmt(v));
        }
        let _ = writeln!(s, "subset_accuracy={}", fmt(self.subset_accuracy));
        let _ = writeln!(s, "micro_precision={}", fmt(self.micro.precision));
        let _ = writeln!(s, "micro_recall={}", fmt(self.micro.recall));
        let _ = writeln!(s, "micro_f1={}", fmt(self.micro.f1));
        if let Some(std) = &self.std {
            for (name, v) in MetricSet::NAMES.iter().zip(std.values()) {
                let _ = writeln!(s, "{name}_std={}", fmt(v));
            }
        }
        if let Some(v) = self.subset_accuracy_std {
            let _ = writeln!(s, "subset_accuracy_std={}", fmt(v));
        }
        let _ = writeln!(s, "flags={}", self.flags.join(","));
        s.push('\n');
        let _ = writeln!(s, "label\t{}", MetricSet::NAMES.join("\t"));
        let k = self.per_label.len();
        for (j, m) in self.per_label.iter().enumerate() {
            let cells: Vec<String> = m.values().iter().map(|&v| fmt(v)).collect();
            let _ = writeln!(s, "{}\t{}", label_name(j, k), cells.join("\t"));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// One `roc_<label>.csv` per label with both classes present. Returns the paths written.
pub fn write_roc_files(dir: &Path, roc: &RocReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let k = roc.curves.len();
    let mut written = Vec::new();
    for (j, curve) in roc.curves.iter().enumerate() {
        let Some(curve) = curve else { continue };
        let mut s = String::from("fpr,tpr\n");
        for (x, y) in &curve.points {
            let _ = writeln!(s, "{x},{y}");
        }
        let path = dir.join(format!("roc_{}.csv", label_name(j, k)));
        fs::write(&path, s)?;
        written.push(path);
    }
    Ok(written)
}

/// Fold rows plus an average row (and a std row): accuracy, P/R/F1, MCC,
/// kappa and AUC as percentages, Hamming loss as a fraction.
pub fn crossval_table(folds: &[MetricsReport], average: &MetricsReport) -> String {
    let row = |label: &str, m: &MetricSet| {
        format!(
            "{label}\t{:.2}\t{:.4}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\n",
            100.0 * m.accuracy,
            m.hamming_loss,
            100.0 * m.precision,
            100.0 * m.recall,
            100.0 * m.f1,
            100.0 * m.mcc,
            100.0 * m.kappa,
            100.0 * m.auc
        )
    };
    let mut s = String::from("fold\taccuracy\thamming_loss\tprecision\trecall\tf1\tmcc\tkappa\tauc\n");
    for (i, f) in folds.iter().enumerate() {
        s += &row(&(i + 1).to_string(), &f.headline);
    }
    s += &row("average", &average.headline);
    if let Some(std) = &average.std {
        s += &row("std", std);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[u8]]) -> Vec<Vec<bool>> {
        rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect()
    }

    #[test]
    fn hamming_cases() {
        let a = m(&[&[1, 0, 1], &[0, 0, 1]]);
        assert_eq!(hamming_loss(&a, &a).unwrap(), 0.0);
        let inv: Vec<Vec<bool>> = a.iter().map(|r| r.iter().map(|b| !b).collect()).collect();
        assert_eq!(hamming_loss(&a, &inv).unwrap(), 1.0);
        let b = m(&[&[1, 0, 1], &[0, 1, 1]]);
        assert_eq!(hamming_loss(&a, &b).unwrap(), 1.0 / 6.0);
        assert!(hamming_loss(&a, &m(&[&[1, 0, 1]])).is_err());
    }

    #[test]
    fn reported_pairing_is_labelwise() {
        // 94.17% accuracy reported with Hamming 0.0583.
        assert!((0.9417 + 0.0583 - 1.0f64).abs() < 1e-9);
    }

    #[test]
    fn all_positive_predictions() {
        let t = m(&[&[1], &[0], &[1], &[0]]);
        let p = m(&[&[1], &[1], &[1], &[1]]);
        let r = prf1(&t, &p, Averaging::Micro).unwrap();
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
    }

    #[test]
    fn mcc_kappa_extremes() {
        let t = m(&[&[1, 0], &[0, 1], &[1, 1]]);
        let inv: Vec<Vec<bool>> = t.iter().map(|r| r.iter().map(|b| !b).collect()).collect();
        assert_eq!(mcc(&t, &t).unwrap(), 1.0);
        assert_eq!(kappa(&t, &t).unwrap(), 1.0);
        assert_eq!(mcc(&t, &inv).unwrap(), -1.0);
        let zeros = m(&[&[0, 0], &[0, 0]]);
        assert_eq!(mcc(&zeros, &zeros).unwrap(), 0.0);
    }

    #[test]
    fn auc_cases() {
        let t = [true, false, true, false];
        assert_eq!(roc_curve(&t, &[1.0, 0.0, 1.0, 0.0]).unwrap().auc, 1.0);
        assert_eq!(roc_curve(&t, &[0.3; 4]).unwrap().auc, 0.5);
        assert!(roc_curve(&[true, true], &[0.1, 0.2]).is_none());
        let c = roc_curve(&t, &[0.9, 0.8, 0.4, 0.1]).unwrap();
        assert_eq!(c.auc, 0.75);
        assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn aggregate_two_folds() {
        let t = m(&[&[1, 0], &[0, 1]]);
        let s = vec![vec![0.9, 0.1], vec![0.2, 0.7]];
        let mut a = evaluate(&t, &s, 0.5).unwrap();
        let mut b = a.clone();
        a.headline.accuracy = 0.9;
        b.headline.accuracy = 0.94;
        let agg = crossval_aggregate(&[a.clone(), b]).unwrap();
        assert!((agg.headline.accuracy - 0.92).abs() < 1e-15);
        let same = crossval_aggregate(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(same.headline, a.headline);
        assert_eq!(same.std.unwrap().accuracy, 0.0);
        assert!(crossval_aggregate(&[a]).is_err());
    }

    #[test]
    fn report_text_has_table() {
        let t = m(&[&[1, 0, 0, 0, 1], &[0, 1, 0, 0, 0]]);
        let s = vec![vec![0.9, 0.1, 0.0, 0.2, 0.6], vec![0.2, 0.7, 0.1, 0.1, 0.1]];
        let text = evaluate(&t, &s, 0.5).unwrap().to_text();
        assert!(text.contains("accuracy=1.000000"));
        assert!(text.contains("\nspam\t"));
        assert!(text.contains("auc_excluded:religious"));
    }
}
