//! Labeled comments, dataset files, splitting, resampling and k-fold partitions.

mod io;
mod resample;
mod split;

pub use io::{load_dataset, read_dataset, write_dataset, DatasetFile, LoadStats};
pub use resample::{oversample, undersample, ResampleReport, SamplingMode};
pub use split::{kfold_partition, stratified_split, DatasetSplit, Fold, SplitRatios};

use std::fmt;

use crate::error::{Error, Result};

/// Number of label slots.
pub const NUM_LABELS: usize = 5;

/// Label order used by every vector in the crate.
pub const LABEL_NAMES: [&str; NUM_LABELS] = ["bully", "sexual", "religious", "threat", "spam"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Bully = 0,
    Sexual = 1,
    Religious = 2,
    Threat = 3,
    Spam = 4,
}

impl Label {
    pub const ALL: [Label; NUM_LABELS] = [
        Label::Bully,
        Label::Sexual,
        Label::Religious,
        Label::Threat,
        Label::Spam,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        LABEL_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.name() == name)
            .ok_or_else(|| Error::config(format!("unknown label {name:?}; expected one of {LABEL_NAMES:?}")))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Five binary label slots in [`LABEL_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelVector(pub [bool; NUM_LABELS]);

impl LabelVector {
    pub fn from_bits(bits: [u8; NUM_LABELS]) -> Self {
        Self(bits.map(|b| b == 1))
    }

    pub fn has(&self, label: usize) -> bool {
        self.0[label]
    }

    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_LABELS).filter(|&c| self.0[c])
    }

    pub fn as_f64(&self) -> [f64; NUM_LABELS] {
        self.0.map(|b| if b { 1.0 } else { 0.0 })
    }
}

/// One comment with its labels. `id` is the source row identity; resampled
/// duplicates keep the id of the row they copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub id: usize,
    pub text: String,
    pub labels: LabelVector,
}

impl LabeledExample {
    pub fn new(id: usize, text: impl Into<String>, labels: LabelVector) -> Self {
        Self {
            id,
            text: text.into(),
            labels,
        }
    }
}

/// Per-label positive counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts(pub [usize; NUM_LABELS]);

impl ClassCounts {
    pub fn min(&self) -> usize {
        *self.0.iter().min().unwrap()
    }

    pub fn max(&self) -> usize {
        *self.0.iter().max().unwrap()
    }

    pub fn get(&self, label: usize) -> usize {
        self.0[label]
    }
}

pub fn class_counts(examples: &[LabeledExample]) -> ClassCounts {
    let mut c = [0; NUM_LABELS];
    for e in examples {
        for l in e.labels.positives() {
            c[l] += 1;
        }
    }
    ClassCounts(c)
}

/// Where a training list came from.
/// Tab-separated `split, type, <label counts...>` table, one row per entry.
pub fn class_count_table(rows: &[(&str, &str, ClassCounts)]) -> String {
    let mut s = format!("split\ttype\t{}\n", LABEL_NAMES.join("\t"));
    for (split, kind, counts) in rows {
        let cells: Vec<String> = counts.0.iter().map(usize::to_string).collect();
        s.push_str(&format!("{split}\t{kind}\t{}\n", cells.join("\t")));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Original,
    Undersampled,
    Oversampled,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Undersampled => "undersampled",
            Provenance::Oversampled => "oversampled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Provenance::Original),
            "undersampled" => Ok(Provenance::Undersampled),
            "oversampled" => Ok(Provenance::Oversampled),
            other => Err(Error::config(format!("unknown provenance {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_two_training_tally() {
        // per-label training counts of the imbalanced split
        let tally = [5497usize, 1447, 1140, 1116, 752];
        let mut examples = Vec::new();
        for (label, &n) in tally.iter().enumerate() {
            for _ in 0..n {
                let mut bits = [false; NUM_LABELS];
                bits[label] = true;
                examples.push(LabeledExample::new(examples.len(), "x", LabelVector(bits)));
            }
        }
        assert_eq!(class_counts(&examples), ClassCounts(tally));
    }

    #[test]
    fn empty_and_all_ones() {
        assert_eq!(class_counts(&[]), ClassCounts([0; 5]));
        let e = LabeledExample::new(0, "x", LabelVector([true; 5]));
        assert_eq!(class_counts(&[e]), ClassCounts([1; 5]));
    }

    #[test]
    fn label_names_roundtrip() {
        for l in Label::ALL {
            assert_eq!(Label::from_name(l.name()).unwrap(), l);
        }
        assert!(Label::from_name("toxic").is_err());
    }
}
