use rand::seq::{IndexedRandom, SliceRandom};

use super::{class_counts, ClassCounts, DatasetSplit, LabeledExample, Provenance, NUM_LABELS};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Counts before and after a resampling pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleReport {
    pub before: ClassCounts,
    pub after: ClassCounts,
    /// `min(n_c)` for undersampling, `max(n_c)` for oversampling.
    pub target: usize,
    /// Labels whose final count differs from the target because label
    /// co-occurrence made it unreachable.
    pub off_target: Vec<usize>,
}

fn require_all_labels(counts: &ClassCounts) -> Result<()> {
    if let Some(c) = (0..NUM_LABELS).find(|&c| counts.get(c) == 0) {
        return Err(Error::Data(format!(
            "label {} has no positive examples; cannot balance",
            super::LABEL_NAMES[c]
        )));
    }
    Ok(())
}

/// Reduces every label towards `min(n_c)` by removing examples.
///
/// Examples are visited once in seeded-random order; an example is removed
/// when every label it carries is still above the target, so no label ever
/// drops below `min(n_c)` and the last positive of a label is never removed.
/// After the pass no further removal is legal: counts only fall, so an
/// example that was blocked stays blocked. Examples with no positive label
/// are kept.
pub fn undersample(train: &[LabeledExample], seed: u64) -> Result<(Vec<LabeledExample>, ResampleReport)> {
    let before = class_counts(train);
    require_all_labels(&before)?;
    let target = before.min();
    let mut counts = before.0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut SeedStream::new(seed).rng());
    let mut removed = vec![false; train.len()];
    for i in order {
        let labels = &train[i].labels;
        let mut pos = labels.positives().peekable();
        if pos.peek().is_none() {
            continue;
        }
        if labels.positives().all(|c| counts[c] > target) {
            labels.positives().for_each(|c| counts[c] -= 1);
            removed[i] = true;
        }
    }
    let kept: Vec<LabeledExample> = train
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(e, _)| e.clone())
        .collect();
    let after = class_counts(&kept);
    debug_assert_eq!(after.0, counts);
    let off_target = (0..NUM_LABELS).filter(|&c| after.get(c) != target).collect();
    Ok((
        kept,
        ResampleReport {
            before,
            after,
            target,
            off_target,
        },
    ))
}

/// Raises every label to at least `max(n_c)` by duplicating examples.
///
/// Labels are processed in ascending order of original frequency. For the
/// current label, seeded-random examples carrying it are duplicated with
/// their full label tuple until its running count reaches the target, so
/// co-occurring labels may overshoot.
pub fn oversample(train: &[LabeledExample], seed: u64) -> Result<(Vec<LabeledExample>, ResampleReport)> {
    let before = class_counts(train);
    require_all_labels(&before)?;
    let target = before.max();
    let mut order: Vec<usize> = (0..NUM_LABELS).collect();
    order.sort_by_key(|&c| (before.get(c), c));
    let mut rng = SeedStream::new(seed).rng();
    let mut counts = before.0;
    let mut out = train.to_vec();
    for c in order {
        let pool: Vec<&LabeledExample> = train.iter().filter(|e| e.labels.has(c)).collect();
        while counts[c] < target {
            let pick = *pool.choose(&mut rng).expect("label has positives");
            pick.labels.positives().for_each(|l| counts[l] += 1);
            out.push(pick.clone());
        }
    }
    let after = class_counts(&out);
    let off_target = (0..NUM_LABELS).filter(|&c| after.get(c) != target).collect();
    Ok((
        out,
        ResampleReport {
            before,
            after,
            target,
            off_target,
        },
    ))
}

/// Training-split rebalancing mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    #[default]
    None,
    Under,
    Over,
}

impl SamplingMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "under" => Ok(Self::Under),
            "over" => Ok(Self::Over),
            other => Err(Error::config(format!(
                "unknown sampling mode {other:?} (none, under, over)"
            ))),
        }
    }

    pub fn provenance(self) -> Provenance {
        match self {
            Self::None => Provenance::Original,
            Self::Under => Provenance::Undersampled,
            Self::Over => Provenance::Oversampled,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Under => "under",
            Self::Over => "over",
        }
    }

    pub fn apply(self, train: &[LabeledExample], seed: u64) -> Result<Vec<LabeledExample>> {
        Ok(self.apply_with_report(train, seed)?.0)
    }

    pub fn apply_with_report(
        self,
        train: &[LabeledExample],
        seed: u64,
    ) -> Result<(Vec<LabeledExample>, Option<ResampleReport>)> {
        Ok(match self {
            Self::None => (train.to_vec(), None),
            Self::Under => undersample(train, seed).map(|(v, r)| (v, Some(r)))?,
            Self::Over => oversample(train, seed).map(|(v, r)| (v, Some(r)))?,
        })
    }

    /// Rebalances the training list only; validation and test are moved through untouched.
    pub fn apply_to_split(self, split: DatasetSplit, seed: u64) -> Result<(DatasetSplit, Option<ResampleReport>)> {
        let (train, report) = self.apply_with_report(&split.train, seed)?;
        Ok((
            DatasetSplit {
                train,
                provenance: self.provenance(),
                ..split
            },
            report,
        ))
    }
}
