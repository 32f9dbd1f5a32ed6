use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::{class_counts, LabeledExample, Provenance, NUM_LABELS};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| (0.0..1.0).contains(&r);
        if !ok(self.validation) || !ok(self.test) || self.validation + self.test >= 1.0 {
            return Err(Error::config(format!(
                "split ratios validation={} test={} must be in [0,1) and leave a training share",
                self.validation, self.test
            )));
        }
        Ok(())
    }
}

/// Train / validation / test lists. Only `train` is ever resampled.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub provenance: Provenance,
}

impl DatasetSplit {
    /// True when no example identity appears in more than one list.
    pub fn is_disjoint(&self) -> bool {
        let ids = |v: &[LabeledExample]| v.iter().map(|e| e.id).collect::<HashSet<_>>();
        let (a, b, c) = (ids(&self.train), ids(&self.validation), ids(&self.test));
        a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c)
    }
}

/// Seeded split stratified by each example's rarest positive label (examples
/// with no positive label form their own stratum).
pub fn stratified_split(examples: &[LabeledExample], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.validate()?;
    let counts = class_counts(examples);
    let stratum = |e: &LabeledExample| {
        e.labels
            .positives()
            .min_by_key(|&c| (counts.get(c), c))
            .unwrap_or(NUM_LABELS)
    };
    let mut groups: Vec<Vec<&LabeledExample>> = vec![Vec::new(); NUM_LABELS + 1];
    for e in examples {
        groups[stratum(e)].push(e);
    }
    let mut rng = SeedStream::new(seed).rng();
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        provenance: Provenance::Original,
    };
    for mut g in groups {
        g.shuffle(&mut rng);
        let n = g.len();
        let n_val = (n as f64 * ratios.validation).round() as usize;
        let n_test = ((n as f64 * ratios.test).round() as usize).min(n - n_val.min(n));
        let n_val = n_val.min(n);
        for (i, e) in g.into_iter().enumerate() {
            let dest = if i < n_val {
                &mut split.validation
            } else if i < n_val + n_test {
                &mut split.test
            } else {
                &mut split.train
            };
            dest.push(e.clone());
        }
    }
    Ok(split)
}

/// One fold: indices into the partitioned list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
}

impl Fold {
    pub fn select<T: Clone>(&self, items: &[T]) -> (Vec<T>, Vec<T>) {
        let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect();
        (pick(&self.train), pick(&self.held_out))
    }
}

/// Seeded shuffle into `k` near-equal held-out folds (sizes differ by at most one).
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::config(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::config(format!("k = {k} exceeds the {n} available examples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SeedStream::new(seed).rng());
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let held_out = order[start..start + size].to_vec();
        let train = order[..start].iter().chain(&order[start + size..]).copied().collect();
        folds.push(Fold { train, held_out });
        start += size;
    }
    Ok(folds)
}
