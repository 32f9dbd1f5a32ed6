//! Seeded toy corpus with one planted trigger word per label: an example
//! carries label `k` exactly when `TRIGGERS[k]` occurs in its text.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::data::{LabelVector, LabeledExample, NUM_LABELS};
use crate::rng::SeedStream;

pub const TRIGGERS: [&str; NUM_LABELS] = ["zorvak", "qelmith", "praxum", "vendrik", "glumbo"];

pub const FILLER: [&str; 55] = [
    "river", "stone", "green", "table", "window", "little", "market", "yellow", "garden", "morning", "paper", "silver",
    "bridge", "cloud", "orange", "letter", "summer", "winter", "forest", "candle", "mirror", "pocket", "ladder",
    "button", "basket", "harbor", "jacket", "kettle", "lemon", "meadow", "needle", "ocean", "pencil", "quiet",
    "rabbit", "saddle", "tunnel", "valley", "wagon", "anchor", "blanket", "copper", "desert", "engine", "feather",
    "ginger", "hammer", "island", "jungle", "kitten", "lantern", "marble", "nectar", "pepper", "shadow",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelStyle {
    /// Exactly one label per example.
    Single,
    /// One label, or two with probability 1/4.
    Mixed,
}

fn compose(labels: &[usize], rng: &mut crate::rng::Rng) -> String {
    let n_fill = rng.random_range(3..=6);
    let mut words: Vec<&str> = FILLER.choose_multiple(rng, n_fill).copied().collect();
    for &k in labels {
        let at = rng.random_range(0..=words.len());
        words.insert(at, TRIGGERS[k]);
    }
    words.join(" ")
}

fn draw_labels(style: LabelStyle, index: usize, rng: &mut crate::rng::Rng) -> Vec<usize> {
    // The first examples cycle through every label so each one is present.
    if index < NUM_LABELS {
        return vec![index];
    }
    let count = match style {
        LabelStyle::Single => 1,
        LabelStyle::Mixed => {
            if rng.random_bool(0.25) {
                2
            } else {
                1
            }
        }
    };
    let mut all: Vec<usize> = (0..NUM_LABELS).collect();
    all.shuffle(rng);
    let mut chosen = all[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

/// `n` examples with ids `first_id..first_id + n`.
pub fn generate(n: usize, seed: u64, style: LabelStyle, first_id: usize) -> Vec<LabeledExample> {
    let mut rng = SeedStream::new(seed).derive("synthetic").rng();
    (0..n)
        .map(|i| {
            let labels = draw_labels(style, i, &mut rng);
            let mut bits = [false; NUM_LABELS];
            labels.iter().for_each(|&k| bits[k] = true);
            LabeledExample::new(first_id + i, compose(&labels, &mut rng), LabelVector(bits))
        })
        .collect()
}

/// One comment containing the trigger for `label` and no other trigger.
pub fn planted_comment(label: usize, seed: u64) -> String {
    compose(&[label], &mut SeedStream::new(seed).derive("planted").rng())
}

/// All words the generator can emit.
pub fn word_list() -> Vec<&'static str> {
    FILLER.iter().chain(TRIGGERS.iter()).copied().collect()
}
