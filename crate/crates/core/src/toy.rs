//! Synthetic keyword-separable corpus for smoke tests and demos.
//!
//! Each text is a handful of shared filler words with exactly one class
//! keyword inserted at a random position, so a model only has to find the
//! keyword to classify perfectly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::corpus::{Example, LabeledCorpus};
use crate::SeededRng;

pub const TOY_LABELS: [&str; 4] = ["databases", "networking", "graphics", "compilers"];
pub const TOY_KEYWORDS: [&str; 4] = ["database", "router", "shader", "parser"];

const FILLER: [&str; 24] = [
    "the", "system", "uses", "a", "new", "method", "for", "data", "with", "fast", "results", "in", "our", "model",
    "design", "simple", "large", "and", "query", "index", "packet", "texture", "token", "tree",
];

/// `n` examples, classes assigned round-robin so counts differ by at most one.
///
/// A few filler words ("query", "packet", ...) are topical but shared by every
/// class, so they carry no label signal on their own.
pub fn keyword_corpus(n: usize, seed: u64) -> LabeledCorpus {
    let mut rng = SeededRng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let label = i % TOY_LABELS.len();
            let len = rng.gen_range(3..=8);
            let mut words: Vec<&str> = (0..len).map(|_| *FILLER.choose(&mut rng).expect("non-empty")).collect();
            // keep the keyword off the last two slots: with front padding the final
            // token falls in the remainder conv(5) + pool(5) over 100 steps discards,
            // and the one before it reaches a single filter tap
            let at = rng.gen_range(0..words.len() - 1);
            words.insert(at, TOY_KEYWORDS[label]);
            Example {
                text: words.join(" "),
                label,
            }
        })
        .collect();
    LabeledCorpus {
        examples,
        label_names: TOY_LABELS.iter().map(|s| s.to_string()).collect(),
        task_id: "toy".to_string(),
    }
}
