//! Seeded synthetic text with Zipfian unigrams and sparse first-order
//! transitions. Used by the benches and the trend checks when no real corpus
//! is at hand: it has a known entropy floor and is small enough to overfit.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct SyntheticSource {
    unigram: WeightedIndex<f64>,
    successors: Vec<(Vec<usize>, WeightedIndex<f64>)>,
    line_end: f64,
}

impl SyntheticSource {
    /// `vocab` word types, each followed by one of `branching` successors
    /// drawn from a Zipf(1) unigram and weighted by 1/rank.
    pub fn new(vocab: usize, branching: usize, seed: u64) -> Self {
        assert!(vocab >= 2 && branching >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zipf: Vec<f64> = (1..=vocab).map(|r| 1.0 / r as f64).collect();
        let unigram = WeightedIndex::new(&zipf).expect("positive weights");
        let successors = (0..vocab)
            .map(|_| {
                let mut next: Vec<usize> = Vec::with_capacity(branching);
                while next.len() < branching.min(vocab) {
                    let w = unigram.sample(&mut rng);
                    if !next.contains(&w) {
                        next.push(w);
                    }
                }
                let weights: Vec<f64> = (1..=next.len()).map(|r| 1.0 / r as f64).collect();
                (next, WeightedIndex::new(&weights).expect("positive weights"))
            })
            .collect();
        SyntheticSource {
            unigram,
            successors,
            line_end: 1.0 / 15.0,
        }
    }

    /// Roughly `tokens` words of text, one sentence per line.
    pub fn sample_text<R: Rng + ?Sized>(&self, tokens: usize, rng: &mut R) -> String {
        let mut out = String::new();
        let mut prev = self.unigram.sample(rng);
        let mut line_start = true;
        for _ in 0..tokens {
            let (next, weights) = &self.successors[prev];
            let w = next[weights.sample(rng)];
            if !line_start {
                out.push(' ');
            }
            out.push('w');
            out.push_str(&w.to_string());
            line_start = false;
            if rng.random_bool(self.line_end) {
                out.push('\n');
                line_start = true;
            }
            prev = w;
        }
        if !line_start {
            out.push('\n');
        }
        out
    }
}
