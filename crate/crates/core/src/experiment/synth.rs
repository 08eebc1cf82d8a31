//! Seeded synthetic corpus with topic and successor structure, for runs where
//! no real corpus is at hand.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub vocab: usize,
    pub topics: usize,
    pub train_tokens: usize,
    pub eval_tokens: usize,
    /// Probability that a word is the fixed successor of its predecessor.
    pub successor_prob: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            vocab: 300,
            topics: 8,
            train_tokens: 30_000,
            eval_tokens: 8_000,
            successor_prob: 0.4,
            zipf_exponent: 1.1,
            seed: 1,
        }
    }
}

struct Generator {
    rng: ChaCha8Rng,
    topics: Vec<(Vec<usize>, WeightedIndex<f64>)>,
    successor: Vec<usize>,
    successor_prob: f64,
}

impl Generator {
    fn new(cfg: &SynthConfig) -> Result<Self> {
        if cfg.vocab < 2 || cfg.topics == 0 || !(0.0..=1.0).contains(&cfg.successor_prob) {
            return Err(Error::Config(
                "synthetic corpus needs vocab >= 2, topics >= 1, successor_prob in [0, 1]".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let weights: Vec<f64> = (1..=cfg.vocab).map(|r| (r as f64).powf(-cfg.zipf_exponent)).collect();
        let mut topics = Vec::with_capacity(cfg.topics);
        for _ in 0..cfg.topics {
            let mut order: Vec<usize> = (0..cfg.vocab).collect();
            order.shuffle(&mut rng);
            let dist = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;
            topics.push((order, dist));
        }
        let successor = (0..cfg.vocab).map(|_| rng.random_range(0..cfg.vocab)).collect();
        Ok(Self { rng, topics, successor, successor_prob: cfg.successor_prob })
    }

    fn line(&mut self) -> Vec<usize> {
        let len = self.rng.random_range(4..=20);
        let topic = self.rng.random_range(0..self.topics.len());
        let mut out: Vec<usize> = Vec::with_capacity(len);
        for _ in 0..len {
            let word = match out.last() {
                Some(&prev) if self.rng.random::<f64>() < self.successor_prob => self.successor[prev],
                _ => {
                    let (order, dist) = &self.topics[topic];
                    order[dist.sample(&mut self.rng)]
                }
            };
            out.push(word);
        }
        out
    }

    /// Lines until at least `tokens` tokens, counting one end-of-line per line.
    fn text(&mut self, tokens: usize) -> String {
        let mut s = String::new();
        let mut n = 0;
        while n < tokens {
            let line = self.line();
            n += line.len() + 1;
            let words: Vec<String> = line.iter().map(|w| format!("w{w}")).collect();
            s.push_str(&words.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Writes `train.txt`, `valid.txt` and `test.txt` into `dir`.
pub fn write_synthetic_corpus(dir: impl AsRef<Path>, cfg: &SynthConfig) -> Result<()> {
    let dir = dir.as_ref();
    let mut g = Generator::new(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, n) in [("train.txt", cfg.train_tokens), ("valid.txt", cfg.eval_tokens), ("test.txt", cfg.eval_tokens)] {
        let path = dir.join(name);
        fs::write(&path, g.text(n)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
