use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{Article, Label};
use crate::error::{HanError, Result};
use crate::tensor::RngState;

/// Tokens planted into unreliable articles. None of them occurs in the
/// base lexicon.
pub const TRIGGER_WORDS: [&str; 10] = [
    "breaking",
    "shocking",
    "exposed",
    "hoax",
    "unbelievable",
    "bombshell",
    "outrage",
    "secret",
    "miracle",
    "banned",
];

pub const LEXICON_SIZE: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub unreliable_fraction: f64,
    /// Probability that a planted trigger goes into the title rather than
    /// a random body sentence.
    pub trigger_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 200,
            n_test: 100,
            unreliable_fraction: 0.3,
            trigger_rate: 0.5,
            seed: 0,
        }
    }
}

/// The fixed 200-word base vocabulary: pronounceable consonant-vowel
/// strings, identical for every seed.
pub fn base_lexicon() -> Vec<String> {
    const ONSETS: [&str; 12] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let mut rng = RngState::new(0x1e71c0);
    let mut seen = BTreeSet::new();
    let mut words = Vec::with_capacity(LEXICON_SIZE);
    while words.len() < LEXICON_SIZE {
        let syllables = rng.range_inclusive(2, 3);
        let w: String = (0..syllables)
            .map(|_| format!("{}{}", ONSETS[rng.below(ONSETS.len())], VOWELS[rng.below(VOWELS.len())]))
            .collect();
        if !TRIGGER_WORDS.contains(&w.as_str()) && seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn sentence(rng: &mut RngState, lexicon: &[String], len: usize) -> Vec<String> {
    (0..len).map(|_| lexicon[rng.below(lexicon.len())].clone()).collect()
}

fn plant(rng: &mut RngState, words: &mut Vec<String>, trigger: &str) {
    let at = rng.range_inclusive(0, words.len());
    words.insert(at, trigger.to_string());
}

fn generate_split(config: &SynthConfig, n: usize, split: &str, rng: &mut RngState, lexicon: &[String]) -> Vec<Article> {
    let n_unreliable = (n as f64 * config.unreliable_fraction).round() as usize;
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_unreliable { Label::Unreliable } else { Label::Reliable })
        .collect();
    rng.shuffle(&mut labels);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let title_len = rng.range_inclusive(4, 8);
            let mut title = sentence(rng, lexicon, title_len);
            let n_sent = rng.range_inclusive(3, 6);
            let mut body: Vec<Vec<String>> = (0..n_sent)
                .map(|_| {
                    let len = rng.range_inclusive(5, 12);
                    sentence(rng, lexicon, len)
                })
                .collect();
            if label == Label::Unreliable {
                let k = rng.range_inclusive(1, 3);
                for _ in 0..k {
                    let trigger = TRIGGER_WORDS[rng.below(TRIGGER_WORDS.len())];
                    if rng.unit() < config.trigger_rate {
                        plant(rng, &mut title, trigger);
                    } else {
                        let s = rng.below(body.len());
                        plant(rng, &mut body[s], trigger);
                    }
                }
            }
            let text = body.iter().map(|s| format!("{}.", s.join(" "))).collect::<Vec<_>>().join(" ");
            Article {
                uid: format!("synth-{split}-{i:05}"),
                title: title.join(" "),
                text,
                normalized_text: None,
                label,
            }
        })
        .collect()
}

/// Generates a train and a test split. Both are fixed by `config.seed`.
pub fn generate_corpus(config: &SynthConfig) -> Result<(Vec<Article>, Vec<Article>)> {
    if config.n_train + config.n_test < 20 {
        return Err(HanError::Domain(format!(
            "synthetic corpus needs at least 20 articles, asked for {}",
            config.n_train + config.n_test
        )));
    }
    if !(0.0..=1.0).contains(&config.unreliable_fraction) || !(0.0..=1.0).contains(&config.trigger_rate) {
        return Err(HanError::Config("unreliable_fraction and trigger_rate must lie in [0, 1]".into()));
    }
    let lexicon = base_lexicon();
    let mut rng = RngState::new(config.seed);
    let train = generate_split(config, config.n_train, "train", &mut rng, &lexicon);
    let test = generate_split(config, config.n_test, "test", &mut rng, &lexicon);
    Ok((train, test))
}

/// `n` training articles plus `n / 2` test articles.
pub fn make_synthetic_corpus(n: usize, trigger_rate: f64, seed: u64) -> Result<(Vec<Article>, Vec<Article>)> {
    if n < 20 {
        return Err(HanError::Domain(format!("synthetic corpus needs n ≥ 20, got {n}")));
    }
    generate_corpus(&SynthConfig {
        n_train: n,
        n_test: n / 2,
        trigger_rate,
        seed,
        ..SynthConfig::default()
    })
}

/// Whether `token` is one of the planted trigger words.
pub fn is_trigger(token: &str) -> bool {
    TRIGGER_WORDS.contains(&token)
}
