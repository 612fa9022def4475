//! BLEU-4, readability indices, lexicon polarity and Pearson correlation.

mod bleu;
mod polarity;
mod readability;
mod stats;

use std::collections::{HashMap, HashSet};
use std::path::Path;

pub use bleu::{bleu4, bleu4_text, corpus_bleu4, modified_precision, BLEU_EPSILON};
pub use polarity::{polarity, NEGATION_WINDOW, NEGATORS};
pub use readability::{
    count_syllables, readability, split_sentences, text_stats, Readability, ReadabilityIndex, TextStats,
};
pub use stats::{histogram, mean, pearson, Histogram};

use crate::error::{Error, Result};

const EASY_WORDS: &str = include_str!("../../data/dale_chall_easy.txt");
const POLARITY: &str = include_str!("../../data/polarity.txt");

/// Word lists used by Dale-Chall and polarity scoring. Lookups are lowercase.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicons {
    pub easy_words: HashSet<String>,
    pub polarity: HashMap<String, f64>,
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl Lexicons {
    /// The lists shipped in the crate's `data/` directory.
    pub fn bundled() -> Self {
        Self::parse(EASY_WORDS, POLARITY).expect("bundled lexicons parse")
    }

    /// `easy` holds one word per line; `polarity` holds `word,weight` lines.
    pub fn parse(easy: &str, polarity: &str) -> Result<Self> {
        let easy_words: HashSet<String> = data_lines(easy).map(str::to_lowercase).collect();
        let mut pol = HashMap::new();
        for line in data_lines(polarity) {
            let (w, v) = line
                .split_once([',', '\t'])
                .ok_or_else(|| Error::Config(format!("polarity line `{line}` lacks a weight")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad polarity weight in `{line}`")))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("polarity weight {v} outside [-1, 1]")));
            }
            pol.insert(w.trim().to_lowercase(), v);
        }
        if easy_words.is_empty() || pol.is_empty() {
            return Err(Error::Config("lexicons must be non-empty".into()));
        }
        Ok(Lexicons {
            easy_words,
            polarity: pol,
        })
    }

    pub fn load(easy: &Path, polarity: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Self::parse(&read(easy)?, &read(polarity)?)
    }

    pub fn is_easy(&self, word: &str) -> bool {
        self.easy_words.contains(&word.to_lowercase())
    }

    pub fn weight(&self, word: &str) -> Option<f64> {
        self.polarity.get(&word.to_lowercase()).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lists_load() {
        let l = Lexicons::bundled();
        assert!(l.is_easy("The"));
        assert!(!l.is_easy("zyzzyva"));
        assert_eq!(l.weight("GREAT"), Some(0.8));
    }

    #[test]
    fn rejects_out_of_range_weights() {
        assert!(Lexicons::parse("a", "good,1.5").is_err());
        assert!(Lexicons::parse("a", "good").is_err());
        assert!(Lexicons::parse("", "good,1").is_err());
    }
}
