use serde::{Deserialize, Serialize};

use super::Lexicons;
use crate::encoding::default_tokenizer;
use crate::error::{Error, Result};

/// Counts feeding the readability formulas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStats {
    pub sentences: usize,
    pub words: usize,
    pub letters: usize,
    pub syllables: usize,
    pub polysyllables: usize,
    pub difficult_words: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadabilityIndex {
    ColemanLiau,
    Flesch,
    Smog,
    DaleChall,
}

impl ReadabilityIndex {
    pub const ALL: [ReadabilityIndex; 4] = [
        ReadabilityIndex::ColemanLiau,
        ReadabilityIndex::Flesch,
        ReadabilityIndex::Smog,
        ReadabilityIndex::DaleChall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReadabilityIndex::ColemanLiau => "coleman_liau",
            ReadabilityIndex::Flesch => "flesch",
            ReadabilityIndex::Smog => "smog",
            ReadabilityIndex::DaleChall => "dale_chall",
        }
    }

    /// Fixed histogram edges used when comparing distributions.
    pub fn edges(self) -> Vec<f64> {
        let (lo, hi, step) = match self {
            ReadabilityIndex::ColemanLiau => (-10.0, 30.0, 2.0),
            ReadabilityIndex::Flesch => (-40.0, 140.0, 10.0),
            ReadabilityIndex::Smog => (0.0, 24.0, 1.5),
            ReadabilityIndex::DaleChall => (0.0, 20.0, 1.0),
        };
        let n = ((hi - lo) / step) as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readability {
    pub coleman_liau: f64,
    pub flesch: f64,
    pub smog: f64,
    pub dale_chall: f64,
    /// SMOG's calibration assumes at least 30 sentences.
    pub smog_short_sample: bool,
}

impl Readability {
    pub fn get(&self, index: ReadabilityIndex) -> f64 {
        match index {
            ReadabilityIndex::ColemanLiau => self.coleman_liau,
            ReadabilityIndex::Flesch => self.flesch,
            ReadabilityIndex::Smog => self.smog,
            ReadabilityIndex::DaleChall => self.dale_chall,
        }
    }
}

/// Vowel groups (`aeiouy`), minus a silent trailing `e`, at least 1.
pub fn count_syllables(word: &str) -> usize {
    let w: Vec<char> = word.to_lowercase().chars().filter(|c| c.is_alphabetic()).collect();
    let vowel = |c: &char| "aeiouy".contains(*c);
    let mut groups = 0usize;
    let mut prev = false;
    for c in &w {
        let v = vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    if w.len() > 1 && w.last() == Some(&'e') && !vowel(&w[w.len() - 2]) {
        groups = groups.saturating_sub(1);
    }
    groups.max(1)
}

/// Sentences end at `.`, `!` or `?` followed by whitespace or the end of the
/// text. Text without a terminator is one sentence. Segments without any
/// word character are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (k, &(i, c)) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let next = chars.get(k + 1).map(|&(_, n)| n);
            if next.is_none_or(char::is_whitespace) {
                let end = i + c.len_utf8();
                out.push(&text[start..end]);
                start = end;
            }
        }
    }
    out.push(&text[start..]);
    out.into_iter()
        .map(str::trim)
        .filter(|s| s.chars().any(char::is_alphanumeric))
        .collect()
}

pub fn text_stats(text: &str, lex: &Lexicons) -> TextStats {
    let tokens = default_tokenizer().tokens(text);
    let words: Vec<&String> = tokens
        .iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .collect();
    let mut s = TextStats {
        sentences: split_sentences(text).len(),
        words: words.len(),
        ..Default::default()
    };
    for w in words {
        s.letters += w.chars().filter(|c| c.is_alphabetic()).count();
        let syl = count_syllables(w);
        s.syllables += syl;
        if syl >= 3 {
            s.polysyllables += 1;
        }
        if w.chars().any(char::is_alphabetic) && !lex.is_easy(w) {
            s.difficult_words += 1;
        }
    }
    s
}

/// Coleman-Liau, Flesch reading ease, SMOG and Dale-Chall for one text.
pub fn readability(text: &str, lex: &Lexicons) -> Result<Readability> {
    let s = text_stats(text, lex);
    if s.sentences == 0 || s.words == 0 {
        return Err(Error::Metric("readability needs at least one sentence".into()));
    }
    let (w, sent) = (s.words as f64, s.sentences as f64);
    let l = s.letters as f64 / w * 100.0;
    let per100 = sent / w * 100.0;
    let pct_difficult = s.difficult_words as f64 / w * 100.0;
    let mut dale_chall = 0.1579 * pct_difficult + 0.0496 * (w / sent);
    if pct_difficult > 5.0 {
        dale_chall += 3.6365;
    }
    Ok(Readability {
        coleman_liau: 0.0588 * l - 0.296 * per100 - 15.8,
        flesch: 206.835 - 1.015 * (w / sent) - 84.6 * (s.syllables as f64 / w),
        smog: 1.0430 * (s.polysyllables as f64 * 30.0 / sent).sqrt() + 3.1291,
        dale_chall,
        smog_short_sample: s.sentences < 30,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syllables() {
        for (w, n) in [("the", 1), ("cat", 1), ("table", 1), ("agree", 2), ("beautiful", 3), ("queue", 1), ("rhythm", 1), ("make", 1), ("be", 1)] {
            assert_eq!(count_syllables(w), n, "{w}");
        }
    }

    #[test]
    fn flesch_fixture() {
        let r = readability("The cat sat.", &Lexicons::bundled()).unwrap();
        assert!((r.flesch - 119.19).abs() < 1e-9);
    }

    #[test]
    fn dale_chall_without_difficult_words() {
        let r = readability("The cat sat on the hat. The dog ran.", &Lexicons::bundled()).unwrap();
        assert!((r.dale_chall - 0.0496 * 4.5).abs() < 1e-12);
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(split_sentences("Great kettle! Works well. 3.5 stars"), vec!["Great kettle!", "Works well.", "3.5 stars"]);
        assert_eq!(split_sentences("no terminator here"), vec!["no terminator here"]);
        assert!(split_sentences(" ... ").is_empty());
    }

    #[test]
    fn empty_text_is_an_error() {
        assert!(readability("  !! ", &Lexicons::bundled()).is_err());
    }

    #[test]
    fn duplication_invariance() {
        let lex = Lexicons::bundled();
        let t = "This remarkable blender is surprisingly quiet. Honestly, I would buy another one!";
        let a = readability(t, &lex).unwrap();
        let b = readability(&format!("{t} {t}"), &lex).unwrap();
        for i in ReadabilityIndex::ALL {
            assert!((a.get(i) - b.get(i)).abs() < 1e-9, "{}", i.name());
        }
    }

    #[test]
    fn edges_are_increasing() {
        for i in ReadabilityIndex::ALL {
            let e = i.edges();
            assert!(e.len() > 2 && e.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
