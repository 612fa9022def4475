use std::sync::OnceLock;

use regex::Regex;

/// Default token pattern: runs of word characters, or single non-space symbols.
pub const DEFAULT_PATTERN: &str = r"\w+|[^\w\s]";

/// Regex tokenizer shared by the word vocabulary, the length filter and BLEU.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    re: Regex,
    lowercase: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::new(DEFAULT_PATTERN, true).expect("default pattern compiles")
    }
}

impl Tokenizer {
    pub fn new(pattern: &str, lowercase: bool) -> Result<Self, regex::Error> {
        Ok(Tokenizer {
            re: Regex::new(pattern)?,
            lowercase,
        })
    }

    pub fn pattern(&self) -> &str {
        self.re.as_str()
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        let folded;
        let text = if self.lowercase {
            folded = text.to_lowercase();
            folded.as_str()
        } else {
            text
        };
        self.re
            .find_iter(text)
            .map(|m| m.as_str().to_string())
            .collect()
    }

    /// Tokens that contain at least one word character; punctuation is not a word.
    pub fn word_count(&self, text: &str) -> usize {
        self.re
            .find_iter(text)
            .filter(|m| m.as_str().chars().any(is_word_char))
            .count()
    }
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn default_tokenizer() -> &'static Tokenizer {
    static TOKENIZER: OnceLock<Tokenizer> = OnceLock::new();
    TOKENIZER.get_or_init(Tokenizer::default)
}

/// Lowercased tokens joined by single spaces: the form word-level decoding returns.
pub fn normalize_words(text: &str) -> String {
    default_tokenizer().tokens(text).join(" ")
}
