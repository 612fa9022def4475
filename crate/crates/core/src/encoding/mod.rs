//! Tokenisation, vocabularies and attribute encoders.

mod attributes;
mod tokenize;
mod vocab;

use serde::{Deserialize, Serialize};

pub use attributes::{
    AttributeBundle, GcnAttributeEncoder, IdTables, MlpAttributeEncoder, MlpEncoding, RATING_LEVELS,
};
pub use tokenize::{default_tokenizer, normalize_words, Tokenizer, DEFAULT_PATTERN};
pub use vocab::{build_vocab, Level, Vocabulary, END, PAD, RESERVED, START, UNKNOWN};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub word_embedding_dim: usize,
    /// One-hot width for characters; also caps the character vocabulary.
    pub char_onehot_len: usize,
    pub attr_embedding_dim: usize,
    /// Words seen fewer times than this in TRAIN map to the unknown symbol.
    pub min_word_count: usize,
    /// Bins used to one-hot the helpful ratio for the MLP encoder.
    pub helpful_bins: usize,
    pub token_pattern: String,
    pub lowercase: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            word_embedding_dim: 512,
            char_onehot_len: 100,
            attr_embedding_dim: 64,
            min_word_count: 16,
            helpful_bins: 10,
            token_pattern: DEFAULT_PATTERN.to_string(),
            lowercase: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_embedding_dim", self.word_embedding_dim),
            ("char_onehot_len", self.char_onehot_len),
            ("attr_embedding_dim", self.attr_embedding_dim),
            ("min_word_count", self.min_word_count),
            ("helpful_bins", self.helpful_bins),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.char_onehot_len <= RESERVED.len() {
            return Err(Error::Config("char_onehot_len must exceed the reserved symbols".into()));
        }
        self.tokenizer()?;
        Ok(())
    }

    pub fn tokenizer(&self) -> Result<Tokenizer> {
        Tokenizer::new(&self.token_pattern, self.lowercase)
            .map_err(|e| Error::Config(format!("token_pattern: {e}")))
    }

    pub fn hash(&self) -> String {
        crate::hashing::sha256_hex(&serde_json::to_vec(self).expect("config serialises"))
    }
}
