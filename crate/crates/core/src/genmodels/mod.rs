//! Attribute-conditioned generators over a stacked LSTM decoder.
//!
//! Three ways of feeding attributes to the decoder:
//!
//! * [`Architecture::Gcn`] concatenates a fixed attribute vector with every
//!   token input.
//! * [`Architecture::Context`] fuses per-attribute embeddings once and uses
//!   the result as the initial hidden and cell states.
//! * [`Architecture::Attention`] is the context model plus additive attention
//!   over the attribute embeddings at every step.

mod checkpoint;
mod generator;
mod lstm;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use generator::{
    attend, AttentionParams, Conditioning, DecoderState, GenerationSample, Generator, Regularizer, StepOutput,
};
pub use lstm::{lstm_cell, lstm_gates, LstmParams};

use crate::encoding::{EncoderConfig, Level, RATING_LEVELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Gcn,
    Context,
    Attention,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Gcn, Architecture::Context, Architecture::Attention];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Context => "context",
            Architecture::Attention => "attention",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture `{s}`")))
    }
}

pub const DEFAULT_HIDDEN_DIM: usize = 256;
pub const LAYERS: usize = 2;

/// Default decode length cap for a token level.
pub fn default_max_len(level: Level) -> usize {
    match level {
        Level::Char => 400,
        Level::Word => 80,
    }
}

/// Everything needed to lay out a generator's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub level: Level,
    pub use_helpful: bool,
    pub hidden_dim: usize,
    pub layers: usize,
    pub vocab_size: usize,
    /// One-hot width at char level, embedding width at word level.
    pub token_dim: usize,
    pub attr_dim: usize,
    pub num_users: usize,
    pub num_items: usize,
    pub helpful_bins: usize,
}

impl ModelSpec {
    pub fn new(
        architecture: Architecture,
        level: Level,
        use_helpful: bool,
        enc: &EncoderConfig,
        vocab_size: usize,
        num_users: usize,
        num_items: usize,
    ) -> Self {
        ModelSpec {
            architecture,
            level,
            use_helpful,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            layers: LAYERS,
            vocab_size,
            token_dim: match level {
                Level::Char => enc.char_onehot_len,
                Level::Word => enc.word_embedding_dim,
            },
            attr_dim: enc.attr_embedding_dim,
            num_users,
            num_items,
            helpful_bins: enc.helpful_bins,
        }
    }

    pub fn with_hidden_dim(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    /// Short label such as `gcn-char+helpful`.
    pub fn label(&self) -> String {
        format!(
            "{}-{}{}",
            self.architecture.name(),
            self.level.name(),
            if self.use_helpful { "+helpful" } else { "" }
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers != LAYERS {
            return Err(Error::Config(format!("the decoder has exactly {LAYERS} layers")));
        }
        for (name, v) in [
            ("hidden_dim", self.hidden_dim),
            ("vocab_size", self.vocab_size),
            ("token_dim", self.token_dim),
            ("attr_dim", self.attr_dim),
            ("num_users", self.num_users),
            ("num_items", self.num_items),
            ("helpful_bins", self.helpful_bins),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.level == Level::Char && self.vocab_size > self.token_dim {
            return Err(Error::Config(format!(
                "char vocabulary of {} exceeds one-hot width {}",
                self.vocab_size, self.token_dim
            )));
        }
        Ok(())
    }

    /// Width of the GCN attribute vector.
    pub fn gcn_attr_width(&self) -> usize {
        2 * self.attr_dim + RATING_LEVELS + usize::from(self.use_helpful)
    }

    /// Number of categorical attributes seen by the MLP encoder.
    pub fn num_attributes(&self) -> usize {
        3 + usize::from(self.use_helpful)
    }

    /// Width of the first-layer LSTM input.
    pub fn input_dim(&self) -> usize {
        match self.architecture {
            Architecture::Gcn => self.token_dim + self.gcn_attr_width(),
            _ => self.token_dim,
        }
    }

    /// Width of the features entering the output layer.
    pub fn output_input_dim(&self) -> usize {
        match self.architecture {
            Architecture::Attention => self.hidden_dim + self.attr_dim,
            _ => self.hidden_dim,
        }
    }

    /// Parameter names and shapes in creation order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let (h, a) = (self.hidden_dim, self.attr_dim);
        let g = 4 * h;
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        let mut add = |n: &str, s: &[usize]| out.push((n.to_string(), s.to_vec()));
        if self.level == Level::Word {
            add("embed", &[self.vocab_size, self.token_dim]);
        }
        add("attr.user", &[self.num_users, a]);
        add("attr.item", &[self.num_items, a]);
        match self.architecture {
            Architecture::Gcn => add("lstm0.w_attr", &[self.gcn_attr_width(), g]),
            _ => {
                add("attr.rating", &[RATING_LEVELS, a]);
                if self.use_helpful {
                    add("attr.helpful", &[self.helpful_bins, a]);
                }
                add("attr.fuse.w", &[self.num_attributes() * a, 2 * self.layers * h]);
                add("attr.fuse.b", &[1, 2 * self.layers * h]);
            }
        }
        add("lstm0.w_x", &[self.token_dim, g]);
        for l in 0..self.layers {
            if l > 0 {
                add(&format!("lstm{l}.w_x"), &[h, g]);
            }
            add(&format!("lstm{l}.w_h"), &[h, g]);
            add(&format!("lstm{l}.b"), &[1, g]);
        }
        if self.architecture == Architecture::Attention {
            add("att.w_h", &[h, h]);
            add("att.w_x", &[a, h]);
            add("att.v", &[h, 1]);
        }
        add("out.w", &[self.output_input_dim(), self.vocab_size]);
        add("out.b", &[1, self.vocab_size]);
        out
    }
}
