use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{FieldMapping, FilterConfig};
use crate::encoding::{EncoderConfig, Level};
use crate::error::{Error, Result};
use crate::genmodels::{Architecture, DEFAULT_HIDDEN_DIM};
use crate::hashing::sha256_hex;
use crate::recsys::DeepConnConfig;
use crate::synth::WorldConfig;
use crate::training::TrainConfig;

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "REVGEN_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Line-delimited JSON reviews. Relative paths resolve against the config file.
    pub input: Option<PathBuf>,
    pub fields: FieldMapping,
    /// Generate a synthetic world instead of reading `input`.
    pub synthetic: Option<WorldConfig>,
    /// Easy-word list replacing the bundled one.
    pub easy_words: Option<PathBuf>,
    /// `word,weight` polarity lexicon replacing the bundled one.
    pub polarity_lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub architecture: Architecture,
    pub level: Level,
    #[serde(default = "default_true")]
    pub use_helpful: bool,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
}

fn default_true() -> bool {
    true
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN_DIM
}

impl ModelEntry {
    pub fn label(&self) -> String {
        format!(
            "{}-{}{}",
            self.architecture.name(),
            self.level.name(),
            if self.use_helpful { "+helpful" } else { "" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub max_len_char: usize,
    pub max_len_word: usize,
    /// Bundles decoded together in one batch.
    pub batch_size: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            max_len_char: crate::genmodels::default_max_len(Level::Char),
            max_len_word: crate::genmodels::default_max_len(Level::Word),
            batch_size: 64,
        }
    }
}

impl GenerateConfig {
    pub fn max_len(&self, level: Level) -> usize {
        match level {
            Level::Char => self.max_len_char,
            Level::Word => self.max_len_word,
        }
    }
}

/// Every source of randomness. The `seed` fields inside `train` and
/// `recsys` are replaced by these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// Corpus split and synthetic world.
    pub corpus: u64,
    /// Generator initialisation, batching and dropout.
    pub train: u64,
    /// Baseline sampling and the rating predictor.
    pub eval: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            corpus: 1,
            train: 1,
            eval: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub filter: FilterConfig,
    pub split_proportions: [f64; 3],
    pub encoder: EncoderConfig,
    pub models: Vec<ModelEntry>,
    pub train: TrainConfig,
    pub generate: GenerateConfig,
    pub recsys: DeepConnConfig,
    pub seeds: Seeds,
    pub output_dir: PathBuf,
    /// Models trained at once; `0` uses every core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig::default(),
            filter: FilterConfig::default(),
            split_proportions: crate::corpus::DEFAULT_PROPORTIONS,
            encoder: EncoderConfig::default(),
            models: Vec::new(),
            train: TrainConfig::default(),
            generate: GenerateConfig::default(),
            recsys: DeepConnConfig::default(),
            seeds: Seeds::default(),
            output_dir: PathBuf::from("runs/default"),
            workers: 0,
        }
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty override key `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parse `key.path=value`; the value is read as TOML, or as a bare string.
fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {v}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(v.to_string()),
    };
    Ok((k.trim().to_string(), value))
}

impl ExperimentConfig {
    /// Parse TOML text, apply `key=value` overrides, and resolve relative
    /// paths against `base`.
    pub fn from_toml(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            set_path(&mut table, &k, v)?;
        }
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        resolve(&mut cfg.data.input);
        resolve(&mut cfg.data.easy_words);
        resolve(&mut cfg.data.polarity_lexicon);
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.sync_seeds();
        Ok(cfg)
    }

    /// Load a config file; `REVGEN_OUTPUT_DIR` then replaces `output_dir`.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, overrides, base)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    fn sync_seeds(&mut self) {
        self.train.seed = self.seeds.train;
        self.recsys.seed = self.seeds.eval;
        if let Some(w) = &mut self.data.synthetic {
            w.seed = self.seeds.corpus;
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.input, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(Error::Config("set only one of data.input and data.synthetic".into())),
            (None, None) => return Err(Error::Config("set data.input or data.synthetic".into())),
            _ => {}
        }
        for p in [&self.data.input, &self.data.easy_words, &self.data.polarity_lexicon].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.data.easy_words.is_some() != self.data.polarity_lexicon.is_some() {
            return Err(Error::Config("set both lexicon paths or neither".into()));
        }
        let sum: f64 = self.split_proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.split_proportions.iter().any(|&p| p <= 0.0) {
            return Err(Error::Config("split_proportions must be positive and sum to 1".into()));
        }
        self.encoder.validate()?;
        self.train.validate()?;
        self.recsys.validate()?;
        let mut labels = std::collections::BTreeSet::new();
        for m in &self.models {
            if m.hidden_dim == 0 {
                return Err(Error::Config(format!("{}: hidden_dim must be positive", m.label())));
            }
            if !labels.insert(m.label()) {
                return Err(Error::Config(format!("model {} listed twice", m.label())));
            }
        }
        if self.generate.batch_size == 0 || self.generate.max_len_char == 0 || self.generate.max_len_word == 0 {
            return Err(Error::Config("generate limits must be positive".into()));
        }
        Ok(())
    }

    /// Hash of everything that affects results; output location and worker
    /// count are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.workers = 0;
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}
