use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EncoderConfig, Tokenizer};
use crate::error::{Error, Result};
use crate::hashing;

pub const PAD: usize = 0;
pub const START: usize = 1;
pub const END: usize = 2;
pub const UNKNOWN: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

const FORMAT: &str = "revgen-vocab";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Char,
    Word,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Char => "char",
            Level::Word => "word",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(Level::Char),
            "word" => Ok(Level::Word),
            _ => Err(Error::Config(format!("unknown level `{s}`"))),
        }
    }
}

/// Token ↔ index map for one level. Indices `0..4` are the reserved symbols.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    level: Level,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    tokenizer: Tokenizer,
    config_hash: String,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.tokens == other.tokens && self.config_hash == other.config_hash
    }
}

/// Build a vocabulary from TRAIN texts.
///
/// Ordering is count descending, then lexicographic. Word level keeps tokens
/// seen at least `min_word_count` times; char level keeps the most frequent
/// characters up to the one-hot capacity.
pub fn build_vocab<S: AsRef<str>>(texts: &[S], level: Level, cfg: &EncoderConfig) -> Result<Vocabulary> {
    cfg.validate()?;
    let tokenizer = cfg.tokenizer()?;
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in texts {
        match level {
            Level::Char => t
                .as_ref()
                .chars()
                .for_each(|c| *counts.entry(c.to_string()).or_default() += 1),
            Level::Word => tokenizer
                .tokens(t.as_ref())
                .into_iter()
                .for_each(|w| *counts.entry(w).or_default() += 1),
        }
    }
    if counts.is_empty() {
        return Err(Error::Build("corpus has no tokens".into()));
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(tok, _)| !RESERVED.contains(&tok.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let kept: Vec<String> = match level {
        Level::Char => ranked
            .into_iter()
            .take(cfg.char_onehot_len - RESERVED.len())
            .map(|(t, _)| t)
            .collect(),
        Level::Word => ranked
            .into_iter()
            .filter(|(_, c)| *c >= cfg.min_word_count)
            .map(|(t, _)| t)
            .collect(),
    };
    Ok(Vocabulary::from_tokens(level, kept, tokenizer, cfg.hash()))
}

fn escape(tok: &str) -> String {
    let mut s = String::with_capacity(tok.len());
    for c in tok.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            '\t' => s.push_str("\\t"),
            c => s.push(c),
        }
    }
    s
}

fn unescape(line: &str) -> String {
    let mut s = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            s.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => s.push('\n'),
            Some('r') => s.push('\r'),
            Some('t') => s.push('\t'),
            Some(other) => s.push(other),
            None => s.push('\\'),
        }
    }
    s
}

impl Vocabulary {
    fn from_tokens(level: Level, body: Vec<String>, tokenizer: Tokenizer, config_hash: String) -> Self {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).chain(body).collect();
        let index = tokens
            .iter()
            .enumerate()
            .skip(RESERVED.len())
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            level,
            tokens,
            index,
            tokenizer,
            config_hash,
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    /// Including reserved symbols.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// Split text into this level's tokens (characters or words).
    pub fn split(&self, text: &str) -> Vec<String> {
        match self.level {
            Level::Char => text.chars().map(String::from).collect(),
            Level::Word => self.tokenizer.tokens(text),
        }
    }

    /// Index sequence framed by the start and end symbols.
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        let mut out = vec![START];
        out.extend(
            self.split(text)
                .iter()
                .map(|t| self.index_of(t).unwrap_or(UNKNOWN)),
        );
        out.push(END);
        out
    }

    /// Text for an index sequence. Framing and padding are dropped; unknown
    /// indices render as `<unk>`.
    pub fn decode(&self, indices: &[usize]) -> String {
        let toks = indices
            .iter()
            .filter(|&&i| !matches!(i, PAD | START | END))
            .map(|&i| self.token(i).unwrap_or(RESERVED[UNKNOWN]));
        match self.level {
            Level::Char => toks.collect(),
            Level::Word => toks.collect::<Vec<_>>().join(" "),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let pattern = serde_json::to_string(self.tokenizer_pattern()).expect("string serialises");
        writeln!(
            s,
            "# {FORMAT} {VERSION}\tlevel={}\tsize={}\tconfig={}\tlowercase={}\tpattern={pattern}",
            self.level.name(),
            self.len(),
            self.config_hash,
            self.tokenizer.lowercase(),
        )
        .unwrap();
        for t in &self.tokens {
            s.push_str(&escape(t));
            s.push('\n');
        }
        s
    }

    fn tokenizer_pattern(&self) -> &str {
        self.tokenizer.pattern()
    }

    /// Content hash of the serialised form.
    pub fn hash(&self) -> String {
        hashing::sha256_hex(self.to_text().as_bytes())
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("vocabulary: {m}"));
        let mut lines = text.split('\n');
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let mut fields = header.split('\t');
        if fields.next() != Some(&format!("# {FORMAT} {VERSION}")) {
            return Err(bad("unsupported header"));
        }
        let mut kv: HashMap<&str, &str> = HashMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| bad("malformed header field"))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
        let level: Level = get("level")?.parse()?;
        let size: usize = get("size")?.parse().map_err(|_| bad("size"))?;
        let pattern: String = serde_json::from_str(get("pattern")?)?;
        let lowercase: bool = get("lowercase")?.parse().map_err(|_| bad("lowercase"))?;
        let tokens: Vec<String> = lines.take(size).map(unescape).collect();
        if tokens.len() != size || tokens[..RESERVED.len()] != RESERVED.map(String::from) {
            return Err(bad("token list does not match header"));
        }
        let tokenizer = Tokenizer::new(&pattern, lowercase).map_err(|e| bad(&e.to_string()))?;
        Ok(Vocabulary::from_tokens(
            level,
            tokens[RESERVED.len()..].to_vec(),
            tokenizer,
            get("config")?.to_string(),
        ))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> EncoderConfig {
        EncoderConfig::default()
    }

    #[test]
    fn rare_words_map_to_unknown() {
        let mut texts = vec!["zyzzyva".to_string(); 15];
        texts.extend(vec!["common".to_string(); 16]);
        let v = build_vocab(&texts, Level::Word, &cfg()).unwrap();
        assert_eq!(v.index_of("zyzzyva"), None);
        assert_eq!(v.index_of("common"), Some(4));
        assert_eq!(v.encode_text("zyzzyva"), vec![START, UNKNOWN, END]);
    }

    #[test]
    fn tiny_corpus_word_vocab() {
        let texts = vec!["ab ab ab ab".to_string(); 4];
        let v = build_vocab(&texts, Level::Word, &cfg()).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<s>", "</s>", "<unk>", "ab"]);
    }

    #[test]
    fn builds_are_deterministic() {
        let texts = vec!["The cat sat on the mat.".to_string(); 20];
        let a = build_vocab(&texts, Level::Char, &cfg()).unwrap();
        let b = build_vocab(&texts, Level::Char, &cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.token(4), Some(" "));
    }

    #[test]
    fn empty_corpus_fails() {
        assert!(matches!(
            build_vocab::<&str>(&[], Level::Word, &cfg()),
            Err(Error::Build(_))
        ));
        assert!(build_vocab(&["   "], Level::Word, &cfg()).is_err());
    }

    #[test]
    fn framing_and_oov() {
        let texts = vec!["good book".to_string(); 16];
        let v = build_vocab(&texts, Level::Word, &cfg()).unwrap();
        assert_eq!(v.encode_text(""), vec![START, END]);
        let enc = v.encode_text("good strange book");
        assert_eq!(v.decode(&enc), "good <unk> book");
    }

    #[test]
    fn char_capacity_overflow_goes_to_unknown() {
        let small = EncoderConfig {
            char_onehot_len: 6,
            ..cfg()
        };
        let v = build_vocab(&["aaab"], Level::Char, &small).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.encode_text("abc"), vec![START, 4, 5, UNKNOWN, END]);
        let v = build_vocab(&["aaabbc"], Level::Char, &small).unwrap();
        assert_eq!(v.index_of("c"), None);
    }

    #[test]
    fn file_round_trip_with_awkward_characters() {
        let texts = vec!["line one\nline\ttwo \\ end".to_string()];
        let v = build_vocab(&texts, Level::Char, &cfg()).unwrap();
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
        assert!(v.to_text().starts_with("# revgen-vocab 1\tlevel=char\tsize="));
    }

    fn word_vocab() -> Vocabulary {
        let words = ["alpha", "beta", "gamma", "delta", "eps", ",", "."];
        let texts: Vec<String> = (0..16).map(|_| words.join(" ")).collect();
        build_vocab(&texts, Level::Word, &cfg()).unwrap()
    }

    #[test]
    fn bijection_over_non_reserved() {
        let v = word_vocab();
        for i in RESERVED.len()..v.len() {
            assert_eq!(v.index_of(v.token(i).unwrap()), Some(i));
        }
    }

    proptest! {
        #[test]
        fn word_round_trip(picks in proptest::collection::vec(4usize..11, 0..30)) {
            let v = word_vocab();
            let text = picks.iter().map(|&i| v.token(i).unwrap()).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(v.decode(&v.encode_text(&text)), text);
        }

        #[test]
        fn char_round_trip(text in "[a-z ,.!]{0,60}") {
            let corpus = "abcdefghijklmnopqrstuvwxyz ,.!";
            let v = build_vocab(&[corpus], Level::Char, &cfg()).unwrap();
            prop_assert_eq!(v.decode(&v.encode_text(&text)), text);
        }
    }
}
