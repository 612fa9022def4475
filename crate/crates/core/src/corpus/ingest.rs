use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ReviewRecord;
use crate::encoding::Tokenizer;
use crate::error::{Error, Result};

/// Key names of the line-delimited input objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMapping {
    pub reviewer_id: String,
    pub item_id: String,
    pub rating: String,
    /// A two-element `[helpful, total]` array.
    pub helpful: String,
    pub text: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            reviewer_id: "reviewerID".into(),
            item_id: "asin".into(),
            rating: "overall".into(),
            helpful: "helpful".into(),
            text: "reviewText".into(),
        }
    }
}

impl FieldMapping {
    /// Load a mapping from a TOML file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub records: Vec<ReviewRecord>,
    /// Non-blank lines seen.
    pub total_lines: usize,
    pub malformed: usize,
}

fn parse_line(line: &str, map: &FieldMapping, tok: &Tokenizer) -> Option<ReviewRecord> {
    let v: Value = serde_json::from_str(line).ok()?;
    let obj = v.as_object()?;
    let id = |key: &str| match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    let user_id = id(&map.reviewer_id)?;
    let item_id = id(&map.item_id)?;
    let rating = obj.get(&map.rating)?.as_f64()?;
    if rating.fract() != 0.0 || !(1.0..=5.0).contains(&rating) {
        return None;
    }
    let votes = obj.get(&map.helpful)?.as_array()?;
    let [h, t] = votes.as_slice() else { return None };
    let (h, t) = (u32::try_from(h.as_u64()?).ok()?, u32::try_from(t.as_u64()?).ok()?);
    if h > t {
        return None;
    }
    let text = obj.get(&map.text)?.as_str()?.to_string();
    let mut r = ReviewRecord::new(user_id, item_id, rating as u8, h, t, text);
    r.word_count = tok.word_count(&r.text);
    Some(r)
}

/// Parse line-delimited review objects. Malformed lines are counted and
/// skipped; more than 10% malformed is an error.
pub fn ingest<R: BufRead>(source: R, map: &FieldMapping, tok: &Tokenizer) -> Result<IngestOutcome> {
    let mut records = Vec::new();
    let (mut total, mut malformed) = (0usize, 0usize);
    for line in source.lines() {
        let line = line.map_err(|e| Error::io("<review stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_line(&line, map, tok) {
            Some(r) => records.push(r),
            None => malformed += 1,
        }
    }
    if malformed * 10 > total {
        return Err(Error::Ingestion { malformed, total });
    }
    Ok(IngestOutcome {
        records,
        total_lines: total,
        malformed,
    })
}

pub fn ingest_path(path: &Path, map: &FieldMapping, tok: &Tokenizer) -> Result<IngestOutcome> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest(BufReader::new(f), map, tok)
}

/// Write records in the input format, plus a `helpful_ratio` field.
pub fn write_records(path: &Path, records: &[ReviewRecord], map: &FieldMapping) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        let mut obj = Map::new();
        obj.insert(map.reviewer_id.clone(), Value::from(r.user_id.clone()));
        obj.insert(map.item_id.clone(), Value::from(r.item_id.clone()));
        obj.insert(map.rating.clone(), Value::from(f64::from(r.rating)));
        obj.insert(
            map.helpful.clone(),
            Value::from(vec![r.helpful_votes, r.total_votes]),
        );
        obj.insert(map.text.clone(), Value::from(r.text.clone()));
        obj.insert("helpful_ratio".into(), Value::from(r.helpful_ratio));
        serde_json::to_writer(&mut w, &Value::Object(obj))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
