//! Tab-separated tables with a provenance comment line.

use std::path::Path;

use crate::error::{Error, Result};

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match it.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(o) => out.push(o),
            None => out.push('\\'),
        }
    }
    out
}

/// First line of every emitted table.
pub fn provenance(config_hash: &str, corpus_hash: &str) -> String {
    format!("# config {config_hash} corpus {corpus_hash}\n")
}

/// Parse a provenance line into `(config hash, corpus hash)`.
pub fn parse_provenance(line: &str) -> Option<(String, String)> {
    let mut f = line.trim_end().split(' ');
    match (f.next(), f.next(), f.next(), f.next(), f.next(), f.next()) {
        (Some("#"), Some("config"), Some(c), Some("corpus"), Some(k), None) => Some((c.into(), k.into())),
        _ => None,
    }
}

pub fn write(path: &Path, provenance: &str, body: &str) -> Result<()> {
    std::fs::write(path, format!("{provenance}{body}")).map_err(|e| Error::io(path, e))
}

/// Provenance hashes, header columns and rows of one table.
pub type Table = ((String, String), Vec<String>, Vec<Vec<String>>);

pub fn read(path: &Path) -> Result<Table> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = s.lines();
    let prov = lines
        .next()
        .and_then(parse_provenance)
        .ok_or_else(|| Error::Format(format!("{}: missing provenance line", path.display())))?;
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: missing header row", path.display())))?
        .split('\t')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split('\t').map(unescape).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    if let Some(bad) = rows.iter().position(|r| r.len() != header.len()) {
        return Err(Error::Format(format!(
            "{}: row {} has {} fields, header has {}",
            path.display(),
            bad + 1,
            rows[bad].len(),
            header.len()
        )));
    }
    Ok((prov, header, rows))
}
