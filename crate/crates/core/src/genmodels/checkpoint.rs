//! Checkpoints: one JSON header line followed by binary parameter records.
//!
//! Each record is `u32 name length, name bytes, u32 rank, u64 dims…,
//! f32 values…`, all little-endian. Values round-trip bit for bit.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Generator, ModelSpec};
use crate::error::{Error, Result};
use crate::numeric::{ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "revgen-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub vocab_hash: String,
    /// Hash of the experiment configuration that produced the checkpoint.
    #[serde(default)]
    pub config_hash: String,
    pub epoch: usize,
    pub validation_loss: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    spec: ModelSpec,
    #[serde(flatten)]
    meta: CheckpointMeta,
    parameters: usize,
}

pub fn save_checkpoint(path: &Path, model: &Generator<f32>, meta: &CheckpointMeta) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    let header = Header {
        format: FORMAT.into(),
        version: CHECKPOINT_VERSION,
        spec: model.spec().clone(),
        meta: meta.clone(),
        parameters: model.params.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for p in model.params.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name).map_err(io)?;
        let shape = p.tensor.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io)?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
        }
        for v in p.tensor.values() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn load_checkpoint(path: &Path) -> Result<(Generator<f32>, CheckpointMeta)> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut line = String::new();
    r.read_line(&mut line).map_err(io)?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Format(format!("{}: bad checkpoint header: {e}", path.display())))?;
    if header.format != FORMAT || header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported checkpoint {} v{}",
            path.display(),
            header.format,
            header.version
        )));
    }
    let mut store = ParamStore::new();
    for _ in 0..header.parameters {
        let n = read_u32(&mut r).map_err(io)? as usize;
        let mut name = vec![0u8; n];
        r.read_exact(&mut name).map_err(io)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let rank = read_u32(&mut r).map_err(io)? as usize;
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(io)?;
        let len: usize = shape.iter().product();
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes).map_err(io)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        store.add(name, Tensor::new(shape, values)?)?;
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(io)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{}: trailing bytes after parameters", path.display())));
    }
    Ok((Generator::from_params(header.spec, store)?, header.meta))
}
