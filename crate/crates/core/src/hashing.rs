//! Content hashes used for provenance and stage skipping.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of several byte sources, each length-prefixed so concatenation is unambiguous.
pub fn sha256_parts<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// First 16 hex digits, for headers where the full digest is noise.
pub fn short(hash: &str) -> &str {
    &hash[..hash.len().min(16)]
}
