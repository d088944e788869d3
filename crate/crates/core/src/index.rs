//! Exact top-k cosine search over chunk embeddings, with a binary on-disk
//! format.
//!
//! Search is brute force over all entries; at desk-scale corpus sizes this
//! is both fast enough and exactly reproducible. The file layout is:
//! magic "KGRAGIDX", u32 version, u32 dim, u32 count, length-prefixed
//! embedder id, `count * dim` little-endian f32 values, then a
//! length-prefixed chunk_id table in entry order.

use std::collections::{HashMap, HashSet};
use std::io::{BufReader, Read};
use std::path::Path;

use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"KGRAGIDX";
const VERSION: u32 = 1;

/// An immutable embedding index over chunk ids.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    entries: Vec<(String, EmbeddingVector)>,
    by_id: HashMap<String, usize>,
    embedder_id: String,
    dim: usize,
}

impl VectorIndex {
    /// Embed `(chunk_id, text)` pairs in order. Duplicate chunk ids are
    /// rejected.
    pub fn build<'a>(
        items: impl IntoIterator<Item = (&'a str, &'a str)>,
        embedder: &dyn Embedder,
    ) -> Result<VectorIndex> {
        let mut entries = Vec::new();
        let mut by_id = HashMap::new();
        for (chunk_id, text) in items {
            if by_id.contains_key(chunk_id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate chunk_id `{chunk_id}` in index input"
                )));
            }
            by_id.insert(chunk_id.to_string(), entries.len());
            entries.push((chunk_id.to_string(), embedder.embed(text)?));
        }
        Ok(VectorIndex {
            entries,
            by_id,
            embedder_id: embedder.id().to_string(),
            dim: embedder.dim(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn chunk_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.by_id.contains_key(chunk_id)
    }

    /// Exact top-k by cosine similarity, descending, ties broken by
    /// chunk_id ascending. Returns `min(k, len)` results.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(String, f64)>> {
        self.search_filtered(query, k, |_| true)
    }

    /// Top-k restricted to `candidates`.
    pub fn search_subset(
        &self,
        query: &EmbeddingVector,
        k: usize,
        candidates: &HashSet<String>,
    ) -> Result<Vec<(String, f64)>> {
        self.search_filtered(query, k, |id| candidates.contains(id))
    }

    fn search_filtered(
        &self,
        query: &EmbeddingVector,
        k: usize,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Vec<(String, f64)>> {
        if k < 1 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "query dimension {} != index dimension {}",
                query.dim(),
                self.dim
            )));
        }
        let mut scored: Vec<(String, f64)> = self
            .entries
            .iter()
            .filter(|(id, _)| keep(id))
            .map(|(id, vec)| (id.clone(), query.cosine(vec)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        write_str(&mut out, &self.embedder_id);
        for (_, vector) in &self.entries {
            for &v in &vector.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for (chunk_id, _) in &self.entries {
            write_str(&mut out, chunk_id);
        }
        crate::fsio::atomic_write(path, &out)
    }

    pub fn load(path: &Path) -> Result<VectorIndex> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |msg: String| Error::parse(path, None, msg);

        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, path, "magic")?;
        if &magic != MAGIC {
            return Err(bad("bad magic; not an index file".into()));
        }
        let version = read_u32(&mut r, path, "version")?;
        if version != VERSION {
            return Err(bad(format!("unsupported index version {version}")));
        }
        let dim = read_u32(&mut r, path, "dim")? as usize;
        let count = read_u32(&mut r, path, "count")? as usize;
        let embedder_id = read_str(&mut r, path, "embedder_id")?;

        let mut vectors = Vec::with_capacity(count);
        let mut buf = vec![0u8; dim * 4];
        for i in 0..count {
            read_exact(&mut r, &mut buf, path, &format!("vector {i}"))?;
            let values = buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            vectors.push(EmbeddingVector { values });
        }
        let mut entries = Vec::with_capacity(count);
        let mut by_id = HashMap::with_capacity(count);
        for (i, vector) in vectors.into_iter().enumerate() {
            let chunk_id = read_str(&mut r, path, &format!("chunk_id {i}"))?;
            if by_id.insert(chunk_id.clone(), i).is_some() {
                return Err(bad(format!("duplicate chunk_id `{chunk_id}`")));
            }
            entries.push((chunk_id, vector));
        }
        Ok(VectorIndex {
            entries,
            by_id,
            embedder_id,
            dim,
        })
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::parse(path, Some(what.to_string()), e.to_string()))
}

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, path, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read, path: &Path, what: &str) -> Result<String> {
    let len = read_u32(r, path, what)? as usize;
    if len > 1 << 20 {
        return Err(Error::parse(
            path,
            Some(what.to_string()),
            format!("string length {len} out of range"),
        ));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf, path, what)?;
    String::from_utf8(buf).map_err(|e| Error::parse(path, Some(what.to_string()), e.to_string()))
}
