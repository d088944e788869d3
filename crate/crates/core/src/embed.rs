//! Deterministic feature-hashing text embeddings.
//!
//! The builtin embedder hashes lowercase unigrams and adjacent bigrams with
//! 64-bit FNV-1a into 384 signed buckets and L2-normalizes the result. It
//! is model-free, so identical text always embeds to identical bytes.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Embedding width shared by the builtin embedder and the index format.
pub const EMBED_DIM: usize = 384;

/// Identifier stored in indexes built with [`HashEmbedder`].
pub const BUILTIN_EMBEDDER_ID: &str = "builtin:fnv1a64:384";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// A unit-norm embedding; zero-token inputs embed to the zero vector, which
/// is exempt from the norm invariant and never matches anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Dot product in f64. Vectors are unit norm, so this is the cosine.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum()
    }

    /// Scale to unit norm in place; the zero vector is left unchanged.
    pub fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v = (*v as f64 / norm) as f32;
            }
        }
    }
}

/// Anything that can turn text into a fixed-width embedding.
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// The builtin signed feature-hashing embedder.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

impl HashEmbedder {
    /// Bucket and sign for one feature string.
    pub fn feature_slot(feature: &str) -> (usize, f32) {
        let hash = fnv1a64(feature.as_bytes());
        let bucket = (hash % EMBED_DIM as u64) as usize;
        let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        BUILTIN_EMBEDDER_ID
    }

    fn dim(&self) -> usize {
        EMBED_DIM
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let lowered = text.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        let mut values = vec![0.0f32; EMBED_DIM];
        for token in &tokens {
            let (bucket, sign) = HashEmbedder::feature_slot(token);
            values[bucket] += sign;
        }
        for pair in tokens.windows(2) {
            let bigram = format!("{} {}", pair[0], pair[1]);
            let (bucket, sign) = HashEmbedder::feature_slot(&bigram);
            values[bucket] += sign;
        }
        let mut vector = EmbeddingVector { values };
        vector.normalize();
        Ok(vector)
    }
}
