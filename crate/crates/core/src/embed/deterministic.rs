//! Deterministic local embedding backend.
//!
//! Each whitespace token is hashed (FNV-1a, 64 bit) into a signed unit bump
//! in one of `dim` buckets; the bumps are summed and the result is
//! L2-normalized. Token overlap between two texts therefore shows up as
//! cosine similarity, which is all the pipeline's thresholds need. This is a
//! reproducibility substrate, not a semantic model.

use super::{EmbedError, EmbeddingBackend, EmbeddingVector};

#[derive(Debug, Clone)]
pub struct DeterministicBackend {
    dim: usize,
}

impl DeterministicBackend {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        DeterministicBackend { dim }
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut acc = vec![0.0f64; self.dim];
        let mut tokens = 0usize;
        for token in text.split_whitespace() {
            let hash = fnv1a64(token.as_bytes());
            let bucket = (hash % self.dim as u64) as usize;
            let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
            tokens += 1;
        }
        if tokens == 0 {
            return Err(EmbedError::EmptyTextInput);
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Token bumps cancelled exactly (possible for even-sized bags).
            // Fall back to a one-hot vector from the full text so embedding
            // stays total and deterministic.
            let bucket = (fnv1a64(text.as_bytes()) % self.dim as u64) as usize;
            acc[bucket] = 1.0;
            return EmbeddingVector::new(
                acc.into_iter().map(|v| v as f32).collect(),
            );
        }
        EmbeddingVector::new(acc.into_iter().map(|v| (v / norm) as f32).collect())
    }
}

impl EmbeddingBackend for DeterministicBackend {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn cache_namespace(&self) -> String {
        format!("deterministic-local/{}", self.dim)
    }
}

/// FNV-1a, 64 bit. Hand-rolled so hashes stay stable across toolchains.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in bytes {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
