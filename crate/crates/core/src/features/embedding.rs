use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::FeatureError;
use crate::text::{char_slice, word_tokens, CharSpan};

/// Source of contextual vectors for mentions and documents.
///
/// Implementations must be deterministic and return vectors of
/// [`dimension`](EmbeddingProvider::dimension) entries on every call.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Vector for the characters `span` of `text`.
    fn embed_span(&self, text: &str, span: CharSpan) -> Vec<f64>;

    fn embed_document(&self, text: &str) -> Vec<f64>;
}

/// Seeded hashed bag-of-words. Lowercased word tokens (plus character
/// 4-grams for mention spans) are hashed into `dimension` buckets, counted,
/// and L2-normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedBowProvider {
    dimension: usize,
    seed: u64,
}

pub const MIN_PROVIDER_DIMENSION: usize = 16;
const CHAR_NGRAM: usize = 4;

impl HashedBowProvider {
    pub fn new(dimension: usize, seed: u64) -> Result<Self, FeatureError> {
        if dimension < MIN_PROVIDER_DIMENSION {
            return Err(FeatureError::InvalidDimension(dimension));
        }
        Ok(HashedBowProvider { dimension, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn bucket(&self, namespace: u8, token: &str) -> usize {
        let mut key = Vec::with_capacity(token.len() + 2);
        key.push(namespace);
        key.push(0);
        key.extend_from_slice(token.as_bytes());
        (xxh3_64_with_seed(&key, self.seed) % self.dimension as u64) as usize
    }

    fn add_words(&self, text: &str, counts: &mut [f64]) {
        for tok in word_tokens(text) {
            counts[self.bucket(b'w', &tok.text.to_lowercase())] += 1.0;
        }
    }
}

impl EmbeddingProvider for HashedBowProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_span(&self, text: &str, span: CharSpan) -> Vec<f64> {
        let mut counts = vec![0.0; self.dimension];
        let surface = char_slice(text, span);
        self.add_words(surface, &mut counts);
        let squashed = surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if !squashed.is_empty() {
            let padded: Vec<char> = format!("<{squashed}>").chars().collect();
            for gram in padded.windows(CHAR_NGRAM.min(padded.len())) {
                let g: String = gram.iter().collect();
                counts[self.bucket(b'c', &g)] += 1.0;
            }
        }
        l2_normalize(counts)
    }

    fn embed_document(&self, text: &str) -> Vec<f64> {
        let mut counts = vec![0.0; self.dimension];
        self.add_words(text, &mut counts);
        l2_normalize(counts)
    }
}

fn l2_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
