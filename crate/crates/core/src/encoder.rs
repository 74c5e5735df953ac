//! Text encoders for implicit parameter matching.

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Maps text to a fixed-length vector comparable by cosine distance.
/// Implementations must be deterministic and safe for concurrent reads.
pub trait Encoder: Send + Sync {
    fn encode(&self, text: &str) -> Vec<f32>;

    fn encode_batch(&self, texts: &[&str]) -> Vec<Vec<f32>> {
        texts.iter().map(|t| self.encode(t)).collect()
    }
}

pub fn cosine_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        dot += (*x as f64) * (*y as f64);
        na += (*x as f64) * (*x as f64);
        nb += (*y as f64) * (*y as f64);
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na.sqrt() * nb.sqrt())
}

/// FNV-1a, used for stable feature hashing across runs and platforms.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

const DIM: usize = 512;
const TRIGRAM_BUCKETS: usize = 256;

/// Hashed character-trigram + token TF-IDF encoder (512 dimensions).
/// Without fitted document frequencies all tokens weigh equally.
#[derive(Default)]
pub struct LexicalEncoder {
    idf: Option<HashMap<String, f32>>,
}

impl LexicalEncoder {
    /// Fit inverse document frequencies on a corpus of texts.
    pub fn with_idf<'a>(texts: impl Iterator<Item = &'a str>) -> Self {
        let mut df: HashMap<String, u32> = HashMap::new();
        let mut n = 0u32;
        for text in texts {
            n += 1;
            // same normalization as encode()
            let lower = text.to_lowercase().replace('_', " ");
            let mut seen = std::collections::HashSet::new();
            for tok in tokenize(&lower) {
                if seen.insert(tok.clone()) {
                    *df.entry(tok).or_insert(0) += 1;
                }
            }
        }
        let idf = df
            .into_iter()
            .map(|(tok, d)| (tok, (((n + 1) as f32) / ((d + 1) as f32)).ln() + 1.0))
            .collect();
        LexicalEncoder { idf: Some(idf) }
    }

    fn token_weight(&self, token: &str) -> f32 {
        match &self.idf {
            Some(idf) => idf.get(token).copied().unwrap_or(1.0),
            None => 1.0,
        }
    }
}

impl Encoder for LexicalEncoder {
    fn encode(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f32; DIM];
        // identifiers and their spelled-out forms should encode alike
        let lower = text.to_lowercase().replace('_', " ");
        let chars: Vec<char> = lower.chars().collect();
        let mut buf = String::with_capacity(12);
        for w in chars.windows(3) {
            buf.clear();
            buf.extend(w);
            let bucket = (fnv1a(buf.as_bytes()) as usize) % TRIGRAM_BUCKETS;
            v[bucket] += 1.0;
        }
        for tok in tokenize(&lower) {
            let bucket = TRIGRAM_BUCKETS + (fnv1a(tok.as_bytes()) as usize) % (DIM - TRIGRAM_BUCKETS);
            v[bucket] += self.token_weight(&tok);
        }
        v
    }
}

/// Client for an external encoder service speaking
/// `POST /encode {"texts": [..]} -> {"vectors": [[..]]}`.
/// Falls back to the wrapped encoder on transport errors.
pub struct RemoteEncoder {
    url: String,
    client: reqwest::blocking::Client,
    fallback: Box<dyn Encoder>,
}

#[derive(serde::Serialize)]
struct EncodeRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(serde::Deserialize)]
struct EncodeResponse {
    vectors: Vec<Vec<f32>>,
}

impl RemoteEncoder {
    pub fn new(url: impl Into<String>, timeout: std::time::Duration, fallback: Box<dyn Encoder>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(RemoteEncoder { url: url.into(), client, fallback })
    }

    fn request(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f32>>, String> {
        let endpoint = format!("{}/encode", self.url.trim_end_matches('/'));
        let resp: EncodeResponse = self
            .client
            .post(endpoint)
            .json(&EncodeRequest { texts })
            .send()
            .map_err(|e| e.to_string())?
            .error_for_status()
            .map_err(|e| e.to_string())?
            .json()
            .map_err(|e| e.to_string())?;
        if resp.vectors.len() != texts.len() {
            return Err(format!("expected {} vectors, got {}", texts.len(), resp.vectors.len()));
        }
        Ok(resp.vectors)
    }
}

impl Encoder for RemoteEncoder {
    fn encode(&self, text: &str) -> Vec<f32> {
        self.encode_batch(&[text]).pop().unwrap()
    }

    fn encode_batch(&self, texts: &[&str]) -> Vec<Vec<f32>> {
        match self.request(texts) {
            Ok(vectors) => vectors,
            Err(e) => {
                log::warn!("encoder service at {} failed ({e}); using fallback", self.url);
                self.fallback.encode_batch(texts)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_is_deterministic_and_fixed_length() {
        let enc = LexicalEncoder::default();
        let a = enc.encode("increase the buffer pool size");
        let b = enc.encode("increase the buffer pool size");
        assert_eq!(a, b);
        assert_eq!(a.len(), 512);
        assert_eq!(enc.encode("x").len(), 512);
    }

    #[test]
    fn identical_text_has_zero_distance() {
        let enc = LexicalEncoder::default();
        let a = enc.encode("shared buffers");
        assert!(cosine_distance(&a, &a) < 1e-9);
    }

    #[test]
    fn related_text_is_closer_than_unrelated() {
        let enc = LexicalEncoder::default();
        let query = enc.encode("buffer pool size");
        let related = enc.encode("innodb buffer pool size");
        let unrelated = enc.encode("max connections");
        assert!(
            cosine_distance(&query, &related) < cosine_distance(&query, &unrelated),
            "related text should be closer"
        );
    }

    #[test]
    fn zero_vector_distance_is_one() {
        let enc = LexicalEncoder::default();
        let empty = enc.encode("");
        let other = enc.encode("words");
        assert_eq!(cosine_distance(&empty, &other), 1.0);
    }
}
