//! Text encoders producing one frozen vector per post.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::ModelError;
use crate::corpus::Post;
use crate::embeddings::{tokenize, WordVectors};

/// Token strings dropped before pooling a token-level cache entry.
pub const SPECIAL_TOKENS: [&str; 6] = ["[CLS]", "[SEP]", "[PAD]", "<s>", "</s>", "<pad>"];

pub trait TextEncoder {
    fn dim(&self) -> usize;
    fn encode(&self, post: &Post) -> Result<Vec<f64>, ModelError>;
}

/// Precomputed vectors keyed by post id.
///
/// Each jsonl line is either `{"post_id", "vector"}` (already pooled) or
/// `{"post_id", "tokens", "token_vectors"}`, which is mean-pooled here over
/// the non-special tokens.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextVectorCache {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheLine {
    post_id: String,
    #[serde(default)]
    vector: Option<Vec<f64>>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    token_vectors: Option<Vec<Vec<f64>>>,
}

/// Mean of the token vectors whose token is not special.
pub fn pool_tokens(tokens: &[String], token_vectors: &[Vec<f64>]) -> Result<Vec<f64>, String> {
    if tokens.len() != token_vectors.len() {
        return Err(format!("{} tokens but {} token vectors", tokens.len(), token_vectors.len()));
    }
    let kept: Vec<&Vec<f64>> = tokens
        .iter()
        .zip(token_vectors)
        .filter(|(t, _)| !SPECIAL_TOKENS.contains(&t.as_str()))
        .map(|(_, v)| v)
        .collect();
    let dim = token_vectors.first().map_or(0, Vec::len);
    if token_vectors.iter().any(|v| v.len() != dim) {
        return Err("token vectors of different lengths".into());
    }
    crate::embeddings::mean_of(kept.iter().map(|v| v.as_slice()), dim).ok_or_else(|| "no non-special tokens to pool".into())
}

impl TextVectorCache {
    pub fn new(dim: usize) -> Self {
        Self { dim, vectors: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, post_id: &str, vector: Vec<f64>) -> Result<(), ModelError> {
        if vector.len() != self.dim {
            return Err(ModelError::Dimension(format!(
                "vector for {post_id:?} has length {}, cache dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite(format!("cached vector for {post_id:?}")));
        }
        self.vectors.insert(post_id.to_string(), vector);
        Ok(())
    }

    pub fn get(&self, post_id: &str) -> Option<&[f64]> {
        self.vectors.get(post_id).map(Vec::as_slice)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ModelError> {
        let mut cache: Option<Self> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fail = |message: String| ModelError::Format { line: i + 1, message };
            let row: CacheLine = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
            let vector = match (row.vector, row.tokens, row.token_vectors) {
                (Some(v), None, None) => v,
                (None, Some(t), Some(tv)) => pool_tokens(&t, &tv).map_err(fail)?,
                _ => return Err(fail("expected either vector or tokens with token_vectors".into())),
            };
            let c = cache.get_or_insert_with(|| Self::new(vector.len()));
            if c.vectors.contains_key(&row.post_id) {
                return Err(fail(format!("duplicate post_id {:?}", row.post_id)));
            }
            c.insert(&row.post_id, vector).map_err(|e| fail(e.to_string()))?;
        }
        cache.ok_or(ModelError::Format { line: 0, message: "empty text vector cache".into() })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&text)
    }

    /// Pooled form, sorted by post id.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.vectors {
            out.push_str(&serde_json::json!({ "post_id": id, "vector": v }).to_string());
            out.push('\n');
        }
        out
    }
}

impl TextEncoder for TextVectorCache {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, post: &Post) -> Result<Vec<f64>, ModelError> {
        self.get(&post.post_id)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| ModelError::CacheMiss(post.post_id.clone()))
    }
}

/// Mean of in-vocabulary word vectors; all-zero when no token is known.
#[derive(Debug, Clone, Copy)]
pub struct MeanWordEncoder<'a> {
    vectors: &'a WordVectors,
}

impl<'a> MeanWordEncoder<'a> {
    pub fn new(vectors: &'a WordVectors) -> Self {
        Self { vectors }
    }
}

impl TextEncoder for MeanWordEncoder<'_> {
    fn dim(&self) -> usize {
        self.vectors.dim()
    }

    fn encode(&self, post: &Post) -> Result<Vec<f64>, ModelError> {
        let tokens = tokenize(&post.text);
        let rows: Vec<&[f64]> = tokens.iter().filter_map(|t| self.vectors.get(t)).collect();
        Ok(crate::embeddings::mean_of(rows, self.dim()).unwrap_or_else(|| vec![0.0; self.dim()]))
    }
}
