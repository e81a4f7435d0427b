use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mean_of, tokenize, EmbedError, WordVectors};

/// Maps a sentence to a fixed-width vector. Implementations must return
/// bitwise-identical output for identical input.
pub trait SentenceEmbedder {
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &str) -> Result<Vec<f64>, EmbedError>;
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    text: String,
    vector: Vec<f64>,
}

/// Sentence vectors exported offline, keyed by the exact sentence string.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentenceCache {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl SentenceCache {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, text: &str, vector: Vec<f64>) -> Result<(), EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::LengthMismatch(vector.len(), self.dim));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite(text.to_string()));
        }
        self.table.insert(text.to_string(), vector);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Parses `{"text": str, "vector": [float, …]}` lines. The first line fixes
    /// the dimension; a sentence repeated with a different vector is an error.
    pub fn from_jsonl(text: &str) -> Result<Self, EmbedError> {
        let mut cache: Option<SentenceCache> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let row: CacheLine = serde_json::from_str(line).map_err(|e| EmbedError::Format {
                line: line_no,
                message: e.to_string(),
            })?;
            let cache = cache.get_or_insert_with(|| SentenceCache::new(row.vector.len()));
            if let Some(existing) = cache.table.get(&row.text) {
                if *existing != row.vector {
                    return Err(EmbedError::Format {
                        line: line_no,
                        message: format!("conflicting vectors for {:?}", row.text),
                    });
                }
                continue;
            }
            cache.insert(&row.text, row.vector).map_err(|e| EmbedError::Format {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        Ok(cache.unwrap_or_default())
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path).map_err(|e| EmbedError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_jsonl(&text)
    }

    /// Sorted by sentence so the output is reproducible.
    pub fn to_jsonl(&self) -> String {
        let mut keys: Vec<&String> = self.table.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            let line = CacheLine {
                text: k.clone(),
                vector: self.table[k].clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("cache line serialises"));
            out.push('\n');
        }
        out
    }
}

impl SentenceEmbedder for SentenceCache {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Result<Vec<f64>, EmbedError> {
        self.table
            .get(sentence)
            .cloned()
            .ok_or_else(|| EmbedError::CacheMiss(sentence.to_string()))
    }
}

/// Mean of the in-vocabulary token vectors of a sentence.
#[derive(Debug, Clone, Copy)]
pub struct MeanWordEmbedder<'a> {
    vectors: &'a WordVectors,
}

impl<'a> MeanWordEmbedder<'a> {
    pub fn new(vectors: &'a WordVectors) -> Self {
        Self { vectors }
    }
}

impl SentenceEmbedder for MeanWordEmbedder<'_> {
    fn dim(&self) -> usize {
        self.vectors.dim()
    }

    fn embed(&self, sentence: &str) -> Result<Vec<f64>, EmbedError> {
        let tokens = tokenize(sentence);
        mean_of(
            tokens.iter().filter_map(|t| self.vectors.get(t)),
            self.vectors.dim(),
        )
        .ok_or_else(|| EmbedError::AllOutOfVocabulary(sentence.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_lookup_is_exact() {
        let cache = SentenceCache::from_jsonl(
            "{\"text\":\"I am for brexit\",\"vector\":[0.25,-1.5]}\n{\"text\":\"Leave.\",\"vector\":[1e-3,2]}\n",
        )
        .unwrap();
        assert_eq!(cache.embed("I am for brexit").unwrap(), vec![0.25, -1.5]);
        assert!(matches!(cache.embed("i am for brexit"), Err(EmbedError::CacheMiss(_))));
        let round = SentenceCache::from_jsonl(&cache.to_jsonl()).unwrap();
        assert_eq!(round, cache);
    }

    #[test]
    fn cache_validation() {
        assert!(SentenceCache::from_jsonl("{\"text\":\"a\",\"vector\":[1]}\n{\"text\":\"b\",\"vector\":[1,2]}").is_err());
        assert!(SentenceCache::from_jsonl("{\"text\":\"a\",\"vector\":[1]}\n{\"text\":\"a\",\"vector\":[2]}").is_err());
        assert!(SentenceCache::from_jsonl("{\"text\":\"a\",\"vector\":[1]}\n{\"text\":\"a\",\"vector\":[1]}").is_ok());
        assert!(SentenceCache::from_jsonl("not json").is_err());
    }

    #[test]
    fn mean_word_fallback() {
        let mut v = WordVectors::new(2);
        v.insert("leave", &[1.0, 0.0]).unwrap();
        v.insert("remain", &[0.0, 1.0]).unwrap();
        let e = MeanWordEmbedder::new(&v);
        assert_eq!(e.embed("Leave!").unwrap(), vec![1.0, 0.0]);
        assert_eq!(e.embed("leave remain unknown").unwrap(), vec![0.5, 0.5]);
        assert!(matches!(e.embed("nothing known"), Err(EmbedError::AllOutOfVocabulary(_))));
        assert_eq!(e.embed("leave remain").unwrap(), e.embed("leave remain").unwrap());
    }
}
