//! Token vectors, sentence embeddings and cosine similarity.

mod sentence;
mod skipgram;
mod text;
mod vectors;

pub use sentence::{MeanWordEmbedder, SentenceCache, SentenceEmbedder};
pub use skipgram::{train_word_vectors, SkipGramConfig, TrainedVectors};
pub use text::{sentence_spans, split_sentences, tokenize};
pub use vectors::WordVectors;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cosine of a zero-norm vector")]
    ZeroNorm,
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite component in vector for {0:?}")]
    NonFinite(String),
    #[error("sentence not present in the embedding cache: {0:?}")]
    CacheMiss(String),
    #[error("no in-vocabulary tokens in {0:?}")]
    AllOutOfVocabulary(String),
    #[error("empty vocabulary after min_count filtering")]
    EmptyVocabulary,
    #[error("invalid skip-gram config: {0}")]
    BadConfig(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EmbedError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, EmbedError::ZeroNorm | EmbedError::NonFinite(_))
    }
}

/// Cosine similarity `a·b / (‖a‖‖b‖)`, clamped into `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::LengthMismatch(a.len(), b.len()));
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    let c = ab / (aa * bb).sqrt();
    if !c.is_finite() {
        return Err(EmbedError::NonFinite("cosine".into()));
    }
    Ok(c.clamp(-1.0, 1.0))
}

/// Component-wise mean of equally long vectors; `None` when `rows` is empty.
pub(crate) fn mean_of<'a, I>(rows: I, dim: usize) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for row in rows {
        crate::linalg::axpy(&mut acc, 1.0, row);
        n += 1;
    }
    if n == 0 {
        return None;
    }
    acc.iter_mut().for_each(|x| *x /= n as f64);
    Some(acc)
}
