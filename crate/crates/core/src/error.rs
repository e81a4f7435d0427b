use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embeddings::EmbedError;
use crate::entities::EntityError;
use crate::eval::EvalError;
use crate::graph::GraphError;
use crate::model::ModelError;
use crate::sgcn::SgcnError;
use crate::stance::StanceError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error wrapping each stage's error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Entity(#[from] EntityError),
    #[error(transparent)]
    Stance(#[from] StanceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sgcn(#[from] SgcnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True when the failure is numerical (zero norms, non-finite values)
    /// rather than a problem with the input data.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Embed(e) => e.is_numeric(),
            Error::Stance(StanceError::Embed(e)) => e.is_numeric(),
            Error::Model(e) => e.is_numeric(),
            Error::Sgcn(SgcnError::NonFinite) => true,
            _ => false,
        }
    }
}
