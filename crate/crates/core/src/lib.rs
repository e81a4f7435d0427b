//! Disagreement detection from user-entity stances.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`corpus`] loads labelled comment-reply pairs and splits them.
//! 2. [`entities`] extracts named-entity mentions per post.
//! 3. [`embeddings`] supplies word vectors, sentence embeddings and cosine.
//! 4. [`stance`] scores an unsupervised user-to-entity stance from template
//!    similarity, mean-centres it and splits by sign.
//! 5. [`graph`] selects target entities and builds the weighted signed
//!    bipartite user-entity graph.
//! 6. [`sgcn`] runs weighted signed graph convolutions over that graph.
//! 7. [`model`] concatenates text vectors with author representations and
//!    trains the classifier head end to end.
//! 8. [`eval`] computes macro-F1, confusion matrices and ablation tables.

pub mod corpus;
pub mod embeddings;
pub mod entities;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod model;
pub mod sgcn;
pub mod stance;
pub mod synthetic;

pub use error::{Error, Result};
