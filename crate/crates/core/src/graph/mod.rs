//! The weighted signed bipartite user-entity graph and everything computed
//! directly from it.
//!
//! Node indices are global: users occupy `0..n_users`, entities follow at
//! `n_users..n_users + n_entities`. Both lists are sorted so the indices, and
//! therefore every weight matrix trained on them, are reproducible.

mod gexf;
mod kendall;
mod select;
mod stats;

pub use gexf::{export_gexf, to_gexf, SignFilter};
pub use kendall::kendall_tau;
pub use select::{
    select_target_entities, sensitivity_scan, subreddit_entity_matrix, SensitivityCell, SimilarityMatrix,
    TargetSelection,
};
pub use stats::{graph_stats, GraphStats};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbedError;
use crate::entities::EntityKey;
use crate::stance::StanceRecord;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate edge between user {user:?} and entity {entity:?}")]
    DuplicateEdge { user: String, entity: String },
    #[error("edge endpoint out of range: user {user}, entity {entity}")]
    BadEndpoint { user: usize, entity: usize },
    #[error("edge weight must be finite and non-negative, got {0}")]
    BadWeight(f64),
    #[error("graph has no {0} nodes")]
    EmptySide(&'static str),
    #[error("kendall tau needs equal lengths of at least 2 (got {0} and {1})")]
    TauLength(usize, usize),
    #[error("kendall tau is undefined for a constant sequence")]
    TauConstant,
    #[error("no vector for {0:?}")]
    MissingVector(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub user: usize,
    /// index into `entities`, not a global node index
    pub entity: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct SignedBipartiteGraph {
    users: Vec<String>,
    entities: Vec<EntityKey>,
    pos_edges: Vec<Edge>,
    neg_edges: Vec<Edge>,
    #[serde(skip)]
    user_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    users: Vec<String>,
    entities: Vec<EntityKey>,
    pos_edges: Vec<(usize, usize, f64)>,
    neg_edges: Vec<(usize, usize, f64)>,
}

impl TryFrom<RawGraph> for SignedBipartiteGraph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, GraphError> {
        let edges = |v: Vec<(usize, usize, f64)>| {
            v.into_iter()
                .map(|(user, entity, weight)| Edge { user, entity, weight })
                .collect()
        };
        SignedBipartiteGraph::new(raw.users, raw.entities, edges(raw.pos_edges), edges(raw.neg_edges))
    }
}

impl From<SignedBipartiteGraph> for RawGraph {
    fn from(g: SignedBipartiteGraph) -> Self {
        let edges = |v: &[Edge]| v.iter().map(|e| (e.user, e.entity, e.weight)).collect();
        RawGraph {
            pos_edges: edges(&g.pos_edges),
            neg_edges: edges(&g.neg_edges),
            users: g.users,
            entities: g.entities,
        }
    }
}

impl SignedBipartiteGraph {
    /// Validates endpoints, weights and at-most-one-edge per (user, entity).
    /// Weights are magnitudes; the sign lives in which list an edge is in.
    pub fn new(
        users: Vec<String>,
        entities: Vec<EntityKey>,
        pos_edges: Vec<Edge>,
        neg_edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        for e in pos_edges.iter().chain(&neg_edges) {
            if e.user >= users.len() || e.entity >= entities.len() {
                return Err(GraphError::BadEndpoint {
                    user: e.user,
                    entity: e.entity,
                });
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(GraphError::BadWeight(e.weight));
            }
            if !seen.insert((e.user, e.entity)) {
                return Err(GraphError::DuplicateEdge {
                    user: users[e.user].clone(),
                    entity: entities[e.entity].to_string(),
                });
            }
        }
        let user_index = users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        Ok(Self {
            users,
            entities,
            pos_edges,
            neg_edges,
            user_index,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), Vec::new(), Vec::new()).expect("empty graph is valid")
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn entities(&self) -> &[EntityKey] {
        &self.entities
    }

    pub fn pos_edges(&self) -> &[Edge] {
        &self.pos_edges
    }

    pub fn neg_edges(&self) -> &[Edge] {
        &self.neg_edges
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.users.len() + self.entities.len()
    }

    /// Global node index of a user.
    pub fn user_node(&self, user: &str) -> Option<usize> {
        self.user_index.get(user).copied()
    }

    /// Global node index of the entity at position `entity`.
    pub fn entity_node(&self, entity: usize) -> usize {
        self.users.len() + entity
    }

    pub fn edges(&self, sign: Sign) -> &[Edge] {
        match sign {
            Sign::Positive => &self.pos_edges,
            Sign::Negative => &self.neg_edges,
        }
    }

    /// Per-node neighbour lists `(neighbour node, weight)` for one sign,
    /// indexed by global node id. Edges are undirected.
    pub fn neighbours(&self, sign: Sign) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in self.edges(sign) {
            let u = e.user;
            let a = self.entity_node(e.entity);
            adj[u].push((a, e.weight));
            adj[a].push((u, e.weight));
        }
        adj
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        crate::io::read_json(path)
    }
}

/// Builds the graph from centred, sign-split stance records, keeping only
/// target entities. Edge weight is `|centered|`.
pub fn build_graph(
    positive: &[StanceRecord],
    negative: &[StanceRecord],
    targets: &HashSet<EntityKey>,
) -> Result<SignedBipartiteGraph, GraphError> {
    let keep = |r: &&StanceRecord| targets.contains(&r.entity);
    let users: BTreeSet<&str> = positive
        .iter()
        .chain(negative)
        .filter(keep)
        .map(|r| r.user.as_str())
        .collect();
    let entities: BTreeSet<&EntityKey> = positive.iter().chain(negative).filter(keep).map(|r| &r.entity).collect();
    let user_ix: HashMap<&str, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let entity_ix: HashMap<&EntityKey, usize> = entities.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let to_edges = |records: &[StanceRecord]| {
        let mut edges: Vec<Edge> = records
            .iter()
            .filter(keep)
            .map(|r| Edge {
                user: user_ix[r.user.as_str()],
                entity: entity_ix[&r.entity],
                weight: r.centered.abs(),
            })
            .collect();
        edges.sort_by_key(|e| (e.user, e.entity));
        edges
    };
    SignedBipartiteGraph::new(
        users.into_iter().map(String::from).collect(),
        entities.into_iter().cloned().collect(),
        to_edges(positive),
        to_edges(negative),
    )
}
