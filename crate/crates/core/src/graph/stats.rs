use serde::{Deserialize, Serialize};

use super::{GraphError, SignedBipartiteGraph};

/// Size, density, degree and common-neighbour summary of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_users: usize,
    pub n_entities: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub density: f64,
    pub avg_degree_users: f64,
    pub avg_degree_entities: f64,
    pub avg_common_neighbors_users: f64,
    pub avg_common_neighbors_entities: f64,
}

/// Mean over unordered same-side node pairs of the number of shared
/// neighbours. Each opposite-side node of degree d is shared by d(d−1)/2
/// such pairs, so the total is a sum over opposite-side degrees.
fn avg_common_neighbours(n_side: usize, opposite_degrees: &[usize]) -> f64 {
    if n_side < 2 {
        return 0.0;
    }
    let shared: f64 = opposite_degrees
        .iter()
        .map(|&d| (d * d.saturating_sub(1)) as f64 / 2.0)
        .sum();
    shared / ((n_side * (n_side - 1)) as f64 / 2.0)
}

/// Signs are ignored for adjacency.
pub fn graph_stats(g: &SignedBipartiteGraph) -> Result<GraphStats, GraphError> {
    if g.n_users() == 0 {
        return Err(GraphError::EmptySide("user"));
    }
    if g.n_entities() == 0 {
        return Err(GraphError::EmptySide("entity"));
    }
    let mut user_deg = vec![0usize; g.n_users()];
    let mut entity_deg = vec![0usize; g.n_entities()];
    for e in g.pos_edges().iter().chain(g.neg_edges()) {
        user_deg[e.user] += 1;
        entity_deg[e.entity] += 1;
    }
    let n_edges = (g.pos_edges().len() + g.neg_edges().len()) as f64;
    Ok(GraphStats {
        n_users: g.n_users(),
        n_entities: g.n_entities(),
        n_pos: g.pos_edges().len(),
        n_neg: g.neg_edges().len(),
        density: n_edges / (g.n_users() * g.n_entities()) as f64,
        avg_degree_users: n_edges / g.n_users() as f64,
        avg_degree_entities: n_edges / g.n_entities() as f64,
        avg_common_neighbors_users: avg_common_neighbours(g.n_users(), &entity_deg),
        avg_common_neighbors_entities: avg_common_neighbours(g.n_entities(), &user_deg),
    })
}
