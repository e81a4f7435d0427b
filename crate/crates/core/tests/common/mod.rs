//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code paths.
#![allow(dead_code)]

use rand::Rng;
use stentconv::entities::EntityKey;
use stentconv::graph::{Edge, SignedBipartiteGraph};
use stentconv::linalg::Matrix;
use stentconv::sgcn::{Activation, Aggregation, SgcnConfig, SgcnParams};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            for j in 0..m {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

fn transpose(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn hcat(blocks: &[&Dense]) -> Dense {
    (0..blocks[0].len())
        .map(|i| blocks.iter().flat_map(|b| b[i].iter().copied()).collect())
        .collect()
}

/// Row-normalised signed adjacency: `A[i][j] = w_ij / |N(i)|`, symmetric
/// edge set, nodes ordered users then entities.
pub fn masked_adjacency(g: &SignedBipartiteGraph, positive: bool, weighted: bool) -> Dense {
    let n = g.n_users() + g.n_entities();
    let mut a = vec![vec![0.0; n]; n];
    let edges = if positive { g.pos_edges() } else { g.neg_edges() };
    for e in edges {
        let u = e.user;
        let v = g.n_users() + e.entity;
        let w = if weighted { e.weight } else { 1.0 };
        a[u][v] = w;
        a[v][u] = w;
    }
    let mut degree = vec![0usize; n];
    for e in edges {
        degree[e.user] += 1;
        degree[g.n_users() + e.entity] += 1;
    }
    for (i, row) in a.iter_mut().enumerate() {
        if degree[i] > 0 {
            row.iter_mut().for_each(|x| *x /= degree[i] as f64);
        }
    }
    a
}

fn act(m: Dense, a: Activation) -> Dense {
    match a {
        Activation::Tanh => m.into_iter().map(|r| r.into_iter().map(f64::tanh).collect()).collect(),
        Activation::Identity => m,
    }
}

/// Dense masked-matrix SGCN forward; returns `[H_B | H_U]` per node.
pub fn dense_sgcn(g: &SignedBipartiteGraph, config: &SgcnConfig, params: &SgcnParams, x: &Dense) -> Dense {
    let ap = masked_adjacency(g, true, config.weighted);
    let an = masked_adjacency(g, false, config.weighted);
    let l1 = &params.layers[0];
    let mut hb = act(matmul(&hcat(&[&matmul(&ap, x), x]), &transpose(&to_dense(&l1.w_b))), config.activation);
    let mut hu = act(matmul(&hcat(&[&matmul(&an, x), x]), &transpose(&to_dense(&l1.w_u))), config.activation);
    for layer in &params.layers[1..] {
        let wb = transpose(&to_dense(&layer.w_b));
        let wu = transpose(&to_dense(&layer.w_u));
        let (zb, zu) = match config.aggregation {
            Aggregation::Direct => (hcat(&[&matmul(&ap, &hb), &hb]), hcat(&[&matmul(&an, &hu), &hu])),
            Aggregation::Balance => (
                hcat(&[&matmul(&ap, &hb), &matmul(&an, &hu), &hb]),
                hcat(&[&matmul(&ap, &hu), &matmul(&an, &hb), &hu]),
            ),
        };
        hb = act(matmul(&zb, &wb), config.activation);
        hu = act(matmul(&zu, &wu), config.activation);
    }
    hcat(&[&hb, &hu])
}

/// Random signed bipartite graph with at most `max_nodes` nodes; each
/// user-entity slot is empty, positive or negative.
pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> SignedBipartiteGraph {
    let n_users = rng.gen_range(1..max_nodes);
    let n_entities = rng.gen_range(1..=max_nodes - n_users);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for u in 0..n_users {
        for e in 0..n_entities {
            let weight = rng.gen_range(0.01..3.0);
            match rng.gen_range(0..3) {
                0 => pos.push(Edge { user: u, entity: e, weight }),
                1 => neg.push(Edge { user: u, entity: e, weight }),
                _ => {}
            }
        }
    }
    SignedBipartiteGraph::new(
        (0..n_users).map(|u| format!("u{u}")).collect(),
        (0..n_entities).map(|e| EntityKey::new(format!("e{e}"))).collect(),
        pos,
        neg,
    )
    .expect("valid random graph")
}

pub fn random_dense<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Dense {
    (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

/// Macro-F1 from per-class precision and recall, counted by scanning.
pub fn brute_macro_f1(preds: &[usize], golds: &[usize]) -> f64 {
    let mut total = 0.0;
    for c in 0..3 {
        let tp = preds.iter().zip(golds).filter(|(p, g)| **p == c && **g == c).count() as f64;
        let predicted = preds.iter().filter(|p| **p == c).count() as f64;
        let actual = golds.iter().filter(|g| **g == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        total += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    total / 3.0
}

/// Kendall tau-b by enumerating all pairs.
pub fn brute_kendall(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1;
            }
            if dy == 0.0 {
                tie_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (concordant - discordant) as f64 / (((n0 - tie_x) * (n0 - tie_y)) as f64).sqrt()
}

pub struct BruteStats {
    pub density: f64,
    pub avg_degree_users: f64,
    pub avg_degree_entities: f64,
    pub avg_common_users: f64,
    pub avg_common_entities: f64,
}

/// Graph statistics by explicit neighbour-set intersection over all pairs.
pub fn brute_stats(g: &SignedBipartiteGraph) -> BruteStats {
    let (nu, ne) = (g.n_users(), g.n_entities());
    let mut user_nbrs = vec![std::collections::BTreeSet::new(); nu];
    let mut entity_nbrs = vec![std::collections::BTreeSet::new(); ne];
    for e in g.pos_edges().iter().chain(g.neg_edges()) {
        user_nbrs[e.user].insert(e.entity);
        entity_nbrs[e.entity].insert(e.user);
    }
    let common = |sets: &[std::collections::BTreeSet<usize>]| -> f64 {
        let n = sets.len();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0usize;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                total += sets[i].intersection(&sets[j]).count();
                pairs += 1;
            }
        }
        total as f64 / pairs as f64
    };
    let n_edges = (g.pos_edges().len() + g.neg_edges().len()) as f64;
    BruteStats {
        density: n_edges / (nu * ne) as f64,
        avg_degree_users: user_nbrs.iter().map(|s| s.len()).sum::<usize>() as f64 / nu as f64,
        avg_degree_entities: entity_nbrs.iter().map(|s| s.len()).sum::<usize>() as f64 / ne as f64,
        avg_common_users: common(&user_nbrs),
        avg_common_entities: common(&entity_nbrs),
    }
}

/// Two-level mean from materialised per-sentence cosine differences.
pub fn nested_mean_oracle(diffs_per_post: &[Vec<f64>]) -> f64 {
    let post_means: Vec<f64> = diffs_per_post
        .iter()
        .filter(|d| !d.is_empty())
        .map(|d| d.iter().sum::<f64>() / d.len() as f64)
        .collect();
    post_means.iter().sum::<f64>() / post_means.len() as f64
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub mod checks;
