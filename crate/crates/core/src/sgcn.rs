//! Weighted signed graph convolutions.
//!
//! Every layer keeps two representations per node: a "balanced" one `h_B`
//! built over positive edges and an "unbalanced" one `h_U` built over
//! negative edges. A neighbour's contribution is its representation scaled by
//! the edge weight and divided by the size of the neighbourhood (the count,
//! not the weight sum):
//!
//! ```text
//! direct:   h_B,i = σ(W_B [ Σ_{j∈N⁺(i)} w_j h_B,j / |N⁺(i)| ; h_B,i ])
//!           h_U,i = σ(W_U [ Σ_{k∈N⁻(i)} w_k h_U,k / |N⁻(i)| ; h_U,i ])
//! balance:  h_B,i = σ(W_B [ Σ⁺ w_j h_B,j / |N⁺| ; Σ⁻ w_k h_U,k / |N⁻| ; h_B,i ])
//!           h_U,i = σ(W_U [ Σ⁺ w_j h_U,j / |N⁺| ; Σ⁻ w_k h_B,k / |N⁻| ; h_U,i ])
//! ```
//!
//! The first layer is always direct and reads the raw node features on both
//! paths. An empty neighbourhood contributes a zero block.
//!
//! [`forward`] only evaluates the rows needed for the requested output
//! nodes (their receptive field), and [`SgcnForward::backward`] returns exact
//! gradients for the layer weights and the input features.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::WordVectors;
use crate::graph::{Sign, SignedBipartiteGraph};
use crate::linalg::{axpy, Matrix};

#[derive(Debug, Error)]
pub enum SgcnError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("the balance-theory aggregation needs a previous layer (got layer {0})")]
    BalanceAtFirstLayer(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no vector for entity {0:?}")]
    MissingEntityVector(String),
    #[error("non-finite value in graph convolution")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// direct friends on the positive path, direct enemies on the negative path
    #[default]
    Direct,
    /// adds friend-of-enemy / enemy-of-enemy terms from layer 2 on
    Balance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// derivative expressed through the activation's output
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgcnConfig {
    pub n_layers: usize,
    pub aggregation: Aggregation,
    pub weighted: bool,
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for SgcnConfig {
    fn default() -> Self {
        Self {
            n_layers: 1,
            aggregation: Aggregation::Direct,
            weighted: true,
            hidden: 300,
            activation: Activation::Tanh,
        }
    }
}

impl SgcnConfig {
    pub fn validate(&self) -> Result<(), SgcnError> {
        if !(1..=2).contains(&self.n_layers) {
            return Err(SgcnError::Config(format!("n_layers must be 1 or 2, got {}", self.n_layers)));
        }
        if self.hidden == 0 {
            return Err(SgcnError::Config("hidden must be positive".into()));
        }
        Ok(())
    }

    /// Width of a node representation: `[h_B ; h_U]`.
    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    fn layer_kind(&self, layer_index: usize) -> LayerKind {
        if layer_index == 1 || self.aggregation == Aggregation::Direct {
            LayerKind::Direct
        } else {
            LayerKind::Balance
        }
    }

    /// Expected `(rows, cols)` of W_B and W_U per layer.
    pub fn layer_shapes(&self, in_dim: usize) -> Vec<(usize, usize)> {
        (1..=self.n_layers)
            .map(|l| {
                let prev = if l == 1 { in_dim } else { self.hidden };
                (self.hidden, self.layer_kind(l).blocks() * prev)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LayerKind {
    Direct,
    Balance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    B,
    U,
}

#[derive(Debug, Clone, Copy)]
enum Block {
    Agg(Sign, Source),
    Own(Source),
}

impl LayerKind {
    fn blocks(self) -> usize {
        match self {
            LayerKind::Direct => 2,
            LayerKind::Balance => 3,
        }
    }

    fn path_blocks(self, path: Source) -> &'static [Block] {
        use Block::*;
        use Sign::*;
        match (self, path) {
            (LayerKind::Direct, Source::B) => &[Agg(Positive, Source::B), Own(Source::B)],
            (LayerKind::Direct, Source::U) => &[Agg(Negative, Source::U), Own(Source::U)],
            (LayerKind::Balance, Source::B) => &[Agg(Positive, Source::B), Agg(Negative, Source::U), Own(Source::B)],
            (LayerKind::Balance, Source::U) => &[Agg(Positive, Source::U), Agg(Negative, Source::B), Own(Source::U)],
        }
    }
}

/// W_B and W_U of one layer, shaped `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgcnLayer {
    pub w_b: Matrix,
    pub w_u: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgcnParams {
    pub layers: Vec<SgcnLayer>,
}

impl SgcnParams {
    /// Glorot-uniform weights drawn from `rng`.
    pub fn init<R: rand::Rng>(config: &SgcnConfig, in_dim: usize, rng: &mut R) -> Result<Self, SgcnError> {
        config.validate()?;
        let layers = config
            .layer_shapes(in_dim)
            .into_iter()
            .map(|(r, c)| SgcnLayer {
                w_b: Matrix::glorot(r, c, rng),
                w_u: Matrix::glorot(r, c, rng),
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| SgcnLayer {
                    w_b: Matrix::zeros(l.w_b.rows(), l.w_b.cols()),
                    w_u: Matrix::zeros(l.w_u.rows(), l.w_u.cols()),
                })
                .collect(),
        }
    }

    /// Checks layer count and shapes against a configuration.
    pub fn check(&self, config: &SgcnConfig, in_dim: usize) -> Result<(), SgcnError> {
        config.validate()?;
        let shapes = config.layer_shapes(in_dim);
        if shapes.len() != self.layers.len() {
            return Err(SgcnError::Dimension(format!(
                "config has {} layers, parameters have {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (l, (layer, shape)) in self.layers.iter().zip(shapes).enumerate() {
            if layer.w_b.shape() != shape || layer.w_u.shape() != shape {
                return Err(SgcnError::Dimension(format!(
                    "layer {} expects {:?}, found W_B {:?} / W_U {:?}",
                    l + 1,
                    shape,
                    layer.w_b.shape(),
                    layer.w_u.shape()
                )));
            }
        }
        Ok(())
    }

    /// All weight matrices in a fixed order (layer, then B before U).
    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| [&l.w_b, &l.w_u])
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w_b, &mut l.w_u])
    }
}

/// Node feature matrix, users first then entities.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures(pub Matrix);

/// Entity rows copy their word vectors; user rows start at zero.
pub fn init_features(g: &SignedBipartiteGraph, vectors: &WordVectors) -> Result<NodeFeatures, SgcnError> {
    let dim = vectors.dim();
    let mut m = Matrix::zeros(g.n_nodes(), dim);
    for (j, e) in g.entities().iter().enumerate() {
        let v = vectors
            .get(e.as_str())
            .ok_or_else(|| SgcnError::MissingEntityVector(e.to_string()))?;
        m.row_mut(g.entity_node(j)).copy_from_slice(v);
    }
    Ok(NodeFeatures(m))
}

/// Signed neighbour lists with weights fixed for one run (all ones when the
/// graph is used unweighted).
#[derive(Debug, Clone)]
pub struct SignedAdjacency {
    n_nodes: usize,
    pos: Vec<Vec<(usize, f64)>>,
    neg: Vec<Vec<(usize, f64)>>,
}

impl SignedAdjacency {
    pub fn new(g: &SignedBipartiteGraph, weighted: bool) -> Self {
        let prep = |sign| {
            let mut adj = g.neighbours(sign);
            if !weighted {
                adj.iter_mut().flatten().for_each(|(_, w)| *w = 1.0);
            }
            adj
        };
        Self {
            n_nodes: g.n_nodes(),
            pos: prep(Sign::Positive),
            neg: prep(Sign::Negative),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn neighbours(&self, sign: Sign, node: usize) -> &[(usize, f64)] {
        match sign {
            Sign::Positive => &self.pos[node],
            Sign::Negative => &self.neg[node],
        }
    }
}

/// Cached state of one layer for the rows it evaluated.
#[derive(Debug, Clone)]
struct LayerCache {
    kind: LayerKind,
    rows: Vec<usize>,
    /// concatenated inputs per evaluated row, in `rows` order
    z_b: Matrix,
    z_u: Matrix,
    /// full-height outputs; rows outside `rows` stay zero
    out_b: Matrix,
    out_u: Matrix,
}

fn source<'a>(s: Source, hb: &'a Matrix, hu: &'a Matrix) -> &'a Matrix {
    match s {
        Source::B => hb,
        Source::U => hu,
    }
}

fn build_input(blocks: &[Block], adj: &SignedAdjacency, node: usize, hb: &Matrix, hu: &Matrix, out: &mut [f64]) {
    let d = hb.cols();
    for (k, block) in blocks.iter().enumerate() {
        let slot = &mut out[k * d..(k + 1) * d];
        slot.iter_mut().for_each(|x| *x = 0.0);
        match *block {
            Block::Agg(sign, src) => {
                let x = source(src, hb, hu);
                let nbrs = adj.neighbours(sign, node);
                let n = nbrs.len() as f64;
                for &(j, w) in nbrs {
                    axpy(slot, w / n, x.row(j));
                }
            }
            Block::Own(src) => slot.copy_from_slice(source(src, hb, hu).row(node)),
        }
    }
}

fn layer_forward(
    layer: &SgcnLayer,
    kind: LayerKind,
    adj: &SignedAdjacency,
    hb: &Matrix,
    hu: &Matrix,
    rows: Vec<usize>,
    activation: Activation,
) -> Result<LayerCache, SgcnError> {
    let d = hb.cols();
    if hb.rows() != adj.n_nodes() || hu.shape() != hb.shape() {
        return Err(SgcnError::Dimension(format!(
            "layer input {:?}/{:?} for a graph of {} nodes",
            hb.shape(),
            hu.shape(),
            adj.n_nodes()
        )));
    }
    let in_dim = kind.blocks() * d;
    if layer.w_b.cols() != in_dim || layer.w_u.shape() != layer.w_b.shape() {
        return Err(SgcnError::Dimension(format!(
            "weights {:?}/{:?} do not take {in_dim}-wide input",
            layer.w_b.shape(),
            layer.w_u.shape()
        )));
    }
    let out_dim = layer.w_b.rows();
    let mut z_b = Matrix::zeros(rows.len(), in_dim);
    let mut z_u = Matrix::zeros(rows.len(), in_dim);
    let mut out_b = Matrix::zeros(adj.n_nodes(), out_dim);
    let mut out_u = Matrix::zeros(adj.n_nodes(), out_dim);
    for (r, &node) in rows.iter().enumerate() {
        for (path, z, w, out) in [
            (Source::B, &mut z_b, &layer.w_b, &mut out_b),
            (Source::U, &mut z_u, &layer.w_u, &mut out_u),
        ] {
            build_input(kind.path_blocks(path), adj, node, hb, hu, z.row_mut(r));
            let pre = w.matvec(z.row(r));
            for (o, p) in out.row_mut(node).iter_mut().zip(pre) {
                *o = activation.apply(p);
            }
        }
    }
    if !(out_b.is_finite() && out_u.is_finite()) {
        return Err(SgcnError::NonFinite);
    }
    Ok(LayerCache {
        kind,
        rows,
        z_b,
        z_u,
        out_b,
        out_u,
    })
}

/// One direct layer over all nodes, with a single input feeding both paths
/// (as in the first layer). Returns `(h_B, h_U)`.
pub fn forward_direct(
    layer: &SgcnLayer,
    adj: &SignedAdjacency,
    h_prev: &Matrix,
    activation: Activation,
) -> Result<(Matrix, Matrix), SgcnError> {
    let c = layer_forward(layer, LayerKind::Direct, adj, h_prev, h_prev, (0..adj.n_nodes()).collect(), activation)?;
    Ok((c.out_b, c.out_u))
}

/// One balance-theory layer over all nodes. Only valid from layer 2 on.
pub fn forward_balance(
    layer: &SgcnLayer,
    adj: &SignedAdjacency,
    hb_prev: &Matrix,
    hu_prev: &Matrix,
    layer_index: usize,
    activation: Activation,
) -> Result<(Matrix, Matrix), SgcnError> {
    if layer_index < 2 {
        return Err(SgcnError::BalanceAtFirstLayer(layer_index));
    }
    let c = layer_forward(layer, LayerKind::Balance, adj, hb_prev, hu_prev, (0..adj.n_nodes()).collect(), activation)?;
    Ok((c.out_b, c.out_u))
}

/// Forward pass with everything needed for the backward pass.
#[derive(Debug, Clone)]
pub struct SgcnForward {
    activation: Activation,
    n_nodes: usize,
    in_dim: usize,
    targets: Vec<usize>,
    caches: Vec<LayerCache>,
}

fn receptive_field(adj: &SignedAdjacency, rows: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; adj.n_nodes()];
    for &r in rows {
        mark[r] = true;
        for sign in [Sign::Positive, Sign::Negative] {
            for &(j, _) in adj.neighbours(sign, r) {
                mark[j] = true;
            }
        }
    }
    mark.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}

/// Runs all layers so that the final representation is exact for `targets`
/// (every node when `None`). Rows outside the targets are not meaningful.
pub fn forward(
    adj: &SignedAdjacency,
    config: &SgcnConfig,
    params: &SgcnParams,
    features: &NodeFeatures,
    targets: Option<&[usize]>,
) -> Result<SgcnForward, SgcnError> {
    let features = &features.0;
    if features.rows() != adj.n_nodes() {
        return Err(SgcnError::Dimension(format!(
            "{} feature rows for {} nodes",
            features.rows(),
            adj.n_nodes()
        )));
    }
    params.check(config, features.cols())?;
    let mut targets: Vec<usize> = match targets {
        Some(t) => t.to_vec(),
        None => (0..adj.n_nodes()).collect(),
    };
    targets.sort_unstable();
    targets.dedup();
    if let Some(&bad) = targets.iter().find(|&&t| t >= adj.n_nodes()) {
        return Err(SgcnError::Dimension(format!("target node {bad} out of range")));
    }

    // rows per layer, last layer first
    let mut needed = vec![targets.clone()];
    for _ in 1..config.n_layers {
        let next = receptive_field(adj, needed.last().expect("non-empty"));
        needed.push(next);
    }
    needed.reverse();

    let mut caches: Vec<LayerCache> = Vec::with_capacity(config.n_layers);
    for (l, (layer, rows)) in params.layers.iter().zip(needed).enumerate() {
        let kind = config.layer_kind(l + 1);
        let cache = match caches.last() {
            None => layer_forward(layer, kind, adj, features, features, rows, config.activation)?,
            Some(prev) => layer_forward(layer, kind, adj, &prev.out_b, &prev.out_u, rows, config.activation)?,
        };
        caches.push(cache);
    }
    Ok(SgcnForward {
        activation: config.activation,
        n_nodes: adj.n_nodes(),
        in_dim: features.cols(),
        targets,
        caches,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgcnGrads {
    pub params: SgcnParams,
    pub features: Matrix,
}

impl SgcnForward {
    pub fn hidden(&self) -> usize {
        self.caches.last().map_or(0, |c| c.out_b.cols())
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// `[h_B ; h_U]` of the last layer for one node.
    pub fn representation(&self, node: usize) -> Vec<f64> {
        let last = self.caches.last().expect("at least one layer");
        let mut v = last.out_b.row(node).to_vec();
        v.extend_from_slice(last.out_u.row(node));
        v
    }

    /// Full-height `[h_B ; h_U]` matrix of the last layer.
    pub fn output(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_nodes, 2 * self.hidden());
        for node in 0..self.n_nodes {
            m.row_mut(node).copy_from_slice(&self.representation(node));
        }
        m
    }

    /// Back-propagates `upstream` (one `2·hidden` row per node; only target
    /// rows are read) to parameter and feature gradients.
    pub fn backward(&self, adj: &SignedAdjacency, params: &SgcnParams, upstream: &Matrix) -> Result<SgcnGrads, SgcnError> {
        let h = self.hidden();
        if upstream.shape() != (self.n_nodes, 2 * h) {
            return Err(SgcnError::Dimension(format!(
                "upstream gradient {:?}, expected {:?}",
                upstream.shape(),
                (self.n_nodes, 2 * h)
            )));
        }
        if params.layers.len() != self.caches.len() {
            return Err(SgcnError::Dimension("parameters do not match the cached forward pass".into()));
        }
        let mut grads = params.zeros_like();
        let mut d_out_b = Matrix::zeros(self.n_nodes, h);
        let mut d_out_u = Matrix::zeros(self.n_nodes, h);
        for &t in &self.targets {
            let row = upstream.row(t);
            d_out_b.row_mut(t).copy_from_slice(&row[..h]);
            d_out_u.row_mut(t).copy_from_slice(&row[h..]);
        }

        for (l, cache) in self.caches.iter().enumerate().rev() {
            let layer = &params.layers[l];
            let d_prev = cache.z_b.cols() / cache.kind.blocks();
            let mut d_in_b = Matrix::zeros(self.n_nodes, d_prev);
            let mut d_in_u = Matrix::zeros(self.n_nodes, d_prev);
            let g = &mut grads.layers[l];
            for (r, &node) in cache.rows.iter().enumerate() {
                for (path, z, w, out, d_out, d_w) in [
                    (Source::B, &cache.z_b, &layer.w_b, &cache.out_b, &d_out_b, &mut g.w_b),
                    (Source::U, &cache.z_u, &layer.w_u, &cache.out_u, &d_out_u, &mut g.w_u),
                ] {
                    let d_pre: Vec<f64> = d_out
                        .row(node)
                        .iter()
                        .zip(out.row(node))
                        .map(|(d, y)| d * self.activation.derivative_from_output(*y))
                        .collect();
                    if d_pre.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    d_w.add_outer(1.0, &d_pre, z.row(r));
                    let d_z = w.matvec_t(&d_pre);
                    for (k, block) in cache.kind.path_blocks(path).iter().enumerate() {
                        let slot = &d_z[k * d_prev..(k + 1) * d_prev];
                        match *block {
                            Block::Agg(sign, src) => {
                                let target = if src == Source::B { &mut d_in_b } else { &mut d_in_u };
                                let nbrs = adj.neighbours(sign, node);
                                let n = nbrs.len() as f64;
                                for &(j, wj) in nbrs {
                                    axpy(target.row_mut(j), wj / n, slot);
                                }
                            }
                            Block::Own(src) => {
                                let target = if src == Source::B { &mut d_in_b } else { &mut d_in_u };
                                axpy(target.row_mut(node), 1.0, slot);
                            }
                        }
                    }
                }
            }
            d_out_b = d_in_b;
            d_out_u = d_in_u;
        }
        // both paths of the first layer read the same features
        let mut features = d_out_b;
        axpy(features.as_mut_slice(), 1.0, d_out_u.as_slice());
        debug_assert_eq!(features.cols(), self.in_dim);
        Ok(SgcnGrads { params: grads, features })
    }
}
