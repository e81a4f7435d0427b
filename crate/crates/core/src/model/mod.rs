//! The end-to-end classifier: frozen text vectors for comment and reply,
//! graph representations of both authors, and a linear head over
//! `[v_c ; v_r ; g_c ; g_r]`.

mod encoder;
mod train;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoder::{pool_tokens, MeanWordEncoder, TextEncoder, TextVectorCache, SPECIAL_TOKENS};
pub use train::{evaluate_examples, predict_examples, train, AdamW, EpochMetrics, TrainOutcome};

use crate::corpus::{CommentReplyPair, CorpusError, Label};
use crate::eval::EvalError;
use crate::graph::SignedBipartiteGraph;
use crate::linalg::{axpy, Matrix};
use crate::sgcn::{self, NodeFeatures, SgcnConfig, SgcnError, SgcnParams, SignedAdjacency};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("no text vector for post {0:?}")]
    CacheMiss(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sgcn(#[from] SgcnError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl ModelError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ModelError::NonFinite(_) | ModelError::Sgcn(SgcnError::NonFinite))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    TextOnly,
    GcnOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::Full, Ablation::TextOnly, Ablation::GcnOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::TextOnly => "text_only",
            Ablation::GcnOnly => "gcn_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    fn uses_text(self) -> bool {
        self != Ablation::GcnOnly
    }

    fn uses_graph(self) -> bool {
        self != Ablation::TextOnly
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs_full: usize,
    pub epochs_gcn_only: usize,
    pub seeds: Vec<u64>,
    pub sgcn: SgcnConfig,
    pub ablation: Ablation,
    /// also update the node feature matrix during training
    pub train_features: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-5,
            weight_decay: 1e-5,
            batch_size: 16,
            epochs_full: 6,
            epochs_gcn_only: 11,
            seeds: vec![0, 1, 2],
            sgcn: SgcnConfig::default(),
            ablation: Ablation::Full,
            train_features: false,
        }
    }
}

impl TrainConfig {
    /// Epoch count for the configured ablation. Text-only runs use the
    /// full-model count.
    pub fn epochs(&self) -> usize {
        match self.ablation {
            Ablation::GcnOnly => self.epochs_gcn_only,
            Ablation::Full | Ablation::TextOnly => self.epochs_full,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        self.sgcn.validate()?;
        Ok(())
    }
}

/// Linear map from the concatenated input to three logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl ClassifierHead {
    pub fn logits(&self, z: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = crate::linalg::dot(self.w.row(k), z) + self.b[k];
        }
        out
    }
}

/// Everything that training updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub text_dim: usize,
    pub feature_dim: usize,
    pub sgcn_config: SgcnConfig,
    pub sgcn: SgcnParams,
    pub head: ClassifierHead,
    /// learned node features, present when features are trained
    #[serde(default)]
    pub features: Option<Matrix>,
}

impl ModelParams {
    /// Glorot weights and zero bias; the head takes `2·text_dim + 4·hidden`
    /// inputs.
    pub fn init<R: rand::Rng>(
        sgcn_config: &SgcnConfig,
        text_dim: usize,
        feature_dim: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let sgcn = SgcnParams::init(sgcn_config, feature_dim, rng)?;
        let input = 2 * text_dim + 2 * sgcn_config.output_dim();
        Ok(Self {
            text_dim,
            feature_dim,
            sgcn_config: *sgcn_config,
            sgcn,
            head: ClassifierHead {
                w: Matrix::glorot(3, input, rng),
                b: vec![0.0; 3],
            },
            features: None,
        })
    }

    pub fn gcn_dim(&self) -> usize {
        self.sgcn_config.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        2 * self.text_dim + 2 * self.gcn_dim()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.sgcn.check(&self.sgcn_config, self.feature_dim)?;
        if self.head.w.shape() != (3, self.input_dim()) || self.head.b.len() != 3 {
            return Err(ModelError::Dimension(format!(
                "head {:?} / bias {} for input width {}",
                self.head.w.shape(),
                self.head.b.len(),
                self.input_dim()
            )));
        }
        if let Some(f) = &self.features {
            if f.cols() != self.feature_dim {
                return Err(ModelError::Dimension(format!(
                    "learned features have {} columns, expected {}",
                    f.cols(),
                    self.feature_dim
                )));
            }
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            sgcn: self.sgcn.zeros_like(),
            head: ClassifierHead {
                w: Matrix::zeros(3, self.input_dim()),
                b: vec![0.0; 3],
            },
            features: self.features.as_ref().map(|f| Matrix::zeros(f.rows(), f.cols())),
            ..self.clone()
        }
    }

    /// Every trainable slice in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.sgcn.matrices().map(Matrix::as_slice).collect();
        out.push(self.head.w.as_slice());
        out.push(&self.head.b);
        if let Some(f) = &self.features {
            out.push(f.as_slice());
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.sgcn.matrices_mut().map(Matrix::as_mut_slice).collect();
        out.push(self.head.w.as_mut_slice());
        out.push(&mut self.head.b);
        if let Some(f) = &mut self.features {
            out.push(f.as_mut_slice());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let p: Self = crate::io::read_json(path)?;
        p.validate()?;
        Ok(p)
    }
}

/// Graph, adjacency and initial features used by one run.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub graph: SignedBipartiteGraph,
    pub adj: SignedAdjacency,
    pub features: NodeFeatures,
}

impl GraphContext {
    pub fn new(graph: SignedBipartiteGraph, features: NodeFeatures, weighted: bool) -> Result<Self, ModelError> {
        if features.0.rows() != graph.n_nodes() {
            return Err(ModelError::Dimension(format!(
                "{} feature rows for {} nodes",
                features.0.rows(),
                graph.n_nodes()
            )));
        }
        let adj = SignedAdjacency::new(&graph, weighted);
        Ok(Self { graph, adj, features })
    }

    pub fn feature_dim(&self) -> usize {
        self.features.0.cols()
    }
}

/// A pair with its text vectors and author nodes resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub pair_id: String,
    pub subreddit: String,
    pub label: Label,
    pub v_c: Vec<f64>,
    pub v_r: Vec<f64>,
    /// graph node of each author, `None` when the author is not in the graph
    pub author_c: Option<usize>,
    pub author_r: Option<usize>,
}

pub fn encode_pair(enc: &dyn TextEncoder, pair: &CommentReplyPair) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let mut out = Vec::with_capacity(2);
    for post in pair.posts() {
        let v = enc.encode(post)?;
        if v.len() != enc.dim() {
            return Err(ModelError::Dimension(format!(
                "encoder returned {} values for {:?}, dim is {}",
                v.len(),
                post.post_id,
                enc.dim()
            )));
        }
        out.push(v);
    }
    let v_r = out.pop().expect("two posts");
    let v_c = out.pop().expect("two posts");
    Ok((v_c, v_r))
}

pub fn prepare_examples(
    pairs: &[CommentReplyPair],
    enc: &dyn TextEncoder,
    graph: Option<&SignedBipartiteGraph>,
) -> Result<Vec<Example>, ModelError> {
    pairs
        .iter()
        .map(|p| {
            let (v_c, v_r) = encode_pair(enc, p)?;
            let node = |author: &str| graph.and_then(|g| g.user_node(author));
            Ok(Example {
                pair_id: p.pair_id.clone(),
                subreddit: p.subreddit.clone(),
                label: p.label,
                v_c,
                v_r,
                author_c: node(&p.comment.author_id),
                author_r: node(&p.reply.author_id),
            })
        })
        .collect()
}

/// `−w_y · log softmax(logits)[y]`, via log-sum-exp.
pub fn weighted_cross_entropy(logits: &[f64; 3], label: Label, class_weights: &[f64; 3]) -> Result<f64, ModelError> {
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite(format!("logits {logits:?}")));
    }
    if class_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(ModelError::Config(format!("class weights must be positive, got {class_weights:?}")));
    }
    let y = label.index();
    Ok(class_weights[y] * (log_sum_exp(logits) - logits[y]))
}

fn log_sum_exp(x: &[f64; 3]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64; 3]) -> [f64; 3] {
    let lse = log_sum_exp(x);
    x.map(|v| (v - lse).exp())
}

/// Index of the largest logit; ties go to the lower index.
pub fn argmax(logits: &[f64; 3]) -> Label {
    let mut best = 0;
    for k in 1..3 {
        if logits[k] > logits[best] {
            best = k;
        }
    }
    Label::from_index(best).expect("index below 3")
}

struct BatchForward {
    z: Vec<Vec<f64>>,
    logits: Vec<[f64; 3]>,
    gcn: Option<sgcn::SgcnForward>,
}

fn check_example(params: &ModelParams, ex: &Example) -> Result<(), ModelError> {
    if ex.v_c.len() != params.text_dim || ex.v_r.len() != params.text_dim {
        return Err(ModelError::Dimension(format!(
            "text vectors of length {}/{} for pair {:?}, model expects {}",
            ex.v_c.len(),
            ex.v_r.len(),
            ex.pair_id,
            params.text_dim
        )));
    }
    Ok(())
}

fn batch_forward(
    params: &ModelParams,
    ctx: Option<&GraphContext>,
    ablation: Ablation,
    batch: &[&Example],
) -> Result<BatchForward, ModelError> {
    let t = params.text_dim;
    let g = params.gcn_dim();
    let gcn = match ctx {
        Some(ctx) if ablation.uses_graph() => {
            let mut targets: Vec<usize> = batch.iter().flat_map(|e| [e.author_c, e.author_r]).flatten().collect();
            targets.sort_unstable();
            targets.dedup();
            if targets.is_empty() {
                None
            } else {
                let learned;
                let features = match &params.features {
                    Some(f) => {
                        learned = NodeFeatures(f.clone());
                        &learned
                    }
                    None => &ctx.features,
                };
                Some(sgcn::forward(&ctx.adj, &params.sgcn_config, &params.sgcn, features, Some(&targets))?)
            }
        }
        _ => None,
    };

    let mut z_all = Vec::with_capacity(batch.len());
    let mut logits = Vec::with_capacity(batch.len());
    for ex in batch {
        check_example(params, ex)?;
        let mut z = vec![0.0; params.input_dim()];
        if ablation.uses_text() {
            z[..t].copy_from_slice(&ex.v_c);
            z[t..2 * t].copy_from_slice(&ex.v_r);
        }
        if let Some(fwd) = &gcn {
            if let Some(c) = ex.author_c {
                z[2 * t..2 * t + g].copy_from_slice(&fwd.representation(c));
            }
            if let Some(r) = ex.author_r {
                z[2 * t + g..].copy_from_slice(&fwd.representation(r));
            }
        }
        let l = params.head.logits(&z);
        if l.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite(format!("logits for pair {:?}", ex.pair_id)));
        }
        z_all.push(z);
        logits.push(l);
    }
    Ok(BatchForward { z: z_all, logits, gcn })
}

/// Logits for a batch of examples.
pub fn forward_batch(
    params: &ModelParams,
    ctx: Option<&GraphContext>,
    ablation: Ablation,
    batch: &[&Example],
) -> Result<Vec<[f64; 3]>, ModelError> {
    Ok(batch_forward(params, ctx, ablation, batch)?.logits)
}

pub fn forward(
    params: &ModelParams,
    ctx: Option<&GraphContext>,
    ablation: Ablation,
    example: &Example,
) -> Result<[f64; 3], ModelError> {
    Ok(forward_batch(params, ctx, ablation, &[example])?[0])
}

pub fn predict(
    params: &ModelParams,
    ctx: Option<&GraphContext>,
    ablation: Ablation,
    example: &Example,
) -> Result<Label, ModelError> {
    Ok(argmax(&forward(params, ctx, ablation, example)?))
}

/// Mean weighted cross-entropy over the batch and its exact gradient with
/// respect to every trainable parameter.
pub fn loss_and_grads(
    params: &ModelParams,
    ctx: Option<&GraphContext>,
    ablation: Ablation,
    batch: &[&Example],
    class_weights: &[f64; 3],
) -> Result<(f64, ModelParams), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let fwd = batch_forward(params, ctx, ablation, batch)?;
    let n = batch.len() as f64;
    let t = params.text_dim;
    let g = params.gcn_dim();
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut upstream = fwd.gcn.as_ref().map(|_| Matrix::zeros(ctx.map_or(0, |c| c.graph.n_nodes()), g));

    for ((ex, z), logits) in batch.iter().zip(&fwd.z).zip(&fwd.logits) {
        let y = ex.label.index();
        let w = class_weights[y];
        loss += weighted_cross_entropy(logits, ex.label, class_weights)? / n;
        let mut d_logits = softmax(logits);
        d_logits[y] -= 1.0;
        d_logits.iter_mut().for_each(|d| *d *= w / n);

        grads.head.w.add_outer(1.0, &d_logits, z);
        axpy(&mut grads.head.b, 1.0, &d_logits);
        if let Some(up) = upstream.as_mut() {
            let d_z = params.head.w.matvec_t(&d_logits);
            if let Some(c) = ex.author_c {
                axpy(up.row_mut(c), 1.0, &d_z[2 * t..2 * t + g]);
            }
            if let Some(r) = ex.author_r {
                axpy(up.row_mut(r), 1.0, &d_z[2 * t + g..]);
            }
        }
    }

    if let (Some(gcn), Some(up), Some(ctx)) = (&fwd.gcn, &upstream, ctx) {
        let sg = gcn.backward(&ctx.adj, &params.sgcn, up)?;
        grads.sgcn = sg.params;
        if let Some(f) = grads.features.as_mut() {
            *f = sg.features;
        }
    }
    if !loss.is_finite() {
        return Err(ModelError::NonFinite("training loss".into()));
    }
    Ok((loss, grads))
}

/// Fresh parameters for a run, drawn from the seed's stream.
pub fn init_params(
    config: &TrainConfig,
    text_dim: usize,
    ctx: Option<&GraphContext>,
    rng: &mut ChaCha8Rng,
) -> Result<ModelParams, ModelError> {
    let feature_dim = ctx.map_or(1, GraphContext::feature_dim);
    let mut params = ModelParams::init(&config.sgcn, text_dim, feature_dim, rng)?;
    if config.train_features {
        params.features = ctx.map(|c| c.features.0.clone());
    }
    Ok(params)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
