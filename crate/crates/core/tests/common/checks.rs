//! One function per acceptance criterion. Each returns `Ok(detail)` when the
//! criterion holds and `Err(detail)` otherwise.
#![allow(dead_code)]

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stentconv::corpus::{split_corpus, Label, Post, SplitSpec};
use stentconv::embeddings::{split_sentences, EmbedError, SentenceEmbedder};
use stentconv::entities::EntityKey;
use stentconv::eval::macro_f1;
use stentconv::graph::{graph_stats, kendall_tau, to_gexf, Edge, SignFilter, SignedBipartiteGraph};
use stentconv::linalg::Matrix;
use stentconv::model::{
    evaluate_examples, init_params, loss_and_grads, prepare_examples, train, Ablation, Example, GraphContext,
    ModelParams, TrainConfig,
};
use stentconv::sgcn::{self, Activation, Aggregation, NodeFeatures, SgcnConfig, SgcnParams, SignedAdjacency};
use stentconv::stance::{stance_raw, stance_raw_with_templates, template_pair, SentenceScope};
use stentconv::synthetic::{polarization_task, topic_task, SyntheticConfig, SyntheticData};

use super::*;

pub type Check = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub const SGCN_VARIANTS: [(usize, Aggregation); 3] =
    [(1, Aggregation::Direct), (2, Aggregation::Direct), (2, Aggregation::Balance)];

/// Sparse forward vs dense masked matrices on 100 random graphs.
pub fn sgcn_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for _ in 0..100 {
        let g = random_graph(&mut rng, 10);
        let dim = rng.gen_range(1..4);
        let x = random_dense(&mut rng, g.n_nodes(), dim);
        let features = NodeFeatures(Matrix::from_rows(&x).unwrap());
        for (n_layers, aggregation) in SGCN_VARIANTS {
            for weighted in [true, false] {
                for activation in [Activation::Tanh, Activation::Identity] {
                    let config = SgcnConfig { n_layers, aggregation, weighted, hidden: 3, activation };
                    let params = SgcnParams::init(&config, dim, &mut rng).unwrap();
                    let adj = SignedAdjacency::new(&g, weighted);
                    let fwd = sgcn::forward(&adj, &config, &params, &features, None).unwrap();
                    let got = to_dense(&fwd.output());
                    let want = dense_sgcn(&g, &config, &params, &x);
                    worst = worst.max(max_abs_diff(&got, &want));
                    runs += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 10.0,
        format!("{runs} forward passes, max |sparse - dense| = {worst:.2e} (tol 1e-9), {secs:.2}s (limit 10s)"),
    )
}

/// Toy model over a random graph: examples, context and parameters.
pub struct GradFixture {
    pub ctx: GraphContext,
    pub examples: Vec<Example>,
    pub params: ModelParams,
    pub class_weights: [f64; 3],
}

pub fn grad_fixture(seed: u64, aggregation: Aggregation, n_layers: usize) -> GradFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, 10);
    let feature_dim = 2;
    let text_dim = 2;
    let x = random_dense(&mut rng, g.n_nodes(), feature_dim);
    let ctx = GraphContext::new(g.clone(), NodeFeatures(Matrix::from_rows(&x).unwrap()), true).unwrap();
    let users = g.n_users();
    let examples: Vec<Example> = (0..6)
        .map(|i| {
            let author = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.85) {
                    Some(rng.gen_range(0..users))
                } else {
                    None
                }
            };
            Example {
                pair_id: format!("p{i}"),
                subreddit: "s".into(),
                label: Label::ALL[rng.gen_range(0..3)],
                v_c: (0..text_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                v_r: (0..text_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                author_c: author(&mut rng),
                author_r: author(&mut rng),
            }
        })
        .collect();
    let config = TrainConfig {
        sgcn: SgcnConfig { n_layers, aggregation, hidden: 3, ..Default::default() },
        train_features: true,
        ..Default::default()
    };
    let mut params = init_params(&config, text_dim, Some(&ctx), &mut ChaCha8Rng::seed_from_u64(seed + 1)).unwrap();
    // larger weights than Glorot keep the gradients well away from zero
    for s in params.slices_mut() {
        for v in s.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let class_weights = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
    GradFixture { ctx, examples, params, class_weights }
}

/// Norm-wise relative error of analytic vs central-difference gradients per
/// parameter tensor; returns the worst tensor.
pub fn gradient_error(f: &GradFixture, ablation: Ablation, h: f64) -> f64 {
    let batch: Vec<&Example> = f.examples.iter().collect();
    let loss = |p: &ModelParams| loss_and_grads(p, Some(&f.ctx), ablation, &batch, &f.class_weights).unwrap().0;
    let (_, analytic) = loss_and_grads(&f.params, Some(&f.ctx), ablation, &batch, &f.class_weights).unwrap();
    let analytic: Vec<Vec<f64>> = analytic.slices().iter().map(|s| s.to_vec()).collect();
    let mut worst: f64 = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; a.len()];
        for (i, n) in numeric.iter_mut().enumerate() {
            let mut plus = f.params.clone();
            plus.slices_mut()[k][i] += h;
            let mut minus = f.params.clone();
            minus.slices_mut()[k][i] -= h;
            *n = (loss(&plus) - loss(&minus)) / (2.0 * h);
        }
        let diff: f64 = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(numeric.iter().map(|x| x * x).sum::<f64>().sqrt());
        if scale > 1e-10 {
            worst = worst.max(diff / scale);
        } else {
            worst = worst.max(diff);
        }
    }
    worst
}

pub fn gradient_correctness() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for seed in 0..24u64 {
        let (n_layers, aggregation) = SGCN_VARIANTS[seed as usize % 3];
        let f = grad_fixture(seed, aggregation, n_layers);
        for ablation in Ablation::ALL {
            worst = worst.max(gradient_error(&f, ablation, 1e-4));
            n += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && secs < 60.0,
        format!("{n} seed/ablation cases, worst relative error {worst:.2e} (tol 1e-4), {secs:.2}s (limit 60s)"),
    )
}

/// Sentence embeddings from a fixed table, scaled by a constant.
pub struct TableEmbedder {
    pub table: HashMap<String, Vec<f64>>,
    pub scale: f64,
    pub dim: usize,
}

impl SentenceEmbedder for TableEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Result<Vec<f64>, EmbedError> {
        self.table
            .get(sentence)
            .map(|v| v.iter().map(|x| x * self.scale).collect())
            .ok_or_else(|| EmbedError::CacheMiss(sentence.to_string()))
    }
}

pub struct StanceFixture {
    pub posts: Vec<Post>,
    pub entity: EntityKey,
    pub embedder: TableEmbedder,
}

pub fn stance_fixture<R: Rng>(rng: &mut R) -> StanceFixture {
    let dim = rng.gen_range(2..6);
    let entity = EntityKey::new("brexit");
    let mut table = HashMap::new();
    let vec = |rng: &mut R| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-3 {
                return v;
            }
        }
    };
    let (pro, con) = template_pair(&entity);
    table.insert(pro, vec(rng));
    table.insert(con, vec(rng));
    let mut posts = Vec::new();
    let mut word = 0;
    for p in 0..rng.gen_range(1..5) {
        let n_sent = rng.gen_range(1..5);
        let text: Vec<String> = (0..n_sent)
            .map(|_| {
                word += 1;
                format!("Sentence {word} on brexit.")
            })
            .collect();
        let text = text.join(" ");
        for s in split_sentences(&text) {
            table.insert(s.to_string(), vec(rng));
        }
        posts.push(Post {
            post_id: format!("p{p}"),
            author_id: "alice".into(),
            subreddit: "s".into(),
            text,
        });
    }
    StanceFixture { posts, entity, embedder: TableEmbedder { table, scale: 1.0, dim } }
}

fn stance_oracle(f: &StanceFixture) -> f64 {
    let (pro, con) = template_pair(&f.entity);
    let pv = &f.embedder.table[&pro];
    let cv = &f.embedder.table[&con];
    let diffs: Vec<Vec<f64>> = f
        .posts
        .iter()
        .map(|p| {
            split_sentences(&p.text)
                .into_iter()
                .map(|s| {
                    let v = &f.embedder.table[s];
                    cos(v, pv) - cos(v, cv)
                })
                .collect()
        })
        .collect();
    nested_mean_oracle(&diffs)
}

/// Two posts with per-sentence differences {0.4} and {0.1, 0.3}.
pub fn nesting_pin() -> f64 {
    let entity = EntityKey::new("brexit");
    let (pro, con) = template_pair(&entity);
    let mut table = HashMap::new();
    table.insert(pro, vec![1.0, 0.0, 0.0]);
    table.insert(con, vec![0.0, 1.0, 0.0]);
    let unit = |d: f64| vec![d, 0.0, (1.0 - d * d).sqrt()];
    table.insert("Alpha.".to_string(), unit(0.4));
    table.insert("Beta.".to_string(), unit(0.1));
    table.insert("Gamma.".to_string(), unit(0.3));
    let post = |id: &str, text: &str| Post {
        post_id: id.into(),
        author_id: "alice".into(),
        subreddit: "s".into(),
        text: text.into(),
    };
    let posts = [post("a", "Alpha."), post("b", "Beta. Gamma.")];
    let refs: Vec<&Post> = posts.iter().collect();
    let embedder = TableEmbedder { table, scale: 1.0, dim: 3 };
    stance_raw("alice", &entity, &refs, &embedder, SentenceScope::FullPost).unwrap().raw
}

pub fn stance_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut anti_ok = true;
    let mut worst_scale: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..200 {
        let mut f = stance_fixture(&mut rng);
        let refs: Vec<&Post> = f.posts.iter().collect();
        let (pro, con) = template_pair(&f.entity);
        let raw = stance_raw("alice", &f.entity, &refs, &f.embedder, SentenceScope::FullPost).unwrap().raw;
        let swapped = stance_raw_with_templates("alice", &f.entity, &refs, &f.embedder, SentenceScope::FullPost, &con, &pro)
            .unwrap()
            .raw;
        anti_ok &= swapped == -raw;
        worst_oracle = worst_oracle.max((raw - stance_oracle(&f)).abs());
        f.embedder.scale = rng.gen_range(0.01..100.0);
        let scaled = stance_raw("alice", &f.entity, &refs, &f.embedder, SentenceScope::FullPost).unwrap().raw;
        worst_scale = worst_scale.max((scaled - raw).abs());
    }
    let pin = nesting_pin();
    let pin_ok = (pin - 0.3).abs() < 1e-12;
    verdict(
        anti_ok && worst_scale <= 1e-9 && worst_oracle <= 1e-9 && pin_ok,
        format!(
            "antisymmetry exact: {anti_ok}; scaling max diff {worst_scale:.2e}; oracle max diff {worst_oracle:.2e}; two-post pin = {pin:.6} (flat mean 0.266667)"
        ),
    )
}

/// Trains one seed on a synthetic task and returns test macro-F1.
pub fn synthetic_f1(data: &SyntheticData, ablation: Ablation, seed: u64) -> f64 {
    let ctx = data.context(true).unwrap();
    let split = split_corpus(&data.pairs, &SplitSpec { seed, ..Default::default() }).unwrap();
    let train_ex = prepare_examples(&split.train, &data.text, Some(&ctx.graph)).unwrap();
    let test_ex = prepare_examples(&split.test, &data.text, Some(&ctx.graph)).unwrap();
    let config = TrainConfig { ablation, ..Default::default() };
    let out = train(&train_ex, &[], Some(&ctx), &config, seed).unwrap();
    evaluate_examples(&out.params, Some(&ctx), ablation, &test_ex).unwrap().macro_f1_overall
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub struct PolarizationResult {
    pub gcn_only: Vec<f64>,
    pub full: Vec<f64>,
    pub secs: f64,
}

pub fn polarization_runs() -> PolarizationResult {
    let start = Instant::now();
    let mut gcn_only = Vec::new();
    let mut full = Vec::new();
    for seed in 0..3 {
        let data = polarization_task(&SyntheticConfig { seed, ..Default::default() }).unwrap();
        gcn_only.push(synthetic_f1(&data, Ablation::GcnOnly, seed));
        full.push(synthetic_f1(&data, Ablation::Full, seed));
    }
    PolarizationResult { gcn_only, full, secs: start.elapsed().as_secs_f64() }
}

pub fn polarization_gcn_only(r: &PolarizationResult) -> Check {
    let m = mean(&r.gcn_only);
    verdict(
        m >= 0.90 && r.secs < 300.0,
        format!("gcn_only macro-F1 per seed {:.3?}, mean {m:.3} (need >= 0.90), {:.1}s", r.gcn_only, r.secs),
    )
}

pub fn polarization_full_matches(r: &PolarizationResult) -> Check {
    let gap = (mean(&r.full) - mean(&r.gcn_only)).abs();
    verdict(
        gap <= 0.05,
        format!("full per seed {:.3?}, |mean(full) - mean(gcn_only)| = {gap:.3} (need <= 0.05)", r.full),
    )
}

pub fn added_signal() -> Check {
    let mut full = Vec::new();
    let mut text = Vec::new();
    for seed in 0..3 {
        let data = topic_task(&SyntheticConfig { seed, ..Default::default() }).unwrap();
        full.push(synthetic_f1(&data, Ablation::Full, seed));
        text.push(synthetic_f1(&data, Ablation::TextOnly, seed));
    }
    let gap = mean(&full) - mean(&text);
    verdict(
        gap >= 0.15,
        format!("full {full:.3?} vs text_only {text:.3?}, mean gap {gap:.3} (need >= 0.15)"),
    )
}

pub fn metric_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_f1: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..60);
        let golds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        worst_f1 = worst_f1.max((macro_f1(&preds, &golds).unwrap() - brute_macro_f1(&preds, &golds)).abs());
    }
    let mut worst_tau: f64 = 0.0;
    let mut constant_ok = true;
    let mut compared = 0;
    while compared < 1000 {
        let n = rng.gen_range(2..80);
        let levels = rng.gen_range(1..8);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64).collect();
        let constant = x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]);
        match kendall_tau(&x, &y) {
            Ok(t) if !constant => {
                worst_tau = worst_tau.max((t - brute_kendall(&x, &y)).abs());
                compared += 1;
            }
            Ok(_) => constant_ok = false,
            Err(_) => constant_ok &= constant,
        }
    }
    verdict(
        worst_f1 <= 1e-12 && worst_tau <= 1e-9 && constant_ok,
        format!("macro-F1 max diff {worst_f1:.2e} (tol 1e-12); Kendall tau-b max diff {worst_tau:.2e} (tol 1e-9) over 1000 instances each"),
    )
}

/// Rebuilds a graph from GEXF using an XML parser.
pub fn parse_gexf(xml: &str) -> SignedBipartiteGraph {
    let doc = roxmltree::Document::parse(xml).expect("well-formed GEXF");
    let root = doc.root_element();
    assert_eq!(root.tag_name().namespace(), Some("http://www.gexf.net/1.2draft"));
    let mut users = Vec::new();
    let mut entities = Vec::new();
    let mut user_ix = HashMap::new();
    let mut entity_ix = HashMap::new();
    for node in root.descendants().filter(|n| n.has_tag_name("node")) {
        let id = node.attribute("id").unwrap().to_string();
        let label = node.attribute("label").unwrap().to_string();
        let kind = node
            .descendants()
            .find(|n| n.has_tag_name("attvalue") && n.attribute("for") == Some("0"))
            .and_then(|n| n.attribute("value"))
            .unwrap();
        match kind {
            "user" => {
                user_ix.insert(id, users.len());
                users.push(label);
            }
            "entity" => {
                entity_ix.insert(id, entities.len());
                entities.push(EntityKey::new(label));
            }
            other => panic!("unknown node kind {other}"),
        }
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for edge in root.descendants().filter(|n| n.has_tag_name("edge")) {
        let att = |key: &str| {
            edge.descendants()
                .find(|n| n.has_tag_name("attvalue") && n.attribute("for") == Some(key))
                .and_then(|n| n.attribute("value"))
                .unwrap()
                .to_string()
        };
        let e = Edge {
            user: user_ix[edge.attribute("source").unwrap()],
            entity: entity_ix[edge.attribute("target").unwrap()],
            weight: att("1").parse().unwrap(),
        };
        assert_eq!(edge.attribute("weight").unwrap().parse::<f64>().unwrap(), e.weight);
        match att("0").as_str() {
            "+" => pos.push(e),
            "-" => neg.push(e),
            other => panic!("unknown sign {other}"),
        }
    }
    SignedBipartiteGraph::new(users, entities, pos, neg).expect("valid graph from GEXF")
}

pub fn graph_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut worst_stat: f64 = 0.0;
    for trial in 0..300 {
        let g = random_graph(&mut rng, 12);
        let nu = g.n_users();
        for sign in [stentconv::graph::Sign::Positive, stentconv::graph::Sign::Negative] {
            for (node, nbrs) in g.neighbours(sign).iter().enumerate() {
                if nbrs.iter().any(|(j, _)| (node < nu) == (*j < nu)) {
                    failures.push(format!("trial {trial}: same-side edge at node {node}"));
                }
            }
        }
        let pos: std::collections::HashSet<(usize, usize)> = g.pos_edges().iter().map(|e| (e.user, e.entity)).collect();
        if g.neg_edges().iter().any(|e| pos.contains(&(e.user, e.entity))) {
            failures.push(format!("trial {trial}: edge in both signs"));
        }
        if let Some(e) = g.pos_edges().first() {
            let mut neg = g.neg_edges().to_vec();
            neg.push(*e);
            if SignedBipartiteGraph::new(g.users().to_vec(), g.entities().to_vec(), g.pos_edges().to_vec(), neg).is_ok() {
                failures.push(format!("trial {trial}: duplicate (user, entity) accepted"));
            }
        }
        let s = graph_stats(&g).unwrap();
        let b = brute_stats(&g);
        for (x, y) in [
            (s.density, b.density),
            (s.avg_degree_users, b.avg_degree_users),
            (s.avg_degree_entities, b.avg_degree_entities),
            (s.avg_common_neighbors_users, b.avg_common_users),
            (s.avg_common_neighbors_entities, b.avg_common_entities),
        ] {
            worst_stat = worst_stat.max((x - y).abs());
        }
        if parse_gexf(&to_gexf(&g, SignFilter::All)) != g {
            failures.push(format!("trial {trial}: GEXF round trip changed the graph"));
        }
    }
    if worst_stat > 1e-12 {
        failures.push(format!("statistics differ from brute force by {worst_stat:.2e}"));
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("300 random graphs: bipartite, sign-exclusive, stats within {worst_stat:.1e} of brute force, GEXF round trip exact")
        } else {
            failures.join("; ")
        },
    )
}
