//! Generated tasks with a known answer, for end-to-end checks.
//!
//! Users belong to one of two communities with opposed stances on every
//! entity; a fraction of each community holds near-zero stances instead.
//! Stances go through the regular centring, sign split and graph build.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{CommentReplyPair, Label, Post};
use crate::embeddings::WordVectors;
use crate::entities::EntityKey;
use crate::graph::{build_graph, SignedBipartiteGraph};
use crate::linalg::Matrix;
use crate::model::{seeded_rng, GraphContext, TextVectorCache};
use crate::sgcn::NodeFeatures;
use crate::stance::{center_and_split, StanceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub users_per_community: usize,
    pub n_entities: usize,
    pub stance_magnitude: f64,
    pub noise_sd: f64,
    /// share of users with near-zero stances, and of pairs labelled neutral
    pub neutral_frac: f64,
    pub n_pairs: usize,
    pub feature_dim: usize,
    pub text_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users_per_community: 50,
            n_entities: 4,
            stance_magnitude: 1.0,
            noise_sd: 0.1,
            neutral_frac: 0.2,
            n_pairs: 1000,
            feature_dim: 16,
            text_dim: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Community {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticUser {
    pub id: String,
    pub community: Community,
    pub neutral: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub users: Vec<SyntheticUser>,
    pub entities: Vec<EntityKey>,
    pub records: Vec<StanceRecord>,
    pub pairs: Vec<CommentReplyPair>,
    pub text: TextVectorCache,
    pub entity_vectors: WordVectors,
}

impl SyntheticData {
    pub fn graph(&self) -> crate::Result<SignedBipartiteGraph> {
        let (_, pos, neg) = center_and_split(&self.records)?;
        let targets: HashSet<EntityKey> = self.entities.iter().cloned().collect();
        Ok(build_graph(&pos, &neg, &targets)?)
    }

    pub fn context(&self, weighted: bool) -> crate::Result<GraphContext> {
        let g = self.graph()?;
        let features = crate::sgcn::init_features(&g, &self.entity_vectors)?;
        Ok(GraphContext::new(g, features, weighted)?)
    }
}

fn entity_sign(community: Community, entity: usize) -> f64 {
    let base = if entity.is_multiple_of(2) { 1.0 } else { -1.0 };
    match community {
        Community::A => base,
        Community::B => -base,
    }
}

struct Population {
    users: Vec<SyntheticUser>,
    entities: Vec<EntityKey>,
    records: Vec<StanceRecord>,
    entity_vectors: WordVectors,
}

fn population<R: Rng>(config: &SyntheticConfig, rng: &mut R) -> crate::Result<Population> {
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| {
        crate::model::ModelError::Config(format!("noise_sd: {e}"))
    })?;
    let n_neutral = (config.users_per_community as f64 * config.neutral_frac).round() as usize;
    let mut users = Vec::new();
    for (c, community) in [Community::A, Community::B].into_iter().enumerate() {
        for i in 0..config.users_per_community {
            users.push(SyntheticUser {
                id: format!("user{}", c * config.users_per_community + i),
                community,
                neutral: i < n_neutral,
            });
        }
    }
    let entities: Vec<EntityKey> = (0..config.n_entities).map(|k| EntityKey::new(format!("topic{k}"))).collect();
    let mut records = Vec::new();
    for u in &users {
        for (k, e) in entities.iter().enumerate() {
            let signal = if u.neutral { 0.0 } else { entity_sign(u.community, k) * config.stance_magnitude };
            records.push(StanceRecord {
                user: u.id.clone(),
                entity: e.clone(),
                raw: signal + noise.sample(rng),
                centered: 0.0,
                n_posts: 1,
                n_sentences: 1,
            });
        }
    }
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut entity_vectors = WordVectors::new(config.feature_dim);
    for e in &entities {
        let v: Vec<f64> = (0..config.feature_dim).map(|_| unit.sample(rng)).collect();
        entity_vectors.insert(e.as_str(), &v)?;
    }
    Ok(Population {
        users,
        entities,
        records,
        entity_vectors,
    })
}

fn post(id: String, author: &str, subreddit: &str, text: String) -> Post {
    Post {
        post_id: id,
        author_id: author.to_string(),
        subreddit: subreddit.to_string(),
        text,
    }
}

fn make_pair(i: usize, comment: &str, reply: &str, label: Label, text: String) -> CommentReplyPair {
    let subreddit = ["politics_a", "politics_b"][i % 2];
    CommentReplyPair {
        pair_id: format!("p{i}"),
        subreddit: subreddit.to_string(),
        comment: post(format!("c{i}"), comment, subreddit, text.clone()),
        reply: post(format!("r{i}"), reply, subreddit, text),
        label,
    }
}

fn pick<'a, R: Rng>(pool: &[&'a SyntheticUser], not: Option<&str>, rng: &mut R) -> &'a SyntheticUser {
    loop {
        let u = *pool.choose(rng).expect("non-empty user pool");
        if Some(u.id.as_str()) != not {
            return u;
        }
    }
}

/// Cross-community pairs disagree, same-community pairs agree, and pairs
/// whose reply author holds near-zero stances are neutral. Text vectors are
/// pure noise.
pub fn polarization_task(config: &SyntheticConfig) -> crate::Result<SyntheticData> {
    let mut rng = seeded_rng(config.seed);
    let pop = population(config, &mut rng)?;
    let polar: Vec<&SyntheticUser> = pop.users.iter().filter(|u| !u.neutral).collect();
    let neutral: Vec<&SyntheticUser> = pop.users.iter().filter(|u| u.neutral).collect();
    let of = |c: Community| -> Vec<&SyntheticUser> { polar.iter().copied().filter(|u| u.community == c).collect() };
    let (side_a, side_b) = (of(Community::A), of(Community::B));

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut text = TextVectorCache::new(config.text_dim);
    let mut pairs = Vec::with_capacity(config.n_pairs);
    for i in 0..config.n_pairs {
        let c = pick(&polar, None, &mut rng);
        let (r, label) = if !neutral.is_empty() && rng.gen_bool(config.neutral_frac) {
            (pick(&neutral, None, &mut rng), Label::Neutral)
        } else if rng.gen_bool(0.5) {
            let same = if c.community == Community::A { &side_a } else { &side_b };
            (pick(same, Some(&c.id), &mut rng), Label::Agree)
        } else {
            let other = if c.community == Community::A { &side_b } else { &side_a };
            (pick(other, None, &mut rng), Label::Disagree)
        };
        let pair = make_pair(i, &c.id, &r.id, label, format!("post number {i}"));
        for p in pair.posts() {
            text.insert(&p.post_id, (0..config.text_dim).map(|_| unit.sample(&mut rng)).collect())?;
        }
        pairs.push(pair);
    }
    Ok(SyntheticData {
        users: pop.users,
        entities: pop.entities,
        records: pop.records,
        pairs,
        text,
        entity_vectors: pop.entity_vectors,
    })
}

/// Every comment comes from community A; the reply agrees when its author
/// is also from A, disagrees when from B, and is neutral when its author
/// holds near-zero stances. Both text vectors encode only the discussed
/// topic (one-hot plus noise), which says nothing about the label.
pub fn topic_task(config: &SyntheticConfig) -> crate::Result<SyntheticData> {
    let mut rng = seeded_rng(config.seed);
    let pop = population(config, &mut rng)?;
    let side = |c: Community| -> Vec<&SyntheticUser> {
        pop.users.iter().filter(|u| !u.neutral && u.community == c).collect()
    };
    let (side_a, side_b) = (side(Community::A), side(Community::B));
    let neutral: Vec<&SyntheticUser> = pop.users.iter().filter(|u| u.neutral).collect();
    if neutral.is_empty() || side_a.len() < 2 || side_b.is_empty() || config.text_dim < config.n_entities {
        return Err(crate::model::ModelError::Config(
            "topic task needs neutral users, two polar users per side and text_dim >= n_entities".into(),
        )
        .into());
    }
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| crate::model::ModelError::Config(e.to_string()))?;
    let mut text = TextVectorCache::new(config.text_dim);
    let mut pairs = Vec::with_capacity(config.n_pairs);
    for i in 0..config.n_pairs {
        let c = pick(&side_a, None, &mut rng);
        let label = Label::ALL[rng.gen_range(0..3)];
        let r = match label {
            Label::Agree => pick(&side_a, Some(&c.id), &mut rng),
            Label::Disagree => pick(&side_b, None, &mut rng),
            Label::Neutral => pick(&neutral, None, &mut rng),
        };
        let topic = rng.gen_range(0..config.n_entities);
        let pair = make_pair(i, &c.id, &r.id, label, format!("what about {}", pop.entities[topic]));
        for p in pair.posts() {
            let mut v: Vec<f64> = (0..config.text_dim).map(|_| noise.sample(&mut rng)).collect();
            v[topic] += 1.0;
            text.insert(&p.post_id, v)?;
        }
        pairs.push(pair);
    }
    Ok(SyntheticData {
        users: pop.users,
        entities: pop.entities,
        records: pop.records,
        pairs,
        text,
        entity_vectors: pop.entity_vectors,
    })
}

/// Random node features for `n` nodes; handy for small graph tests.
pub fn random_features<R: Rng>(n: usize, dim: usize, rng: &mut R) -> NodeFeatures {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let data = (0..n * dim).map(|_| unit.sample(rng)).collect();
    NodeFeatures(Matrix::from_vec(n, dim, data).expect("n·dim values"))
}
