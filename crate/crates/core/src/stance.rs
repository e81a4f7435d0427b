//! Unsupervised user→entity stance.
//!
//! For every sentence a user wrote, the stance signal is the cosine to the
//! "pro" template minus the cosine to the "con" template. Sentence scores are
//! averaged within each post, and post averages are averaged across the
//! user's posts. The two-level mean matters: a post with many sentences does
//! not outweigh a post with one.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CommentReplyPair, Post};
use crate::embeddings::{cosine, split_sentences, tokenize, EmbedError, SentenceEmbedder};
use crate::entities::{EntityKey, MentionIndex};

#[derive(Debug, Error)]
pub enum StanceError {
    #[error("user {user:?} has no scoreable posts for entity {entity:?}")]
    NoScoreablePosts { user: String, entity: String },
    #[error("no stance records to centre")]
    Empty,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("stance dump line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StanceRecord {
    pub user: String,
    pub entity: EntityKey,
    pub raw: f64,
    pub centered: f64,
    pub n_posts: usize,
    pub n_sentences: usize,
}

impl StanceRecord {
    pub fn is_positive(&self) -> bool {
        self.centered >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceStats {
    pub mu: f64,
    pub count: usize,
}

/// Which sentences of a post take part in scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceScope {
    #[default]
    FullPost,
    /// only sentences whose tokens include the entity key
    EntitySentences,
}

/// Which of a user's posts count towards the stance on an entity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostSelection {
    /// posts by the user that mention the entity
    #[default]
    Mentioning,
    /// every post by the user
    AllUserPosts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StanceOptions {
    pub scope: SentenceScope,
    pub posts: PostSelection,
}

pub fn template_pair(entity: &EntityKey) -> (String, String) {
    (
        format!("I am for {}", entity.as_str()),
        format!("I am against {}", entity.as_str()),
    )
}

/// Sentences of `text` that take part in scoring. Sentences without any
/// alphanumeric token carry no signal and are dropped.
fn scoring_sentences<'t>(text: &'t str, entity: &EntityKey, scope: SentenceScope) -> Vec<&'t str> {
    split_sentences(text)
        .into_iter()
        .filter(|s| {
            let tokens = tokenize(s);
            match scope {
                SentenceScope::FullPost => !tokens.is_empty(),
                SentenceScope::EntitySentences => tokens.iter().any(|t| t == entity.as_str()),
            }
        })
        .collect()
}

/// Mean over posts of the mean over sentences of `cos(s, pro) − cos(s, con)`.
/// Posts with no sentences are skipped. Returns `(raw, n_posts, n_sentences)`.
fn nested_mean(
    posts: &[Vec<Vec<f64>>],
    pro: &[f64],
    con: &[f64],
) -> Result<Option<(f64, usize, usize)>, EmbedError> {
    let mut total = 0.0;
    let mut n_posts = 0;
    let mut n_sentences = 0;
    for sentences in posts.iter().filter(|s| !s.is_empty()) {
        let mut post_sum = 0.0;
        for s in sentences {
            post_sum += cosine(s, pro)? - cosine(s, con)?;
        }
        total += post_sum / sentences.len() as f64;
        n_posts += 1;
        n_sentences += sentences.len();
    }
    if n_posts == 0 {
        return Ok(None);
    }
    Ok(Some((total / n_posts as f64, n_posts, n_sentences)))
}

/// Stance of `user` towards `entity` over the given posts.
pub fn stance_raw(
    user: &str,
    entity: &EntityKey,
    posts: &[&Post],
    embedder: &dyn SentenceEmbedder,
    scope: SentenceScope,
) -> Result<StanceRecord, StanceError> {
    let (pro, con) = template_pair(entity);
    stance_raw_with_templates(user, entity, posts, embedder, scope, &pro, &con)
}

/// [`stance_raw`] with explicit template sentences.
pub fn stance_raw_with_templates(
    user: &str,
    entity: &EntityKey,
    posts: &[&Post],
    embedder: &dyn SentenceEmbedder,
    scope: SentenceScope,
    pro: &str,
    con: &str,
) -> Result<StanceRecord, StanceError> {
    let pro_vec = embedder.embed(pro)?;
    let con_vec = embedder.embed(con)?;
    let embedded = posts
        .iter()
        .map(|p| {
            scoring_sentences(&p.text, entity, scope)
                .into_iter()
                .map(|s| embedder.embed(s))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (raw, n_posts, n_sentences) =
        nested_mean(&embedded, &pro_vec, &con_vec)?.ok_or_else(|| StanceError::NoScoreablePosts {
            user: user.to_string(),
            entity: entity.to_string(),
        })?;
    Ok(StanceRecord {
        user: user.to_string(),
        entity: entity.clone(),
        raw,
        centered: raw,
        n_posts,
        n_sentences,
    })
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOutcome {
    /// sorted by (user, entity)
    pub records: Vec<StanceRecord>,
    /// (user, entity) pairs with no scoreable sentence
    pub skipped: usize,
}

/// Scores every (author, mentioned entity) combination found in `pairs`.
/// `only` restricts scoring to a subset of entities.
pub fn score_stances(
    pairs: &[CommentReplyPair],
    index: &MentionIndex,
    embedder: &dyn SentenceEmbedder,
    options: StanceOptions,
    only: Option<&HashSet<EntityKey>>,
) -> Result<ScoreOutcome, StanceError> {
    let mut seen = HashSet::new();
    let mut by_user: BTreeMap<&str, Vec<&Post>> = BTreeMap::new();
    for post in pairs.iter().flat_map(|p| p.posts()) {
        if seen.insert(post.post_id.as_str()) {
            by_user.entry(post.author_id.as_str()).or_default().push(post);
        }
    }
    let post_entities = index.by_post();

    // embeddings are memoised per sentence string
    let mut memo: HashMap<String, Vec<f64>> = HashMap::new();
    let mut embed = |s: &str| -> Result<Vec<f64>, EmbedError> {
        if let Some(v) = memo.get(s) {
            return Ok(v.clone());
        }
        let v = embedder.embed(s)?;
        memo.insert(s.to_string(), v.clone());
        Ok(v)
    };

    let mut outcome = ScoreOutcome::default();
    for (user, posts) in by_user {
        let mentioned: BTreeSet<&EntityKey> = posts
            .iter()
            .filter_map(|p| post_entities.get(p.post_id.as_str()))
            .flatten()
            .copied()
            .filter(|k| only.is_none_or(|set| set.contains(*k)))
            .collect();
        for entity in mentioned {
            let selected: Vec<&Post> = posts
                .iter()
                .copied()
                .filter(|p| match options.posts {
                    PostSelection::AllUserPosts => true,
                    PostSelection::Mentioning => post_entities
                        .get(p.post_id.as_str())
                        .is_some_and(|keys| keys.contains(&entity)),
                })
                .collect();
            let (pro, con) = template_pair(entity);
            let pro_vec = embed(&pro)?;
            let con_vec = embed(&con)?;
            let embedded = selected
                .iter()
                .map(|p| {
                    scoring_sentences(&p.text, entity, options.scope)
                        .into_iter()
                        .map(&mut embed)
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            match nested_mean(&embedded, &pro_vec, &con_vec)? {
                Some((raw, n_posts, n_sentences)) => outcome.records.push(StanceRecord {
                    user: user.to_string(),
                    entity: entity.clone(),
                    raw,
                    centered: raw,
                    n_posts,
                    n_sentences,
                }),
                None => outcome.skipped += 1,
            }
        }
    }
    Ok(outcome)
}

/// Mean-centres raw stances and partitions them: `raw ≥ μ` is positive.
pub fn center_and_split(
    records: &[StanceRecord],
) -> Result<(StanceStats, Vec<StanceRecord>, Vec<StanceRecord>), StanceError> {
    if records.is_empty() {
        return Err(StanceError::Empty);
    }
    let mu = records.iter().map(|r| r.raw).sum::<f64>() / records.len() as f64;
    let stats = StanceStats {
        mu,
        count: records.len(),
    };
    let (pos, neg) = center_with(records, &stats);
    Ok((stats, pos, neg))
}

/// Centres and splits with a previously computed mean, e.g. the training
/// split's μ applied to evaluation-time stances.
pub fn center_with(records: &[StanceRecord], stats: &StanceStats) -> (Vec<StanceRecord>, Vec<StanceRecord>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for r in records {
        let mut r = r.clone();
        r.centered = r.raw - stats.mu;
        if r.raw >= stats.mu {
            pos.push(r);
        } else {
            neg.push(r);
        }
    }
    (pos, neg)
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpLine {
    user: String,
    entity: String,
    raw: f64,
    centered: f64,
    sign: String,
    #[serde(default = "one")]
    n_posts: usize,
    #[serde(default = "one")]
    n_sentences: usize,
}

fn one() -> usize {
    1
}

/// One JSON object per record with its sign, for audit and graph building.
pub fn write_dump(path: &Path, records: &[StanceRecord]) -> crate::Result<()> {
    let lines: Vec<DumpLine> = records
        .iter()
        .map(|r| DumpLine {
            user: r.user.clone(),
            entity: r.entity.to_string(),
            raw: r.raw,
            centered: r.centered,
            sign: if r.is_positive() { "+" } else { "-" }.into(),
            n_posts: r.n_posts,
            n_sentences: r.n_sentences,
        })
        .collect();
    crate::io::write_jsonl(path, &lines)
}

/// Reads a dump back as (positive, negative) lists.
pub fn parse_dump(text: &str) -> Result<(Vec<StanceRecord>, Vec<StanceRecord>), StanceError> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: DumpLine = serde_json::from_str(line).map_err(|e| StanceError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        let record = StanceRecord {
            user: d.user,
            entity: EntityKey::new(d.entity),
            raw: d.raw,
            centered: d.centered,
            n_posts: d.n_posts,
            n_sentences: d.n_sentences,
        };
        match d.sign.as_str() {
            "+" => pos.push(record),
            "-" => neg.push(record),
            other => {
                return Err(StanceError::Format {
                    line: i + 1,
                    message: format!("sign must be \"+\" or \"-\", got {other:?}"),
                })
            }
        }
    }
    Ok((pos, neg))
}
