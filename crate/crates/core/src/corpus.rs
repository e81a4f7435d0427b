//! Labelled comment-reply pairs: loading, validation, splitting, class
//! weights and entity-based subsetting.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entities::EntityKey;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown label {value:?}")]
    UnknownLabel { line: usize, value: String },
    #[error("line {line}: duplicate pair_id {pair_id:?}")]
    DuplicatePairId { line: usize, pair_id: String },
    #[error("line {line}: post_id {post_id:?} reused with different content")]
    ConflictingPost { line: usize, post_id: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("corpus is empty")]
    Empty,
    #[error("invalid split fractions: {0}")]
    BadSplit(String),
    #[error("class {0} has no examples")]
    MissingClass(Label),
}

/// Gold agreement label. The integer codes are fixed: disagree 0, neutral 1,
/// agree 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Disagree = 0,
    Neutral = 1,
    Agree = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Disagree, Label::Neutral, Label::Agree];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "disagree" => Some(Label::Disagree),
            "neutral" => Some(Label::Neutral),
            "agree" => Some(Label::Agree),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Disagree => "disagree",
            Label::Neutral => "neutral",
            Label::Agree => "agree",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub post_id: String,
    pub author_id: String,
    pub subreddit: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommentReplyPair {
    pub pair_id: String,
    pub subreddit: String,
    pub comment: Post,
    pub reply: Post,
    pub label: Label,
}

impl CommentReplyPair {
    pub fn posts(&self) -> [&Post; 2] {
        [&self.comment, &self.reply]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPost {
    post_id: String,
    author_id: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPair {
    pair_id: String,
    subreddit: String,
    comment: RawPost,
    reply: RawPost,
    label: String,
}

fn convert_post(raw: RawPost, subreddit: &str, line: usize, side: &str) -> Result<Post, CorpusError> {
    let invalid = |message: String| CorpusError::Invalid { line, message };
    if raw.post_id.is_empty() {
        return Err(invalid(format!("{side}.post_id is empty")));
    }
    if raw.author_id.is_empty() {
        return Err(invalid(format!("{side}.author_id is empty")));
    }
    if raw.text.trim().is_empty() {
        return Err(invalid(format!("{side}.text is blank")));
    }
    Ok(Post {
        post_id: raw.post_id,
        author_id: raw.author_id,
        subreddit: subreddit.to_string(),
        text: raw.text,
    })
}

/// Parses line-delimited pair records. Line numbers in errors are 1-based.
pub fn parse_corpus(text: &str) -> Result<Vec<CommentReplyPair>, CorpusError> {
    let mut pairs = Vec::new();
    let mut pair_ids = HashSet::new();
    // post_id -> (author, text); a post may recur across pairs but must not change
    let mut posts: HashMap<String, (String, String)> = HashMap::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let raw: RawPair = serde_json::from_str(raw_line).map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let label = Label::parse(&raw.label).ok_or_else(|| CorpusError::UnknownLabel {
            line,
            value: raw.label.clone(),
        })?;
        if raw.pair_id.is_empty() {
            return Err(CorpusError::Invalid {
                line,
                message: "pair_id is empty".into(),
            });
        }
        if !pair_ids.insert(raw.pair_id.clone()) {
            return Err(CorpusError::DuplicatePairId {
                line,
                pair_id: raw.pair_id,
            });
        }
        let comment = convert_post(raw.comment, &raw.subreddit, line, "comment")?;
        let reply = convert_post(raw.reply, &raw.subreddit, line, "reply")?;
        if comment.post_id == reply.post_id {
            return Err(CorpusError::Invalid {
                line,
                message: "comment and reply share a post_id".into(),
            });
        }
        for post in [&comment, &reply] {
            let content = (post.author_id.clone(), post.text.clone());
            match posts.get(&post.post_id) {
                Some(existing) if *existing != content => {
                    return Err(CorpusError::ConflictingPost {
                        line,
                        post_id: post.post_id.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    posts.insert(post.post_id.clone(), content);
                }
            }
        }
        pairs.push(CommentReplyPair {
            pair_id: raw.pair_id,
            subreddit: raw.subreddit,
            comment,
            reply,
            label,
        });
    }
    Ok(pairs)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CommentReplyPair>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_corpus(&text)
}

/// Serialises pairs in the corpus line format.
pub fn to_jsonl(pairs: &[CommentReplyPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let raw = RawPair {
            pair_id: p.pair_id.clone(),
            subreddit: p.subreddit.clone(),
            comment: RawPost {
                post_id: p.comment.post_id.clone(),
                author_id: p.comment.author_id.clone(),
                text: p.comment.text.clone(),
            },
            reply: RawPost {
                post_id: p.reply.post_id.clone(),
                author_id: p.reply.author_id.clone(),
                text: p.reply.text.clone(),
            },
            label: p.label.as_str().to_string(),
        };
        out.push_str(&serde_json::to_string(&raw).expect("pair serialises"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub dev_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            dev_frac: 0.1,
            test_frac: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fracs = [self.train_frac, self.dev_frac, self.test_frac];
        if fracs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(CorpusError::BadSplit(format!("fractions must be positive: {fracs:?}")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Partition sizes: dev and test are floored, train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon absorbs products like 0.29 * 100 = 28.999999999999996
        let floor = |frac: f64| ((n as f64) * frac + 1e-9).floor() as usize;
        let dev = floor(self.dev_frac);
        let test = floor(self.test_frac);
        (n - dev - test, dev, test)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<CommentReplyPair>,
    pub dev: Vec<CommentReplyPair>,
    pub test: Vec<CommentReplyPair>,
}

/// Seeded shuffle followed by a contiguous train/dev/test cut.
pub fn split_corpus(pairs: &[CommentReplyPair], spec: &SplitSpec) -> Result<Split, CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::Empty);
    }
    spec.validate()?;
    let (n_train, n_dev, _) = spec.sizes(pairs.len());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let take = |idx: &[usize]| idx.iter().map(|&i| pairs[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: take(&order[..n_train]),
        dev: take(&order[n_train..n_train + n_dev]),
        test: take(&order[n_train + n_dev..]),
    })
}

/// Inverse-frequency class weights `n / (3 · n_c)`.
pub fn class_weights(pairs: &[CommentReplyPair]) -> Result<[f64; 3], CorpusError> {
    let mut counts = [0usize; 3];
    for p in pairs {
        counts[p.label.index()] += 1;
    }
    class_weights_from_counts(counts)
}

pub fn class_weights_from_counts(counts: [usize; 3]) -> Result<[f64; 3], CorpusError> {
    let total: usize = counts.iter().sum();
    let mut weights = [0.0; 3];
    for (c, (&n_c, w)) in counts.iter().zip(weights.iter_mut()).enumerate() {
        if n_c == 0 {
            return Err(CorpusError::MissingClass(Label::ALL[c]));
        }
        *w = total as f64 / (3.0 * n_c as f64);
    }
    Ok(weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetMode {
    /// comment and reply each mention a target entity
    Both,
    /// at least one side mentions a target entity
    Either,
}

/// Keeps pairs whose posts mention target entities, preserving order.
pub fn subset_by_entities(
    pairs: &[CommentReplyPair],
    entities: &HashSet<EntityKey>,
    mentions: &HashSet<(String, EntityKey)>,
    mode: SubsetMode,
) -> Vec<CommentReplyPair> {
    let mentioning: HashSet<&str> = mentions
        .iter()
        .filter(|(_, key)| entities.contains(key))
        .map(|(post_id, _)| post_id.as_str())
        .collect();
    pairs
        .iter()
        .filter(|p| {
            let c = mentioning.contains(p.comment.post_id.as_str());
            let r = mentioning.contains(p.reply.post_id.as_str());
            match mode {
                SubsetMode::Both => c && r,
                SubsetMode::Either => c || r,
            }
        })
        .cloned()
        .collect()
}
