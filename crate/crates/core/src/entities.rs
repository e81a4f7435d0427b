//! Named-entity mentions per post and their normalised keys.
//!
//! Mentions come either from an offline annotation file (one record per
//! post, spans with NER labels) or from a capitalisation + gazetteer
//! heuristic that needs no model.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CommentReplyPair, Post};
use crate::embeddings::sentence_spans;

/// NER categories that never become graph entities.
pub const DISCARDED_CATEGORIES: [&str; 7] = [
    "CARDINAL",
    "DATE",
    "ORDINAL",
    "WORK_OF_ART",
    "PERCENT",
    "QUANTITY",
    "MONEY",
];

pub const HEURISTIC_CATEGORY: &str = "HEUR";

#[derive(Debug, Error)]
pub enum EntityError {
    #[error("post {0:?} has no record in the annotation file")]
    MissingAnnotation(String),
    #[error("annotation line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("post {post_id:?}: span {start}..{end} is outside the text")]
    BadSpan {
        post_id: String,
        start: usize,
        end: usize,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercase single-token entity identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityKey(String);

impl EntityKey {
    /// Wraps an already-normalised key.
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub post_id: String,
    pub surface: String,
    pub category: String,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub text: String,
    pub label: String,
    /// character offsets into the post text
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Deserialize, Serialize)]
struct AnnotationLine {
    post_id: String,
    spans: Vec<Span>,
}

/// Spans keyed by post id, as exported by an external NER pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    spans: HashMap<String, Vec<Span>>,
}

impl AnnotationSet {
    pub fn insert(&mut self, post_id: &str, spans: Vec<Span>) {
        self.spans.insert(post_id.to_string(), spans);
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EntityError> {
        let mut set = AnnotationSet::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: AnnotationLine = serde_json::from_str(line).map_err(|e| EntityError::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
            if let Some(bad) = row.spans.iter().find(|s| s.start > s.end) {
                return Err(EntityError::Format {
                    line: i + 1,
                    message: format!("span start {} after end {}", bad.start, bad.end),
                });
            }
            if set.spans.insert(row.post_id.clone(), row.spans).is_some() {
                return Err(EntityError::Format {
                    line: i + 1,
                    message: format!("duplicate post_id {:?}", row.post_id),
                });
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, EntityError> {
        let text = std::fs::read_to_string(path).map_err(|e| EntityError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_jsonl(&text)
    }
}

/// Where mentions come from.
#[derive(Debug, Clone)]
pub enum MentionProvider {
    Annotations(AnnotationSet),
    /// Capitalised non-sentence-initial tokens plus case-insensitive hits
    /// against the listed lowercase terms.
    Heuristic { gazetteer: BTreeSet<String> },
}

impl MentionProvider {
    pub fn heuristic<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        MentionProvider::Heuristic {
            gazetteer: terms.into_iter().map(|t| t.as_ref().to_lowercase()).collect(),
        }
    }
}

fn sentence_of(spans: &[(usize, usize)], byte: usize) -> usize {
    spans.iter().rposition(|&(s, _)| s <= byte).unwrap_or(0)
}

/// Extracts mentions from one post, dropping discarded categories.
pub fn extract_mentions(post: &Post, provider: &MentionProvider) -> Result<Vec<EntityMention>, EntityError> {
    let sentences = sentence_spans(&post.text);
    match provider {
        MentionProvider::Annotations(set) => {
            let spans = set
                .spans
                .get(&post.post_id)
                .ok_or_else(|| EntityError::MissingAnnotation(post.post_id.clone()))?;
            let n_chars = post.text.chars().count();
            let mut out = Vec::new();
            for span in spans {
                if span.end > n_chars {
                    return Err(EntityError::BadSpan {
                        post_id: post.post_id.clone(),
                        start: span.start,
                        end: span.end,
                    });
                }
                if DISCARDED_CATEGORIES.contains(&span.label.as_str()) {
                    continue;
                }
                let byte = post
                    .text
                    .char_indices()
                    .nth(span.start)
                    .map_or(post.text.len(), |(b, _)| b);
                out.push(EntityMention {
                    post_id: post.post_id.clone(),
                    surface: span.text.clone(),
                    category: span.label.to_uppercase(),
                    sentence_index: sentence_of(&sentences, byte),
                });
            }
            Ok(out)
        }
        MentionProvider::Heuristic { gazetteer } => {
            let mut out = Vec::new();
            for (index, &(start, end)) in sentences.iter().enumerate() {
                let words = post.text[start..end]
                    .split_whitespace()
                    .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
                    .filter(|w| !w.is_empty());
                for (pos, word) in words.enumerate() {
                    let lower = word.to_lowercase();
                    let capitalised = pos > 0
                        && word.chars().next().is_some_and(char::is_uppercase)
                        && !is_first_person(&lower);
                    if capitalised || gazetteer.contains(&lower) {
                        out.push(EntityMention {
                            post_id: post.post_id.clone(),
                            surface: word.to_string(),
                            category: HEURISTIC_CATEGORY.to_string(),
                            sentence_index: index,
                        });
                    }
                }
            }
            Ok(out)
        }
    }
}

fn is_first_person(lower: &str) -> bool {
    matches!(lower, "i" | "i'm" | "i've" | "i'd" | "i'll")
}

/// Trimmed, lowercased key; `None` for blank or multiword surfaces.
pub fn normalize(mention: &EntityMention) -> Option<EntityKey> {
    normalize_surface(&mention.surface)
}

pub fn normalize_surface(surface: &str) -> Option<EntityKey> {
    let trimmed = surface.trim();
    if trimmed.is_empty() || trimmed.contains(char::is_whitespace) {
        return None;
    }
    Some(EntityKey(trimmed.to_lowercase()))
}

/// Corpus-wide mention counts and per-post presence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MentionIndex {
    pub counts: BTreeMap<EntityKey, usize>,
    pub mentions: BTreeSet<(String, EntityKey)>,
}

impl MentionIndex {
    pub fn mention_set(&self) -> HashSet<(String, EntityKey)> {
        self.mentions.iter().cloned().collect()
    }

    /// Entities mentioned by each post.
    pub fn by_post(&self) -> HashMap<&str, Vec<&EntityKey>> {
        let mut map: HashMap<&str, Vec<&EntityKey>> = HashMap::new();
        for (post, key) in &self.mentions {
            map.entry(post.as_str()).or_default().push(key);
        }
        map
    }
}

/// Counts normalised mentions over every distinct post in `pairs`. A post
/// shared by several pairs is counted once.
pub fn mention_index(pairs: &[CommentReplyPair], provider: &MentionProvider) -> Result<MentionIndex, EntityError> {
    let mut index = MentionIndex::default();
    let mut seen = HashSet::new();
    for post in pairs.iter().flat_map(|p| p.posts()) {
        if !seen.insert(post.post_id.as_str()) {
            continue;
        }
        for mention in extract_mentions(post, provider)? {
            if let Some(key) = normalize(&mention) {
                *index.counts.entry(key.clone()).or_default() += 1;
                index.mentions.insert((post.post_id.clone(), key));
            }
        }
    }
    Ok(index)
}
