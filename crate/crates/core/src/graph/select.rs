use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{kendall_tau, GraphError};
use crate::corpus::CommentReplyPair;
use crate::embeddings::{cosine, WordVectors};
use crate::entities::EntityKey;
use crate::stance::StanceRecord;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetSelection {
    pub entities: BTreeSet<EntityKey>,
    /// candidates inside the frequency cut that had no usable vector
    pub missing_vectors: usize,
}

fn title_vectors<'v>(vectors: &'v WordVectors, titles: &[String]) -> Result<Vec<&'v [f64]>, GraphError> {
    titles
        .iter()
        .map(|t| {
            let key = t.trim().to_lowercase();
            vectors.get(&key).ok_or(GraphError::MissingVector(key))
        })
        .collect()
}

/// Entities ranked by mention count (ties broken by key), cut at `top_k`,
/// then kept when single-word and within `sim_threshold` cosine of at least
/// one subreddit title vector.
pub fn select_target_entities(
    counts: &BTreeMap<EntityKey, usize>,
    vectors: &WordVectors,
    titles: &[String],
    top_k: usize,
    sim_threshold: f64,
) -> Result<TargetSelection, GraphError> {
    let title_vecs = title_vectors(vectors, titles)?;
    let mut ranked: Vec<(&EntityKey, usize)> = counts.iter().map(|(k, &c)| (k, c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut selection = TargetSelection::default();
    for (key, _) in ranked.into_iter().take(top_k) {
        if key.as_str().contains(char::is_whitespace) {
            continue;
        }
        let Some(v) = vectors.get(key.as_str()) else {
            selection.missing_vectors += 1;
            continue;
        };
        let mut best = f64::NEG_INFINITY;
        let mut usable = true;
        for t in &title_vecs {
            match cosine(v, t) {
                Ok(c) => best = best.max(c),
                Err(_) => {
                    usable = false;
                    break;
                }
            }
        }
        if !usable {
            selection.missing_vectors += 1;
            continue;
        }
        if best >= sim_threshold {
            selection.entities.insert(key.clone());
        }
    }
    Ok(selection)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub top_k: usize,
    pub sim_threshold: f64,
    pub n_entities: usize,
    /// pairs where both authors have a non-zero stance vector
    pub n_pairs: usize,
    /// absent when no entity qualifies or the correlation is undefined
    pub tau: Option<f64>,
}

/// Per-author `[Σ negative-stance entity vectors ; Σ positive-stance entity
/// vectors]` over the given targets.
fn author_vectors(
    records: &[StanceRecord],
    vectors: &WordVectors,
    targets: &HashSet<&EntityKey>,
) -> HashMap<String, Vec<f64>> {
    let dim = vectors.dim();
    let mut out: HashMap<String, Vec<f64>> = HashMap::new();
    for r in records.iter().filter(|r| targets.contains(&r.entity)) {
        let Some(v) = vectors.get(r.entity.as_str()) else {
            continue;
        };
        let acc = out.entry(r.user.clone()).or_insert_with(|| vec![0.0; 2 * dim]);
        let block = if r.is_positive() { &mut acc[dim..] } else { &mut acc[..dim] };
        crate::linalg::axpy(block, 1.0, v);
    }
    out
}

/// For every grid cell, Kendall τ between the cosine of the two authors'
/// stance vectors and the pair label.
pub fn sensitivity_scan(
    pairs: &[CommentReplyPair],
    records: &[StanceRecord],
    counts: &BTreeMap<EntityKey, usize>,
    vectors: &WordVectors,
    titles: &[String],
    top_k_grid: &[usize],
    sim_grid: &[f64],
) -> Result<Vec<SensitivityCell>, GraphError> {
    let mut cells = Vec::new();
    for &top_k in top_k_grid {
        for &sim_threshold in sim_grid {
            let selection = select_target_entities(counts, vectors, titles, top_k, sim_threshold)?;
            let targets: HashSet<&EntityKey> = selection.entities.iter().collect();
            let mut cell = SensitivityCell {
                top_k,
                sim_threshold,
                n_entities: targets.len(),
                n_pairs: 0,
                tau: None,
            };
            if !targets.is_empty() {
                let authors = author_vectors(records, vectors, &targets);
                let mut sims = Vec::new();
                let mut labels = Vec::new();
                for p in pairs {
                    let (Some(a), Some(b)) = (authors.get(&p.comment.author_id), authors.get(&p.reply.author_id)) else {
                        continue;
                    };
                    if let Ok(c) = cosine(a, b) {
                        sims.push(c);
                        labels.push(p.label.index() as f64);
                    }
                }
                cell.n_pairs = sims.len();
                cell.tau = kendall_tau(&sims, &labels).ok();
            }
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Cosine between each subreddit title (rows) and each target entity
/// (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub titles: Vec<String>,
    pub entities: Vec<EntityKey>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["title".to_string()];
        header.extend(self.entities.iter().map(|e| e.to_string()));
        w.write_record(&header).expect("in-memory csv write");
        for (title, row) in self.titles.iter().zip(&self.values) {
            let mut rec = vec![title.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
    }
}

pub fn subreddit_entity_matrix(
    targets: &[EntityKey],
    vectors: &WordVectors,
    titles: &[String],
) -> Result<SimilarityMatrix, GraphError> {
    let title_vecs = title_vectors(vectors, titles)?;
    let entity_vecs = targets
        .iter()
        .map(|e| {
            vectors
                .get(e.as_str())
                .ok_or_else(|| GraphError::MissingVector(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let values = title_vecs
        .iter()
        .map(|t| entity_vecs.iter().map(|e| cosine(t, e)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimilarityMatrix {
        titles: titles.to_vec(),
        entities: targets.to_vec(),
        values,
    })
}
