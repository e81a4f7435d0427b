//! Skip-gram with negative sampling.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tokenize, EmbedError, WordVectors};
use crate::linalg::{axpy, dot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 1,
        }
    }
}

impl SkipGramConfig {
    fn validate(&self) -> Result<(), EmbedError> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("negative_samples", self.negative_samples),
            ("epochs", self.epochs),
            ("min_count", self.min_count),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(EmbedError::BadConfig(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(EmbedError::BadConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedVectors {
    pub vectors: WordVectors,
    /// Mean negative-sampling loss per (centre, context) pair, one per epoch.
    pub epoch_losses: Vec<f64>,
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Trains word vectors on tokenised texts. Single-threaded and fully
/// determined by `config.seed`.
pub fn train_word_vectors<S: AsRef<str>>(
    texts: &[S],
    config: &SkipGramConfig,
) -> Result<TrainedVectors, EmbedError> {
    config.validate()?;
    let sentences: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tok in sentences.iter().flatten() {
        *counts.entry(tok.as_str()).or_default() += 1;
    }
    let mut vocab: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count)
        .collect();
    if vocab.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let ids: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| ids.get(t.as_str()).copied()).collect())
        .collect();

    let noise = WeightedIndex::new(vocab.iter().map(|&(_, c)| (c as f64).powf(0.75)))
        .expect("vocabulary weights are positive");
    let dim = config.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..v * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; v * dim];

    let words_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total_steps = (words_per_epoch * config.epochs).max(1) as f64;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad = vec![0.0; dim];

    for _ in 0..config.epochs {
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for sentence in &encoded {
            for (pos, &centre) in sentence.iter().enumerate() {
                let lr = config.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(sentence.len());
                for (ctx_pos, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let centre_vec = &mut input[centre * dim..(centre + 1) * dim];
                    for k in 0..=config.negative_samples {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out_vec = &mut output[target * dim..(target + 1) * dim];
                        let score = dot(centre_vec, out_vec);
                        loss -= if label == 1.0 { log_sigmoid(score) } else { log_sigmoid(-score) };
                        let g = (label - sigmoid(score)) * lr;
                        axpy(&mut grad, g, out_vec);
                        axpy(out_vec, g, centre_vec);
                    }
                    axpy(centre_vec, 1.0, &grad);
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }

    let mut vectors = WordVectors::new(dim);
    for (i, (token, _)) in vocab.iter().enumerate() {
        vectors.insert(token, &input[i * dim..(i + 1) * dim])?;
    }
    Ok(TrainedVectors {
        vectors,
        epoch_losses,
    })
}
