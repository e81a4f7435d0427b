//! Minibatch training with decoupled weight decay.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    forward_batch, init_params, loss_and_grads, seeded_rng, Example, GraphContext, ModelError, ModelParams, TrainConfig,
};
use crate::corpus::{class_weights_from_counts, Label};
use crate::eval::{evaluate, EvalReport, Prediction};

/// Adam with weight decay applied directly to the parameters.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        let mut ps = params.slices_mut();
        let gs = grads.slices();
        assert_eq!(ps.len(), gs.len(), "gradient layout differs from parameters");
        if self.m.is_empty() {
            self.m = gs.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (k, (p, g)) in ps.iter_mut().zip(&gs).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
                p[i] -= self.lr * (update + self.weight_decay * p[i]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub epochs: Vec<EpochMetrics>,
    pub class_weights: [f64; 3],
}

/// Trains one seed. Class weights come from the whole training set; the dev
/// set is only scored, never used for selection.
pub fn train(
    train: &[Example],
    dev: &[Example],
    ctx: Option<&GraphContext>,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    let text_dim = train.first().ok_or(ModelError::EmptyTrainingSet)?.v_c.len();
    let mut counts = [0; 3];
    for ex in train {
        counts[ex.label.index()] += 1;
    }
    let class_weights = class_weights_from_counts(counts)?;

    let mut rng = seeded_rng(seed);
    let mut params = init_params(config, text_dim, ctx, &mut rng)?;
    let mut opt = AdamW::new(config.learning_rate, config.weight_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs());

    for epoch in 1..=config.epochs() {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = loss_and_grads(&params, ctx, config.ablation, &batch, &class_weights)?;
            total += loss * batch.len() as f64;
            opt.step(&mut params, &grads);
        }
        if !params.is_finite() {
            return Err(ModelError::NonFinite(format!("parameters after epoch {epoch}")));
        }
        let dev_macro_f1 = if dev.is_empty() {
            None
        } else {
            Some(evaluate_examples(&params, ctx, config.ablation, dev)?.macro_f1_overall)
        };
        epochs.push(EpochMetrics {
            epoch,
            train_loss: total / train.len() as f64,
            dev_macro_f1,
        });
    }
    Ok(TrainOutcome {
        params,
        epochs,
        class_weights,
    })
}

const EVAL_BATCH: usize = 256;

pub fn predict_examples(
    params: &ModelParams,
    ctx: Option<&GraphContext>,
    ablation: super::Ablation,
    examples: &[Example],
) -> Result<Vec<Label>, ModelError> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(EVAL_BATCH) {
        let batch: Vec<&Example> = chunk.iter().collect();
        out.extend(forward_batch(params, ctx, ablation, &batch)?.iter().map(super::argmax));
    }
    Ok(out)
}

pub fn evaluate_examples(
    params: &ModelParams,
    ctx: Option<&GraphContext>,
    ablation: super::Ablation,
    examples: &[Example],
) -> Result<EvalReport, ModelError> {
    let preds = predict_examples(params, ctx, ablation, examples)?;
    let rows: Vec<Prediction> = examples
        .iter()
        .zip(preds)
        .map(|(ex, pred)| Prediction {
            subreddit: ex.subreddit.clone(),
            gold: ex.label,
            pred,
        })
        .collect();
    Ok(evaluate(&rows)?)
}
