mod common;

use common::checks::{grad_fixture, SGCN_VARIANTS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stentconv::corpus::Label;
use stentconv::model::{
    argmax, forward, forward_batch, predict, softmax, weighted_cross_entropy, Ablation, Example,
};

fn random_examples(seed: u64, n: usize, users: usize, text_dim: usize) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut author = || (rng.gen_bool(0.8)).then(|| rng.gen_range(0..users));
            let (author_c, author_r) = (author(), author());
            Example {
                pair_id: format!("p{i}"),
                subreddit: "s".into(),
                label: Label::ALL[i % 3],
                v_c: (0..text_dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                v_r: (0..text_dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                author_c,
                author_r,
            }
        })
        .collect()
}

#[test]
fn predict_is_argmax_of_forward_on_100_pairs() {
    let f = grad_fixture(11, SGCN_VARIANTS[2].1, SGCN_VARIANTS[2].0);
    let examples = random_examples(5, 100, f.ctx.graph.n_users(), 2);
    for ablation in Ablation::ALL {
        for ex in &examples {
            let logits = forward(&f.params, Some(&f.ctx), ablation, ex).unwrap();
            assert_eq!(predict(&f.params, Some(&f.ctx), ablation, ex).unwrap(), argmax(&logits));
        }
    }
}

#[test]
fn argmax_examples() {
    assert_eq!(argmax(&[0.1, 0.9, 0.3]), Label::ALL[1]);
    assert_eq!(argmax(&[1.0, 1.0, 0.0]), Label::ALL[0]);
    assert_eq!(argmax(&[0.0, 2.0, 2.0]), Label::ALL[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_logit_shift_keeps_predictions(seed in 0u64..5_000, shift in -5.0f64..5.0) {
        let (n_layers, aggregation) = SGCN_VARIANTS[(seed % 3) as usize];
        let f = grad_fixture(seed, aggregation, n_layers);
        let mut shifted = f.params.clone();
        shifted.head.b.iter_mut().for_each(|b| *b += shift);
        for ex in &f.examples {
            for ablation in Ablation::ALL {
                let a = predict(&f.params, Some(&f.ctx), ablation, ex).unwrap();
                let b = predict(&shifted, Some(&f.ctx), ablation, ex).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn authors_outside_the_graph_give_text_only_logits(seed in 0u64..5_000) {
        let f = grad_fixture(seed, SGCN_VARIANTS[1].1, SGCN_VARIANTS[1].0);
        for ex in &f.examples {
            let ex = Example { author_c: None, author_r: None, ..ex.clone() };
            prop_assert_eq!(
                forward(&f.params, Some(&f.ctx), Ablation::Full, &ex).unwrap(),
                forward(&f.params, Some(&f.ctx), Ablation::TextOnly, &ex).unwrap()
            );
        }
    }

    #[test]
    fn batch_forward_matches_single_forward(seed in 0u64..5_000) {
        let (n_layers, aggregation) = SGCN_VARIANTS[(seed % 3) as usize];
        let f = grad_fixture(seed, aggregation, n_layers);
        let batch: Vec<&Example> = f.examples.iter().collect();
        let all = forward_batch(&f.params, Some(&f.ctx), Ablation::Full, &batch).unwrap();
        for (ex, logits) in f.examples.iter().zip(&all) {
            let one = forward(&f.params, Some(&f.ctx), Ablation::Full, ex).unwrap();
            for k in 0..3 {
                prop_assert!((one[k] - logits[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cross_entropy_is_weighted_negative_log_softmax(
        logits in proptest::array::uniform3(-50.0f64..50.0),
        label in 0usize..3,
        weights in proptest::array::uniform3(0.1f64..5.0),
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let loss = weighted_cross_entropy(&logits, Label::ALL[label], &weights).unwrap();
        prop_assert!(loss >= 0.0);
        let direct = -weights[label] * p[label].ln();
        prop_assert!((loss - direct).abs() <= 1e-9 * (1.0 + direct.abs()) || p[label] < 1e-300);
    }
}
