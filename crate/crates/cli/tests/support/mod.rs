//! Fixture corpora and helpers for driving the binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const ENTITIES: [&str; 4] = ["Brexit", "Labour", "Tories", "Trump"];

fn post(id: &str, author: &str, text: &str) -> serde_json::Value {
    serde_json::json!({"post_id": id, "author_id": author, "text": text})
}

fn text_for(author: &str, entity: &str, i: usize) -> String {
    let lower = entity.to_lowercase();
    match author.as_bytes()[0] {
        b'a' => format!("I love {lower}. {entity} is good for politics. Vote {i} agrees."),
        b'b' => format!("I hate {lower}. {entity} is bad for politics. Vote {i} disagrees."),
        _ => format!("What happened with {lower} in politics today? Item {i}."),
    }
}

/// Two communities with opposite views on every entity, plus a few
/// bystanders. Same-side replies agree, cross-side replies disagree and
/// bystander replies are neutral.
pub fn polarized_corpus(n: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        let side = if i % 2 == 0 { 'a' } else { 'b' };
        let other = if side == 'a' { 'b' } else { 'a' };
        let comment_author = format!("{side}{}", (i / 2) % 10);
        let (reply_author, label) = match i % 5 {
            0 | 1 => (format!("{side}{}", (i / 2 + 3) % 10), "agree"),
            2 | 3 => (format!("{other}{}", (i / 2 + 7) % 10), "disagree"),
            _ => (format!("n{}", i % 4), "neutral"),
        };
        let entity = ENTITIES[i % 4];
        let pair = serde_json::json!({
            "pair_id": format!("pair{i}"),
            "subreddit": if i % 3 == 0 { "politics" } else { "brexit" },
            "comment": post(&format!("c{i}"), &comment_author, &text_for(&comment_author, entity, i)),
            "reply": post(&format!("r{i}"), &reply_author, &text_for(&reply_author, ENTITIES[(i + 1) % 4], i)),
            "label": label,
        });
        out.push_str(&pair.to_string());
        out.push('\n');
    }
    out
}

pub const CONFIG: &str = r#"
[paths]
corpus = "corpus.jsonl"

[split]
train_frac = 0.6
dev_frac = 0.2
test_frac = 0.2
seed = 0

[entities]
top_k = 10
sim_threshold = -1.0
gazetteer = ["brexit", "labour", "tories", "trump"]

[word_vectors]
dim = 8
epochs = 2

[train]
seeds = [0, 1]

[train.sgcn]
hidden = 8
"#;

/// Writes the fixture corpus and config into `dir`; returns the config path.
pub fn write_project(dir: &Path, n_pairs: usize) -> PathBuf {
    std::fs::write(dir.join("corpus.jsonl"), polarized_corpus(n_pairs)).unwrap();
    let config = dir.join("config.toml");
    std::fs::write(&config, CONFIG).unwrap();
    config
}

pub fn stentconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stentconv"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs a subcommand against a config and output directory, panicking with
/// the diagnostics when it fails.
pub fn run_ok(config: &Path, out: &Path, args: &[&str]) -> String {
    let mut all = vec!["--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let o = stentconv(&all);
    assert!(
        o.status.success(),
        "stentconv {args:?} failed ({:?}):\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

/// ingest through build-graph.
pub fn build_all(config: &Path, out: &Path) {
    for stage in ["ingest", "extract-entities", "score-stance", "build-graph"] {
        run_ok(config, out, &[stage]);
    }
}
