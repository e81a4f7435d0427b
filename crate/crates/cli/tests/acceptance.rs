//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails. Set `STENTCONV_REAL_CONFIG` to a run configuration over
//! the full agreement corpus to enable the real-data check.

mod support;

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use common::checks::{self, Check};
use stentconv::graph::GraphStats;
use stentconv_cli::RunReport;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

impl From<Check> for Outcome {
    fn from(c: Check) -> Self {
        match c {
            Ok(d) => Outcome::Pass(d),
            Err(d) => Outcome::Fail(d),
        }
    }
}

fn determinism() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = support::write_project(dir.path(), 120);
    let files = [
        "graph_stats.json",
        "runs/full/report.json",
        "runs/full/seed0/report.json",
        "runs/full/seed0/epochs.jsonl",
        "runs/text_only/report.json",
        "runs/gcn_only/report.json",
        "ablation.json",
    ];
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        support::build_all(&config, &out);
        for ablation in ["full", "text_only", "gcn_only"] {
            support::run_ok(&config, &out, &["train", "--ablation", ablation, "--seed", "0"]);
        }
        let bytes: Vec<Vec<u8>> = files
            .iter()
            .map(|f| std::fs::read(out.join(f)).map_err(|e| format!("{f}: {e}")))
            .collect::<Result<_, _>>()?;
        outputs.push(bytes);
    }
    let differing: Vec<&str> = files
        .iter()
        .zip(outputs[0].iter().zip(&outputs[1]))
        .filter(|(_, (a, b))| a != b)
        .map(|(f, _)| *f)
        .collect();
    let detail = format!(
        "{} metric files over ingest → train (3 ablations) twice, {:.1}s",
        files.len(),
        start.elapsed().as_secs_f64()
    );
    if differing.is_empty() {
        Ok(format!("{detail}, all byte-identical"))
    } else {
        Err(format!("{detail}, differing: {differing:?}"))
    }
}

const REFERENCE_ENTITIES: &str = "american antifa aoc asian backstop bernie biden black blm brexit brexiteers brown \
    christian cnn communist con confederate conservative corbyn cuomo dem democrat democratic dems dnc fascist fbi \
    floyd george gop greta holocaust jew kkk leave leftist liberal libertarian maga marxist mcconnell moderate moron \
    msm muslim nazi party patriot pete poc progressive propaganda qanon racist referendum remainers republican riot \
    romney sander senate statue tory trump tucker warren white";

fn within(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

fn real_data(config: &Path) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path();
    support::build_all(config, out);
    let stats: GraphStats = serde_json::from_str(&std::fs::read_to_string(out.join("graph_stats.json")).unwrap())
        .map_err(|e| e.to_string())?;
    let reference = [
        ("users", stats.n_users as f64, 7107.0),
        ("entities", stats.n_entities as f64, 67.0),
        ("positive edges", stats.n_pos as f64, 3997.0),
        ("negative edges", stats.n_neg as f64, 4615.0),
        ("user degree", stats.avg_degree_users, 1.83),
        ("entity degree", stats.avg_degree_entities, 194.0),
        ("user common neighbours", stats.avg_common_neighbors_users, 0.32),
        ("entity common neighbours", stats.avg_common_neighbors_entities, 5.67),
    ];
    let off: Vec<String> = reference
        .iter()
        .filter(|(_, got, want)| !within(*got, *want, 0.05))
        .map(|(name, got, want)| format!("{name} {got:.3} vs {want}"))
        .collect();

    let targets: Vec<String> = serde_json::from_str(&std::fs::read_to_string(out.join("targets.json")).unwrap())
        .map_err(|e| e.to_string())?;
    let reference: BTreeSet<&str> = REFERENCE_ENTITIES.split_whitespace().collect();
    let overlap = targets.iter().filter(|t| reference.contains(t.as_str())).count() as f64 / reference.len() as f64;

    let mut f1 = Vec::new();
    for ablation in ["full", "text_only"] {
        support::run_ok(config, out, &["train", "--ablation", ablation, "--subset", "both"]);
        let path = out.join("runs").join(ablation).join("report.json");
        let report: RunReport =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).map_err(|e| e.to_string())?;
        f1.push(report.summary.macro_f1.mean);
    }
    let gap = f1[0] - f1[1];
    let detail = format!(
        "stats outside 5%: {off:?}; entity overlap {:.1}% (need >= 80%); full - text_only on both-subset {gap:.3} (need > 0)",
        overlap * 100.0
    );
    if off.is_empty() && overlap >= 0.8 && gap > 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("sgcn oracle equivalence", checks::sgcn_oracle_equivalence().into()),
        ("gradient correctness", checks::gradient_correctness().into()),
        ("stance properties", checks::stance_properties().into()),
    ];
    let polarization = checks::polarization_runs();
    results.push(("synthetic polarization: gcn_only >= 0.90", checks::polarization_gcn_only(&polarization).into()));
    results.push((
        "synthetic polarization: full within 0.05 of gcn_only",
        checks::polarization_full_matches(&polarization).into(),
    ));
    results.push(("added signal: full beats text_only by 0.15", checks::added_signal().into()));
    results.push(("metric oracles", checks::metric_oracles().into()));
    results.push(("graph invariants", checks::graph_invariants().into()));
    results.push(("cli determinism", determinism().into()));
    let real = match std::env::var_os("STENTCONV_REAL_CONFIG") {
        Some(path) => real_data(Path::new(&path)).into(),
        None => Outcome::Skip("STENTCONV_REAL_CONFIG not set".into()),
    };
    results.push(("real data (optional)", real));

    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for (name, outcome) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => {
                passed += 1;
                ("PASS", d)
            }
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => {
                skipped += 1;
                ("SKIP", d)
            }
        };
        println!("{tag} {name}: {detail}");
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 {
        std::process::exit(1);
    }
}
