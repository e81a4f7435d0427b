//! Macro-F1, confusion matrices and seed-averaged ablation tables.
//!
//! Labels are class indices in `0..3` (see [`Label::index`]). A class that
//! has no true positives, false positives or false negatives gets F1 = 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub const N_CLASSES: usize = 3;

pub type Confusion = [[usize; N_CLASSES]; N_CLASSES];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{0} predictions for {1} gold labels")]
    LengthMismatch(usize, usize),
    #[error("no examples to evaluate")]
    Empty,
    #[error("label index {0} outside 0..3")]
    BadLabel(usize),
    #[error("ablation report needs at least one run")]
    NoRuns,
}

/// Entry `[g][p]` counts examples with gold `g` predicted as `p`.
pub fn confusion_matrix(preds: &[usize], golds: &[usize]) -> Result<Confusion, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch(preds.len(), golds.len()));
    }
    let mut m = [[0; N_CLASSES]; N_CLASSES];
    for (&p, &g) in preds.iter().zip(golds) {
        for x in [p, g] {
            if x >= N_CLASSES {
                return Err(EvalError::BadLabel(x));
            }
        }
        m[g][p] += 1;
    }
    Ok(m)
}

pub fn per_class_f1(confusion: &Confusion) -> [f64; N_CLASSES] {
    let mut out = [0.0; N_CLASSES];
    for (c, f1) in out.iter_mut().enumerate() {
        let tp = confusion[c][c];
        let fp: usize = (0..N_CLASSES).filter(|&g| g != c).map(|g| confusion[g][c]).sum();
        let fn_: usize = (0..N_CLASSES).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        let denom = 2 * tp + fp + fn_;
        *f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    }
    out
}

pub fn macro_f1(preds: &[usize], golds: &[usize]) -> Result<f64, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::Empty);
    }
    let f1 = per_class_f1(&confusion_matrix(preds, golds)?);
    Ok(f1.iter().sum::<f64>() / N_CLASSES as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub macro_f1_overall: f64,
    pub per_class_f1: [f64; N_CLASSES],
    pub macro_f1_by_subreddit: BTreeMap<String, f64>,
    /// rows are gold classes, columns predictions
    pub confusion: Confusion,
}

/// One prediction with the context needed for per-subreddit breakdowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub subreddit: String,
    pub gold: Label,
    pub pred: Label,
}

pub fn evaluate(predictions: &[Prediction]) -> Result<EvalReport, EvalError> {
    let split = |ps: &[&Prediction]| -> (Vec<usize>, Vec<usize>) {
        ps.iter().map(|p| (p.pred.index(), p.gold.index())).unzip()
    };
    let all: Vec<&Prediction> = predictions.iter().collect();
    let (preds, golds) = split(&all);
    let macro_f1_overall = macro_f1(&preds, &golds)?;
    let confusion = confusion_matrix(&preds, &golds)?;

    let mut groups: BTreeMap<&str, Vec<&Prediction>> = BTreeMap::new();
    for p in predictions {
        groups.entry(p.subreddit.as_str()).or_default().push(p);
    }
    let mut macro_f1_by_subreddit = BTreeMap::new();
    for (sub, ps) in groups {
        let (preds, golds) = split(&ps);
        macro_f1_by_subreddit.insert(sub.to_string(), macro_f1(&preds, &golds)?);
    }
    Ok(EvalReport {
        n_examples: predictions.len(),
        macro_f1_overall,
        per_class_f1: per_class_f1(&confusion),
        macro_f1_by_subreddit,
        confusion,
    })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(values: &[f64]) -> Self {
        let (mean, sd) = mean_sd(values);
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub n_seeds: usize,
    pub macro_f1: MeanSd,
    pub per_class_f1: [MeanSd; N_CLASSES],
    pub by_subreddit: BTreeMap<String, MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

/// Seed-averaged comparison of named runs, each a list of per-seed reports.
pub fn ablation_report(runs: &BTreeMap<String, Vec<EvalReport>>) -> Result<AblationTable, EvalError> {
    if runs.is_empty() || runs.values().any(Vec::is_empty) {
        return Err(EvalError::NoRuns);
    }
    let rows = runs
        .iter()
        .map(|(name, reports)| {
            let col = |f: &dyn Fn(&EvalReport) -> f64| -> MeanSd {
                MeanSd::of(&reports.iter().map(f).collect::<Vec<_>>())
            };
            let subs: std::collections::BTreeSet<&String> =
                reports.iter().flat_map(|r| r.macro_f1_by_subreddit.keys()).collect();
            let by_subreddit = subs
                .into_iter()
                .map(|s| {
                    let vals: Vec<f64> = reports
                        .iter()
                        .filter_map(|r| r.macro_f1_by_subreddit.get(s).copied())
                        .collect();
                    (s.clone(), MeanSd::of(&vals))
                })
                .collect();
            AblationRow {
                name: name.clone(),
                n_seeds: reports.len(),
                macro_f1: col(&|r| r.macro_f1_overall),
                per_class_f1: [0, 1, 2].map(|c| col(&|r| r.per_class_f1[c])),
                by_subreddit,
            }
        })
        .collect();
    Ok(AblationTable { rows })
}

impl AblationTable {
    /// Aligned plain-text rendering, one line per run.
    pub fn to_text(&self) -> String {
        let subs: std::collections::BTreeSet<&String> =
            self.rows.iter().flat_map(|r| r.by_subreddit.keys()).collect();
        let mut header = vec!["run".to_string(), "seeds".into(), "macro_f1".into()];
        header.extend(Label::ALL.iter().map(|l| format!("f1_{l}")));
        header.extend(subs.iter().map(|s| s.to_string()));

        let cell = |m: &MeanSd| format!("{:.3} ({:.3})", m.mean, m.sd);
        let mut lines = vec![header];
        for row in &self.rows {
            let mut line = vec![row.name.clone(), row.n_seeds.to_string(), cell(&row.macro_f1)];
            line.extend(row.per_class_f1.iter().map(cell));
            line.extend(subs.iter().map(|s| row.by_subreddit.get(*s).map_or("-".into(), cell)));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in lines {
            let padded: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        }
        out
    }
}

/// Confusion matrix as CSV with gold classes as rows.
pub fn confusion_csv(confusion: &Confusion) -> String {
    let mut out = String::from("gold");
    for l in Label::ALL {
        let _ = write!(out, ",pred_{l}");
    }
    out.push('\n');
    for (g, row) in confusion.iter().enumerate() {
        out.push_str(Label::ALL[g].as_str());
        for n in row {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
    }
    out
}
