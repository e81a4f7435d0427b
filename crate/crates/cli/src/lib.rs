//! Pipeline stages behind the `stentconv` command. Every stage reads its
//! inputs from the configured paths or from earlier stages' files in the
//! output directory, and writes its own files atomically.

pub mod config;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stentconv::corpus::{load_corpus, split_corpus, CommentReplyPair, CorpusError, Label, Split, SubsetMode};
use stentconv::embeddings::{
    train_word_vectors, EmbedError, MeanWordEmbedder, SentenceCache, SentenceEmbedder, SkipGramConfig, WordVectors,
};
use stentconv::entities::{mention_index, AnnotationSet, EntityError, EntityKey, MentionIndex, MentionProvider};
use stentconv::eval::{ablation_report, confusion_csv, AblationRow, EvalError, EvalReport};
use stentconv::graph::{
    build_graph, graph_stats, select_target_entities, sensitivity_scan, subreddit_entity_matrix, to_gexf, GraphError,
    GraphStats, SignFilter, SignedBipartiteGraph,
};
use stentconv::io::{read_json, write_atomic, write_json, write_jsonl};
use stentconv::model::{
    evaluate_examples, prepare_examples, train, Ablation, EpochMetrics, GraphContext, MeanWordEncoder, ModelError,
    ModelParams, TextEncoder, TextVectorCache,
};
use stentconv::sgcn::{init_features, SgcnError};
use stentconv::stance::{center_and_split, parse_dump, score_stances, write_dump, StanceError, StanceStats};

pub use config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path} not found; run `stentconv {stage}` first")]
    MissingStage { path: String, stage: &'static str },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] stentconv::Error),
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Core(e.into())
            }
        }
    )*};
}

core_from!(CorpusError, EmbedError, EntityError, StanceError, GraphError, SgcnError, ModelError, EvalError);

impl PipelineError {
    /// 1 usage or configuration, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub const CORPUS_SUMMARY: &str = "corpus_summary.json";
pub const MENTIONS: &str = "mentions.json";
pub const WORD_VECTORS: &str = "word_vectors.txt";
pub const WORD_VECTORS_CONFIG: &str = "word_vectors.config.json";
pub const STANCES: &str = "stances.jsonl";
pub const STANCE_STATS: &str = "stance_stats.json";
pub const TARGETS: &str = "targets.json";
pub const GRAPH: &str = "graph.json";
pub const GRAPH_STATS: &str = "graph_stats.json";
pub const GEXF: &str = "graph.gexf";
pub const SIMILARITY: &str = "similarity.csv";
pub const SENSITIVITY: &str = "sensitivity.json";
pub const RUNS: &str = "runs";
pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TEXT: &str = "ablation.txt";

fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(PipelineError::MissingStage {
            path: path.display().to_string(),
            stage,
        })
    }
}

fn load_pairs(config: &PipelineConfig) -> Result<Vec<CommentReplyPair>> {
    let pairs = load_corpus(config.corpus())?;
    if pairs.is_empty() {
        return Err(CorpusError::Empty.into());
    }
    Ok(pairs)
}

fn load_split(config: &PipelineConfig) -> Result<Split> {
    Ok(split_corpus(&load_pairs(config)?, &config.split)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubredditCounts {
    pub n_pairs: usize,
    /// indexed disagree, neutral, agree
    pub counts: [usize; 3],
    pub fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_pairs: usize,
    pub n_posts: usize,
    pub n_users: usize,
    pub subreddits: BTreeMap<String, SubredditCounts>,
    pub overall: SubredditCounts,
}

fn counts_of<'a>(pairs: impl Iterator<Item = &'a CommentReplyPair>) -> SubredditCounts {
    let mut counts = [0; 3];
    for p in pairs {
        counts[p.label.index()] += 1;
    }
    let n: usize = counts.iter().sum();
    SubredditCounts {
        n_pairs: n,
        counts,
        fractions: counts.map(|c| c as f64 / n as f64),
    }
}

pub fn summarize(pairs: &[CommentReplyPair]) -> CorpusSummary {
    let subs: BTreeSet<&str> = pairs.iter().map(|p| p.subreddit.as_str()).collect();
    let posts: HashSet<&str> = pairs.iter().flat_map(|p| p.posts()).map(|p| p.post_id.as_str()).collect();
    let users: HashSet<&str> = pairs.iter().flat_map(|p| p.posts()).map(|p| p.author_id.as_str()).collect();
    CorpusSummary {
        n_pairs: pairs.len(),
        n_posts: posts.len(),
        n_users: users.len(),
        subreddits: subs
            .into_iter()
            .map(|s| (s.to_string(), counts_of(pairs.iter().filter(|p| p.subreddit == s))))
            .collect(),
        overall: counts_of(pairs.iter()),
    }
}

impl CorpusSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} pairs, {} posts, {} users",
            self.n_pairs, self.n_posts, self.n_users
        );
        let width = self.subreddits.keys().map(String::len).max().unwrap_or(0).max(9);
        let _ = writeln!(out, "{:<width$}  {:>6}  {:>8}  {:>8}  {:>8}", "subreddit", "pairs", "disagree", "neutral", "agree");
        let rows = self.subreddits.iter().map(|(s, c)| (s.as_str(), c)).chain([("all", &self.overall)]);
        for (name, c) in rows {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>6}  {:>8.3}  {:>8.3}  {:>8.3}",
                c.n_pairs, c.fractions[0], c.fractions[1], c.fractions[2]
            );
        }
        out
    }
}

pub fn cmd_ingest(config: &PipelineConfig) -> Result<CorpusSummary> {
    let summary = summarize(&load_pairs(config)?);
    write_json(&config.out_dir().join(CORPUS_SUMMARY), &summary)?;
    Ok(summary)
}

fn provider(config: &PipelineConfig) -> Result<MentionProvider> {
    Ok(match &config.paths.annotations {
        Some(path) => MentionProvider::Annotations(AnnotationSet::load(path)?),
        None => MentionProvider::heuristic(&config.entities.gazetteer),
    })
}

pub fn cmd_extract_entities(config: &PipelineConfig) -> Result<MentionIndex> {
    let pairs = load_pairs(config)?;
    let index = mention_index(&pairs, &provider(config)?)?;
    write_json(&config.out_dir().join(MENTIONS), &index)?;
    Ok(index)
}

fn load_mentions(config: &PipelineConfig) -> Result<MentionIndex> {
    Ok(read_json(&require(config.out_dir().join(MENTIONS), "extract-entities")?)?)
}

/// Word vectors from the configured file, a cached earlier run with the same
/// settings, or fresh skip-gram training over the corpus posts.
pub fn word_vectors(config: &PipelineConfig) -> Result<WordVectors> {
    if let Some(path) = &config.paths.word_vectors {
        return Ok(WordVectors::load(path)?);
    }
    let cached = config.out_dir().join(WORD_VECTORS);
    let settings = config.out_dir().join(WORD_VECTORS_CONFIG);
    if cached.is_file() && settings.is_file() {
        let previous: SkipGramConfig = read_json(&settings)?;
        if previous == config.word_vectors {
            return Ok(WordVectors::load(&cached)?);
        }
    }
    let pairs = load_pairs(config)?;
    let mut seen = HashSet::new();
    let texts: Vec<&str> = pairs
        .iter()
        .flat_map(|p| p.posts())
        .filter(|p| seen.insert(p.post_id.as_str()))
        .map(|p| p.text.as_str())
        .collect();
    let trained = train_word_vectors(&texts, &config.word_vectors)?;
    trained.vectors.save(&cached)?;
    write_json(&settings, &config.word_vectors)?;
    Ok(trained.vectors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceSummary {
    pub stats: StanceStats,
    pub n_positive: usize,
    pub n_negative: usize,
    pub skipped: usize,
}

/// Scores stances on the training split only, centres them with the
/// training mean and writes the signed dump.
pub fn cmd_score_stance(config: &PipelineConfig) -> Result<StanceSummary> {
    let split = load_split(config)?;
    let index = load_mentions(config)?;
    let vectors;
    let cache;
    let embedder: &dyn SentenceEmbedder = match &config.paths.sentence_cache {
        Some(path) => {
            cache = SentenceCache::load(path)?;
            &cache
        }
        None => {
            vectors = word_vectors(config)?;
            &MeanWordEmbedder::new(&vectors)
        }
    };
    let outcome = score_stances(&split.train, &index, embedder, config.stance, None)?;
    let (stats, pos, neg) = center_and_split(&outcome.records)?;
    let mut records: Vec<_> = pos.iter().chain(&neg).cloned().collect();
    records.sort_by(|a, b| (&a.user, &a.entity).cmp(&(&b.user, &b.entity)));
    write_dump(&config.out_dir().join(STANCES), &records)?;
    write_json(&config.out_dir().join(STANCE_STATS), &stats)?;
    Ok(StanceSummary {
        stats,
        n_positive: pos.len(),
        n_negative: neg.len(),
        skipped: outcome.skipped,
    })
}

fn titles(config: &PipelineConfig, pairs: &[CommentReplyPair]) -> Vec<String> {
    if !config.entities.titles.is_empty() {
        return config.entities.titles.clone();
    }
    let subs: BTreeSet<String> = pairs.iter().map(|p| p.subreddit.trim().to_lowercase()).collect();
    subs.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub targets: Vec<EntityKey>,
    pub missing_vectors: usize,
    pub stats: GraphStats,
}

pub fn cmd_build_graph(config: &PipelineConfig, filter: SignFilter) -> Result<GraphSummary> {
    let out = config.out_dir();
    let pairs = load_pairs(config)?;
    let index = load_mentions(config)?;
    let dump = std::fs::read_to_string(require(out.join(STANCES), "score-stance")?).map_err(|e| {
        stentconv::Error::Io {
            path: out.join(STANCES).display().to_string(),
            source: e,
        }
    })?;
    let (pos, neg) = parse_dump(&dump)?;
    let vectors = word_vectors(config)?;
    let titles = titles(config, &pairs);
    let f = &config.entities;
    let selection = select_target_entities(&index.counts, &vectors, &titles, f.top_k, f.sim_threshold)?;
    if selection.entities.is_empty() {
        return Err(PipelineError::Data(format!(
            "no target entities pass top_k = {} and sim_threshold = {}",
            f.top_k, f.sim_threshold
        )));
    }
    let targets: HashSet<EntityKey> = selection.entities.iter().cloned().collect();
    let g = build_graph(&pos, &neg, &targets)?;
    let stats = graph_stats(&g)?;
    let target_list: Vec<EntityKey> = selection.entities.iter().cloned().collect();

    write_json(&out.join(TARGETS), &target_list)?;
    g.save(&out.join(GRAPH))?;
    write_json(&out.join(GRAPH_STATS), &stats)?;
    write_atomic(&out.join(GEXF), to_gexf(&g, filter).as_bytes())?;
    let sim = subreddit_entity_matrix(g.entities(), &vectors, &titles)?;
    write_atomic(&out.join(SIMILARITY), sim.to_csv().as_bytes())?;
    if !f.scan_top_k.is_empty() && !f.scan_sim_threshold.is_empty() {
        let split = split_corpus(&pairs, &config.split)?;
        let records: Vec<_> = pos.iter().chain(&neg).cloned().collect();
        let cells = sensitivity_scan(
            &split.train,
            &records,
            &index.counts,
            &vectors,
            &titles,
            &f.scan_top_k,
            &f.scan_sim_threshold,
        )?;
        write_json(&out.join(SENSITIVITY), &cells)?;
    }
    Ok(GraphSummary {
        targets: target_list,
        missing_vectors: selection.missing_vectors,
        stats,
    })
}

pub fn load_graph(out_dir: &Path) -> Result<SignedBipartiteGraph> {
    Ok(SignedBipartiteGraph::load(&require(out_dir.join(GRAPH), "build-graph")?)?)
}

pub fn cmd_export_graph(config: &PipelineConfig, filter: SignFilter, path: Option<&Path>) -> Result<PathBuf> {
    let g = load_graph(config.out_dir())?;
    let target = path.map_or_else(|| config.out_dir().join(GEXF), Path::to_path_buf);
    write_atomic(&target, to_gexf(&g, filter).as_bytes())?;
    Ok(target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub ablation: Ablation,
    pub subset: SubsetMode,
}

/// Seed-averaged result of one ablation, written as `runs/<ablation>/report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ablation: Ablation,
    /// absent when no target entities were available to filter on
    pub subset: Option<SubsetMode>,
    pub epochs: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<EvalReport>,
    pub summary: AblationRow,
}

fn run_dir(out_dir: &Path, ablation: Ablation) -> PathBuf {
    out_dir.join(RUNS).join(ablation.as_str())
}

fn seed_dir(out_dir: &Path, ablation: Ablation, seed: u64) -> PathBuf {
    run_dir(out_dir, ablation).join(format!("seed{seed}"))
}

struct Prepared {
    subset: Option<SubsetMode>,
    split: Split,
    ctx: Option<GraphContext>,
}

fn prepare(config: &PipelineConfig, opts: RunOptions) -> Result<Prepared> {
    let out = config.out_dir();
    let mut split = load_split(config)?;
    let targets_path = out.join(TARGETS);
    let subset = if targets_path.is_file() {
        let targets: Vec<EntityKey> = read_json(&targets_path)?;
        let targets: HashSet<EntityKey> = targets.into_iter().collect();
        let mentions = load_mentions(config)?.mention_set();
        let keep = |pairs: &[CommentReplyPair]| {
            stentconv::corpus::subset_by_entities(pairs, &targets, &mentions, opts.subset)
        };
        split = Split {
            train: keep(&split.train),
            dev: keep(&split.dev),
            test: keep(&split.test),
        };
        Some(opts.subset)
    } else if opts.ablation == Ablation::TextOnly {
        None
    } else {
        return Err(PipelineError::MissingStage {
            path: targets_path.display().to_string(),
            stage: "build-graph",
        });
    };
    if split.train.is_empty() || split.test.is_empty() {
        return Err(PipelineError::Data(format!(
            "subset leaves {} training and {} test pairs",
            split.train.len(),
            split.test.len()
        )));
    }
    let ctx = match opts.ablation {
        Ablation::TextOnly => None,
        Ablation::Full | Ablation::GcnOnly => {
            let g = load_graph(out)?;
            let features = init_features(&g, &word_vectors(config)?)?;
            Some(GraphContext::new(g, features, config.train.sgcn.weighted)?)
        }
    };
    Ok(Prepared { subset, split, ctx })
}

enum Mode {
    Train,
    Eval,
}

fn run(config: &PipelineConfig, opts: RunOptions, mode: Mode) -> Result<RunReport> {
    let out = config.out_dir();
    let Prepared { subset, split, ctx } = prepare(config, opts)?;
    let train_config = stentconv::model::TrainConfig {
        ablation: opts.ablation,
        ..config.train.clone()
    };

    let vectors;
    let cache;
    let encoder: &dyn TextEncoder = match &config.paths.text_vectors {
        Some(path) => {
            cache = TextVectorCache::load(path)?;
            &cache
        }
        None => {
            vectors = word_vectors(config)?;
            &MeanWordEncoder::new(&vectors)
        }
    };
    let graph = ctx.as_ref().map(|c| &c.graph);
    let train_ex = prepare_examples(&split.train, encoder, graph)?;
    let dev_ex = prepare_examples(&split.dev, encoder, graph)?;
    let test_ex = prepare_examples(&split.test, encoder, graph)?;

    let mut per_seed = Vec::with_capacity(train_config.seeds.len());
    for &seed in &train_config.seeds {
        let dir = seed_dir(out, opts.ablation, seed);
        let params = match mode {
            Mode::Train => {
                let outcome = train(&train_ex, &dev_ex, ctx.as_ref(), &train_config, seed)?;
                outcome.params.save(&dir.join("params.json"))?;
                write_jsonl(&dir.join("epochs.jsonl"), &outcome.epochs)?;
                outcome.params
            }
            Mode::Eval => ModelParams::load(&require(dir.join("params.json"), "train")?)?,
        };
        let report = evaluate_examples(&params, ctx.as_ref(), opts.ablation, &test_ex)?;
        write_json(&dir.join("report.json"), &report)?;
        per_seed.push(report);
    }

    let name = opts.ablation.as_str().to_string();
    let table = ablation_report(&BTreeMap::from([(name, per_seed.clone())]))?;
    let mut confusion = [[0usize; 3]; 3];
    for r in &per_seed {
        for (g, row) in r.confusion.iter().enumerate() {
            for (p, n) in row.iter().enumerate() {
                confusion[g][p] += n;
            }
        }
    }
    let report = RunReport {
        ablation: opts.ablation,
        subset,
        epochs: train_config.epochs(),
        n_train: split.train.len(),
        n_dev: split.dev.len(),
        n_test: split.test.len(),
        seeds: train_config.seeds.clone(),
        per_seed,
        summary: table.rows.into_iter().next().expect("one run"),
    };
    let dir = run_dir(out, opts.ablation);
    write_json(&dir.join("report.json"), &report)?;
    write_atomic(&dir.join("confusion.csv"), confusion_csv(&confusion).as_bytes())?;
    write_ablation_table(out)?;
    Ok(report)
}

pub fn cmd_train(config: &PipelineConfig, opts: RunOptions) -> Result<RunReport> {
    run(config, opts, Mode::Train)
}

pub fn cmd_eval(config: &PipelineConfig, opts: RunOptions) -> Result<RunReport> {
    run(config, opts, Mode::Eval)
}

/// Collects every finished run in the output directory into one table.
pub fn write_ablation_table(out_dir: &Path) -> Result<String> {
    let mut runs = BTreeMap::new();
    for ablation in Ablation::ALL {
        let path = run_dir(out_dir, ablation).join("report.json");
        if path.is_file() {
            let report: RunReport = read_json(&path)?;
            runs.insert(ablation.as_str().to_string(), report.per_seed);
        }
    }
    let table = ablation_report(&runs)?;
    let text = table.to_text();
    write_json(&out_dir.join(ABLATION_JSON), &table)?;
    write_atomic(&out_dir.join(ABLATION_TEXT), text.as_bytes())?;
    Ok(text)
}

pub fn read_epochs(out_dir: &Path, ablation: Ablation, seed: u64) -> Result<Vec<EpochMetrics>> {
    let path = require(seed_dir(out_dir, ablation, seed).join("epochs.jsonl"), "train")?;
    stentconv::io::read_lines(&path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}:{line}: {e}", path.display())))
        })
        .collect()
}

/// Label names in class-index order, for printing.
pub fn label_names() -> [&'static str; 3] {
    Label::ALL.map(Label::as_str)
}
