//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stentconv::corpus::{SplitSpec, SubsetMode};
use stentconv::embeddings::SkipGramConfig;
use stentconv::model::TrainConfig;
use stentconv::stance::StanceOptions;

use crate::PipelineError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    /// NER spans per post; without it mentions come from the gazetteer heuristic
    pub annotations: Option<PathBuf>,
    /// sentence embeddings for stance scoring; defaults to mean word vectors
    pub sentence_cache: Option<PathBuf>,
    /// pooled text vectors per post; defaults to mean word vectors
    pub text_vectors: Option<PathBuf>,
    /// word2vec text format; trained on the corpus when absent
    pub word_vectors: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntityFilter {
    pub top_k: usize,
    pub sim_threshold: f64,
    /// subreddit title words; defaults to the lowercased subreddit names
    pub titles: Vec<String>,
    pub gazetteer: Vec<String>,
    pub scan_top_k: Vec<usize>,
    pub scan_sim_threshold: Vec<f64>,
}

impl Default for EntityFilter {
    fn default() -> Self {
        Self {
            top_k: 100,
            sim_threshold: 0.4,
            titles: Vec::new(),
            gazetteer: Vec::new(),
            scan_top_k: Vec::new(),
            scan_sim_threshold: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub split: SplitSpec,
    pub stance: StanceOptions,
    pub entities: EntityFilter,
    pub word_vectors: SkipGramConfig,
    pub train: TrainConfig,
    pub subset: SubsetMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            split: SplitSpec::default(),
            stance: StanceOptions::default(),
            entities: EntityFilter::default(),
            word_vectors: SkipGramConfig::default(),
            train: TrainConfig::default(),
            subset: SubsetMode::Either,
        }
    }
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let p = &mut config.paths;
        for path in [
            &mut p.corpus,
            &mut p.annotations,
            &mut p.sentence_cache,
            &mut p.text_vectors,
            &mut p.word_vectors,
            &mut p.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks settings and that every referenced input file exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let p = &self.paths;
        if p.corpus.is_none() {
            return Err(PipelineError::Config("paths.corpus is required".into()));
        }
        if p.out_dir.is_none() {
            return Err(PipelineError::Config("an output directory is required (--out-dir or paths.out_dir)".into()));
        }
        for path in [&p.corpus, &p.annotations, &p.sentence_cache, &p.text_vectors, &p.word_vectors]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(PipelineError::Config(format!("input file {} does not exist", path.display())));
            }
        }
        self.split.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.entities.top_k == 0 {
            return Err(PipelineError::Config("entities.top_k must be positive".into()));
        }
        Ok(())
    }

    pub fn corpus(&self) -> &Path {
        self.paths.corpus.as_deref().expect("validated config has a corpus")
    }

    pub fn out_dir(&self) -> &Path {
        self.paths.out_dir.as_deref().expect("validated config has an output directory")
    }
}
