use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use muse::eval::{AssignMetric, EvalOptions, Task, SDR_TAPS};
use muse::model::ModelConfig;
use muse::sim::{Corpus, SimulationConfig, SyntheticCorpusConfig};
use muse::training::TrainConfig;
use serde::{Deserialize, Serialize};

/// Environment variable that overrides `data_root`.
pub const DATA_ROOT_ENV: &str = "MUSE_DATA_ROOT";
pub const RESOLVED_CONFIG: &str = "config.toml";

/// Where simulation draws its dry utterances from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    Synthetic(SyntheticCorpusConfig),
    /// `path/<speaker>/<utterance>.wav`
    Directory { path: PathBuf },
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(SyntheticCorpusConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub manifest: Option<PathBuf>,
    pub task: Task,
    pub oracle_n: bool,
    pub assign_metric: AssignMetric,
    pub sdr_taps: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            manifest: None,
            task: Task::Ss,
            oracle_n: false,
            assign_metric: AssignMetric::Sdr,
            sdr_taps: SDR_TAPS,
        }
    }
}

impl EvalSection {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            task: self.task,
            oracle_n: self.oracle_n,
            assign_metric: self.assign_metric,
            sdr_taps: self.sdr_taps,
        }
    }
}

/// One run's settings. Relative data paths resolve against `data_root`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces every section seed.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub data_root: Option<PathBuf>,
    pub corpus: CorpusSource,
    pub simulate: Vec<SimulationConfig>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: PathBuf::from("out"),
            data_root: None,
            corpus: CorpusSource::default(),
            simulate: vec![
                SimulationConfig {
                    split: "train".into(),
                    ..Default::default()
                },
                SimulationConfig {
                    split: "test".into(),
                    seed: 1,
                    ..Default::default()
                },
            ],
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies the global seed and the data-root override.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(o) = out {
            self.out = o;
        }
        if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
            self.data_root = Some(PathBuf::from(root));
        }
        if let Some(s) = self.seed {
            if let CorpusSource::Synthetic(c) = &mut self.corpus {
                c.seed = s;
            }
            for (i, sim) in self.simulate.iter_mut().enumerate() {
                sim.seed = s.wrapping_add(i as u64);
            }
            self.train.seed = s;
        }
        self.model.validate()?;
        self.train.validate()?;
        Ok(self)
    }

    pub fn data_path(&self, p: &Path) -> PathBuf {
        match &self.data_root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn corpus(&self) -> Result<Corpus> {
        Ok(match &self.corpus {
            CorpusSource::Synthetic(c) => muse::sim::synthetic_corpus(c),
            CorpusSource::Directory { path } => {
                let p = self.data_path(path);
                let corpus = Corpus::load_dir(&p)?;
                if corpus.speakers().is_empty() {
                    bail!("no speaker directories under {}", p.display());
                }
                corpus
            }
        })
    }

    /// Writes the resolved configuration next to a command's outputs.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(RESOLVED_CONFIG);
        std::fs::write(&path, toml::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}
