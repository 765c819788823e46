//! Experiment configuration, execution and artifact export.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::condense::{CondenseConfig, InitMode};
use crate::error::{Error, Result};
use crate::gnn::{gcn_forward, init_random_encoder, EncoderConfig};
use crate::graph::io::load_dataset;
use crate::graph::{build_task_stream, normalize_adjacency, sbm_generate, Graph, SbmParams, SplitFractions, TaskStream};
use crate::memory::{save_bank, BankPolicy, MemoryBank};
use crate::metrics::{format_sig, MetricsReport, PerformanceMatrix};
use crate::seed;
use crate::trainer::{continual_run, ContinualOutcome, IlMode, SchemeKind, TrainConfig, TrainScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// A dataset directory (edges.tsv, nodes.tsv, features.bin|csv).
    Dir(PathBuf),
    Sbm(SbmParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerSettings {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
}

impl Default for TrainerSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainerSettings {
            epochs: t.epochs,
            lr: t.lr,
            hidden: t.hidden,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CondenseSettings {
    pub encoders: usize,
    pub feature_lr: f64,
    pub hidden: usize,
    pub output: usize,
    pub init: InitMode,
}

impl Default for CondenseSettings {
    fn default() -> Self {
        let c = CondenseConfig::default();
        CondenseSettings {
            encoders: c.encoders,
            feature_lr: c.feature_lr,
            hidden: c.encoder.hidden,
            output: c.encoder.output,
            init: c.init_mode,
        }
    }
}

impl CondenseSettings {
    pub fn to_config(&self) -> CondenseConfig {
        CondenseConfig {
            encoders: self.encoders,
            encoder: EncoderConfig::gcn(self.hidden, self.output),
            feature_lr: self.feature_lr,
            init_mode: self.init,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub classes_per_task: usize,
    pub split: SplitFractions,
    pub il_mode: IlMode,
    pub scheme: SchemeKind,
    pub bank_policy: BankPolicy,
    pub budget_ratio: f64,
    pub condense: CondenseSettings,
    pub trainer: TrainerSettings,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Sbm(SbmParams::standard(0)),
            classes_per_task: 2,
            split: SplitFractions::default(),
            il_mode: IlMode::ClassIl,
            scheme: SchemeKind::Tim,
            bank_policy: BankPolicy::Cgm,
            budget_ratio: 0.01,
            condense: CondenseSettings::default(),
            trainer: TrainerSettings::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Every field, defaults included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn scheme(&self) -> TrainScheme {
        TrainScheme {
            kind: self.scheme,
            policy: if self.scheme == SchemeKind::Joint { BankPolicy::Full } else { self.bank_policy },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.trainer.epochs,
            lr: self.trainer.lr,
            hidden: self.trainer.hidden,
            seed: seed::derive(self.seed, &[2]),
            il_mode: self.il_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes_per_task == 0 {
            return Err(Error::InvalidArgument("classes_per_task must be at least 1".into()));
        }
        self.split.validate()?;
        self.condense.to_config().validate()?;
        self.train_config().validate()?;
        if self.scheme == SchemeKind::Joint {
            return Ok(());
        }
        if self.bank_policy == BankPolicy::Full {
            return Err(Error::InvalidArgument("bank policy full is reserved for the joint scheme".into()));
        }
        if !(self.budget_ratio > 0.0 && self.budget_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("budget_ratio must lie in (0, 1], got {}", self.budget_ratio)));
        }
        Ok(())
    }

    pub fn load_graph(&self) -> Result<Graph> {
        match &self.dataset {
            DatasetSource::Dir(dir) => load_dataset(dir),
            DatasetSource::Sbm(p) => sbm_generate(p),
        }
    }

    pub fn build_stream(&self) -> Result<TaskStream> {
        build_task_stream(&self.load_graph()?, self.classes_per_task, self.split, seed::derive(self.seed, &[1]))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub matrix: PerformanceMatrix,
    pub report: MetricsReport,
    pub bank: MemoryBank,
    pub outcome: ContinualOutcome,
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Builds the stream, runs it, and when `output_dir` is set writes
/// `perf_matrix.csv`, `metrics.json`, `bank/` and `config.json` there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let stream = cfg.build_stream()?;
    // joint keeps every training node
    let ratio = if cfg.scheme == SchemeKind::Joint { 1.0 } else { cfg.budget_ratio };
    let outcome = continual_run(&stream, &cfg.scheme(), ratio, &cfg.condense.to_config(), &cfg.train_config())?;
    let matrix = outcome.matrix(cfg.il_mode).clone();
    let report = matrix.report();
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(dir.join("perf_matrix.csv"), &matrix.to_csv())?;
        write(dir.join("metrics.json"), &report.to_json())?;
        write(dir.join("config.json"), &cfg.to_json())?;
        let bank_dir = dir.join("bank");
        if bank_dir.exists() {
            fs::remove_dir_all(&bank_dir).map_err(|e| Error::io(&bank_dir, e))?;
        }
        save_bank(&bank_dir, &outcome.bank, &outcome.budgets)?;
    }
    Ok(ExperimentOutput {
        matrix,
        report,
        bank: outcome.bank.clone(),
        outcome,
    })
}

/// Node embeddings of `g` under a seeded untrained encoder.
pub fn embeddings(g: &Graph, encoder: &EncoderConfig, seed: u64) -> Result<Array2<f64>> {
    let params = init_random_encoder(encoder, g.feature_dim(), seed);
    Ok(gcn_forward(&normalize_adjacency(g), g.features(), &params, encoder)?.0)
}

/// CSV of [`embeddings`]: one line per node.
pub fn export_embeddings(g: &Graph, encoder: &EncoderConfig, seed: u64) -> Result<String> {
    let e = embeddings(g, encoder, seed)?;
    let mut out = String::new();
    for row in e.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_sig(v, 9)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}
