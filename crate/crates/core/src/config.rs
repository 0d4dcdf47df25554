//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [data]
//! source = "synthetic"          # synthetic | movielens | files
//!
//! [synthetic]
//! users = 200
//! careers = 4
//! items = 200
//! beta = 0.8
//!
//! [experiment]
//! methods = ["gnn", "gnn-dp"]
//! seeds = [0, 1, 2, 3, 4]
//! out_dir = "runs/demo"
//!
//! [grid]
//! lambda_dp = [0, 10, 20]
//! ```
//!
//! Every section and key is optional; missing values take the defaults
//! below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::SyntheticSpec;
use crate::gnn::Activation;
use crate::metapath::{FairKernel, Roles};
use crate::predictor::MlpConfig;
use crate::skipgram::SkipGramConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The eight compared methods.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "balance-data")]
    BalanceData,
    #[serde(rename = "m2v")]
    M2v,
    #[serde(rename = "m2v+fair")]
    M2vFair,
    #[serde(rename = "m2v+proj")]
    M2vProj,
    #[serde(rename = "m2v+fair+proj")]
    M2vFairProj,
    #[serde(rename = "gnn")]
    Gnn,
    #[serde(rename = "gnn-dp")]
    GnnDp,
    #[serde(rename = "gnn-eo")]
    GnnEo,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::BalanceData,
        Method::M2v,
        Method::M2vFair,
        Method::M2vProj,
        Method::M2vFairProj,
        Method::Gnn,
        Method::GnnDp,
        Method::GnnEo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BalanceData => "balance-data",
            Method::M2v => "m2v",
            Method::M2vFair => "m2v+fair",
            Method::M2vProj => "m2v+proj",
            Method::M2vFairProj => "m2v+fair+proj",
            Method::Gnn => "gnn",
            Method::GnnDp => "gnn-dp",
            Method::GnnEo => "gnn-eo",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn is_gnn(self) -> bool {
        matches!(self, Method::Gnn | Method::GnnDp | Method::GnnEo)
    }

    pub fn uses_fair_sampling(self) -> bool {
        matches!(self, Method::M2vFair | Method::M2vFairProj)
    }

    pub fn uses_projection(self) -> bool {
        matches!(self, Method::M2vProj | Method::M2vFairProj)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Movielens,
    /// `nodes.tsv`, `edges.tsv`, `labels.tsv` and optionally `items.tsv`.
    Files,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Input directory for `movielens` and `files`. Relative paths are
    /// resolved against the data directory given to [`Config::resolve_paths`].
    pub dir: Option<PathBuf>,
    /// MovieLens occupation codes to drop.
    pub removed_occupations: Vec<u8>,
    pub roles: Roles,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            dir: None,
            removed_occupations: crate::datasets::DEFAULT_REMOVED_OCCUPATIONS.to_vec(),
            roles: Roles::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub users: usize,
    pub careers: usize,
    pub g1_fraction: f64,
    /// Explicit `[g0, g1]` counts per career; overrides the three fields above.
    pub users_per_career: Option<Vec<[usize; 2]>>,
    pub items: usize,
    pub beta: f64,
    pub likes_per_user: usize,
    pub tokens_per_item: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users: 200,
            careers: 4,
            g1_fraction: 0.35,
            users_per_career: None,
            items: 200,
            beta: 0.8,
            likes_per_user: 20,
            tokens_per_item: 4,
        }
    }
}

impl SyntheticConfig {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        let mut s = SyntheticSpec::skewed(self.users, self.careers, self.g1_fraction, self.items, self.beta, seed);
        if let Some(c) = &self.users_per_career {
            s.users_per_career = c.clone();
        }
        s.likes_per_user = self.likes_per_user;
        s.tokens_per_item = self.tokens_per_item;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Subset of the outer folds to run; all folds when empty.
    pub folds: Vec<usize>,
    /// Seed of the dataset generator and the cross-validation split.
    pub data_seed: u64,
    pub out_dir: PathBuf,
    /// Reuse artifacts already present in `out_dir`.
    pub resume: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::M2v],
            seeds: vec![0, 1, 2, 3, 4],
            folds: Vec::new(),
            data_seed: 0,
            out_dir: PathBuf::from("runs"),
            resume: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    /// Walks per user for `user → item → user`.
    pub num_walks: usize,
    /// Walks per career for `career → user → item → user → career`.
    pub num_walks_cuiuc: usize,
    /// Meta-path repetitions per walk, for both meta-paths.
    pub walk_length: usize,
    pub ratio: f64,
    pub kernel: FairKernel,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { num_walks: 10, num_walks_cuiuc: 100, walk_length: 5, ratio: 1.0, kernel: FairKernel::Disadvantaged }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramSection {
    pub dim: usize,
    pub negatives: usize,
    pub window: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub epochs: usize,
}

impl Default for SkipGramSection {
    fn default() -> Self {
        let d = SkipGramConfig::default();
        Self { dim: d.dim, negatives: d.negatives, window: d.window, initial_lr: d.initial_lr, min_lr: d.min_lr, epochs: d.epochs }
    }
}

impl SkipGramSection {
    pub fn to_config(&self, seed: u64) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.dim,
            negatives: self.negatives,
            window: self.window,
            initial_lr: self.initial_lr,
            min_lr: self.min_lr,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSection {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for MlpSection {
    fn default() -> Self {
        let d = MlpConfig::default();
        Self { hidden: d.hidden, lr: d.lr, epochs: d.epochs, patience: d.patience }
    }
}

impl MlpSection {
    pub fn to_config(&self, seed: u64) -> MlpConfig {
        MlpConfig { hidden: self.hidden, lr: self.lr, epochs: self.epochs, patience: self.patience, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnSection {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub activation: Activation,
    pub feature_dim: usize,
    /// Penalty weight when no grid is given.
    pub lambda: f64,
}

impl Default for GnnSection {
    fn default() -> Self {
        Self {
            hidden: 128,
            lr: 0.05,
            epochs: 300,
            patience: 30,
            activation: Activation::Relu,
            feature_dim: crate::gnn::FEATURE_DIM,
            lambda: 0.0,
        }
    }
}

/// Hyper-parameter grids. An empty grid means "use the single value from
/// the method's own section".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub ratio: Vec<f64>,
    pub lambda_dp: Vec<f64>,
    pub lambda_eo: Vec<f64>,
    pub num_walks: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub synthetic: SyntheticConfig,
    pub experiment: ExperimentConfig,
    pub sampler: SamplerSection,
    pub skipgram: SkipGramSection,
    pub mlp: MlpSection,
    pub gnn: GnnSection,
    pub grid: GridConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Resolves a relative `data.dir` against `data_base` and a relative
    /// `experiment.out_dir` against `out_base`.
    pub fn resolve_paths(&mut self, data_base: &Path, out_base: &Path) {
        if let Some(d) = &self.data.dir {
            if d.is_relative() {
                self.data.dir = Some(data_base.join(d));
            }
        }
        if self.experiment.out_dir.is_relative() {
            self.experiment.out_dir = out_base.join(&self.experiment.out_dir);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.experiment.methods.is_empty() {
            return bad("experiment.methods is empty");
        }
        if self.experiment.seeds.is_empty() {
            return bad("experiment.seeds is empty");
        }
        if self.experiment.folds.iter().any(|&f| f >= crate::eval::NUM_FOLDS) {
            return bad("experiment.folds must be fold indices 0, 1 or 2");
        }
        if self.data.source != DataSource::Synthetic && self.data.dir.is_none() {
            return bad("data.dir is required for movielens and files sources");
        }
        let ratios = if self.grid.ratio.is_empty() { vec![self.sampler.ratio] } else { self.grid.ratio.clone() };
        if ratios.iter().any(|r| !(r.is_finite() && *r >= 1.0)) {
            return bad("fair ratios must be >= 1");
        }
        let lambdas = self.grid.lambda_dp.iter().chain(&self.grid.lambda_eo).chain([&self.gnn.lambda]);
        if lambdas.into_iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("fairness weights must be finite and >= 0");
        }
        if self.sampler.walk_length == 0 {
            return bad("walk_length must be at least 1");
        }
        if self.gnn.hidden == 0 || self.gnn.feature_dim == 0 || self.mlp.hidden == 0 {
            return bad("layer widths must be positive");
        }
        self.skipgram.to_config(0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn folds(&self) -> Vec<usize> {
        if self.experiment.folds.is_empty() {
            (0..crate::eval::NUM_FOLDS).collect()
        } else {
            self.experiment.folds.clone()
        }
    }
}
