//! Run configuration: a TOML file, then `WURL_*` environment variables,
//! then command-line flags, each overriding the one before.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wurl_core::env::EnvConfig;
use wurl_core::eval::EvalConfig;
use wurl_core::hrl::PpoConfig;
use wurl_core::study::StudyConfig;
use wurl_core::train::{RewardMode, TrainConfig};

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Estimate,
    Train,
    Incremental,
    Eval,
    Hierarchy,
    Gradcheck,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Estimate => "estimate",
            Self::Train => "train",
            Self::Incremental => "incremental",
            Self::Eval => "eval",
            Self::Hierarchy => "hierarchy",
            Self::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncrementalConfig {
    /// Stop once this many policies exist (the first one included).
    pub grow_to: usize,
    pub episodes_per_policy: usize,
}

impl Default for IncrementalConfig {
    fn default() -> Self {
        Self {
            grow_to: 8,
            episodes_per_policy: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    /// Arena with a navigation task the meta-policy is scored on.
    pub task_env: String,
    pub macro_horizon: usize,
    pub iterations: usize,
    pub baseline_episodes: usize,
    pub ppo: PpoConfig,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            task_env: "free_run_navigation".into(),
            macro_horizon: 10,
            iterations: 100,
            baseline_episodes: 64,
            ppo: PpoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Option<Kind>,
    pub seed: u64,
    pub out: PathBuf,
    /// Built-in arena (free_run, tree_maze, free_run_navigation) or a
    /// path to an environment TOML file.
    pub env: String,
    /// Run directory whose policies are reused: eval scores them,
    /// hierarchy runs them as sub-policies, incremental grows from them.
    pub from: Option<PathBuf>,
    /// Pick up a train run from its last saved state.
    pub resume: bool,
    /// Save resumable training state every this many episodes (0: only at the end).
    pub checkpoint_every: usize,
    /// Also score as many random-action policies next to trained ones.
    pub baseline: bool,
    pub trajectory_episodes: usize,
    // Shorthands that override the matching fields of the sections below.
    pub policies: Option<usize>,
    pub mode: Option<RewardMode>,
    pub projections: Option<usize>,
    pub episodes: Option<usize>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub study: StudyConfig,
    pub incremental: IncrementalConfig,
    pub hierarchy: HierarchyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 0,
            out: PathBuf::from("runs/latest"),
            env: "free_run".into(),
            from: None,
            resume: false,
            checkpoint_every: 500,
            baseline: true,
            trajectory_episodes: 2,
            policies: None,
            mode: None,
            projections: None,
            episodes: None,
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            study: StudyConfig::default(),
            incremental: IncrementalConfig::default(),
            hierarchy: HierarchyConfig::default(),
        }
    }
}

/// Values given on the command line or through `WURL_*` variables.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub env: Option<String>,
    pub policies: Option<usize>,
    pub mode: Option<RewardMode>,
    pub projections: Option<usize>,
    pub episodes: Option<usize>,
    pub from: Option<PathBuf>,
    pub resume: bool,
}

fn builtin_env(name: &str) -> Option<EnvConfig> {
    match name {
        "free_run" => Some(EnvConfig::free_run()),
        "tree_maze" => Some(EnvConfig::tree_maze()),
        "free_run_navigation" => Some(EnvConfig::navigation()),
        _ => None,
    }
}

/// A built-in environment by name, or one loaded from a TOML file.
pub fn resolve_env(name: &str) -> Result<EnvConfig> {
    match builtin_env(name) {
        Some(env) => Ok(env),
        None => {
            let path = Path::new(name);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "environment {name:?} is neither a built-in (free_run, tree_maze, free_run_navigation) nor an existing file"
                )));
            }
            Ok(EnvConfig::load(path)?)
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parse a config file. Relative paths inside it are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let anchor = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        if builtin_env(&cfg.env).is_none() {
            cfg.env = anchor(Path::new(&cfg.env)).to_string_lossy().into_owned();
        }
        if builtin_env(&cfg.hierarchy.task_env).is_none() {
            cfg.hierarchy.task_env = anchor(Path::new(&cfg.hierarchy.task_env)).to_string_lossy().into_owned();
        }
        cfg.from = cfg.from.as_deref().map(anchor);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = &o.env {
            self.env = v.clone();
        }
        if let Some(v) = &o.from {
            self.from = Some(v.clone());
        }
        self.resume |= o.resume;
        self.policies = o.policies.or(self.policies);
        self.mode = o.mode.or(self.mode);
        self.projections = o.projections.or(self.projections);
        self.episodes = o.episodes.or(self.episodes);
    }

    /// Push the shorthands into their sections and check the result.
    pub fn resolve(mut self, kind: Kind) -> Result<Self> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    k.name(),
                    kind.name()
                )));
            }
        }
        self.kind = Some(kind);
        if let Some(n) = self.policies {
            self.train.policies = n;
        }
        if let Some(m) = self.mode {
            self.train.mode = m;
        }
        if let Some(k) = self.projections {
            self.train.projections = k;
            self.eval.projections = k;
            self.study.projections = k;
        }
        if let Some(e) = self.episodes {
            self.train.episodes = e;
        }
        self.policies = Some(self.train.policies);
        self.mode = Some(self.train.mode);
        self.projections = Some(self.train.projections);
        self.episodes = Some(self.train.episodes);
        self.validate(kind)?;
        Ok(self)
    }

    fn validate(&self, kind: Kind) -> Result<()> {
        resolve_env(&self.env)?;
        if let Some(from) = &self.from {
            if !from.join("policies").is_dir() {
                return Err(CliError::Config(format!("{} holds no policies/ directory", from.display())));
            }
        }
        match kind {
            Kind::Train => self.train.validate()?,
            Kind::Incremental => {
                if self.incremental.grow_to < 2 {
                    return Err(CliError::Config("incremental.grow_to must be at least 2".into()));
                }
                if self.train.mode.is_dual() {
                    return Err(CliError::Config("incremental training needs a primal reward mode (pwd, apwd)".into()));
                }
            }
            Kind::Eval if self.from.is_none() && self.train.policies < 2 => {
                return Err(CliError::Config("need at least 2 policies to compare".into()));
            }
            Kind::Hierarchy => {
                resolve_env(&self.hierarchy.task_env)?;
                if self.from.is_none() {
                    self.train.validate()?;
                }
            }
            Kind::Estimate => self.study.validate()?,
            _ => {}
        }
        Ok(())
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        resolve_env(&self.env)
    }
}
