use serde::{Deserialize, Serialize};

use crate::dual::DualConfig;
use crate::error::{invalid, Result};
use crate::sac::SacConfig;

/// Where intrinsic rewards come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Per-step rewards from a clamped single scorer (two policies only).
    Tf1,
    /// Per-step rewards from the smoothed-dual scorer pair (two policies only).
    Tf2,
    /// Projected distance paid once, on the last step of an episode.
    #[serde(rename = "pwd")]
    PwdFinal,
    /// Projected distance amortized over the episode's steps.
    Apwd,
}

impl RewardMode {
    pub fn is_dual(self) -> bool {
        matches!(self, Self::Tf1 | Self::Tf2)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tf1" => Ok(Self::Tf1),
            "tf2" => Ok(Self::Tf2),
            "pwd" => Ok(Self::PwdFinal),
            "apwd" => Ok(Self::Apwd),
            other => Err(invalid(format!("unknown reward mode {other:?} (tf1, tf2, pwd, apwd)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Tf1 => "tf1",
            Self::Tf2 => "tf2",
            Self::PwdFinal => "pwd",
            Self::Apwd => "apwd",
        }
    }
}

/// How distances to several other policies combine into one reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    /// Push away from the nearest other policy.
    Min,
    /// Average over all other policies (ablation).
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    RoundRobin,
    Random,
}

/// Which state coordinates enter distance computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSubspace {
    Full,
    Position,
}

impl StateSubspace {
    pub fn columns(self, state_dim: usize) -> Vec<usize> {
        match self {
            Self::Full => (0..state_dim).collect(),
            Self::Position => vec![0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub policies: usize,
    pub mode: RewardMode,
    /// Total episodes across all trainable policies.
    pub episodes: usize,
    pub projections: usize,
    /// States drawn per target policy when computing a reward.
    pub target_batch: usize,
    /// Target states come from this many most recent episodes.
    pub recent_episodes: usize,
    pub reward_scale: f64,
    pub aggregate: Aggregate,
    pub selection: Selection,
    pub subspace: StateSubspace,
    /// Batch per side for each scorer update in the dual modes.
    pub dual_batch: usize,
    pub sac: SacConfig,
    pub dual: DualConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            policies: 10,
            mode: RewardMode::Apwd,
            episodes: 1000,
            projections: 16,
            target_batch: 256,
            recent_episodes: 10,
            reward_scale: 1.0,
            aggregate: Aggregate::Min,
            selection: Selection::RoundRobin,
            subspace: StateSubspace::Full,
            dual_batch: 128,
            sac: SacConfig::default(),
            dual: DualConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.policies < 2 {
            return Err(invalid("training needs at least two policies"));
        }
        if self.mode.is_dual() && self.policies != 2 {
            return Err(invalid(format!(
                "{} rewards are defined for exactly two policies, got {}",
                self.mode.name(),
                self.policies
            )));
        }
        if self.projections == 0 || self.target_batch == 0 || self.recent_episodes == 0 || self.dual_batch == 0 {
            return Err(invalid("projections, target_batch, recent_episodes and dual_batch must be positive"));
        }
        if !(self.reward_scale > 0.0) {
            return Err(invalid("reward_scale must be positive"));
        }
        self.sac.validate()
    }
}
