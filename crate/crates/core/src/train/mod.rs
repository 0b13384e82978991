//! Diversity training: several SAC policies, each rewarded for visiting
//! states far (in Wasserstein distance) from the others.

mod config;
mod rewards;
mod sampler;
mod trainer;

pub use config::{Aggregate, RewardMode, Selection, StateSubspace, TrainConfig};
pub use rewards::{primal_episode_rewards, EpisodeReward};
pub use sampler::TargetSampler;
pub use trainer::{obs_scale, stay_at_center, train_incremental, EpisodeMetrics, FrozenPolicy, Learner, Trainer};
