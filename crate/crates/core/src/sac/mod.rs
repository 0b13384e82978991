//! Soft actor-critic with a fixed entropy temperature.

mod agent;
mod buffer;
mod losses;
mod relabel;

pub use agent::{actor_checkpoint, actor_from_checkpoint, Actor, CriticPair, SacAgent, SacConfig, UpdateStats};
pub use buffer::{ReplayBuffer, StoredStep};
pub use losses::{
    actor_loss_and_grad, critic_inputs, critic_loss_and_grad, squashed_sample, ActorLoss, SquashedSample, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub use relabel::{relabel_amortized, relabel_final};
