//! Hierarchical control on top of frozen skills: a meta-policy picks one
//! sub-policy every H base steps and is trained with clipped policy
//! gradients.

mod menv;
mod ppo;

pub use menv::{MacroStep, MetaEnv};
pub use ppo::{gae, ppo_policy_loss_and_grad, random_meta_returns, CurvePoint, MetaPolicy, PpoConfig};

use crate::error::Result;
use crate::rng::SeedTree;

/// Return curve plus baseline and final greedy return of one meta run.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyOutcome {
    pub random_mean: f64,
    pub random_std: f64,
    pub curve: Vec<CurvePoint>,
    pub final_return: f64,
}

/// Measure the uniform-random baseline, train a meta-policy and score it
/// greedily.
pub fn meta_train(
    menv: &mut MetaEnv,
    cfg: PpoConfig,
    iterations: usize,
    baseline_episodes: usize,
    seed: u64,
) -> Result<(MetaPolicy, HierarchyOutcome)> {
    let tree = SeedTree::new(seed);
    let random = random_meta_returns(menv, baseline_episodes, &mut tree.child("baseline").rng())?;
    let (random_mean, random_std) = ppo::mean_std(&random);
    let scale = crate::train::obs_scale(menv.base().config());
    let mut policy = MetaPolicy::new(scale, menv.num_choices(), cfg, &mut tree.child("init").rng())?;
    let curve = policy.train(menv, iterations, &mut tree.child("train").rng())?;
    let final_return = policy.evaluate(menv, 1, true, &mut tree.child("eval").rng())?;
    Ok((
        policy,
        HierarchyOutcome {
            random_mean,
            random_std,
            curve,
            final_return,
        },
    ))
}
