use crate::error::{invalid, Result};
use crate::ot::{amortized_rewards_with, projected_wd_with, Direction, GroundCost, StateBatch};

use super::config::{Aggregate, RewardMode};

/// Intrinsic rewards for one finished episode in a primal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReward {
    /// One reward per step of the episode.
    pub rewards: Vec<f64>,
    /// Projected distance from the episode to each target batch.
    pub distances: Vec<f64>,
    /// Index of the nearest target batch.
    pub nearest: usize,
}

/// Score an episode against target batches from the other policies, all
/// under one shared set of directions.
///
/// APWD pays each step its transport credit times the episode length, so
/// the undiscounted return is `scale · N · W`. PWD-final pays `scale · W`
/// on the last step only. With [`Aggregate::Mean`] credits and distances
/// are averaged over targets instead of taken from the nearest one.
pub fn primal_episode_rewards(
    mode: RewardMode,
    aggregate: Aggregate,
    states: &StateBatch,
    targets: &[StateBatch],
    dirs: &[Direction],
    scale: f64,
) -> Result<EpisodeReward> {
    if mode.is_dual() {
        return Err(invalid("dual modes produce per-step rewards online"));
    }
    if targets.is_empty() {
        return Err(invalid("no target batches to score against"));
    }
    if states.is_empty() {
        return Err(invalid("episode has no states"));
    }
    let cost = GroundCost::EUCLIDEAN;
    let distances = targets
        .iter()
        .map(|t| projected_wd_with(states, t, dirs, cost))
        .collect::<Result<Vec<_>>>()?;
    let nearest = (0..distances.len())
        .min_by(|&a, &b| distances[a].total_cmp(&distances[b]))
        .unwrap();
    let n = states.len();
    let rewards = match (mode, aggregate) {
        (RewardMode::Apwd, Aggregate::Min) => amortized_rewards_with(states, &targets[nearest], dirs, cost)?
            .scaled(scale * n as f64)
            .into_vec(),
        (RewardMode::Apwd, Aggregate::Mean) => {
            let mut acc = vec![0.0; n];
            for t in targets {
                let c = amortized_rewards_with(states, t, dirs, cost)?;
                for (a, v) in acc.iter_mut().zip(c.values()) {
                    *a += v;
                }
            }
            let k = scale * n as f64 / targets.len() as f64;
            acc.into_iter().map(|v| v * k).collect()
        }
        (RewardMode::PwdFinal, agg) => {
            let w = match agg {
                Aggregate::Min => distances[nearest],
                Aggregate::Mean => distances.iter().sum::<f64>() / distances.len() as f64,
            };
            let mut r = vec![0.0; n];
            r[n - 1] = scale * w;
            r
        }
        _ => unreachable!(),
    };
    Ok(EpisodeReward {
        rewards,
        distances,
        nearest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::sample_directions;
    use crate::rng::SeedTree;
    use rand::Rng as _;

    fn random_batch(rng: &mut crate::Rng, n: usize, shift: f64) -> StateBatch {
        let flat = (0..n * 3).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        StateBatch::from_flat(3, flat).unwrap()
    }

    #[test]
    fn final_reward_equals_amortized_total_over_n() {
        let mut rng = SeedTree::new(1).rng();
        for _ in 0..20 {
            let s = random_batch(&mut rng, 17, 0.0);
            let targets = vec![random_batch(&mut rng, 23, 2.0), random_batch(&mut rng, 9, -0.5)];
            let dirs = sample_directions(3, 8, &mut rng);
            for agg in [Aggregate::Min, Aggregate::Mean] {
                let a = primal_episode_rewards(RewardMode::Apwd, agg, &s, &targets, &dirs, 0.5).unwrap();
                let f = primal_episode_rewards(RewardMode::PwdFinal, agg, &s, &targets, &dirs, 0.5).unwrap();
                assert_eq!(a.nearest, f.nearest);
                assert!(f.rewards[..16].iter().all(|r| *r == 0.0));
                let total: f64 = a.rewards.iter().sum();
                let terminal = f.rewards[16];
                assert!((total / 17.0 - terminal).abs() <= 1e-6 * terminal.abs());
                assert!(a.rewards.iter().all(|r| *r >= 0.0));
            }
        }
    }

    #[test]
    fn nearest_target_wins_and_terminal_matches_projected_wd() {
        let mut rng = SeedTree::new(2).rng();
        let s = random_batch(&mut rng, 10, 0.0);
        let near = random_batch(&mut rng, 10, 0.5);
        let far = random_batch(&mut rng, 10, 5.0);
        let dirs = sample_directions(3, 4, &mut rng);
        let r = primal_episode_rewards(RewardMode::PwdFinal, Aggregate::Min, &s, &[far.clone(), near.clone()], &dirs, 1.0)
            .unwrap();
        assert_eq!(r.nearest, 1);
        let direct = projected_wd_with(&s, &near, &dirs, GroundCost::EUCLIDEAN).unwrap();
        assert_eq!(r.rewards[9], direct);
    }

    #[test]
    fn identical_behaviour_earns_nothing() {
        let mut rng = SeedTree::new(3).rng();
        let s = random_batch(&mut rng, 12, 0.0);
        let dirs = sample_directions(3, 4, &mut rng);
        for mode in [RewardMode::Apwd, RewardMode::PwdFinal] {
            let r = primal_episode_rewards(mode, Aggregate::Min, &s, &[s.clone()], &dirs, 1.0).unwrap();
            assert!(r.rewards.iter().all(|v| v.abs() < 1e-12));
        }
        assert!(primal_episode_rewards(RewardMode::Tf1, Aggregate::Min, &s, &[s.clone()], &dirs, 1.0).is_err());
        assert!(primal_episode_rewards(RewardMode::Apwd, Aggregate::Min, &s, &[], &dirs, 1.0).is_err());
    }
}
