//! Deterministic 2-D particle arenas with acceleration control.
//!
//! States are `[x, y, vx, vy]` in world units. The particle spawns at the
//! origin, integrates with explicit Euler steps and slides along walls
//! instead of stopping.

mod config;
mod particle;
mod rollout;

pub use config::{EnvConfig, NavTask, Wall};
pub use particle::{ParticleEnv, ParticleState, Transition, ACTION_DIM, STATE_DIM};
pub use rollout::{rollout, Episode, Policy, RandomPolicy, ZeroPolicy};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use rand::Rng as _;

    fn open_env() -> ParticleEnv {
        ParticleEnv::new(EnvConfig::free_run()).unwrap()
    }

    #[test]
    fn reset_spawns_at_center() {
        for cfg in [EnvConfig::free_run(), EnvConfig::tree_maze(), EnvConfig::navigation()] {
            let mut env = ParticleEnv::new(cfg).unwrap();
            assert_eq!(env.reset(), ParticleState::default());
            assert_eq!(env.goal_index(), 0);
            assert!(!env.in_wall([0.0, 0.0]));
        }
    }

    #[test]
    fn zero_action_keeps_rest() {
        let mut env = open_env();
        env.reset();
        let t = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(t.next_state, vec![0.0; 4]);
        assert_eq!(t.reward, 0.0);
    }

    #[test]
    fn constant_push_matches_hand_integration() {
        // a = 0.05: v = 0.05, 0.1, 0.15 and x = 0.05, 0.15, 0.3
        let mut env = open_env();
        env.reset();
        let expected = [(0.05, 0.05), (0.1, 0.15), (0.15, 0.3)];
        for (v, x) in expected {
            let t = env.step(&[0.05, 0.0]).unwrap();
            assert!((t.next_state[2] - v).abs() < 1e-12);
            assert!((t.next_state[0] - x).abs() < 1e-12);
            assert_eq!(t.next_state[1], 0.0);
        }
        // speed saturates at v_max
        for _ in 0..10 {
            env.step(&[0.05, 0.0]).unwrap();
        }
        assert!((env.state().speed() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn actions_are_clipped() {
        let mut env = open_env();
        env.reset();
        let t = env.step(&[5.0, -5.0]).unwrap();
        assert_eq!(t.action, vec![0.05, -0.05]);
        assert!(env.step(&[f64::NAN, 0.0]).is_err());
        assert!(env.step(&[0.0]).is_err());
    }

    #[test]
    fn step_after_done_is_an_error() {
        let cfg = EnvConfig {
            horizon: 2,
            ..EnvConfig::free_run()
        };
        let mut env = ParticleEnv::new(cfg).unwrap();
        env.reset();
        assert!(!env.step(&[0.0, 0.0]).unwrap().done);
        assert!(env.step(&[0.0, 0.0]).unwrap().done);
        assert!(matches!(env.step(&[0.0, 0.0]), Err(crate::Error::State(_))));
    }

    #[test]
    fn velocity_clamp_fuzz() {
        let mut rng = SeedTree::new(11).rng();
        let cfg = EnvConfig {
            horizon: 1000,
            ..EnvConfig::free_run()
        };
        let mut env = ParticleEnv::new(cfg).unwrap();
        env.reset();
        for i in 0..100_000 {
            if env.is_done() {
                env.reset();
            }
            let a = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
            env.step(&a).unwrap();
            assert!(env.state().speed() <= 0.5 + 1e-9, "step {i}");
            assert!(env.in_bounds(env.state().pos));
        }
    }

    #[test]
    fn maze_containment() {
        let mut rng = SeedTree::new(12).rng();
        let mut env = ParticleEnv::new(EnvConfig::tree_maze()).unwrap();
        for _ in 0..300 {
            env.reset();
            // persistent pushes reach walls more often than white noise
            let bias = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
            while !env.is_done() {
                let a = [bias[0] + rng.random_range(-0.05..0.05), bias[1] + rng.random_range(-0.05..0.05)];
                env.step(&a).unwrap();
                let p = env.state().pos;
                assert!(!env.in_wall(p), "inside wall at {p:?}");
                assert!(p[0].abs() < 4.0 && p[1].abs() < 4.0, "escaped maze at {p:?}");
            }
        }
    }

    #[test]
    fn sliding_along_a_wall_zeroes_normal_velocity() {
        let cfg = EnvConfig {
            walls: vec![[[1.0, -8.0], [1.0, 8.0]]],
            horizon: 100,
            ..EnvConfig::free_run()
        };
        let mut env = ParticleEnv::new(cfg).unwrap();
        env.reset();
        for _ in 0..15 {
            env.step(&[0.1, 0.05]).unwrap();
        }
        let s = env.state();
        assert!((s.pos[0] - 0.75).abs() < 1e-9);
        assert!(s.vel[0].abs() < 1e-12);
        assert!(s.vel[1] > 0.0);
    }

    #[test]
    fn navigation_rewards() {
        let cfg = EnvConfig {
            task: Some(NavTask {
                goals: vec![[1.0, 0.0], [3.0, 0.0]],
                goal_radius: 0.5,
                goal_reward: 50.0,
                step_penalty: 0.1,
            }),
            horizon: 100,
            ..EnvConfig::free_run()
        };
        let mut env = ParticleEnv::new(cfg).unwrap();
        env.reset();
        let mut total = 0.0;
        let mut steps = 0;
        let mut goal_steps = Vec::new();
        while !env.is_done() {
            let t = env.step(&[0.1, 0.0]).unwrap();
            total += t.reward;
            steps += 1;
            if t.reward > 0.0 {
                assert!((t.reward - 49.9).abs() < 1e-12);
                goal_steps.push(env.goal_index());
            }
        }
        assert_eq!(goal_steps, vec![1, 2]);
        assert_eq!(env.goal_index(), 2);
        assert!(steps < 100, "episode ends once every goal is reached");
        assert!((total - (50.0 * 2.0 - 0.1 * steps as f64)).abs() < 1e-9);
    }

    #[test]
    fn goals_must_be_reached_in_order() {
        let cfg = EnvConfig {
            task: Some(NavTask {
                goals: vec![[-2.0, 0.0], [1.0, 0.0]],
                ..NavTask::default()
            }),
            ..EnvConfig::navigation()
        };
        let mut env = ParticleEnv::new(cfg).unwrap();
        env.reset();
        for _ in 0..10 {
            let t = env.step(&[0.1, 0.0]).unwrap();
            assert!(t.reward < 0.0);
        }
        assert_eq!(env.goal_index(), 0);
    }

    #[test]
    fn reward_free_mode_is_silent() {
        let mut rng = SeedTree::new(13).rng();
        let mut env = open_env();
        let ep = rollout(&mut env, &mut RandomPolicy { a_max: 0.1 }, 20, &mut rng).unwrap();
        assert!(ep.transitions.iter().all(|t| t.reward == 0.0));
    }

    #[test]
    fn rollout_contracts() {
        let mut env = open_env();
        let mut rng = SeedTree::new(14).rng();
        let ep = rollout(&mut env, &mut ZeroPolicy, 1000, &mut rng).unwrap();
        assert_eq!(ep.len(), 20);
        assert!(ep.transitions.iter().all(|t| t.next_state == vec![0.0; 4]));
        assert!(ep.transitions.last().unwrap().done);
        assert_eq!(rollout(&mut env, &mut ZeroPolicy, 1, &mut rng).unwrap().len(), 1);

        let run = |seed| {
            let mut rng = SeedTree::new(seed).rng();
            rollout(&mut open_env(), &mut RandomPolicy { a_max: 0.1 }, 20, &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn records_format() {
        let mut env = open_env();
        let mut rng = SeedTree::new(15).rng();
        let ep = rollout(&mut env, &mut ZeroPolicy, 3, &mut rng).unwrap();
        let text = ep.to_records();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines, vec!["1 0.0 0.0 0.0 0.0 0.0", "2 0.0 0.0 0.0 0.0 0.0", "3 0.0 0.0 0.0 0.0 0.0"]);
        assert_eq!(ep.states().unwrap().len(), 3);
    }

    #[test]
    fn config_round_trips_through_toml() {
        for cfg in [EnvConfig::free_run(), EnvConfig::tree_maze(), EnvConfig::navigation()] {
            let text = cfg.to_toml_string();
            assert_eq!(EnvConfig::from_toml_str(&text).unwrap(), cfg);
        }
        let partial = EnvConfig::from_toml_str("horizon = 7\nwalls = [[[0.0, 2.0], [1.0, 2.0]]]").unwrap();
        assert_eq!(partial.horizon, 7);
        assert_eq!(partial.walls.len(), 1);
        assert!(EnvConfig::from_toml_str("horizon = 0").is_err());
        assert!(EnvConfig::from_toml_str("bogus = 1").is_err());
        assert!(EnvConfig::from_toml_str("[task]\ngoals = [[50.0, 0.0]]").is_err());
    }

    #[test]
    fn spawn_inside_a_wall_is_rejected() {
        let cfg = EnvConfig {
            walls: vec![[[-1.0, 0.0], [1.0, 0.0]]],
            ..EnvConfig::free_run()
        };
        assert!(ParticleEnv::new(cfg).is_err());
    }
}
