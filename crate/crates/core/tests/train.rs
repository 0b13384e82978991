use wurl_core::env::{rollout, EnvConfig, ParticleEnv};
use wurl_core::sac::SacConfig;
use wurl_core::train::{
    stay_at_center, train_incremental, Aggregate, FrozenPolicy, Learner, RewardMode, TrainConfig, Trainer,
};
use wurl_core::SeedTree;

fn tiny(mode: RewardMode, policies: usize, episodes: usize) -> TrainConfig {
    TrainConfig {
        policies,
        mode,
        episodes,
        projections: 4,
        target_batch: 32,
        dual_batch: 16,
        sac: SacConfig {
            hidden: 8,
            batch: 16,
            capacity: 2000,
            ..SacConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn dual_modes_require_two_policies() {
    for mode in [RewardMode::Tf1, RewardMode::Tf2] {
        assert!(Trainer::new(EnvConfig::free_run(), tiny(mode, 3, 1), 0).is_err());
        assert!(Trainer::new(EnvConfig::free_run(), tiny(mode, 2, 1), 0).is_ok());
    }
    assert!(Trainer::new(EnvConfig::free_run(), tiny(RewardMode::Apwd, 1, 1), 0).is_err());
}

#[test]
fn final_reward_mode_pays_only_at_the_end() {
    let mut t = Trainer::new(EnvConfig::free_run(), tiny(RewardMode::PwdFinal, 3, 9), 1).unwrap();
    t.train().unwrap();
    for learner in t.learners() {
        let Learner::Trainable(agent) = learner else { panic!() };
        // transitions go in episode by episode, 20 steps each
        let rewards: Vec<f64> = agent.buffer.iter().map(|s| s.reward).collect();
        assert_eq!(rewards.len(), 60);
        for episode in rewards.chunks(20) {
            assert!(episode[..19].iter().all(|r| *r == 0.0));
        }
    }
    for m in t.metrics() {
        match m.min_pairwise_wd {
            Some(w) => assert!((m.intrinsic_return - w).abs() <= 1e-12 * w.max(1.0)),
            None => assert_eq!(m.intrinsic_return, 0.0),
        }
    }
    // the very first episode has nobody to compare against
    assert_eq!(t.metrics()[0].intrinsic_return, 0.0);
}

#[test]
fn amortized_return_is_length_scaled_distance() {
    let cfg = TrainConfig {
        reward_scale: 0.5,
        ..tiny(RewardMode::Apwd, 3, 9)
    };
    let mut t = Trainer::new(EnvConfig::free_run(), cfg, 2).unwrap();
    t.train().unwrap();
    for m in t.metrics().iter().filter(|m| m.min_pairwise_wd.is_some()) {
        let expected = 0.5 * m.steps as f64 * m.min_pairwise_wd.unwrap();
        assert!((m.intrinsic_return - expected).abs() <= 1e-9 * expected.max(1.0), "{m:?}");
        assert!(m.intrinsic_return >= 0.0);
    }
}

#[test]
fn targets_never_come_from_the_acting_policy() {
    for mode in [RewardMode::Apwd, RewardMode::PwdFinal, RewardMode::Tf2] {
        let n = if mode.is_dual() { 2 } else { 4 };
        let mut t = Trainer::new(EnvConfig::free_run(), tiny(mode, n, 8), 3).unwrap();
        t.train().unwrap();
        assert!(!t.sampler().audit().is_empty());
        assert!(t.sampler().audit().iter().all(|(a, b)| a != b));
        for m in t.metrics() {
            assert_ne!(m.target, Some(m.policy));
        }
    }
}

#[test]
fn dual_modes_train_and_log_objectives() {
    for mode in [RewardMode::Tf1, RewardMode::Tf2] {
        let mut t = Trainer::new(EnvConfig::free_run(), tiny(mode, 2, 4), 4).unwrap();
        let metrics = t.train().unwrap().to_vec();
        assert!(metrics.iter().any(|m| m.dual_objective.is_some()));
        assert_eq!(metrics[0].intrinsic_return, 0.0);
        if mode == RewardMode::Tf1 {
            let tf = t.dual().unwrap();
            assert!(tf.mu().params().iter().all(|w| w.abs() <= tf.clamp_c()));
        }
    }
}

#[test]
fn same_seed_same_log() {
    let run = |seed| {
        let mut t = Trainer::new(EnvConfig::free_run(), tiny(RewardMode::Apwd, 3, 6), seed).unwrap();
        t.train().unwrap();
        t.metrics().iter().map(|m| m.to_json_line()).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn mean_aggregate_runs() {
    let cfg = TrainConfig {
        aggregate: Aggregate::Mean,
        ..tiny(RewardMode::Apwd, 3, 6)
    };
    let mut t = Trainer::new(EnvConfig::free_run(), cfg, 7).unwrap();
    t.train().unwrap();
    assert!(t.metrics().iter().skip(1).all(|m| m.intrinsic_return > 0.0));
}

fn frozen_center(env: &EnvConfig) -> FrozenPolicy {
    let actor = stay_at_center(env, 8, 2).unwrap();
    let mut e = ParticleEnv::new(env.clone()).unwrap();
    let mut rng = SeedTree::new(0).rng();
    let archive = (0..3)
        .map(|_| rollout(&mut e, &mut actor.clone(), env.horizon, &mut rng).unwrap().states().unwrap())
        .collect();
    FrozenPolicy { actor, archive }
}

#[test]
fn incremental_keeps_frozen_policies_untouched() {
    let env = EnvConfig::free_run();
    let frozen = frozen_center(&env);
    let before = frozen.actor.net().fingerprint();
    let t = train_incremental(env.clone(), tiny(RewardMode::Apwd, 2, 5), 8, vec![frozen]).unwrap();
    assert_eq!(t.actor(0).net().fingerprint(), before);
    assert!(t.learners()[0].is_frozen());
    assert!(t.metrics().iter().all(|m| m.policy == 1));
    assert!(t.metrics().iter().all(|m| m.min_pairwise_wd.unwrap() >= 0.0));

    let empty = FrozenPolicy {
        actor: stay_at_center(&env, 8, 2).unwrap(),
        archive: vec![],
    };
    assert!(Trainer::with_frozen(env.clone(), tiny(RewardMode::Apwd, 2, 1), 0, vec![empty]).is_err());
    assert!(Trainer::with_frozen(env, tiny(RewardMode::Tf1, 2, 1), 0, vec![frozen_center(&EnvConfig::free_run())]).is_err());
}

#[test]
fn save_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let env = EnvConfig::free_run();
    for mode in [RewardMode::Apwd, RewardMode::Tf2] {
        let n = if mode.is_dual() { 2 } else { 3 };
        let mut t = Trainer::new(env.clone(), tiny(mode, n, 4), 9).unwrap();
        t.train().unwrap();
        let files = t.save(dir.path()).unwrap();
        assert_eq!(files.len(), n + 1);
        let cfg = TrainConfig {
            episodes: 6,
            ..tiny(mode, n, 4)
        };
        let mut r = Trainer::resume(env.clone(), cfg, 9, dir.path()).unwrap();
        assert_eq!(r.episodes_done(), 4);
        for l in 0..n {
            assert_eq!(r.actor(l), t.actor(l));
            assert_eq!(r.sampler().archive(l).count(), t.sampler().archive(l).count());
        }
        assert_eq!(r.train().unwrap().len(), 2);
    }
    std::fs::write(dir.path().join("trainer.ckpt"), b"garbage").unwrap();
    assert!(Trainer::resume(env, tiny(RewardMode::Apwd, 3, 4), 9, dir.path()).is_err());
}
