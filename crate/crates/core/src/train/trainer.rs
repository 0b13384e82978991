use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dual::{DualMode, Side, TestFunctionPair};
use crate::env::{EnvConfig, ParticleEnv, Transition, ACTION_DIM, STATE_DIM};
use crate::error::{invalid, Error, Result};
use crate::nn::Checkpoint;
use crate::ot::{projected_wd_with, sample_directions, GroundCost, RewardVector, StateBatch};
use crate::rng::{Rng, SeedTree};
use crate::sac::{actor_checkpoint, actor_from_checkpoint, relabel_amortized, relabel_final, Actor, SacAgent};

use super::config::{RewardMode, Selection, TrainConfig};
use super::rewards::primal_episode_rewards;
use super::sampler::TargetSampler;

/// A policy slot: either still learning or frozen for good.
#[derive(Debug, Clone)]
pub enum Learner {
    Trainable(Box<SacAgent>),
    Frozen(Actor),
}

impl Learner {
    pub fn actor(&self) -> &Actor {
        match self {
            Self::Trainable(a) => &a.actor,
            Self::Frozen(a) => a,
        }
    }

    pub fn is_frozen(&self) -> bool {
        matches!(self, Self::Frozen(_))
    }
}

/// An already-trained policy and the states it visits.
#[derive(Debug, Clone)]
pub struct FrozenPolicy {
    pub actor: Actor,
    pub archive: Vec<StateBatch>,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub policy: usize,
    pub steps: usize,
    pub intrinsic_return: f64,
    /// Projected distance from this episode to the nearest other policy.
    pub min_pairwise_wd: Option<f64>,
    pub target: Option<usize>,
    pub dual_objective: Option<f64>,
    pub critic_loss: Option<f64>,
    pub entropy: Option<f64>,
}

impl EpisodeMetrics {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics always serialize")
    }
}

/// Observation scale shared by every network that reads particle states.
pub fn obs_scale(env: &EnvConfig) -> Vec<f64> {
    vec![env.half_extent, env.half_extent, env.v_max, env.v_max]
}

/// A policy that never accelerates, used to seed incremental training.
pub fn stay_at_center(env: &EnvConfig, hidden: usize, depth: usize) -> Result<Actor> {
    let mut sizes = vec![STATE_DIM];
    sizes.extend(std::iter::repeat_n(hidden, depth));
    sizes.push(2 * ACTION_DIM);
    let net = crate::nn::Mlp::zeros(&sizes, crate::nn::OutputHead::Linear)?;
    let mut actor = Actor::from_net(net, obs_scale(env), env.a_max)?;
    actor.deterministic = true;
    Ok(actor)
}

/// Runs the diversity training loop over a set of policies.
#[derive(Debug, Clone)]
pub struct Trainer {
    env: ParticleEnv,
    cfg: TrainConfig,
    tree: SeedTree,
    learners: Vec<Learner>,
    sampler: TargetSampler,
    dual: Option<TestFunctionPair>,
    episodes_done: usize,
    per_policy: Vec<usize>,
    dual_updates: u64,
    columns: Vec<usize>,
    metrics: Vec<EpisodeMetrics>,
}

impl Trainer {
    pub fn new(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let tree = SeedTree::new(seed);
        let scale = obs_scale(&env_cfg);
        let learners = (0..cfg.policies)
            .map(|l| {
                let mut rng = tree.child("init").index(l as u64).rng();
                SacAgent::new(scale.clone(), ACTION_DIM, env_cfg.a_max, cfg.sac.clone(), &mut rng)
                    .map(|a| Learner::Trainable(Box::new(a)))
            })
            .collect::<Result<Vec<_>>>()?;
        let columns = cfg.subspace.columns(STATE_DIM);
        let dual = match cfg.mode {
            RewardMode::Tf1 | RewardMode::Tf2 => {
                let mode = if cfg.mode == RewardMode::Tf1 { DualMode::Tf1 } else { DualMode::Tf2 };
                let mut rng = tree.child("dual_init").rng();
                Some(TestFunctionPair::new(mode, columns.len(), &cfg.dual, &mut rng)?)
            }
            _ => None,
        };
        Ok(Self {
            env: ParticleEnv::new(env_cfg)?,
            sampler: TargetSampler::new(cfg.policies, cfg.recent_episodes, cfg.target_batch),
            per_policy: vec![0; cfg.policies],
            dual_updates: 0,
            learners,
            dual,
            columns,
            cfg,
            tree,
            episodes_done: 0,
            metrics: Vec::new(),
        })
    }

    /// One new trainable policy against `frozen` ones whose archives are
    /// fixed targets. `cfg.policies` is overridden to `frozen.len() + 1`.
    pub fn with_frozen(env_cfg: EnvConfig, mut cfg: TrainConfig, seed: u64, frozen: Vec<FrozenPolicy>) -> Result<Self> {
        if frozen.is_empty() {
            return Err(invalid("incremental training needs at least one frozen policy"));
        }
        if cfg.mode.is_dual() {
            return Err(invalid("incremental training uses primal rewards"));
        }
        cfg.policies = frozen.len() + 1;
        let mut t = Self::new(env_cfg, cfg, seed)?;
        for (i, f) in frozen.into_iter().enumerate() {
            t.sampler.set_fixed(i, f.archive)?;
            t.learners[i] = Learner::Frozen(f.actor);
        }
        Ok(t)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn env_config(&self) -> &EnvConfig {
        self.env.config()
    }

    pub fn learners(&self) -> &[Learner] {
        &self.learners
    }

    pub fn actor(&self, l: usize) -> &Actor {
        self.learners[l].actor()
    }

    pub fn sampler(&self) -> &TargetSampler {
        &self.sampler
    }

    pub fn dual(&self) -> Option<&TestFunctionPair> {
        self.dual.as_ref()
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn metrics(&self) -> &[EpisodeMetrics] {
        &self.metrics
    }

    /// Every policy as a frozen one, carrying its recent-episode archive
    /// (or its fixed archive if it was already frozen).
    pub fn frozen_policies(&self) -> Vec<FrozenPolicy> {
        (0..self.learners.len())
            .map(|l| FrozenPolicy {
                actor: self.actor(l).clone(),
                archive: self.sampler.archive(l).cloned().collect(),
            })
            .collect()
    }

    fn trainable(&self) -> Vec<usize> {
        (0..self.learners.len()).filter(|&l| !self.learners[l].is_frozen()).collect()
    }

    fn mask(&self, s: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|&c| s[c]).collect()
    }

    fn masked_states(&self, transitions: &[Transition]) -> Result<StateBatch> {
        let flat = transitions.iter().flat_map(|t| self.mask(&t.next_state)).collect();
        StateBatch::from_flat(self.columns.len(), flat)
    }

    /// Run episodes until the configured budget is spent.
    pub fn train(&mut self) -> Result<&[EpisodeMetrics]> {
        let start = self.metrics.len();
        while self.episodes_done < self.cfg.episodes {
            self.run_episode()?;
        }
        Ok(&self.metrics[start..])
    }

    /// Collect and learn from one episode of the next selected policy.
    pub fn run_episode(&mut self) -> Result<EpisodeMetrics> {
        let e = self.episodes_done;
        let mut rng = self.tree.child("episode").index(e as u64).rng();
        let trainable = self.trainable();
        let l = match self.cfg.selection {
            Selection::RoundRobin => trainable[e % trainable.len()],
            Selection::Random => trainable[rng.random_range(0..trainable.len())],
        };
        let dual_mode = self.cfg.mode.is_dual();
        let side = if l == 0 { Side::First } else { Side::Second };

        self.env.reset();
        let mut transitions = Vec::new();
        let mut critic = Vec::new();
        let mut entropy = Vec::new();
        let mut dual_obj = Vec::new();
        let mut intrinsic_return = 0.0;
        while !self.env.is_done() {
            let s = self.env.state().to_vec();
            let a = self.learners[l].actor().act(&s, false, &mut rng)?;
            let mut t = self.env.step(&a)?;
            if dual_mode {
                // scorer rewards start once the scorer has seen data
                t.reward = match &self.dual {
                    Some(tf) if self.dual_updates > 0 => tf.state_reward(&self.mask(&t.next_state), side)?,
                    _ => 0.0,
                };
                intrinsic_return += t.reward;
            }
            let Learner::Trainable(agent) = &mut self.learners[l] else {
                unreachable!("frozen policies are never selected")
            };
            if dual_mode {
                agent.buffer.push_transition(&t, false);
            }
            for _ in 0..self.cfg.sac.updates_per_step {
                if let Some(stats) = agent.update(&mut rng)? {
                    critic.push(stats.critic_loss);
                    entropy.push(stats.entropy);
                }
            }
            transitions.push(t);
            if dual_mode {
                if let Some(obj) = self.dual_step(&mut rng)? {
                    dual_obj.push(obj);
                }
            }
        }

        let states = self.masked_states(&transitions)?;
        let candidates = self.sampler.candidates(l);
        let mut min_wd = None;
        let mut target = None;
        if !candidates.is_empty() {
            let targets = candidates
                .iter()
                .map(|&j| self.sampler.sample(l, j, &self.columns, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let dirs = sample_directions(self.columns.len(), self.cfg.projections, &mut rng);
            if dual_mode {
                let d = targets
                    .iter()
                    .map(|t| projected_wd_with(&states, t, &dirs, GroundCost::EUCLIDEAN))
                    .collect::<Result<Vec<_>>>()?;
                let k = (0..d.len()).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
                min_wd = Some(d[k]);
                target = Some(candidates[k]);
            } else {
                let r = primal_episode_rewards(
                    self.cfg.mode,
                    self.cfg.aggregate,
                    &states,
                    &targets,
                    &dirs,
                    self.cfg.reward_scale,
                )?;
                min_wd = Some(r.distances[r.nearest]);
                target = Some(candidates[r.nearest]);
                match self.cfg.mode {
                    RewardMode::Apwd => relabel_amortized(&mut transitions, &RewardVector::new(r.rewards), 1.0)?,
                    _ => relabel_final(&mut transitions, *r.rewards.last().unwrap())?,
                }
            }
        } else if !dual_mode {
            // cold start: nobody to move away from yet
            relabel_final(&mut transitions, 0.0)?;
        }
        if !dual_mode {
            intrinsic_return = transitions.iter().map(|t| t.reward).sum();
            let Learner::Trainable(agent) = &mut self.learners[l] else { unreachable!() };
            for t in &transitions {
                agent.buffer.push_transition(t, false);
            }
        }

        let full = StateBatch::from_flat(
            STATE_DIM,
            transitions.iter().flat_map(|t| t.next_state.iter().copied()).collect(),
        )?;
        self.sampler.record(l, full);
        self.per_policy[l] += 1;
        self.episodes_done += 1;
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let m = EpisodeMetrics {
            episode: e,
            policy: l,
            steps: transitions.len(),
            intrinsic_return,
            min_pairwise_wd: min_wd,
            target,
            dual_objective: mean(&dual_obj),
            critic_loss: mean(&critic),
            entropy: mean(&entropy),
        };
        self.metrics.push(m.clone());
        Ok(m)
    }

    /// One scorer update from both policies' replay buffers, once each
    /// holds a full batch.
    fn dual_step(&mut self, rng: &mut Rng) -> Result<Option<f64>> {
        let n = self.cfg.dual_batch;
        let mut sides = Vec::with_capacity(2);
        for l in 0..2 {
            let Learner::Trainable(agent) = &self.learners[l] else { unreachable!() };
            let Some(batch) = agent.buffer.sample(n, rng) else {
                return Ok(None);
            };
            let flat = batch.iter().flat_map(|b| self.mask(&b.next_state)).collect();
            sides.push(StateBatch::from_flat(self.columns.len(), flat)?);
        }
        let step = self.cfg.dual.step_size;
        let tf = self.dual.as_mut().unwrap();
        let obj = tf.update(&sides[0], &sides[1], step, rng)?;
        self.dual_updates += 1;
        Ok(Some(obj))
    }

    /// Write every policy and the resumable trainer state into `dir`.
    /// Replay buffers are not saved.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (l, learner) in self.learners.iter().enumerate() {
            let ck = match learner {
                Learner::Trainable(a) => a.to_checkpoint(),
                Learner::Frozen(a) => actor_checkpoint(a),
            };
            let path = dir.join(format!("policy_{l:02}.ckpt"));
            ck.save(&path)?;
            written.push(path);
        }
        let mut state = Checkpoint::new();
        state.push_vector("episodes_done", &[self.episodes_done as f64]);
        state.push_vector("dual_updates", &[self.dual_updates as f64]);
        state.push_vector("per_policy", &self.per_policy.iter().map(|&v| v as f64).collect::<Vec<_>>());
        state.push_vector(
            "frozen",
            &self.learners.iter().map(|l| l.is_frozen() as u8 as f64).collect::<Vec<_>>(),
        );
        for l in 0..self.learners.len() {
            for (k, b) in self.sampler.archive(l).enumerate() {
                state.push_vector(&format!("archive.{l}.{k}"), b.as_flat());
            }
        }
        if let Some(tf) = &self.dual {
            state.push_network("dual.mu", tf.mu());
            if let Some(nu) = tf.nu() {
                state.push_network("dual.nu", nu);
            }
        }
        let path = dir.join("trainer.ckpt");
        state.save(&path)?;
        written.push(path);
        Ok(written)
    }

    /// Rebuild a trainer saved by [`Trainer::save`]. Training continues
    /// from the saved episode counter with empty replay buffers.
    pub fn resume(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64, dir: &Path) -> Result<Self> {
        let state = Checkpoint::load(&dir.join("trainer.ckpt"))?;
        let frozen = state.vector("frozen")?;
        let cfg = TrainConfig {
            policies: frozen.len(),
            ..cfg
        };
        let mut t = Self::new(env_cfg, cfg, seed)?;
        for (l, &is_frozen) in frozen.iter().enumerate() {
            let ck = Checkpoint::load(&dir.join(format!("policy_{l:02}.ckpt")))?;
            let archive: Vec<StateBatch> = state
                .entries()
                .iter()
                .filter(|(name, _)| name.starts_with(&format!("archive.{l}.")))
                .map(|(name, _)| StateBatch::from_flat(STATE_DIM, state.vector(name)?.to_vec()))
                .collect::<Result<_>>()?;
            if is_frozen == 1.0 {
                t.learners[l] = Learner::Frozen(actor_from_checkpoint(&ck)?);
                t.sampler.set_fixed(l, archive)?;
            } else {
                t.learners[l] = Learner::Trainable(Box::new(SacAgent::from_checkpoint(&ck, t.cfg.sac.clone())?));
                for b in archive {
                    t.sampler.record(l, b);
                }
            }
        }
        t.episodes_done = state.vector("episodes_done")?[0] as usize;
        t.dual_updates = state.vector("dual_updates")?[0] as u64;
        t.per_policy = state.vector("per_policy")?.iter().map(|&v| v as usize).collect();
        if t.per_policy.len() != t.learners.len() {
            return Err(Error::Checkpoint("per-policy counters do not match the policy count".into()));
        }
        if let Some(tf) = &t.dual {
            let mu = state.network("dual.mu")?.clone();
            let nu = match tf.mode() {
                DualMode::Tf2 => Some(state.network("dual.nu")?.clone()),
                DualMode::Tf1 => None,
            };
            t.dual = Some(TestFunctionPair::from_networks(tf.mode(), mu, nu, &t.cfg.dual)?);
        }
        Ok(t)
    }
}

/// Train one new policy against frozen ones and return the trainer.
pub fn train_incremental(
    env_cfg: EnvConfig,
    cfg: TrainConfig,
    seed: u64,
    frozen: Vec<FrozenPolicy>,
) -> Result<Trainer> {
    let mut t = Trainer::with_frozen(env_cfg, cfg, seed, frozen)?;
    t.train()?;
    Ok(t)
}
