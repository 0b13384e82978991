use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::Policy;
use crate::error::{invalid, Result};
use crate::nn::{Adam, Checkpoint, Mlp, OutputHead};
use crate::rng::Rng;

use super::buffer::ReplayBuffer;
use super::losses::{actor_loss_and_grad, critic_inputs, critic_loss_and_grad, squashed_sample, LOG_STD_MAX, LOG_STD_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub hidden: usize,
    pub depth: usize,
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Fixed entropy temperature.
    pub alpha: f64,
    pub batch: usize,
    pub capacity: usize,
    pub updates_per_step: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            depth: 2,
            lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            alpha: 0.1,
            batch: 128,
            capacity: 100_000,
            updates_per_step: 1,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 || self.capacity < self.batch {
            return Err(invalid("SAC needs hidden > 0, batch > 0 and capacity ≥ batch"));
        }
        if !(self.alpha > 0.0) {
            return Err(invalid("entropy temperature must be positive"));
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("tau and gamma must lie in [0, 1]"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

fn hidden_sizes(input: usize, output: usize, hidden: usize, depth: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat_n(hidden, depth));
    sizes.push(output);
    sizes
}

/// Tanh-squashed Gaussian policy. Inputs are raw states divided by
/// `obs_scale`; outputs are accelerations scaled to `a_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    net: Mlp,
    obs_scale: Vec<f64>,
    a_max: f64,
    /// When set, `Policy::act` returns tanh(mean) instead of sampling.
    pub deterministic: bool,
}

impl Actor {
    pub fn new(obs_scale: Vec<f64>, act_dim: usize, a_max: f64, hidden: usize, depth: usize, rng: &mut Rng) -> Result<Self> {
        let sizes = hidden_sizes(obs_scale.len(), 2 * act_dim, hidden, depth);
        Self::from_net(Mlp::new(&sizes, OutputHead::Linear, rng)?, obs_scale, a_max)
    }

    pub fn from_net(net: Mlp, obs_scale: Vec<f64>, a_max: f64) -> Result<Self> {
        if net.input_dim() != obs_scale.len() || net.output_dim() % 2 != 0 {
            return Err(invalid("actor network does not match observation/action sizes"));
        }
        if obs_scale.iter().any(|s| !(*s > 0.0)) || !(a_max > 0.0) {
            return Err(invalid("observation scales and a_max must be positive"));
        }
        Ok(Self {
            net,
            obs_scale,
            a_max,
            deterministic: false,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn obs_scale(&self) -> &[f64] {
        &self.obs_scale
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn act_dim(&self) -> usize {
        self.net.output_dim() / 2
    }

    pub fn normalize(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(&self.obs_scale).map(|(v, k)| v / k).collect()
    }

    pub fn normalize_batch(&self, rows: &[&[f64]]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), self.obs_scale.len()), |(i, j)| rows[i][j] / self.obs_scale[j])
    }

    pub fn act(&self, s: &[f64], deterministic: bool, rng: &mut Rng) -> Result<Vec<f64>> {
        if s.len() != self.obs_scale.len() {
            return Err(invalid(format!("state has {} entries, actor expects {}", s.len(), self.obs_scale.len())));
        }
        let out = self.net.forward(&self.normalize(s))?;
        let k = self.act_dim();
        Ok((0..k)
            .map(|j| {
                let u = if deterministic {
                    out[j]
                } else {
                    let log_std = out[k + j].clamp(LOG_STD_MIN, LOG_STD_MAX);
                    out[j] + log_std.exp() * rng.sample::<f64, _>(StandardNormal)
                };
                self.a_max * u.tanh()
            })
            .collect())
    }
}

impl Policy for Actor {
    fn act(&mut self, state: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        Actor::act(self, state, self.deterministic, rng)
    }
}

/// Twin Q networks with slowly tracking target copies.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub tau: f64,
}

impl CriticPair {
    pub fn new(input_dim: usize, hidden: usize, depth: usize, tau: f64, rng: &mut Rng) -> Result<Self> {
        let sizes = hidden_sizes(input_dim, 1, hidden, depth);
        let q1 = Mlp::new(&sizes, OutputHead::Linear, rng)?;
        let q2 = Mlp::new(&sizes, OutputHead::Linear, rng)?;
        Ok(Self {
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
            tau,
        })
    }

    /// target ← τ·online + (1 − τ)·target for both critics.
    pub fn soft_update(&mut self) -> Result<()> {
        self.q1_target.soft_update_from(&self.q1, self.tau)?;
        self.q2_target.soft_update_from(&self.q2, self.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub entropy: f64,
}

/// One policy with its critics, optimizers and replay buffer.
#[derive(Debug, Clone)]
pub struct SacAgent {
    pub actor: Actor,
    pub critics: CriticPair,
    pub buffer: ReplayBuffer,
    cfg: SacConfig,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    updates: u64,
}

impl SacAgent {
    pub fn new(obs_scale: Vec<f64>, act_dim: usize, a_max: f64, cfg: SacConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let obs_dim = obs_scale.len();
        let actor = Actor::new(obs_scale, act_dim, a_max, cfg.hidden, cfg.depth, rng)?;
        let critics = CriticPair::new(obs_dim + act_dim, cfg.hidden, cfg.depth, cfg.tau, rng)?;
        Ok(Self {
            opt_actor: Adam::new(actor.net.num_params(), cfg.lr),
            opt_q1: Adam::new(critics.q1.num_params(), cfg.lr),
            opt_q2: Adam::new(critics.q2.num_params(), cfg.lr),
            buffer: ReplayBuffer::new(cfg.capacity)?,
            actor,
            critics,
            cfg,
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One critic step, one actor step and one target update on a
    /// uniform batch. `None` while the buffer holds less than a batch.
    pub fn update(&mut self, rng: &mut Rng) -> Result<Option<UpdateStats>> {
        let Some(batch) = self.buffer.sample(self.cfg.batch, rng) else {
            return Ok(None);
        };
        let n = batch.len();
        let k = self.actor.act_dim();
        let a_max = self.actor.a_max;
        let states: Vec<&[f64]> = batch.iter().map(|b| b.state.as_slice()).collect();
        let next: Vec<&[f64]> = batch.iter().map(|b| b.next_state.as_slice()).collect();
        let obs = self.actor.normalize_batch(&states);
        let next_obs = self.actor.normalize_batch(&next);
        let actions = Array2::from_shape_fn((n, k), |(i, j)| batch[i].action[j] / a_max);
        let rewards: Vec<f64> = batch.iter().map(|b| b.reward).collect();
        let terminal: Vec<bool> = batch.iter().map(|b| b.terminal).collect();
        drop(batch);

        let alpha = self.cfg.alpha;
        let eps_next = Array2::from_shape_fn((n, k), |_| rng.sample::<f64, _>(StandardNormal));
        let next_smp = squashed_sample(&self.actor.net.forward_batch(&next_obs)?, &eps_next)?;
        let next_in = critic_inputs(&next_obs, &next_smp.action);
        let t1 = self.critics.q1_target.forward_batch(&next_in)?;
        let t2 = self.critics.q2_target.forward_batch(&next_in)?;
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                let soft_v = t1[[i, 0]].min(t2[[i, 0]]) - alpha * next_smp.log_prob[i];
                rewards[i] + if terminal[i] { 0.0 } else { self.cfg.gamma * soft_v }
            })
            .collect();

        let inputs = critic_inputs(&obs, &actions);
        let (l1, g1) = critic_loss_and_grad(&self.critics.q1, &inputs, &targets)?;
        let (l2, g2) = critic_loss_and_grad(&self.critics.q2, &inputs, &targets)?;
        self.opt_q1.step(self.critics.q1.params_mut(), &g1)?;
        self.opt_q2.step(self.critics.q2.params_mut(), &g2)?;

        let eps = Array2::from_shape_fn((n, k), |_| rng.sample::<f64, _>(StandardNormal));
        let actor_loss = actor_loss_and_grad(&self.actor.net, &self.critics.q1, &self.critics.q2, &obs, &eps, alpha)?;
        self.opt_actor.step(self.actor.net.params_mut(), &actor_loss.grad)?;
        self.critics.soft_update()?;
        self.updates += 1;
        Ok(Some(UpdateStats {
            critic_loss: l1 + l2,
            actor_loss: actor_loss.loss,
            entropy: actor_loss.entropy,
        }))
    }

    /// Networks plus optimizer moments; replay contents are not saved.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push_network("actor", &self.actor.net);
        ck.push_network("q1", &self.critics.q1);
        ck.push_network("q2", &self.critics.q2);
        ck.push_network("q1_target", &self.critics.q1_target);
        ck.push_network("q2_target", &self.critics.q2_target);
        ck.push_vector("obs_scale", &self.actor.obs_scale);
        ck.push_vector("a_max", &[self.actor.a_max]);
        for (name, opt) in [("adam_actor", &self.opt_actor), ("adam_q1", &self.opt_q1), ("adam_q2", &self.opt_q2)] {
            let (m, v) = opt.moments();
            ck.push_vector(&format!("{name}.m"), m);
            ck.push_vector(&format!("{name}.v"), v);
            ck.push_vector(&format!("{name}.t"), &[opt.steps() as f64]);
        }
        ck.push_vector("updates", &[self.updates as f64]);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, cfg: SacConfig) -> Result<Self> {
        cfg.validate()?;
        let actor = Actor::from_net(ck.network("actor")?.clone(), ck.vector("obs_scale")?.to_vec(), ck.vector("a_max")?[0])?;
        let critics = CriticPair {
            q1: ck.network("q1")?.clone(),
            q2: ck.network("q2")?.clone(),
            q1_target: ck.network("q1_target")?.clone(),
            q2_target: ck.network("q2_target")?.clone(),
            tau: cfg.tau,
        };
        let restore = |name: &str, n: usize| -> Result<Adam> {
            let m = ck.vector(&format!("{name}.m"))?.to_vec();
            let v = ck.vector(&format!("{name}.v"))?.to_vec();
            if m.len() != n || v.len() != n {
                return Err(crate::Error::Checkpoint(format!("{name} moments have the wrong length")));
            }
            Adam::from_state(cfg.lr, m, v, ck.vector(&format!("{name}.t"))?[0] as u64)
        };
        Ok(Self {
            opt_actor: restore("adam_actor", actor.net.num_params())?,
            opt_q1: restore("adam_q1", critics.q1.num_params())?,
            opt_q2: restore("adam_q2", critics.q2.num_params())?,
            buffer: ReplayBuffer::new(cfg.capacity)?,
            updates: ck.vector("updates")?[0] as u64,
            actor,
            critics,
            cfg,
        })
    }
}

/// Actor-only checkpoint for frozen or exported policies.
pub fn actor_checkpoint(actor: &Actor) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.push_network("actor", actor.net());
    ck.push_vector("obs_scale", actor.obs_scale());
    ck.push_vector("a_max", &[actor.a_max()]);
    ck
}

pub fn actor_from_checkpoint(ck: &Checkpoint) -> Result<Actor> {
    Actor::from_net(ck.network("actor")?.clone(), ck.vector("obs_scale")?.to_vec(), ck.vector("a_max")?[0])
}
