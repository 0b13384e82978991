use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::{log_softmax_rows, Adam, Mlp, OutputHead};
use crate::rng::Rng;
use crate::sac::critic_loss_and_grad;

use super::menv::MetaEnv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub hidden: usize,
    pub depth: usize,
    pub lr: f64,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub episodes_per_iter: usize,
    pub entropy_coef: f64,
    /// Rewards are multiplied by this before value fitting.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            depth: 2,
            lr: 3e-4,
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            epochs: 10,
            minibatch: 32,
            episodes_per_iter: 8,
            entropy_coef: 0.01,
            reward_scale: 0.01,
        }
    }
}

/// Categorical policy over sub-policy indices with a separate value net.
#[derive(Debug, Clone)]
pub struct MetaPolicy {
    pub policy: Mlp,
    pub value: Mlp,
    obs_scale: Vec<f64>,
    cfg: PpoConfig,
    opt_pi: Adam,
    opt_v: Adam,
}

/// Mean and spread of episode returns after one training iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

#[derive(Debug, Clone, Default)]
struct Rollouts {
    obs: Vec<Vec<f64>>,
    actions: Vec<usize>,
    log_probs: Vec<f64>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
    episode_returns: Vec<f64>,
}

/// Clipped surrogate loss (negated, to be minimized) with an entropy
/// bonus, and its gradient in the policy parameters.
pub fn ppo_policy_loss_and_grad(
    net: &Mlp,
    obs: &Array2<f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = obs.nrows();
    if actions.len() != n || old_log_probs.len() != n || advantages.len() != n {
        return Err(invalid("PPO batch fields disagree in length"));
    }
    let (logits, tape) = net.forward_tape(obs)?;
    let logp = log_softmax_rows(&logits);
    let k = logits.ncols();
    let nf = n as f64;
    let mut loss = 0.0;
    let mut g = Array2::zeros((n, k));
    for i in 0..n {
        let a = actions[i];
        if a >= k {
            return Err(invalid("action index out of range"));
        }
        let ratio = (logp[[i, a]] - old_log_probs[i]).exp();
        let adv = advantages[i];
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
        loss -= unclipped.min(clipped) / nf;
        let active = unclipped <= clipped || (1.0 - clip..=1.0 + clip).contains(&ratio);
        let p: Vec<f64> = (0..k).map(|j| logp[[i, j]].exp()).collect();
        if active {
            for j in 0..k {
                let onehot = if j == a { 1.0 } else { 0.0 };
                g[[i, j]] -= adv * ratio * (onehot - p[j]) / nf;
            }
        }
        let entropy: f64 = -(0..k).map(|j| p[j] * logp[[i, j]]).sum::<f64>();
        loss -= entropy_coef * entropy / nf;
        for j in 0..k {
            // dH/dz_j = −p_j (log p_j + H)
            g[[i, j]] += entropy_coef * p[j] * (logp[[i, j]] + entropy) / nf;
        }
    }
    let (grad, _) = net.backward_tape(&tape, &g)?;
    Ok((loss, grad))
}

/// Generalized advantage estimates and value targets for one episode.
/// The episode is treated as ending after its last step.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

fn sizes(input: usize, output: usize, cfg: &PpoConfig) -> Vec<usize> {
    let mut s = vec![input];
    s.extend(std::iter::repeat_n(cfg.hidden, cfg.depth));
    s.push(output);
    s
}

impl MetaPolicy {
    pub fn new(obs_scale: Vec<f64>, choices: usize, cfg: PpoConfig, rng: &mut Rng) -> Result<Self> {
        if choices == 0 {
            return Err(invalid("meta-policy needs at least one choice"));
        }
        if !(cfg.clip > 0.0 && cfg.clip < 1.0) {
            return Err(invalid("clip ratio must lie in (0, 1)"));
        }
        if cfg.minibatch == 0 || cfg.episodes_per_iter == 0 {
            return Err(invalid("minibatch and episodes_per_iter must be positive"));
        }
        let d = obs_scale.len();
        let policy = Mlp::new(&sizes(d, choices, &cfg), OutputHead::Linear, rng)?;
        let value = Mlp::new(&sizes(d, 1, &cfg), OutputHead::Linear, rng)?;
        Ok(Self {
            opt_pi: Adam::new(policy.num_params(), cfg.lr),
            opt_v: Adam::new(value.num_params(), cfg.lr),
            policy,
            value,
            obs_scale,
            cfg,
        })
    }

    pub fn choices(&self) -> usize {
        self.policy.output_dim()
    }

    fn normalize(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(&self.obs_scale).map(|(v, k)| v / k).collect()
    }

    fn batch(&self, rows: &[Vec<f64>]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), self.obs_scale.len()), |(i, j)| rows[i][j] / self.obs_scale[j])
    }

    /// Log-probabilities of every choice at state `s`.
    pub fn log_probs(&self, s: &[f64]) -> Result<Vec<f64>> {
        let logits = self.policy.forward(&self.normalize(s))?;
        let row = Array2::from_shape_vec((1, logits.len()), logits).unwrap();
        Ok(log_softmax_rows(&row).into_raw_vec_and_offset().0)
    }

    /// Sampled choice, or the most likely one when `greedy`.
    pub fn choose(&self, s: &[f64], greedy: bool, rng: &mut Rng) -> Result<(usize, f64)> {
        let lp = self.log_probs(s)?;
        let pick = if greedy {
            (0..lp.len()).max_by(|&a, &b| lp[a].total_cmp(&lp[b])).unwrap()
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = lp.len() - 1;
            for (j, l) in lp.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    pick = j;
                    break;
                }
            }
            pick
        };
        Ok((pick, lp[pick]))
    }

    fn collect(&self, menv: &mut MetaEnv, rng: &mut Rng) -> Result<Rollouts> {
        let mut out = Rollouts::default();
        for _ in 0..self.cfg.episodes_per_iter {
            let mut s = menv.reset();
            let mut rewards = Vec::new();
            let mut values = Vec::new();
            let mut total = 0.0;
            loop {
                let (a, lp) = self.choose(&s, false, rng)?;
                values.push(self.value.forward(&self.normalize(&s))?[0]);
                let step = menv.meta_step(a, rng)?;
                out.obs.push(s);
                out.actions.push(a);
                out.log_probs.push(lp);
                rewards.push(step.reward * self.cfg.reward_scale);
                total += step.reward;
                s = step.obs;
                if step.done {
                    break;
                }
            }
            let (adv, ret) = gae(&rewards, &values, self.cfg.gamma, self.cfg.lambda);
            out.advantages.extend(adv);
            out.returns.extend(ret);
            out.episode_returns.push(total);
        }
        Ok(out)
    }

    fn update(&mut self, data: &Rollouts, rng: &mut Rng) -> Result<()> {
        let n = data.actions.len();
        let mean = data.advantages.iter().sum::<f64>() / n as f64;
        let var = data.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(1e-8);
        let adv: Vec<f64> = data.advantages.iter().map(|a| (a - mean) / std).collect();
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..self.cfg.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(self.cfg.minibatch) {
                let rows: Vec<Vec<f64>> = chunk.iter().map(|&i| data.obs[i].clone()).collect();
                let x = self.batch(&rows);
                let acts: Vec<usize> = chunk.iter().map(|&i| data.actions[i]).collect();
                let old: Vec<f64> = chunk.iter().map(|&i| data.log_probs[i]).collect();
                let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
                let ret: Vec<f64> = chunk.iter().map(|&i| data.returns[i]).collect();
                let (_, gp) =
                    ppo_policy_loss_and_grad(&self.policy, &x, &acts, &old, &a, self.cfg.clip, self.cfg.entropy_coef)?;
                self.opt_pi.step(self.policy.params_mut(), &gp)?;
                let (_, gv) = critic_loss_and_grad(&self.value, &x, &ret)?;
                self.opt_v.step(self.value.params_mut(), &gv)?;
            }
        }
        Ok(())
    }

    /// Alternate on-policy collection and clipped updates. Each curve
    /// point summarizes the returns collected at that iteration, before
    /// its update.
    pub fn train(&mut self, menv: &mut MetaEnv, iterations: usize, rng: &mut Rng) -> Result<Vec<CurvePoint>> {
        let mut curve = Vec::with_capacity(iterations);
        for iteration in 0..iterations {
            let data = self.collect(menv, rng)?;
            let (mean_return, std_return) = mean_std(&data.episode_returns);
            curve.push(CurvePoint {
                iteration,
                mean_return,
                std_return,
            });
            if self.choices() > 1 {
                self.update(&data, rng)?;
            }
        }
        Ok(curve)
    }

    /// Mean return of `episodes` episodes with greedy or sampled choices.
    pub fn evaluate(&self, menv: &mut MetaEnv, episodes: usize, greedy: bool, rng: &mut Rng) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..episodes {
            let mut s = menv.reset();
            loop {
                let (a, _) = self.choose(&s, greedy, rng)?;
                let step = menv.meta_step(a, rng)?;
                total += step.reward;
                s = step.obs;
                if step.done {
                    break;
                }
            }
        }
        Ok(total / episodes.max(1) as f64)
    }
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Returns of a meta-controller that picks sub-policies uniformly.
pub fn random_meta_returns(menv: &mut MetaEnv, episodes: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    (0..episodes)
        .map(|_| {
            menv.reset();
            let mut total = 0.0;
            loop {
                let choice = rng.random_range(0..menv.num_choices());
                let step = menv.meta_step(choice, rng)?;
                total += step.reward;
                if step.done {
                    return Ok(total);
                }
            }
        })
        .collect()
}
