use crate::env::{EnvConfig, ParticleEnv, Policy};
use crate::error::{invalid, Result};
use crate::rng::Rng;
use crate::sac::Actor;

/// Outcome of running one sub-policy for a macro-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroStep {
    /// Base state after the macro-step.
    pub obs: Vec<f64>,
    /// Sum of the base rewards collected.
    pub reward: f64,
    pub done: bool,
    /// Base steps actually taken (fewer than H if the episode ended).
    pub steps: usize,
}

/// A navigation task seen through a set of frozen sub-policies, each
/// chosen for `h` base steps at a time.
#[derive(Debug, Clone)]
pub struct MetaEnv {
    env: ParticleEnv,
    subs: Vec<Actor>,
    h: usize,
}

impl MetaEnv {
    /// Sub-policies act deterministically.
    pub fn new(env: EnvConfig, subs: Vec<Actor>, h: usize) -> Result<Self> {
        if subs.is_empty() {
            return Err(invalid("meta environment needs at least one sub-policy"));
        }
        if h == 0 {
            return Err(invalid("macro horizon must be positive"));
        }
        let subs = subs
            .into_iter()
            .map(|mut a| {
                a.deterministic = true;
                a
            })
            .collect();
        Ok(Self {
            env: ParticleEnv::new(env)?,
            subs,
            h,
        })
    }

    pub fn num_choices(&self) -> usize {
        self.subs.len()
    }

    pub fn macro_horizon(&self) -> usize {
        self.h
    }

    pub fn base(&self) -> &ParticleEnv {
        &self.env
    }

    pub fn sub_policies(&self) -> &[Actor] {
        &self.subs
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.env.reset().to_vec()
    }

    /// Run sub-policy `choice` for up to H base steps.
    pub fn meta_step(&mut self, choice: usize, rng: &mut Rng) -> Result<MacroStep> {
        if choice >= self.subs.len() {
            return Err(invalid(format!("sub-policy {choice} does not exist ({} available)", self.subs.len())));
        }
        let sub = &mut self.subs[choice];
        let mut reward = 0.0;
        let mut steps = 0;
        while steps < self.h && !self.env.is_done() {
            let s = self.env.state().to_vec();
            let a = sub.act(&s, rng)?;
            reward += self.env.step(&a)?.reward;
            steps += 1;
        }
        Ok(MacroStep {
            obs: self.env.state().to_vec(),
            reward,
            done: self.env.is_done(),
            steps,
        })
    }
}
