use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;

use crate::error::{invalid, Result};
use crate::ot::StateBatch;
use crate::rng::Rng;

use super::particle::{ParticleEnv, ParticleState, Transition, ACTION_DIM, STATE_DIM};

/// Anything that maps a raw state vector to an acceleration.
pub trait Policy {
    fn act(&mut self, state: &[f64], rng: &mut Rng) -> Result<Vec<f64>>;
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn act(&mut self, state: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        (**self).act(state, rng)
    }
}

/// Always outputs zero acceleration.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&mut self, _state: &[f64], _rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(vec![0.0; ACTION_DIM])
    }
}

/// Uniform random accelerations in [-a_max, a_max]².
#[derive(Debug, Clone, Copy)]
pub struct RandomPolicy {
    pub a_max: f64,
}

impl Policy for RandomPolicy {
    fn act(&mut self, _state: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        Ok((0..ACTION_DIM)
            .map(|_| rng.random_range(-self.a_max..=self.a_max))
            .collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Visited states (the post-step state of every transition).
    pub fn states(&self) -> Result<StateBatch> {
        if self.is_empty() {
            return Err(invalid("episode has no transitions"));
        }
        let flat = self.transitions.iter().flat_map(|t| t.next_state.iter().copied()).collect();
        StateBatch::from_flat(STATE_DIM, flat)
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn final_state(&self) -> Option<ParticleState> {
        self.transitions
            .last()
            .map(|t| ParticleState::from_slice(&t.next_state).expect("transition states have fixed width"))
    }

    /// One line per step: `step x y vx vy reward`.
    pub fn to_records(&self) -> String {
        let mut out = String::from("# step x y vx vy reward\n");
        for (i, t) in self.transitions.iter().enumerate() {
            let s = &t.next_state;
            writeln!(out, "{} {:?} {:?} {:?} {:?} {:?}", i + 1, s[0], s[1], s[2], s[3], t.reward).unwrap();
        }
        out
    }

    pub fn write_records(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_records())?;
        Ok(())
    }
}

/// Run one episode from the spawn point for at most `horizon` steps.
pub fn rollout<P: Policy + ?Sized>(
    env: &mut ParticleEnv,
    policy: &mut P,
    horizon: usize,
    rng: &mut Rng,
) -> Result<Episode> {
    env.reset();
    let mut transitions = Vec::with_capacity(horizon.min(env.config().horizon));
    while transitions.len() < horizon && !env.is_done() {
        let s = env.state().to_vec();
        let a = policy.act(&s, rng)?;
        transitions.push(env.step(&a)?);
    }
    Ok(Episode { transitions })
}
