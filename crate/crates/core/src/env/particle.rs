use crate::error::{invalid, Error, Result};

use super::config::EnvConfig;

/// Layout of a state vector: position then velocity.
pub const STATE_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParticleState {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

impl ParticleState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        if s.len() != STATE_DIM {
            return Err(invalid(format!("state has {} entries, expected {STATE_DIM}", s.len())));
        }
        Ok(Self {
            pos: [s[0], s[1]],
            vel: [s[2], s[3]],
        })
    }

    pub fn speed(&self) -> f64 {
        self.vel[0].hypot(self.vel[1])
    }

    pub fn distance_from_origin(&self) -> f64 {
        self.pos[0].hypot(self.pos[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ParticleEnv {
    cfg: EnvConfig,
    state: ParticleState,
    t: usize,
    goal_index: usize,
    done: bool,
}

fn closest_on_segment(p: [f64; 2], w: &[[f64; 2]; 2]) -> [f64; 2] {
    let [a, b] = *w;
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl ParticleEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let env = Self {
            cfg,
            state: ParticleState::default(),
            t: 0,
            goal_index: 0,
            done: false,
        };
        if env.in_wall(env.state.pos) {
            return Err(invalid("spawn point lies inside a wall"));
        }
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> ParticleState {
        self.state
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn goal_index(&self) -> usize {
        self.goal_index
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset(&mut self) -> ParticleState {
        self.state = ParticleState::default();
        self.t = 0;
        self.goal_index = 0;
        self.done = false;
        self.state
    }

    /// Distance from `p` to the nearest wall surface; negative inside.
    pub fn wall_clearance(&self, p: [f64; 2]) -> f64 {
        self.cfg
            .walls
            .iter()
            .map(|w| dist(p, closest_on_segment(p, w)) - self.cfg.wall_half_width)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_wall(&self, p: [f64; 2]) -> bool {
        self.wall_clearance(p) < -1e-9
    }

    pub fn in_bounds(&self, p: [f64; 2]) -> bool {
        p.iter().all(|v| v.abs() <= self.cfg.half_extent + 1e-12)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        if self.done {
            return Err(Error::State("step called on a finished episode".into()));
        }
        if action.len() != 2 || action.iter().any(|a| !a.is_finite()) {
            return Err(invalid(format!("action must be two finite numbers, got {action:?}")));
        }
        let before = self.state;
        let (a_max, v_max, dt) = (self.cfg.a_max, self.cfg.v_max, self.cfg.dt);
        let a = [action[0].clamp(-a_max, a_max), action[1].clamp(-a_max, a_max)];
        let mut vel = [before.vel[0] + a[0] * dt, before.vel[1] + a[1] * dt];
        let speed = vel[0].hypot(vel[1]);
        if speed > v_max {
            vel = [vel[0] * v_max / speed, vel[1] * v_max / speed];
        }

        // Sub-steps no longer than half a wall's half-width keep the
        // particle from skipping over a wall.
        let travel = speed.min(v_max) * dt;
        let n = ((travel / (0.5 * self.cfg.wall_half_width)).ceil() as usize).max(1);
        let mut pos = before.pos;
        for _ in 0..n {
            let prev = pos;
            pos = [pos[0] + vel[0] * dt / n as f64, pos[1] + vel[1] * dt / n as f64];
            self.resolve_collisions(&mut pos, &mut vel, prev);
        }
        self.state = ParticleState { pos, vel };
        self.t += 1;

        let mut reward = 0.0;
        let mut finished = false;
        if let Some(task) = &self.cfg.task {
            reward -= task.step_penalty;
            if let Some(goal) = task.goals.get(self.goal_index) {
                if dist(pos, *goal) <= task.goal_radius {
                    reward += task.goal_reward;
                    self.goal_index += 1;
                }
            }
            finished = self.goal_index == task.goals.len();
        }
        self.done = finished || self.t >= self.cfg.horizon;
        Ok(Transition {
            state: before.to_vec(),
            action: a.to_vec(),
            next_state: self.state.to_vec(),
            reward,
            done: self.done,
        })
    }

    /// Push the point out of walls and the arena boundary, removing the
    /// velocity component that points into whatever it hit.
    fn resolve_collisions(&self, pos: &mut [f64; 2], vel: &mut [f64; 2], prev: [f64; 2]) {
        let e = self.cfg.half_extent;
        let hw = self.cfg.wall_half_width;
        for _ in 0..8 {
            let mut moved = false;
            for k in 0..2 {
                if pos[k] > e {
                    pos[k] = e;
                    vel[k] = vel[k].min(0.0);
                    moved = true;
                } else if pos[k] < -e {
                    pos[k] = -e;
                    vel[k] = vel[k].max(0.0);
                    moved = true;
                }
            }
            for w in &self.cfg.walls {
                let c = closest_on_segment(*pos, w);
                let d = dist(*pos, c);
                if d >= hw {
                    continue;
                }
                let mut normal = if d > 1e-12 {
                    [(pos[0] - c[0]) / d, (pos[1] - c[1]) / d]
                } else {
                    let cp = closest_on_segment(prev, w);
                    let dp = dist(prev, cp);
                    if dp > 1e-12 {
                        [(prev[0] - cp[0]) / dp, (prev[1] - cp[1]) / dp]
                    } else {
                        let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
                        let l = dx.hypot(dy).max(1e-300);
                        [-dy / l, dx / l]
                    }
                };
                if !(normal[0].is_finite() && normal[1].is_finite()) {
                    normal = [1.0, 0.0];
                }
                *pos = [c[0] + normal[0] * hw, c[1] + normal[1] * hw];
                let vn = vel[0] * normal[0] + vel[1] * normal[1];
                if vn < 0.0 {
                    vel[0] -= vn * normal[0];
                    vel[1] -= vn * normal[1];
                }
                moved = true;
            }
            if !moved {
                break;
            }
        }
    }
}
