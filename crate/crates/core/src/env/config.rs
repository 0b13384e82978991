use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A wall is a capsule: the segment between two endpoints, thickened by
/// the config's `wall_half_width` on every side.
pub type Wall = [[f64; 2]; 2];

/// Ordered-goal navigation task layered on top of an arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavTask {
    /// Goals in the order they must be reached.
    pub goals: Vec<[f64; 2]>,
    pub goal_radius: f64,
    pub goal_reward: f64,
    /// Subtracted from the reward on every step.
    pub step_penalty: f64,
}

impl Default for NavTask {
    fn default() -> Self {
        Self {
            goals: vec![[6.0, 0.0], [6.0, 6.0], [0.0, 6.0]],
            goal_radius: 1.0,
            goal_reward: 50.0,
            step_penalty: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub name: String,
    /// The arena is the square [-half_extent, half_extent]².
    pub half_extent: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub dt: f64,
    pub horizon: usize,
    pub walls: Vec<Wall>,
    pub wall_half_width: f64,
    /// `None` is the reward-free setting used for skill discovery.
    pub task: Option<NavTask>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::free_run()
    }
}

impl EnvConfig {
    pub fn free_run() -> Self {
        Self {
            name: "free_run".into(),
            half_extent: 10.0,
            v_max: 0.5,
            a_max: 0.05,
            dt: 1.0,
            horizon: 20,
            walls: Vec::new(),
            wall_half_width: 0.25,
            task: None,
        }
    }

    /// H-shaped corridors: a horizontal trunk through the spawn point
    /// splits into a left and a right branch, each of which splits again
    /// into an upper and a lower leaf.
    pub fn tree_maze() -> Self {
        let outline: [[f64; 2]; 12] = [
            [-4.0, 4.0],
            [-2.4, 4.0],
            [-2.4, 0.8],
            [2.4, 0.8],
            [2.4, 4.0],
            [4.0, 4.0],
            [4.0, -4.0],
            [2.4, -4.0],
            [2.4, -0.8],
            [-2.4, -0.8],
            [-2.4, -4.0],
            [-4.0, -4.0],
        ];
        let walls = (0..outline.len())
            .map(|i| [outline[i], outline[(i + 1) % outline.len()]])
            .collect();
        Self {
            name: "tree_maze".into(),
            walls,
            ..Self::free_run()
        }
    }

    /// FreeRun with the canonical three-goal navigation task and a longer
    /// horizon for hierarchical control.
    pub fn navigation() -> Self {
        Self {
            name: "free_run_navigation".into(),
            horizon: 100,
            task: Some(NavTask::default()),
            ..Self::free_run()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.half_extent, "half_extent")?;
        positive(self.v_max, "v_max")?;
        positive(self.a_max, "a_max")?;
        positive(self.dt, "dt")?;
        positive(self.wall_half_width, "wall_half_width")?;
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        for w in &self.walls {
            if w.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid("wall endpoints must be finite"));
            }
        }
        if let Some(task) = &self.task {
            positive(task.goal_radius, "goal_radius")?;
            if task.goals.is_empty() {
                return Err(invalid("navigation task needs at least one goal"));
            }
            for g in &task.goals {
                if g.iter().any(|v| !v.is_finite() || v.abs() > self.half_extent) {
                    return Err(invalid(format!("goal {g:?} lies outside the arena")));
                }
            }
            if !(task.step_penalty >= 0.0) {
                return Err(invalid("step_penalty must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("env config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
