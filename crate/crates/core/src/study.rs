//! Estimator comparison on pairs of Gaussian clouds: the two dual
//! estimators against the sliced and projected primal ones, with
//! estimate spread and wall-clock cost per method.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dual::{DualConfig, DualMode, TestFunctionPair};
use crate::error::{invalid, Result};
use crate::ot::{projected_wd, sliced_wd, StateBatch};
use crate::rng::{Rng, SeedTree};

pub const METHODS: [&str; 4] = ["tf1", "tf2", "swd", "pwd"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub dim: usize,
    /// Distance between the two means; this is also the true W1 since
    /// both clouds are unit Gaussians.
    pub separations: Vec<f64>,
    pub samples: usize,
    /// Fresh sample draws per separation for the primal estimators.
    pub repeats: usize,
    /// The dual estimators train on the first `dual_repeats` draws only.
    pub dual_repeats: usize,
    pub projections: usize,
    pub dual_steps: usize,
    pub dual: DualConfig,
    /// Trailing fraction of dual steps whose objectives are averaged.
    pub tail_fraction: f64,
    /// Skip the dual estimators (they dominate the runtime).
    pub primal_only: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            separations: vec![2.0, 16.0, 64.0],
            samples: 256,
            repeats: 100,
            dual_repeats: 3,
            projections: 16,
            dual_steps: 2000,
            dual: DualConfig::default(),
            tail_fraction: 0.1,
            primal_only: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.samples == 0 || self.repeats == 0 || self.projections == 0 {
            return Err(invalid("dim, samples, repeats and projections must be positive"));
        }
        if self.separations.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("separations must be finite and non-negative"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(invalid("tail_fraction must lie in (0, 1]"));
        }
        if !self.primal_only && self.dual_steps == 0 {
            return Err(invalid("dual_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub separation: f64,
    pub method: String,
    pub mean: f64,
    pub std: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn get(&self, method: &str, separation: f64) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.method == method && r.separation == separation)
    }

    /// Fixed-width table, one row per (separation, method). Timings are
    /// left out so that reruns compare byte for byte.
    pub fn to_text(&self) -> String {
        let mut out = String::from("separation method mean std\n");
        for r in &self.rows {
            out.push_str(&format!("{} {} {:.6} {:.6}\n", r.separation, r.method, r.mean, r.std));
        }
        out
    }
}

/// X ~ N(0, I) and Y ~ N(separation·e₁, I), `n` points each.
pub fn gaussian_pair(dim: usize, separation: f64, n: usize, rng: &mut Rng) -> Result<(StateBatch, StateBatch)> {
    let mut draw = |shift: f64| {
        let data: Vec<f64> = (0..n * dim)
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                if i % dim == 0 { z + shift } else { z }
            })
            .collect();
        StateBatch::from_flat(dim, data)
    };
    let x = draw(0.0)?;
    let y = draw(separation)?;
    Ok((x, y))
}

/// Train a dual estimator on the full samples and average the objective
/// over the trailing steps. TF2's objective sits β below the smoothed
/// distance at its optimum, so β is added back.
fn dual_estimate(mode: DualMode, x: &StateBatch, y: &StateBatch, cfg: &StudyConfig, rng: &mut Rng) -> Result<f64> {
    let mut est = TestFunctionPair::new(mode, x.dim(), &cfg.dual, rng)?;
    let tail = ((cfg.dual_steps as f64 * cfg.tail_fraction).ceil() as usize).max(1);
    let mut acc = 0.0;
    for step in 0..cfg.dual_steps {
        let obj = est.update(x, y, cfg.dual.step_size, rng)?;
        if step >= cfg.dual_steps - tail {
            acc += obj;
        }
    }
    let mean = acc / tail as f64;
    Ok(match mode {
        // the objective is E f(X) − E f(Y); report it as a distance
        DualMode::Tf1 => mean.abs(),
        DualMode::Tf2 => mean + est.beta(),
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn run_study(cfg: &StudyConfig, seed: u64) -> Result<StudyReport> {
    cfg.validate()?;
    let tree = SeedTree::new(seed).child("study");
    let mut rows = Vec::new();
    for (si, &sep) in cfg.separations.iter().enumerate() {
        let node = tree.index(si as u64);
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); METHODS.len()];
        let mut times = vec![0.0; METHODS.len()];
        let mut runs = vec![0usize; METHODS.len()];
        for r in 0..cfg.repeats {
            let rep = node.index(r as u64);
            let (x, y) = gaussian_pair(cfg.dim, sep, cfg.samples, &mut rep.child("samples").rng())?;
            for (mi, &method) in METHODS.iter().enumerate() {
                if mi < 2 && (cfg.primal_only || r >= cfg.dual_repeats) {
                    continue;
                }
                let mut rng = rep.child(method).rng();
                let t0 = Instant::now();
                let v = match method {
                    "tf1" => dual_estimate(DualMode::Tf1, &x, &y, cfg, &mut rng)?,
                    "tf2" => dual_estimate(DualMode::Tf2, &x, &y, cfg, &mut rng)?,
                    "swd" => sliced_wd(&x, &y, cfg.projections, &mut rng)?,
                    _ => projected_wd(&x, &y, cfg.projections, &mut rng)?,
                };
                times[mi] += t0.elapsed().as_secs_f64();
                values[mi].push(v);
                runs[mi] += 1;
            }
        }
        for (mi, &method) in METHODS.iter().enumerate() {
            if values[mi].is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&values[mi]);
            rows.push(StudyRow {
                separation: sep,
                method: method.to_string(),
                mean,
                std,
                seconds: times[mi] / runs[mi] as f64,
            });
        }
    }
    Ok(StudyReport { rows })
}
