use std::collections::VecDeque;

use rand::Rng as _;

use crate::error::{invalid, Result};
use crate::ot::StateBatch;
use crate::rng::Rng;

/// Per-policy archives of recent episode states, plus an audit trail of
/// every (acting, target) draw.
#[derive(Debug, Clone)]
pub struct TargetSampler {
    archives: Vec<VecDeque<StateBatch>>,
    /// Frozen archives are fixed and never trimmed.
    fixed: Vec<bool>,
    recent: usize,
    batch: usize,
    audit: Vec<(usize, usize)>,
}

impl TargetSampler {
    pub fn new(policies: usize, recent: usize, batch: usize) -> Self {
        Self {
            archives: vec![VecDeque::new(); policies],
            fixed: vec![false; policies],
            recent,
            batch,
            audit: Vec::new(),
        }
    }

    pub fn policies(&self) -> usize {
        self.archives.len()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Install a frozen policy's archive; it is kept whole.
    pub fn set_fixed(&mut self, policy: usize, episodes: Vec<StateBatch>) -> Result<()> {
        if episodes.is_empty() || episodes.iter().any(StateBatch::is_empty) {
            return Err(invalid(format!("frozen policy {policy} has an empty archive")));
        }
        self.archives[policy] = episodes.into();
        self.fixed[policy] = true;
        Ok(())
    }

    pub fn record(&mut self, policy: usize, states: StateBatch) {
        if self.fixed[policy] {
            return;
        }
        let a = &mut self.archives[policy];
        a.push_back(states);
        while a.len() > self.recent {
            a.pop_front();
        }
    }

    pub fn has_states(&self, policy: usize) -> bool {
        !self.archives[policy].is_empty()
    }

    pub fn archive(&self, policy: usize) -> impl Iterator<Item = &StateBatch> {
        self.archives[policy].iter()
    }

    /// Policies other than `acting` that have something to sample.
    pub fn candidates(&self, acting: usize) -> Vec<usize> {
        (0..self.policies()).filter(|&j| j != acting && self.has_states(j)).collect()
    }

    /// `batch` states drawn uniformly with replacement from the pooled
    /// archive of `target`, restricted to `columns`.
    pub fn sample(&mut self, acting: usize, target: usize, columns: &[usize], rng: &mut Rng) -> Result<StateBatch> {
        if acting == target {
            return Err(invalid("a policy cannot be its own target"));
        }
        let a = &self.archives[target];
        let total: usize = a.iter().map(StateBatch::len).sum();
        if total == 0 {
            return Err(invalid(format!("policy {target} has no archived states")));
        }
        self.audit.push((acting, target));
        let mut rows = Vec::with_capacity(self.batch * columns.len());
        for _ in 0..self.batch {
            let mut k = rng.random_range(0..total);
            for ep in a {
                if k < ep.len() {
                    let p = ep.point(k);
                    rows.extend(columns.iter().map(|&c| p[c]));
                    break;
                }
                k -= ep.len();
            }
        }
        StateBatch::from_flat(columns.len(), rows)
    }

    pub fn audit(&self) -> &[(usize, usize)] {
        &self.audit
    }
}
