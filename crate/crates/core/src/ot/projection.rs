use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::rng::Rng;

use super::matching::north_west;
use super::{stable_argsort, wd_1d, GroundCost, StateBatch};

/// Unit vector on S^{d−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(invalid("direction must be a finite nonzero vector"));
        }
        Ok(Self(v.into_iter().map(|x| x / norm).collect()))
    }

    /// Uniform on the sphere: a normalized standard-normal draw.
    pub fn sample(dim: usize, rng: &mut Rng) -> Self {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            if let Ok(d) = Self::new(v) {
                return d;
            }
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn sample_directions(dim: usize, k: usize, rng: &mut Rng) -> Vec<Direction> {
    (0..k).map(|_| Direction::sample(dim, rng)).collect()
}

/// Per-sample credits of a source batch; they sum to the distance estimate
/// they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector(Vec<f64>);

impl RewardVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|r| r * factor).collect())
    }
}

fn check_pair(a: &StateBatch, b: &StateBatch, dirs: &[Direction]) -> Result<()> {
    a.check_dim(b.dim())?;
    if dirs.is_empty() {
        return Err(invalid("need at least one projection direction"));
    }
    if let Some(d) = dirs.iter().find(|d| d.dim() != a.dim()) {
        return Err(invalid(format!(
            "direction has dimension {}, batches have {}",
            d.dim(),
            a.dim()
        )));
    }
    Ok(())
}

/// Mean over `dirs` of the 1-D distance between the projected batches.
pub fn sliced_wd_with(a: &StateBatch, b: &StateBatch, dirs: &[Direction]) -> Result<f64> {
    check_pair(a, b, dirs)?;
    let mut total = 0.0;
    for v in dirs {
        total += wd_1d(&a.project(v.as_slice()), &b.project(v.as_slice()), 1.0)?;
    }
    Ok(total / dirs.len() as f64)
}

pub fn sliced_wd(a: &StateBatch, b: &StateBatch, k: usize, rng: &mut Rng) -> Result<f64> {
    a.check_dim(b.dim())?;
    sliced_wd_with(a, b, &sample_directions(a.dim(), k, rng))
}

/// Visit the coupling induced by each direction, with the cost paid in the
/// original space.
fn for_each_projected_cell(
    a: &StateBatch,
    b: &StateBatch,
    dirs: &[Direction],
    cost: GroundCost,
    mut visit: impl FnMut(usize, f64),
) {
    for v in dirs {
        let oa = stable_argsort(&a.project(v.as_slice()));
        let ob = stable_argsort(&b.project(v.as_slice()));
        north_west(&oa, &ob, |i, j, w| visit(i, w * cost.eval(a.point(i), b.point(j))));
    }
}

/// Projected Wasserstein distance: couplings from 1-D projections, costs in R^d.
pub fn projected_wd_with(
    a: &StateBatch,
    b: &StateBatch,
    dirs: &[Direction],
    cost: GroundCost,
) -> Result<f64> {
    check_pair(a, b, dirs)?;
    let mut total = 0.0;
    for_each_projected_cell(a, b, dirs, cost, |_, c| total += c);
    Ok(total / dirs.len() as f64)
}

pub fn projected_wd(a: &StateBatch, b: &StateBatch, k: usize, rng: &mut Rng) -> Result<f64> {
    a.check_dim(b.dim())?;
    projected_wd_with(a, b, &sample_directions(a.dim(), k, rng), GroundCost::EUCLIDEAN)
}

/// Row-wise coupling-weighted cost r_i = mean_k Σ_j P⁽ᵏ⁾_ij C_ij.
///
/// Σ_i r_i equals [`projected_wd_with`] on the same directions.
pub fn amortized_rewards_with(
    source: &StateBatch,
    target: &StateBatch,
    dirs: &[Direction],
    cost: GroundCost,
) -> Result<RewardVector> {
    check_pair(source, target, dirs)?;
    let mut credits = vec![0.0; source.len()];
    for_each_projected_cell(source, target, dirs, cost, |i, c| credits[i] += c);
    let k = dirs.len() as f64;
    credits.iter_mut().for_each(|r| *r /= k);
    Ok(RewardVector(credits))
}

pub fn amortized_rewards(
    source: &StateBatch,
    target: &StateBatch,
    k: usize,
    rng: &mut Rng,
) -> Result<RewardVector> {
    source.check_dim(target.dim())?;
    let dirs = sample_directions(source.dim(), k, rng);
    amortized_rewards_with(source, target, &dirs, GroundCost::EUCLIDEAN)
}
