//! Primal-form Wasserstein machinery.
//!
//! Everything here works on empirical distributions with uniform weights.
//! The one-dimensional problem is solved exactly by sorting; higher
//! dimensions are handled by projecting onto random unit directions and
//! either paying the cost on the line (sliced) or reusing the 1-D coupling
//! and paying the cost in the original space (projected).

mod batch;
mod matching;
mod oracle;
mod projection;

pub use batch::{CostMatrix, GroundCost, StateBatch};
pub use matching::{matching_matrix, wd_1d, MatchingMatrix};
pub use oracle::exact_wd_oracle;
pub use projection::{
    amortized_rewards, amortized_rewards_with, projected_wd, projected_wd_with,
    sample_directions, sliced_wd, sliced_wd_with, Direction, RewardVector,
};

use crate::error::{invalid, Result};

/// Distance from policy `i` to its nearest neighbour, given its distances to
/// every other policy.
pub fn min_pairwise_distance(estimates: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(invalid("need at least one other policy"));
    }
    check_finite(estimates)?;
    Ok(estimates.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Mean distance to the other policies; the ablation counterpart of
/// [`min_pairwise_distance`].
pub fn mean_pairwise_distance(estimates: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(invalid("need at least one other policy"));
    }
    check_finite(estimates)?;
    Ok(estimates.iter().sum::<f64>() / estimates.len() as f64)
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invalid(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

/// Indices that sort `values` ascending; ties keep their original order.
pub(crate) fn stable_argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_distance_examples() {
        assert_eq!(min_pairwise_distance(&[3.0, 1.2, 5.0]).unwrap(), 1.2);
        assert_eq!(min_pairwise_distance(&[0.0, 7.0]).unwrap(), 0.0);
        assert_eq!(min_pairwise_distance(&[4.2]).unwrap(), 4.2);
        assert!(min_pairwise_distance(&[]).is_err());
        assert!(min_pairwise_distance(&[f64::NAN]).is_err());
    }

    #[test]
    fn mean_distance() {
        assert_eq!(mean_pairwise_distance(&[1.0, 3.0]).unwrap(), 2.0);
        assert!(mean_pairwise_distance(&[]).is_err());
    }

    #[test]
    fn argsort_is_stable() {
        assert_eq!(stable_argsort(&[2.0, 1.0, 2.0, 1.0]), vec![1, 3, 0, 2]);
    }
}
