use crate::error::{invalid, Result};

use super::{GroundCost, StateBatch};

/// Largest batch the exact oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 10;

/// Exact Wasserstein distance between two equal-size batches under the
/// Euclidean cost.
///
/// With uniform weights and equal sizes an optimal coupling is a
/// permutation (Birkhoff), so this is a minimum-cost assignment, solved by
/// dynamic programming over subsets of the target batch.
pub fn exact_wd_oracle(a: &StateBatch, b: &StateBatch) -> Result<f64> {
    a.check_dim(b.dim())?;
    let n = a.len();
    if n != b.len() {
        return Err(invalid(format!("oracle needs equal sizes, got {n} and {}", b.len())));
    }
    if n > ORACLE_MAX_POINTS {
        return Err(invalid(format!("oracle limited to {ORACLE_MAX_POINTS} points, got {n}")));
    }
    let cost: Vec<Vec<f64>> = a
        .points()
        .map(|x| b.points().map(|y| GroundCost::EUCLIDEAN.eval(x, y)).collect())
        .collect();
    // best[mask]: cheapest assignment of the first popcount(mask) sources onto `mask`
    let mut best = vec![f64::INFINITY; 1 << n];
    best[0] = 0.0;
    for mask in 0usize..(1 << n) {
        let here = best[mask];
        if here.is_infinite() {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == n {
            continue;
        }
        for (j, &c) in cost[i].iter().enumerate() {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                best[next] = best[next].min(here + c);
            }
        }
    }
    Ok(best[(1 << n) - 1] / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        let a = StateBatch::new(&[vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(exact_wd_oracle(&a, &a).unwrap(), 0.0);
        let p = StateBatch::new(&[vec![0.0, 0.0]]).unwrap();
        let q = StateBatch::new(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(exact_wd_oracle(&p, &q).unwrap(), 5.0);
        let s = StateBatch::new(&[vec![0.0], vec![1.0]]).unwrap();
        let t = StateBatch::new(&[vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(exact_wd_oracle(&s, &t).unwrap(), 2.0);
    }

    #[test]
    fn oracle_limits() {
        let big = StateBatch::from_scalars(&[0.0; 11]).unwrap();
        assert!(exact_wd_oracle(&big, &big).is_err());
        let s = StateBatch::from_scalars(&[0.0, 1.0]).unwrap();
        let t = StateBatch::from_scalars(&[0.0]).unwrap();
        assert!(exact_wd_oracle(&s, &t).is_err());
    }
}
