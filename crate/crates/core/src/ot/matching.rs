use crate::error::{invalid, Result};

use super::{check_finite, stable_argsort};

/// Optimal coupling between two 1-D empirical distributions.
///
/// Stored sparsely: the north-west-corner rule on sorted marginals touches
/// at most N + M − 1 cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl MatchingMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Nonzero cells as `(row, col, mass)`, in scan order.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .iter()
            .filter(|&&(r, c, _)| r == i && c == j)
            .map(|&(_, _, w)| w)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for &(i, j, w) in &self.entries {
            dense[i][j] += w;
        }
        dense
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.rows];
        for &(i, _, w) in &self.entries {
            sums[i] += w;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for &(_, j, w) in &self.entries {
            sums[j] += w;
        }
        sums
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }
}

/// Walk the north-west-corner coupling of two sorted orders.
///
/// Each source point holds `m` units of mass and each target point `n`
/// units, so all bookkeeping is exact integer arithmetic; the visited mass
/// is `units / (n * m)`.
pub(crate) fn north_west(order_x: &[usize], order_y: &[usize], mut visit: impl FnMut(usize, usize, f64)) {
    let n = order_x.len() as u64;
    let m = order_y.len() as u64;
    let total = (n * m) as f64;
    let (mut a, mut b) = (0usize, 0usize);
    let (mut u, mut v) = (m, n);
    while a < order_x.len() && b < order_y.len() {
        let w = u.min(v);
        visit(order_x[a], order_y[b], w as f64 / total);
        u -= w;
        v -= w;
        if u == 0 {
            a += 1;
            u = m;
        }
        if v == 0 {
            b += 1;
            v = n;
        }
    }
}

fn check_line(xs: &[f64], name: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid(format!("{name} is empty")));
    }
    check_finite(xs)
}

/// North-west-corner coupling on sorted marginals (1/N each row, 1/M each
/// column). Optimal for any convex cost of |x − y|.
pub fn matching_matrix(xs: &[f64], ys: &[f64]) -> Result<MatchingMatrix> {
    check_line(xs, "xs")?;
    check_line(ys, "ys")?;
    let mut entries = Vec::with_capacity(xs.len() + ys.len());
    north_west(&stable_argsort(xs), &stable_argsort(ys), |i, j, w| {
        entries.push((i, j, w))
    });
    Ok(MatchingMatrix {
        rows: xs.len(),
        cols: ys.len(),
        entries,
    })
}

/// Exact 1-D transport cost with cost |x − y|^p.
///
/// Equal sizes pair the sorted lists; unequal sizes go through
/// [`matching_matrix`]. For p ≠ 1 this is W_p^p (no root is taken).
pub fn wd_1d(xs: &[f64], ys: &[f64], p: f64) -> Result<f64> {
    check_line(xs, "xs")?;
    check_line(ys, "ys")?;
    if !(p.is_finite() && p > 0.0) {
        return Err(invalid(format!("cost exponent must be positive, got {p}")));
    }
    let cost = |d: f64| if p == 1.0 { d.abs() } else { d.abs().powf(p) };
    if xs.len() == ys.len() {
        let mut a = xs.to_vec();
        let mut b = ys.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let sum: f64 = a.iter().zip(&b).map(|(x, y)| cost(x - y)).sum();
        return Ok(sum / xs.len() as f64);
    }
    let plan = matching_matrix(xs, ys)?;
    Ok(plan
        .entries()
        .iter()
        .map(|&(i, j, w)| w * cost(xs[i] - ys[j]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn wd_1d_examples() {
        // both 2-permutations: |0-2|+|1-3| = 4, |0-3|+|1-2| = 4 -> 2.0
        assert!(close(wd_1d(&[0.0, 1.0], &[2.0, 3.0], 1.0).unwrap(), 2.0));
        assert_eq!(wd_1d(&[5.0, 1.0, 3.0], &[1.0, 3.0, 5.0], 1.0).unwrap(), 0.0);
        // duplicated: [0,0] vs [0,2] -> (0 + 2) / 2
        assert!(close(wd_1d(&[0.0], &[0.0, 2.0], 1.0).unwrap(), 1.0));
        assert!(close(wd_1d(&[0.0], &[0.0, 2.0], 2.0).unwrap(), 2.0));
    }

    #[test]
    fn wd_1d_errors() {
        assert!(wd_1d(&[], &[1.0], 1.0).is_err());
        assert!(wd_1d(&[1.0], &[], 1.0).is_err());
        assert!(wd_1d(&[f64::NAN], &[1.0], 1.0).is_err());
        assert!(wd_1d(&[1.0], &[f64::INFINITY], 1.0).is_err());
        assert!(wd_1d(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn matching_examples() {
        let p = matching_matrix(&[0.0, 1.0], &[0.0, 1.0]).unwrap().to_dense();
        assert_eq!(p, vec![vec![0.5, 0.0], vec![0.0, 0.5]]);

        let p = matching_matrix(&[0.0, 1.0], &[0.0, 1.0, 2.0]).unwrap().to_dense();
        let expect = [[1.0 / 3.0, 1.0 / 6.0, 0.0], [0.0, 1.0 / 6.0, 1.0 / 3.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert!(close(p[i][j], expect[i][j]), "{i},{j}: {}", p[i][j]);
            }
        }

        let p = matching_matrix(&[3.0, 0.0], &[1.0, 2.0]).unwrap().to_dense();
        assert_eq!(p, vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert!(matching_matrix(&[], &[1.0]).is_err());
    }

    #[test]
    fn equal_sizes_give_a_permutation() {
        let plan = matching_matrix(&[4.0, 2.0, 9.0, 2.0], &[1.0, 1.0, 0.0, 7.0]).unwrap();
        assert_eq!(plan.entries().len(), 4);
        assert!(plan.entries().iter().all(|e| e.2 == 0.25));
    }

    #[test]
    fn ties_break_by_original_index() {
        let plan = matching_matrix(&[1.0, 1.0], &[5.0, 6.0]).unwrap();
        assert_eq!(plan.entries()[0].0, 0);
        assert_eq!(plan.entries()[0].1, 0);
    }

    proptest! {
        #[test]
        fn marginals_hold(
            xs in prop::collection::vec(-100.0f64..100.0, 1..20),
            ys in prop::collection::vec(-100.0f64..100.0, 1..20),
        ) {
            let plan = matching_matrix(&xs, &ys).unwrap();
            for s in plan.row_sums() {
                prop_assert!((s - 1.0 / xs.len() as f64).abs() < 1e-9);
            }
            for s in plan.col_sums() {
                prop_assert!((s - 1.0 / ys.len() as f64).abs() < 1e-9);
            }
            prop_assert!((plan.total_mass() - 1.0).abs() < 1e-9);
            prop_assert!(plan.entries().len() < xs.len() + ys.len());
        }

        #[test]
        fn unequal_route_agrees_with_duplication(
            xs in prop::collection::vec(-10.0f64..10.0, 1..6),
            ys in prop::collection::vec(-10.0f64..10.0, 1..6),
        ) {
            // replicate each x M times and each y N times; equal-size sort path
            let dx: Vec<f64> = xs.iter().flat_map(|&x| std::iter::repeat_n(x, ys.len())).collect();
            let dy: Vec<f64> = ys.iter().flat_map(|&y| std::iter::repeat_n(y, xs.len())).collect();
            let direct = wd_1d(&dx, &dy, 1.0).unwrap();
            let plan = matching_matrix(&xs, &ys).unwrap();
            let via_plan: f64 = plan.entries().iter().map(|&(i, j, w)| w * (xs[i] - ys[j]).abs()).sum();
            prop_assert!((direct - via_plan).abs() < 1e-9);
        }
    }
}
