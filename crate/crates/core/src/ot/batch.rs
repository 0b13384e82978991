use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A finite set of points in R^d, each carrying weight 1/len.
///
/// Stored row-major. Construction rejects empty sets, ragged rows and
/// non-finite coordinates, so downstream code can assume a valid batch.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBatch {
    dim: usize,
    data: Vec<f64>,
}

impl StateBatch {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let first = points.first().ok_or_else(|| invalid("empty batch"))?;
        let dim = first.len();
        let mut data = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(invalid(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if data.is_empty() {
            return Err(invalid("empty batch"));
        }
        if data.len() % dim != 0 {
            return Err(invalid("flat data length is not a multiple of the dimension"));
        }
        super::check_finite(&data)?;
        Ok(Self { dim, data })
    }

    /// One-dimensional batch from scalars.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::from_flat(1, xs.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn translated(&self, delta: &[f64]) -> Result<Self> {
        self.check_dim(delta.len())?;
        let data = self
            .points()
            .flat_map(|p| p.iter().zip(delta).map(|(x, d)| x + d))
            .collect();
        Self::from_flat(self.dim, data)
    }

    /// Keep only the listed coordinates, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.dim) {
            return Err(invalid(format!("column {c} out of range for dimension {}", self.dim)));
        }
        let data = self
            .points()
            .flat_map(|p| columns.iter().map(move |&c| p[c]))
            .collect();
        Self::from_flat(columns.len(), data)
    }

    /// Uniform mixture of several batches of equal dimension.
    pub fn pooled(batches: &[&StateBatch]) -> Result<Self> {
        let first = batches.first().ok_or_else(|| invalid("nothing to pool"))?;
        let mut data = Vec::new();
        for b in batches {
            first.check_dim(b.dim)?;
            data.extend_from_slice(&b.data);
        }
        Self::from_flat(first.dim, data)
    }

    /// Rows picked by index (repetition allowed).
    pub fn gather(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            if r >= self.len() {
                return Err(invalid(format!("row {r} out of range")));
            }
            data.extend_from_slice(self.point(r));
        }
        Self::from_flat(self.dim, data)
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.points()
            .map(|p| p.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub(crate) fn check_dim(&self, other: usize) -> Result<()> {
        if other != self.dim {
            return Err(invalid(format!(
                "dimension mismatch: {} vs {other}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Plain-text matrix, one point per row, whitespace separated. Values
    /// are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    /// Parse the [`to_text`](Self::to_text) format. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", n + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::new(&rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Ground cost c(x, y) = ‖x − y‖₂^exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundCost {
    pub exponent: f64,
}

impl Default for GroundCost {
    fn default() -> Self {
        Self::EUCLIDEAN
    }
}

impl GroundCost {
    pub const EUCLIDEAN: GroundCost = GroundCost { exponent: 1.0 };

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if self.exponent == 1.0 {
            sq.sqrt()
        } else if self.exponent == 2.0 {
            sq
        } else {
            sq.sqrt().powf(self.exponent)
        }
    }

    pub fn name(&self) -> String {
        if self.exponent == 1.0 {
            "euclidean".to_string()
        } else {
            format!("euclidean^{}", self.exponent)
        }
    }
}

/// Dense N×M matrix of pairwise ground costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    cost: GroundCost,
}

impl CostMatrix {
    pub fn compute(a: &StateBatch, b: &StateBatch, cost: GroundCost) -> Result<Self> {
        a.check_dim(b.dim())?;
        let mut entries = Vec::with_capacity(a.len() * b.len());
        for x in a.points() {
            entries.extend(b.points().map(|y| cost.eval(x, y)));
        }
        Ok(Self {
            rows: a.len(),
            cols: b.len(),
            entries,
            cost,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cost(&self) -> GroundCost {
        self.cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_batches() {
        assert!(StateBatch::new(&[]).is_err());
        assert!(StateBatch::new(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(StateBatch::new(&[vec![f64::NAN]]).is_err());
        assert!(StateBatch::new(&[vec![]]).is_err());
        assert!(StateBatch::new(&[vec![f64::INFINITY, 0.0]]).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let b = StateBatch::new(&[vec![0.1, -1e-300, 3.0], vec![1.0 / 3.0, 2e17, -0.0]]).unwrap();
        let back = StateBatch::from_text(&b.to_text()).unwrap();
        assert_eq!(b, back);
        assert!(StateBatch::from_text("1 2\n3 x\n").is_err());
    }

    #[test]
    fn cost_matrix_is_symmetric_and_zero_on_diagonal() {
        let a = StateBatch::new(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let c = CostMatrix::compute(&a, &a, GroundCost::EUCLIDEAN).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
        assert_eq!(c.get(0, 1), 5.0);
        assert_eq!(c.get(1, 0), c.get(0, 1));
        let sq = GroundCost { exponent: 2.0 };
        assert_eq!(sq.eval(&[0.0, 0.0], &[3.0, 4.0]), 25.0);
    }

    #[test]
    fn column_selection_and_pooling() {
        let a = StateBatch::new(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let s = a.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.point(0), &[3.0, 1.0]);
        assert!(a.select_columns(&[3]).is_err());
        let p = StateBatch::pooled(&[&a, &a]).unwrap();
        assert_eq!(p.len(), 2);
    }
}
