use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::ot::{projected_wd_with, sample_directions, GroundCost, StateBatch};
use crate::rng::SeedTree;

/// Diversity summary of a set of policies.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub policies: usize,
    /// Held-out discriminator accuracy, when one was trained.
    pub dsr: Option<f64>,
    /// Mean of the strict upper triangle of `matrix`.
    pub wd: f64,
    pub matrix: Vec<Vec<f64>>,
    pub projections: usize,
    pub samples: Vec<usize>,
}

impl DiversityReport {
    /// Smallest off-diagonal entry.
    pub fn min_wd(&self) -> f64 {
        let n = self.policies;
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[i][j])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "policies {}", self.policies).unwrap();
        match self.dsr {
            Some(d) => writeln!(out, "dsr {d:?}").unwrap(),
            None => writeln!(out, "dsr none").unwrap(),
        }
        writeln!(out, "wd {:?}", self.wd).unwrap();
        writeln!(out, "projections {}", self.projections).unwrap();
        let samples: Vec<String> = self.samples.iter().map(|s| s.to_string()).collect();
        writeln!(out, "samples {}", samples.join(" ")).unwrap();
        writeln!(out, "matrix").unwrap();
        for row in &self.matrix {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("diversity report: {what}"));
        let mut lines = text.lines();
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {key}")))?;
            line.strip_prefix(key)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| bad(&format!("expected {key}")))
        };
        let policies: usize = field("policies")?.parse().map_err(|_| bad("policies"))?;
        let dsr = match field("dsr")?.as_str() {
            "none" => None,
            v => Some(v.parse().map_err(|_| bad("dsr"))?),
        };
        let wd = field("wd")?.parse().map_err(|_| bad("wd"))?;
        let projections = field("projections")?.parse().map_err(|_| bad("projections"))?;
        let samples = field("samples")?
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("samples")))
            .collect::<Result<Vec<usize>>>()?;
        field("matrix")?;
        let matrix = lines
            .take(policies)
            .map(|l| l.split_whitespace().map(|v| v.parse().map_err(|_| bad("matrix"))).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        if matrix.len() != policies || matrix.iter().any(|r| r.len() != policies) {
            return Err(bad("matrix shape"));
        }
        Ok(Self {
            policies,
            dsr,
            wd,
            matrix,
            projections,
            samples,
        })
    }
}

/// Projected distances between every pair of archives. Each unordered
/// pair gets its own direction set derived from `seed` and the pair, and
/// both orientations are evaluated with it.
pub fn pairwise_wd_matrix(archives: &[StateBatch], projections: usize, seed: u64) -> Result<DiversityReport> {
    if archives.is_empty() {
        return Err(invalid("no archives"));
    }
    if archives.iter().any(StateBatch::is_empty) {
        return Err(invalid("every archive needs at least one state"));
    }
    let dim = archives[0].dim();
    for a in archives {
        a.check_dim(dim)?;
    }
    let n = archives.len();
    let tree = SeedTree::new(seed).child("pairwise");
    let mut matrix = vec![vec![0.0; n]; n];
    let cost = GroundCost::EUCLIDEAN;
    for i in 0..n {
        for j in i + 1..n {
            let mut rng = tree.index(i as u64).index(j as u64).rng();
            let dirs = sample_directions(dim, projections, &mut rng);
            matrix[i][j] = projected_wd_with(&archives[i], &archives[j], &dirs, cost)?;
            matrix[j][i] = projected_wd_with(&archives[j], &archives[i], &dirs, cost)?;
        }
    }
    let pairs = n * (n - 1) / 2;
    let wd = if pairs == 0 {
        0.0
    } else {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| matrix[i][j]).sum::<f64>() / pairs as f64
    };
    Ok(DiversityReport {
        policies: n,
        dsr: None,
        wd,
        matrix,
        projections,
        samples: archives.iter().map(StateBatch::len).collect(),
    })
}
