//! Small dense networks with hand-written reverse mode.
//!
//! Parameters of an [`Mlp`] live in one flat vector (per layer: row-major
//! weights, then biases), which keeps optimizers, weight clamping, target
//! averaging and checkpoints trivial.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, Entry};
pub use gradcheck::{check_gradient, GradCheckReport};
pub use mlp::{Mlp, OutputHead, Tape};

use ndarray::Array2;

use crate::error::{invalid, Result};

/// Rows of equal-length vectors as a batch matrix.
pub fn rows_to_array(rows: &[&[f64]]) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        if r.len() != cols {
            return Err(invalid("ragged rows"));
        }
        data.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), cols), data).map_err(|e| invalid(e.to_string()))
}

/// Numerically stable log(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log-softmax of each row.
pub fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}
