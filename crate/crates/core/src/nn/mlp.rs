use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    Linear,
    Tanh,
}

/// Layer inputs saved by a forward pass, consumed by the matching backward
/// pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Array2<f64>>,
    output: Array2<f64>,
}

/// Feed-forward network: affine layers, ReLU between them, and a linear or
/// tanh output head.
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    head: OutputHead,
    params: Vec<f64>,
    tape: Option<Tape>,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.head == other.head && self.params == other.params
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform(−1/√fan_in, 1/√fan_in) initialization for weights and biases.
    pub fn new(sizes: &[usize], head: OutputHead, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes, head)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let n = w[0] * w[1] + w[1];
            for p in &mut net.params[offset..offset + n] {
                *p = rng.random_range(-bound..bound);
            }
            offset += n;
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], head: OutputHead) -> Result<Self> {
        Self::from_params(sizes, head, vec![0.0; param_count(sizes)])
    }

    pub fn from_params(sizes: &[usize], head: OutputHead, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(invalid(format!("bad layer sizes {sizes:?}")));
        }
        if params.len() != param_count(sizes) {
            return Err(invalid(format!(
                "expected {} parameters for {sizes:?}, got {}",
                param_count(sizes),
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            head,
            params,
            tape: None,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(invalid("parameter count mismatch"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.sizes[..=layer])
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.offset(layer);
        ArrayView2::from_shape((fan_in, fan_out), &self.params[off..off + fan_in * fan_out]).unwrap()
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.offset(layer) + fan_in * fan_out;
        ArrayView1::from(&self.params[off..off + fan_out])
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(invalid(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Array2<f64>, mut keep: Option<&mut Vec<Array2<f64>>>) -> Array2<f64> {
        let last = self.num_layers() - 1;
        let mut h = x.clone();
        for l in 0..self.num_layers() {
            let mut z = h.dot(&self.weight(l));
            z += &self.bias(l);
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else if self.head == OutputHead::Tanh {
                z.mapv_inplace(f64::tanh);
            }
            if let Some(k) = keep.as_deref_mut() {
                k.push(std::mem::replace(&mut h, z));
            } else {
                h = z;
            }
        }
        h
    }

    /// Batch forward; rows are samples.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(self.run(x, None))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).map_err(|e| invalid(e.to_string()))?;
        Ok(self.forward_batch(&x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_tape(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Tape)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let out = self.run(x, Some(&mut inputs));
        let tape = Tape {
            inputs,
            output: out.clone(),
        };
        Ok((out, tape))
    }

    /// Reverse pass. Returns the parameter gradient (same layout as
    /// [`params`](Self::params)) and the gradient with respect to the input.
    pub fn backward_tape(&self, tape: &Tape, grad_out: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        if grad_out.dim() != tape.output.dim() {
            return Err(invalid(format!(
                "output gradient shape {:?} does not match output {:?}",
                grad_out.dim(),
                tape.output.dim()
            )));
        }
        if tape.inputs.len() != self.num_layers() || tape.inputs[0].ncols() != self.input_dim() {
            return Err(Error::State("tape was recorded by a different network".into()));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut g = grad_out.clone();
        if self.head == OutputHead::Tanh {
            g.zip_mut_with(&tape.output, |gi, &y| *gi *= 1.0 - y * y);
        }
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let (w_slice, b_slice) = grads[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let mut dw = ArrayViewMut2::from_shape((fan_in, fan_out), w_slice).unwrap();
            general_mat_mul(1.0, &tape.inputs[l].t(), &g, 0.0, &mut dw);
            for (b, s) in b_slice.iter_mut().zip(g.sum_axis(Axis(0))) {
                *b = s;
            }
            let mut g_in = g.dot(&self.weight(l).t());
            if l > 0 {
                g_in.zip_mut_with(&tape.inputs[l], |gi, &a| {
                    if a <= 0.0 {
                        *gi = 0.0
                    }
                });
            }
            g = g_in;
        }
        Ok((grads, g))
    }

    /// Forward pass that remembers its tape for a later [`backward`](Self::backward).
    pub fn forward_train(&mut self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (out, tape) = self.forward_tape(x)?;
        self.tape = Some(tape);
        Ok(out)
    }

    pub fn backward(&self, grad_out: &Array2<f64>) -> Result<Vec<f64>> {
        let tape = self
            .tape
            .as_ref()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        Ok(self.backward_tape(tape, grad_out)?.0)
    }

    pub fn clamp_params(&mut self, c: f64) {
        self.params.iter_mut().for_each(|p| *p = p.clamp(-c, c));
    }

    /// θ ← τ·online + (1 − τ)·θ
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if online.sizes != self.sizes {
            return Err(invalid("soft update between different architectures"));
        }
        if tau == 1.0 {
            self.params.copy_from_slice(&online.params);
        } else if tau != 0.0 {
            for (t, o) in self.params.iter_mut().zip(&online.params) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// SHA-256 over shapes and raw parameter bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.sizes {
            h.update((*s as u64).to_le_bytes());
        }
        h.update([self.head as u8]);
        for p in &self.params {
            h.update(p.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
