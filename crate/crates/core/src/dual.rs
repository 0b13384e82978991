//! Neural dual estimators of the Wasserstein distance.
//!
//! * TF1 maximizes E_p f(x) − E_q f(y) over one scorer whose weights are
//!   clamped to a box, a crude Lipschitz constraint. The optimum is the
//!   distance times an unknown scale.
//! * TF2 maximizes E[μ(x) − ν(y) − β exp((μ(x) − ν(y) − c(x, y)) / β)] over
//!   two unconstrained scorers; it targets the smoothed distance minus β.
//!
//! Either estimator can hand out per-state rewards: the first policy gets
//! f(s) (or μ(s)), the second −f(s) (or −ν(s)).

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::{Adam, Mlp, OutputHead};
use crate::ot::{GroundCost, StateBatch};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMode {
    Tf1,
    Tf2,
}

/// Which policy of the pair a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualConfig {
    pub hidden: usize,
    pub depth: usize,
    /// TF1 weight box half-width.
    pub clamp: f64,
    /// TF2 smoothing scale.
    pub beta: f64,
    /// TF2 cap on the exponent before `exp`.
    pub exp_cap: f64,
    pub step_size: f64,
    pub cost: GroundCost,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            depth: 2,
            clamp: 0.01,
            beta: 1.0,
            exp_cap: 20.0,
            step_size: 1e-3,
            cost: GroundCost::EUCLIDEAN,
        }
    }
}

fn scorer_sizes(dim: usize, cfg: &DualConfig) -> Vec<usize> {
    let mut sizes = vec![dim];
    sizes.extend(std::iter::repeat_n(cfg.hidden, cfg.depth));
    sizes.push(1);
    sizes
}

/// One (TF1) or two (TF2) scorer networks with their optimizers.
#[derive(Debug, Clone)]
pub struct TestFunctionPair {
    mode: DualMode,
    mu: Mlp,
    nu: Option<Mlp>,
    opt_mu: Adam,
    opt_nu: Option<Adam>,
    clamp_c: f64,
    beta: f64,
    exp_cap: f64,
    cost: GroundCost,
}

impl TestFunctionPair {
    pub fn new(mode: DualMode, dim: usize, cfg: &DualConfig, rng: &mut Rng) -> Result<Self> {
        let sizes = scorer_sizes(dim, cfg);
        let mu = Mlp::new(&sizes, OutputHead::Linear, rng)?;
        let nu = match mode {
            DualMode::Tf1 => None,
            DualMode::Tf2 => Some(Mlp::new(&sizes, OutputHead::Linear, rng)?),
        };
        Self::from_networks(mode, mu, nu, cfg)
    }

    /// Wrap existing scorers. TF1 takes a single network (`nu` must be
    /// `None`) and clamps it immediately.
    pub fn from_networks(mode: DualMode, mu: Mlp, nu: Option<Mlp>, cfg: &DualConfig) -> Result<Self> {
        if mu.output_dim() != 1 {
            return Err(invalid("scorer must have a scalar output"));
        }
        match (mode, &nu) {
            (DualMode::Tf1, Some(_)) => return Err(invalid("TF1 uses a single scorer")),
            (DualMode::Tf2, None) => return Err(invalid("TF2 needs two scorers")),
            (DualMode::Tf2, Some(n)) if n.sizes() != mu.sizes() => {
                return Err(invalid("TF2 scorers must share an architecture"))
            }
            _ => {}
        }
        if mode == DualMode::Tf1 && !(cfg.clamp > 0.0) {
            return Err(invalid("TF1 clamp must be positive"));
        }
        if mode == DualMode::Tf2 && !(cfg.beta > 0.0) {
            return Err(invalid("TF2 beta must be positive"));
        }
        let mut mu = mu;
        if mode == DualMode::Tf1 {
            mu.clamp_params(cfg.clamp);
        }
        let opt_mu = Adam::new(mu.num_params(), cfg.step_size);
        let opt_nu = nu.as_ref().map(|n| Adam::new(n.num_params(), cfg.step_size));
        Ok(Self {
            mode,
            mu,
            nu,
            opt_mu,
            opt_nu,
            clamp_c: cfg.clamp,
            beta: cfg.beta,
            exp_cap: cfg.exp_cap,
            cost: cfg.cost,
        })
    }

    pub fn mode(&self) -> DualMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.mu.input_dim()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        if !(beta > 0.0) {
            return Err(invalid("beta must be positive"));
        }
        self.beta = beta;
        Ok(())
    }

    pub fn clamp_c(&self) -> f64 {
        self.clamp_c
    }

    /// The TF1 scorer f, or μ for TF2.
    pub fn mu(&self) -> &Mlp {
        &self.mu
    }

    pub fn nu(&self) -> Option<&Mlp> {
        self.nu.as_ref()
    }

    pub fn mu_mut(&mut self) -> &mut Mlp {
        &mut self.mu
    }

    fn check_batches(&self, x: &StateBatch, y: &StateBatch) -> Result<()> {
        x.check_dim(self.dim())?;
        y.check_dim(self.dim())
    }

    /// mean f(X) − mean f(Y); for TF2 this evaluates μ on both sides.
    pub fn tf1_objective(&self, x: &StateBatch, y: &StateBatch) -> Result<f64> {
        self.check_batches(x, y)?;
        Ok(mean_score(&self.mu, x)? - mean_score(&self.mu, y)?)
    }

    /// One ascent step on the Kantorovich-Rubinstein objective, then clamp.
    /// Returns the objective before the step.
    pub fn tf1_update(&mut self, x: &StateBatch, y: &StateBatch, step_size: f64) -> Result<f64> {
        if self.mode != DualMode::Tf1 {
            return Err(invalid("tf1_update on a TF2 estimator"));
        }
        self.check_batches(x, y)?;
        let (obj, grad) = tf1_objective_and_grad(&self.mu, &to_array(x), &to_array(y))?;
        let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.opt_mu.lr = step_size;
        self.opt_mu.step(self.mu.params_mut(), &descent)?;
        self.mu.clamp_params(self.clamp_c);
        Ok(obj)
    }

    /// Smoothed dual objective on explicit pairs (x_i, y_i).
    pub fn tf2_objective_paired(&self, x: &StateBatch, y: &StateBatch) -> Result<f64> {
        let nu = self.nu.as_ref().ok_or_else(|| invalid("TF2 objective needs ν"))?;
        self.check_batches(x, y)?;
        if x.len() != y.len() {
            return Err(invalid("paired objective needs equal batch sizes"));
        }
        let costs = pair_costs(x, y, self.cost);
        let (obj, _, _) = tf2_objective_and_grad(&self.mu, nu, &to_array(x), &to_array(y), &costs, self.beta, self.exp_cap)?;
        Ok(obj)
    }

    /// One ascent step on the smoothed dual. Each x is paired with a y
    /// drawn by a fresh random permutation (cycled if Y is shorter).
    pub fn tf2_update(&mut self, x: &StateBatch, y: &StateBatch, step_size: f64, rng: &mut Rng) -> Result<f64> {
        if self.mode != DualMode::Tf2 {
            return Err(invalid("tf2_update on a TF1 estimator"));
        }
        self.check_batches(x, y)?;
        let mut perm: Vec<usize> = (0..y.len()).collect();
        perm.shuffle(rng);
        let rows: Vec<usize> = (0..x.len()).map(|i| perm[i % perm.len()]).collect();
        let y_paired = y.gather(&rows)?;
        let costs = pair_costs(x, &y_paired, self.cost);
        let nu = self.nu.as_mut().unwrap();
        let (obj, g_mu, g_nu) = tf2_objective_and_grad(
            &self.mu,
            nu,
            &to_array(x),
            &to_array(&y_paired),
            &costs,
            self.beta,
            self.exp_cap,
        )?;
        let neg = |g: Vec<f64>| g.into_iter().map(|v| -v).collect::<Vec<_>>();
        self.opt_mu.lr = step_size;
        self.opt_mu.step(self.mu.params_mut(), &neg(g_mu))?;
        let opt_nu = self.opt_nu.as_mut().unwrap();
        opt_nu.lr = step_size;
        opt_nu.step(nu.params_mut(), &neg(g_nu))?;
        Ok(obj)
    }

    /// Mode-dispatching update.
    pub fn update(&mut self, x: &StateBatch, y: &StateBatch, step_size: f64, rng: &mut Rng) -> Result<f64> {
        match self.mode {
            DualMode::Tf1 => self.tf1_update(x, y, step_size),
            DualMode::Tf2 => self.tf2_update(x, y, step_size, rng),
        }
    }

    /// f(s) / μ(s) for the first policy, −f(s) / −ν(s) for the second.
    pub fn state_reward(&self, s: &[f64], side: Side) -> Result<f64> {
        if s.len() != self.dim() {
            return Err(invalid(format!("state has dimension {}, expected {}", s.len(), self.dim())));
        }
        Ok(match (side, self.mode) {
            (Side::First, _) | (Side::Second, DualMode::Tf1) => {
                let v = self.mu.forward(s)?[0];
                if side == Side::First {
                    v
                } else {
                    -v
                }
            }
            (Side::Second, DualMode::Tf2) => -self.nu.as_ref().unwrap().forward(s)?[0],
        })
    }
}

fn to_array(b: &StateBatch) -> Array2<f64> {
    Array2::from_shape_vec((b.len(), b.dim()), b.as_flat().to_vec()).unwrap()
}

fn mean_score(net: &Mlp, b: &StateBatch) -> Result<f64> {
    Ok(net.forward_batch(&to_array(b))?.mean().unwrap())
}

fn pair_costs(x: &StateBatch, y: &StateBatch, cost: GroundCost) -> Vec<f64> {
    x.points().zip(y.points()).map(|(a, b)| cost.eval(a, b)).collect()
}

/// TF1 objective mean f(x) − mean f(y) and its gradient in f's parameters.
pub fn tf1_objective_and_grad(f: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> Result<(f64, Vec<f64>)> {
    let (fx, tx) = f.forward_tape(x)?;
    let (fy, ty) = f.forward_tape(y)?;
    let (nx, ny) = (x.nrows() as f64, y.nrows() as f64);
    let obj = fx.sum() / nx - fy.sum() / ny;
    let (gx, _) = f.backward_tape(&tx, &Array2::from_elem(fx.dim(), 1.0 / nx))?;
    let (gy, _) = f.backward_tape(&ty, &Array2::from_elem(fy.dim(), 1.0 / ny))?;
    Ok((obj, gx.iter().zip(&gy).map(|(a, b)| a - b).collect()))
}

/// Smoothed dual objective over pairs (x_i, y_i) with costs c_i, and its
/// gradients in μ's and ν's parameters. The exponent is capped at `cap`;
/// above the cap the penalty is constant.
pub fn tf2_objective_and_grad(
    mu: &Mlp,
    nu: &Mlp,
    x: &Array2<f64>,
    y: &Array2<f64>,
    costs: &[f64],
    beta: f64,
    cap: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = x.nrows();
    if y.nrows() != n || costs.len() != n {
        return Err(invalid("TF2 pairs must align"));
    }
    let (a, ta) = mu.forward_tape(x)?;
    let (b, tb) = nu.forward_tape(y)?;
    let nf = n as f64;
    let mut obj = 0.0;
    let mut da = Array2::zeros((n, 1));
    let mut db = Array2::zeros((n, 1));
    for i in 0..n {
        let diff = a[[i, 0]] - b[[i, 0]];
        let z = (diff - costs[i]) / beta;
        let e = z.min(cap).exp();
        obj += diff - beta * e;
        let slope = if z < cap { e } else { 0.0 };
        da[[i, 0]] = (1.0 - slope) / nf;
        db[[i, 0]] = (slope - 1.0) / nf;
    }
    let (g_mu, _) = mu.backward_tape(&ta, &da)?;
    let (g_nu, _) = nu.backward_tape(&tb, &db)?;
    Ok((obj / nf, g_mu, g_nu))
}
