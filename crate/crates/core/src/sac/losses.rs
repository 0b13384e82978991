use ndarray::{s, Array2, Axis};

use crate::error::{invalid, Result};
use crate::nn::{softplus, Mlp};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// log(1 − tanh²u) without cancellation for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Reparameterized tanh-Gaussian draw for a batch. `head` holds the
/// means in its first half of columns and raw log-stds in the second.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub u: Array2<f64>,
    /// tanh(u), in [-1, 1].
    pub action: Array2<f64>,
    pub log_std: Array2<f64>,
    /// False where the raw log-std was clamped (zero gradient there).
    pub log_std_free: Array2<bool>,
    pub log_prob: Vec<f64>,
}

pub fn squashed_sample(head: &Array2<f64>, eps: &Array2<f64>) -> Result<SquashedSample> {
    let act_dim = head.ncols() / 2;
    if head.ncols() != 2 * act_dim || eps.dim() != (head.nrows(), act_dim) {
        return Err(invalid("actor head and noise shapes disagree"));
    }
    let mean = head.slice(s![.., ..act_dim]);
    let raw = head.slice(s![.., act_dim..]);
    let log_std = raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    let log_std_free = raw.mapv(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
    let u = &mean + &(log_std.mapv(f64::exp) * eps);
    let action = u.mapv(f64::tanh);
    let log_prob = (0..head.nrows())
        .map(|i| {
            (0..act_dim)
                .map(|j| {
                    let e = eps[[i, j]];
                    -0.5 * e * e - log_std[[i, j]] - HALF_LN_2PI - log_one_minus_tanh_sq(u[[i, j]])
                })
                .sum()
        })
        .collect();
    Ok(SquashedSample {
        u,
        action,
        log_std,
        log_std_free,
        log_prob,
    })
}

/// Critic inputs: normalized observations followed by normalized actions.
pub fn critic_inputs(obs: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[obs.view(), actions.view()]).expect("row counts agree")
}

/// 0.5 · mean((Q − y)²) and its parameter gradient.
pub fn critic_loss_and_grad(q: &Mlp, inputs: &Array2<f64>, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if inputs.nrows() != targets.len() {
        return Err(invalid("critic batch and targets disagree"));
    }
    let (out, tape) = q.forward_tape(inputs)?;
    let n = targets.len() as f64;
    let mut loss = 0.0;
    let mut g = Array2::zeros((targets.len(), 1));
    for (i, y) in targets.iter().enumerate() {
        let d = out[[i, 0]] - y;
        loss += 0.5 * d * d / n;
        g[[i, 0]] = d / n;
    }
    let (grad, _) = q.backward_tape(&tape, &g)?;
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// −mean log π of the sampled actions.
    pub entropy: f64,
}

/// mean(α log π(a|s) − min(Q1, Q2)(s, a)) with a = tanh(μ + σ ε), and its
/// gradient in the actor's parameters for the fixed noise `eps`.
pub fn actor_loss_and_grad(
    actor: &Mlp,
    q1: &Mlp,
    q2: &Mlp,
    obs: &Array2<f64>,
    eps: &Array2<f64>,
    alpha: f64,
) -> Result<ActorLoss> {
    let (head, tape) = actor.forward_tape(obs)?;
    let smp = squashed_sample(&head, eps)?;
    let inputs = critic_inputs(obs, &smp.action);
    let (v1, t1) = q1.forward_tape(&inputs)?;
    let (v2, t2) = q2.forward_tape(&inputs)?;
    let n = obs.nrows();
    let nf = n as f64;
    let act_dim = eps.ncols();
    let obs_dim = obs.ncols();

    let mut loss = 0.0;
    let mut g1 = Array2::zeros((n, 1));
    let mut g2 = Array2::zeros((n, 1));
    for i in 0..n {
        let (a, b) = (v1[[i, 0]], v2[[i, 0]]);
        loss += (alpha * smp.log_prob[i] - a.min(b)) / nf;
        if a <= b {
            g1[[i, 0]] = -1.0 / nf;
        } else {
            g2[[i, 0]] = -1.0 / nf;
        }
    }
    let (_, gin1) = q1.backward_tape(&t1, &g1)?;
    let (_, gin2) = q2.backward_tape(&t2, &g2)?;
    let d_action = &gin1.slice(s![.., obs_dim..]) + &gin2.slice(s![.., obs_dim..]);

    let mut g_head = Array2::zeros((n, 2 * act_dim));
    for i in 0..n {
        for j in 0..act_dim {
            let th = smp.action[[i, j]];
            let sigma = smp.log_std[[i, j]].exp();
            let e = eps[[i, j]];
            let via_q = d_action[[i, j]] * (1.0 - th * th);
            // d/du of −log(1 − tanh²u) is 2 tanh u
            let dlogp_du = 2.0 * th;
            g_head[[i, j]] = alpha / nf * dlogp_du + via_q;
            if smp.log_std_free[[i, j]] {
                g_head[[i, act_dim + j]] = alpha / nf * (-1.0 + dlogp_du * sigma * e) + via_q * sigma * e;
            }
        }
    }
    let (grad, _) = actor.backward_tape(&tape, &g_head)?;
    let entropy = -smp.log_prob.iter().sum::<f64>() / nf;
    Ok(ActorLoss { loss, grad, entropy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{check_gradient, OutputHead};
    use crate::rng::SeedTree;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[test]
    fn log_prob_matches_direct_formula() {
        let head = Array2::from_shape_vec((1, 2), vec![0.3, -0.5]).unwrap();
        let eps = Array2::from_shape_vec((1, 1), vec![0.7]).unwrap();
        let smp = squashed_sample(&head, &eps).unwrap();
        let sigma = (-0.5f64).exp();
        let u = 0.3 + sigma * 0.7;
        let normal = -0.5 * 0.7f64.powi(2) - (-0.5) - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let direct = normal - (1.0 - u.tanh().powi(2)).ln();
        assert!((smp.log_prob[0] - direct).abs() < 1e-12);
        assert!((smp.action[[0, 0]] - u.tanh()).abs() < 1e-15);
    }

    #[test]
    fn stable_log_jacobian_at_large_u() {
        assert!(log_one_minus_tanh_sq(40.0).is_finite());
        assert!((log_one_minus_tanh_sq(0.0)).abs() < 1e-15);
        for u in [-3.0, -0.4, 1.1, 5.0] {
            let direct = (1.0 - f64::tanh(u).powi(2)).ln();
            assert!((log_one_minus_tanh_sq(u) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn log_std_is_clamped() {
        let head = Array2::from_shape_vec((1, 2), vec![0.0, 30.0]).unwrap();
        let eps = Array2::zeros((1, 1));
        let smp = squashed_sample(&head, &eps).unwrap();
        assert_eq!(smp.log_std[[0, 0]], LOG_STD_MAX);
        assert!(!smp.log_std_free[[0, 0]]);
    }

    #[test]
    fn losses_pass_gradient_check() {
        let mut rng = SeedTree::new(3).rng();
        let obs = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
        let eps = Array2::from_shape_fn((5, 2), |_| rng.sample(StandardNormal));
        let actor = Mlp::new(&[4, 8, 8, 4], OutputHead::Linear, &mut rng).unwrap();
        let q1 = Mlp::new(&[6, 8, 8, 1], OutputHead::Linear, &mut rng).unwrap();
        let q2 = Mlp::new(&[6, 8, 8, 1], OutputHead::Linear, &mut rng).unwrap();

        let r = actor_loss_and_grad(&actor, &q1, &q2, &obs, &eps, 0.1).unwrap();
        let rep = check_gradient("sac_actor", actor.params(), &r.grad, 1e-5, 1e-4, |p| {
            let a = Mlp::from_params(actor.sizes(), OutputHead::Linear, p.to_vec()).unwrap();
            actor_loss_and_grad(&a, &q1, &q2, &obs, &eps, 0.1).unwrap().loss
        });
        assert!(rep.passed(), "{rep:?}");

        let inputs = Array2::from_shape_fn((7, 6), |_| rng.random_range(-1.0..1.0));
        let targets: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, g) = critic_loss_and_grad(&q1, &inputs, &targets).unwrap();
        let rep = check_gradient("sac_critic", q1.params(), &g, 1e-5, 1e-4, |p| {
            let q = Mlp::from_params(q1.sizes(), OutputHead::Linear, p.to_vec()).unwrap();
            critic_loss_and_grad(&q, &inputs, &targets).unwrap().0
        });
        assert!(rep.passed(), "{rep:?}");
    }
}
