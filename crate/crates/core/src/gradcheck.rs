//! Finite-difference checks of every hand-written gradient in the crate,
//! run on small randomly initialized networks.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::dual::{tf1_objective_and_grad, tf2_objective_and_grad};
use crate::error::Result;
use crate::eval::cross_entropy_and_grad;
use crate::hrl::ppo_policy_loss_and_grad;
use crate::nn::{check_gradient, log_softmax_rows, GradCheckReport, Mlp, OutputHead};
use crate::rng::{Rng, SeedTree};
use crate::sac::{actor_loss_and_grad, critic_loss_and_grad};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Names of the checks, in the order [`run_suite`] reports them.
pub const CHECKS: [&str; 10] = [
    "mlp_linear",
    "mlp_tanh",
    "tf1",
    "tf2_mu",
    "tf2_nu",
    "sac_critic",
    "sac_actor",
    "discriminator",
    "ppo_policy",
    "ppo_value",
];

fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

fn rebuild(net: &Mlp, p: &[f64]) -> Mlp {
    Mlp::from_params(net.sizes(), net.head(), p.to_vec()).expect("same parameter count")
}

/// Run every check. A name in `perturb` gets its analytic gradient
/// nudged first, which must make that check fail.
pub fn run_suite(seed: u64, perturb: Option<&str>) -> Result<Vec<GradCheckReport>> {
    let tree = SeedTree::new(seed).child("gradcheck");
    let mut reports = Vec::with_capacity(CHECKS.len());
    let mut finish = |name: &str, params: &[f64], mut grad: Vec<f64>, loss: &dyn Fn(&[f64]) -> f64| {
        if perturb == Some(name) {
            let bump = grad.iter().map(|g| g.abs()).fold(0.0, f64::max).max(1e-3) * 0.1;
            grad[0] += bump;
        }
        reports.push(check_gradient(name, params, &grad, STEP, TOLERANCE, loss));
    };

    for (name, head) in [("mlp_linear", OutputHead::Linear), ("mlp_tanh", OutputHead::Tanh)] {
        let mut rng = tree.child(name).rng();
        let net = Mlp::new(&[3, 8, 8, 2], head, &mut rng)?;
        let x = uniform(5, 3, 1.0, &mut rng);
        let w = uniform(5, 2, 1.0, &mut rng);
        let (_, tape) = net.forward_tape(&x)?;
        let (g, _) = net.backward_tape(&tape, &w)?;
        finish(name, net.params(), g, &|p| (rebuild(&net, p).forward_batch(&x).unwrap() * &w).sum());
    }

    let mut rng = tree.child("dual").rng();
    let x = uniform(6, 2, 2.0, &mut rng);
    let y = uniform(6, 2, 2.0, &mut rng);
    let f = Mlp::new(&[2, 8, 8, 1], OutputHead::Linear, &mut rng)?;
    let (_, g) = tf1_objective_and_grad(&f, &x, &y)?;
    finish("tf1", f.params(), g, &|p| tf1_objective_and_grad(&rebuild(&f, p), &x, &y).unwrap().0);
    let mu = Mlp::new(&[2, 8, 8, 1], OutputHead::Linear, &mut rng)?;
    let nu = Mlp::new(&[2, 8, 8, 1], OutputHead::Linear, &mut rng)?;
    let costs: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..2.0)).collect();
    let (beta, cap) = (0.5, 20.0);
    let (_, gm, gn) = tf2_objective_and_grad(&mu, &nu, &x, &y, &costs, beta, cap)?;
    finish("tf2_mu", mu.params(), gm, &|p| {
        tf2_objective_and_grad(&rebuild(&mu, p), &nu, &x, &y, &costs, beta, cap).unwrap().0
    });
    finish("tf2_nu", nu.params(), gn, &|p| {
        tf2_objective_and_grad(&mu, &rebuild(&nu, p), &x, &y, &costs, beta, cap).unwrap().0
    });

    let mut rng = tree.child("sac").rng();
    let q1 = Mlp::new(&[6, 8, 8, 1], OutputHead::Linear, &mut rng)?;
    let q2 = Mlp::new(&[6, 8, 8, 1], OutputHead::Linear, &mut rng)?;
    let inputs = uniform(7, 6, 1.0, &mut rng);
    let targets: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
    let (_, g) = critic_loss_and_grad(&q1, &inputs, &targets)?;
    finish("sac_critic", q1.params(), g, &|p| critic_loss_and_grad(&rebuild(&q1, p), &inputs, &targets).unwrap().0);
    let actor = Mlp::new(&[4, 8, 8, 4], OutputHead::Linear, &mut rng)?;
    let obs = uniform(5, 4, 1.0, &mut rng);
    let eps = Array2::from_shape_fn((5, 2), |_| rng.sample(StandardNormal));
    let alpha = 0.1;
    let g = actor_loss_and_grad(&actor, &q1, &q2, &obs, &eps, alpha)?.grad;
    finish("sac_actor", actor.params(), g, &|p| {
        actor_loss_and_grad(&rebuild(&actor, p), &q1, &q2, &obs, &eps, alpha).unwrap().loss
    });

    let mut rng = tree.child("discriminator").rng();
    let net = Mlp::new(&[3, 8, 8, 4], OutputHead::Linear, &mut rng)?;
    let x = uniform(6, 3, 1.0, &mut rng);
    let labels = vec![0, 1, 2, 3, 1, 0];
    let (_, g) = cross_entropy_and_grad(&net, &x, &labels)?;
    finish("discriminator", net.params(), g, &|p| cross_entropy_and_grad(&rebuild(&net, p), &x, &labels).unwrap().0);

    let mut rng = tree.child("ppo").rng();
    let net = Mlp::new(&[4, 8, 8, 5], OutputHead::Linear, &mut rng)?;
    let x = uniform(9, 4, 1.0, &mut rng);
    let acts: Vec<usize> = (0..9).map(|i| i % 5).collect();
    // most ratios stay inside the clip range, every third one falls outside
    let (logits, _) = net.forward_tape(&x)?;
    let lp = log_softmax_rows(&logits);
    let old: Vec<f64> = (0..9).map(|i| lp[[i, acts[i]]] + if i % 3 == 0 { 0.7 } else { 0.05 }).collect();
    let adv: Vec<f64> = (0..9).map(|i| if i % 2 == 0 { 1.3 } else { -0.8 }).collect();
    let (clip, ent) = (0.2, 0.01);
    let (_, g) = ppo_policy_loss_and_grad(&net, &x, &acts, &old, &adv, clip, ent)?;
    finish("ppo_policy", net.params(), g, &|p| {
        ppo_policy_loss_and_grad(&rebuild(&net, p), &x, &acts, &old, &adv, clip, ent).unwrap().0
    });
    let v = Mlp::new(&[4, 8, 8, 1], OutputHead::Linear, &mut rng)?;
    let ret: Vec<f64> = (0..9).map(|i| i as f64 * 0.3).collect();
    let (_, g) = critic_loss_and_grad(&v, &x, &ret)?;
    finish("ppo_value", v.params(), g, &|p| critic_loss_and_grad(&rebuild(&v, p), &x, &ret).unwrap().0);

    Ok(reports)
}

/// One line per check plus a verdict.
pub fn format_reports(reports: &[GradCheckReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let verdict = if r.passed() { "ok" } else { "FAIL" };
        out.push_str(&format!("{:<14} params {:>4}  rel_err {:.3e}  {verdict}\n", r.name, r.num_params, r.rel_error));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_covers_every_loss_and_passes() {
        let reports = run_suite(0, None).unwrap();
        let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, CHECKS);
        for r in &reports {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn perturbed_gradient_is_caught() {
        for name in ["tf2_nu", "ppo_policy"] {
            let reports = run_suite(0, Some(name)).unwrap();
            for r in &reports {
                assert_eq!(r.passed(), r.name != name, "{r:?}");
            }
        }
    }
}
