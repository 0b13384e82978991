/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub name: String,
    pub num_params: usize,
    pub rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.rel_error.is_finite() && self.rel_error < self.tolerance
    }
}

/// Relative error ‖a − n‖ / max(‖a‖, ‖n‖) between `analytic` and the
/// central-difference gradient of `loss` at `params` with step `h`.
pub fn check_gradient(
    name: &str,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    tolerance: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> GradCheckReport {
    let mut p = params.to_vec();
    let mut diff_sq = 0.0;
    let mut a_sq = 0.0;
    let mut n_sq = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss(&p);
        p[i] = orig - h;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.get(i).copied().unwrap_or(f64::NAN);
        diff_sq += (a - numeric) * (a - numeric);
        a_sq += a * a;
        n_sq += numeric * numeric;
    }
    let denom = a_sq.sqrt().max(n_sq.sqrt()).max(1e-12);
    let rel_error = if analytic.len() == params.len() {
        diff_sq.sqrt() / denom
    } else {
        f64::INFINITY
    };
    GradCheckReport {
        name: name.to_string(),
        num_params: params.len(),
        rel_error,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mlp, OutputHead};
    use crate::rng::SeedTree;
    use ndarray::Array2;
    use rand::Rng as _;

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = SeedTree::new(11).rng();
        for head in [OutputHead::Linear, OutputHead::Tanh] {
            let net = Mlp::new(&[3, 8, 8, 2], head, &mut rng).unwrap();
            let x = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
            let w = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
            // loss = Σ w ⊙ net(x)
            let (_, tape) = net.forward_tape(&x).unwrap();
            let (g, _) = net.backward_tape(&tape, &w).unwrap();
            let r = check_gradient("mlp", net.params(), &g, 1e-5, 1e-4, |p| {
                let n = Mlp::from_params(net.sizes(), head, p.to_vec()).unwrap();
                (n.forward_batch(&x).unwrap() * &w).sum()
            });
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = SeedTree::new(12).rng();
        let net = Mlp::new(&[4, 8, 1], OutputHead::Tanh, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xa = Array2::from_shape_vec((1, 4), x.clone()).unwrap();
        let (_, tape) = net.forward_tape(&xa).unwrap();
        let (_, gx) = net.backward_tape(&tape, &Array2::ones((1, 1))).unwrap();
        let r = check_gradient("input", &x, gx.as_slice().unwrap(), 1e-5, 1e-4, |p| {
            net.forward(p).unwrap()[0]
        });
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn wrong_gradient_fails() {
        let r = check_gradient("quad", &[1.0, 2.0], &[2.0, 5.0], 1e-5, 1e-4, |p| {
            p.iter().map(|x| x * x).sum()
        });
        assert!(!r.passed());
        let r = check_gradient("short", &[1.0, 2.0], &[2.0], 1e-5, 1e-4, |p| p[0]);
        assert!(!r.passed());
    }
}
