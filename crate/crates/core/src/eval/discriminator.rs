use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::{log_softmax_rows, Adam, Mlp, OutputHead};
use crate::ot::StateBatch;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub hidden: usize,
    pub depth: usize,
    pub epochs: usize,
    /// Keep going past `epochs` until this many gradient steps were taken.
    pub min_updates: usize,
    pub batch: usize,
    pub lr: f64,
    /// Share of each policy's states held out for scoring.
    pub test_fraction: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            depth: 2,
            epochs: 30,
            min_updates: 1000,
            batch: 64,
            lr: 1e-3,
            test_fraction: 0.2,
        }
    }
}

/// Classifier from a state to the policy that produced it. Inputs are
/// standardized with statistics of the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    net: Mlp,
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Mean cross-entropy of `labels` under the logits of `net`, and its
/// parameter gradient.
pub fn cross_entropy_and_grad(net: &Mlp, x: &Array2<f64>, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    if x.nrows() != labels.len() {
        return Err(invalid("inputs and labels disagree in length"));
    }
    if labels.iter().any(|&y| y >= net.output_dim()) {
        return Err(invalid("label out of range"));
    }
    let (logits, tape) = net.forward_tape(x)?;
    let logp = log_softmax_rows(&logits);
    let n = labels.len() as f64;
    let loss = -labels.iter().enumerate().map(|(i, &y)| logp[[i, y]]).sum::<f64>() / n;
    let mut g = logp.mapv(f64::exp);
    for (i, &y) in labels.iter().enumerate() {
        g[[i, y]] -= 1.0;
    }
    g /= n;
    let (grad, _) = net.backward_tape(&tape, &g)?;
    Ok((loss, grad))
}

impl Discriminator {
    pub fn classes(&self) -> usize {
        self.net.output_dim()
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    fn standardize(&self, b: &StateBatch) -> Result<Array2<f64>> {
        b.check_dim(self.mean.len())?;
        Ok(Array2::from_shape_fn((b.len(), b.dim()), |(i, j)| {
            (b.point(i)[j] - self.mean[j]) / self.std[j]
        }))
    }

    /// Class probabilities per row.
    pub fn predict_proba(&self, b: &StateBatch) -> Result<Array2<f64>> {
        Ok(log_softmax_rows(&self.net.forward_batch(&self.standardize(b)?)?).mapv(f64::exp))
    }

    pub fn predict(&self, b: &StateBatch) -> Result<Vec<usize>> {
        let p = self.predict_proba(b)?;
        Ok(p.rows()
            .into_iter()
            .map(|r| (0..r.len()).max_by(|&a, &c| r[a].total_cmp(&r[c])).unwrap())
            .collect())
    }

    pub fn accuracy(&self, b: &StateBatch, labels: &[usize]) -> Result<f64> {
        if labels.len() != b.len() || labels.is_empty() {
            return Err(invalid("need one label per state"));
        }
        let hits = self.predict(b)?.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

/// Stratified split: `fraction` of each label's rows (at least one)
/// become the test set. Returns (train rows, test rows). Rows are
/// shuffled once up front, so renaming labels yields the same split.
pub fn stratified_split(labels: &[usize], fraction: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(rng);
    let mut per_class = vec![Vec::new(); classes];
    for &i in &order {
        per_class[labels[i]].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for rows in per_class.iter().filter(|r| !r.is_empty()) {
        let k = ((rows.len() as f64 * fraction).round() as usize).clamp(1, rows.len().saturating_sub(1).max(1));
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Train a discriminator with cross-entropy and report held-out accuracy
/// (the discriminator success rate).
pub fn train_discriminator(
    states: &StateBatch,
    labels: &[usize],
    cfg: &DiscriminatorConfig,
    rng: &mut Rng,
) -> Result<(Discriminator, f64)> {
    if labels.len() != states.len() {
        return Err(invalid("need one label per state"));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let present = (0..classes).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(invalid("discriminator needs at least two labels"));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) || cfg.batch == 0 {
        return Err(invalid("test_fraction must lie in (0, 1) and batch must be positive"));
    }
    let (train, test) = stratified_split(labels, cfg.test_fraction, rng);
    let d = states.dim();
    let mut mean = vec![0.0; d];
    for &i in &train {
        for (m, v) in mean.iter_mut().zip(states.point(i)) {
            *m += v / train.len() as f64;
        }
    }
    let mut std = vec![0.0; d];
    for &i in &train {
        for ((s, v), m) in std.iter_mut().zip(states.point(i)).zip(&mean) {
            *s += (v - m).powi(2) / train.len() as f64;
        }
    }
    let std = std.into_iter().map(|v| v.sqrt().max(1e-6)).collect();

    let mut sizes = vec![d];
    sizes.extend(std::iter::repeat_n(cfg.hidden, cfg.depth));
    sizes.push(classes);
    let mut disc = Discriminator {
        net: Mlp::new(&sizes, OutputHead::Linear, rng)?,
        mean,
        std,
    };
    let mut opt = Adam::new(disc.net.num_params(), cfg.lr);
    let train_x = disc.standardize(&states.gather(&train)?)?;
    let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut updates = 0;
    let mut epoch = 0;
    while epoch < cfg.epochs || updates < cfg.min_updates {
        epoch += 1;
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch) {
            updates += 1;
            let x = train_x.select(ndarray::Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let (_, g) = cross_entropy_and_grad(&disc.net, &x, &y)?;
            opt.step(disc.net.params_mut(), &g)?;
        }
    }
    let test_labels: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let dsr = disc.accuracy(&states.gather(&test)?, &test_labels)?;
    Ok((disc, dsr))
}
