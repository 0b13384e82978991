//! Diversity metrics: discriminator success rate (DSR), mean pairwise
//! projected Wasserstein distance, and trajectory export.

mod collect;
mod discriminator;
mod metrics;

pub use collect::{collect_archive, export_trajectories, labelled_states};
pub use discriminator::{
    cross_entropy_and_grad, stratified_split, train_discriminator, Discriminator, DiscriminatorConfig,
};
pub use metrics::{pairwise_wd_matrix, DiversityReport};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Policy, STATE_DIM};
use crate::error::Result;
use crate::ot::StateBatch;
use crate::rng::SeedTree;
use crate::sac::Actor;
use crate::train::StateSubspace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluation episodes per policy.
    pub episodes: usize,
    /// Use tanh(mean) actions instead of sampling.
    pub deterministic: bool,
    pub projections: usize,
    pub subspace: StateSubspace,
    pub discriminator: DiscriminatorConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 10,
            deterministic: true,
            projections: 16,
            subspace: StateSubspace::Full,
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

/// Roll out every policy, then score the archives with the pairwise
/// distance matrix and a held-out discriminator.
pub fn evaluate<P: Policy>(
    env: &EnvConfig,
    policies: &mut [P],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<(DiversityReport, Vec<StateBatch>)> {
    let tree = SeedTree::new(seed);
    let columns = cfg.subspace.columns(STATE_DIM);
    let archives = policies
        .iter_mut()
        .enumerate()
        .map(|(i, p)| {
            let eps = collect_archive(env, p, cfg.episodes, tree.child("archive").index(i as u64).key())?;
            let refs: Vec<&StateBatch> = eps.iter().collect();
            StateBatch::pooled(&refs)?.select_columns(&columns)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = pairwise_wd_matrix(&archives, cfg.projections, tree.child("wd").key())?;
    if archives.len() >= 2 {
        let (states, labels) = labelled_states(&archives)?;
        let mut rng = tree.child("discriminator").rng();
        let (_, dsr) = train_discriminator(&states, &labels, &cfg.discriminator, &mut rng)?;
        report.dsr = Some(dsr);
    }
    Ok((report, archives))
}

/// [`evaluate`] for actors, honouring `cfg.deterministic`.
pub fn evaluate_actors(
    env: &EnvConfig,
    actors: &[Actor],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<(DiversityReport, Vec<StateBatch>)> {
    let mut actors: Vec<Actor> = actors
        .iter()
        .cloned()
        .map(|mut a| {
            a.deterministic = cfg.deterministic;
            a
        })
        .collect();
    evaluate(env, &mut actors, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{RandomPolicy, ZeroPolicy};
    use crate::nn::check_gradient;
    use crate::nn::{Mlp, OutputHead};
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    fn cloud(rng: &mut crate::Rng, n: usize, center: [f64; 2], spread: f64) -> StateBatch {
        let d = Normal::new(0.0, spread.max(1e-12)).unwrap();
        let flat = (0..n).flat_map(|_| [center[0] + d.sample(rng), center[1] + d.sample(rng)]).collect();
        StateBatch::from_flat(2, flat).unwrap()
    }

    fn fast() -> DiscriminatorConfig {
        DiscriminatorConfig {
            hidden: 16,
            epochs: 20,
            ..DiscriminatorConfig::default()
        }
    }

    #[test]
    fn separable_constants_are_recognized() {
        let mut rng = SeedTree::new(1).rng();
        let a = StateBatch::new(&vec![vec![0.0, 0.0]; 100]).unwrap();
        let b = StateBatch::new(&vec![vec![1.0, 1.0]; 100]).unwrap();
        let (states, labels) = labelled_states(&[a, b]).unwrap();
        let (_, dsr) = train_discriminator(&states, &labels, &fast(), &mut rng).unwrap();
        assert!(dsr >= 0.99, "dsr {dsr}");
    }

    #[test]
    fn identical_sources_sit_at_chance() {
        let mut rng = SeedTree::new(2).rng();
        let a = cloud(&mut rng, 500, [0.0, 0.0], 1.0);
        let b = cloud(&mut rng, 500, [0.0, 0.0], 1.0);
        let (states, labels) = labelled_states(&[a, b]).unwrap();
        let (_, dsr) = train_discriminator(&states, &labels, &fast(), &mut rng).unwrap();
        assert!((dsr - 0.5).abs() <= 0.1, "dsr {dsr}");
    }

    #[test]
    fn discriminator_rejects_single_label_and_normalizes() {
        let mut rng = SeedTree::new(3).rng();
        let a = cloud(&mut rng, 20, [0.0, 0.0], 1.0);
        assert!(train_discriminator(&a, &[0; 20], &fast(), &mut rng).is_err());
        let b = cloud(&mut rng, 20, [3.0, 0.0], 1.0);
        let (states, labels) = labelled_states(&[a, b]).unwrap();
        let (disc, _) = train_discriminator(&states, &labels, &fast(), &mut rng).unwrap();
        for row in disc.predict_proba(&states).unwrap().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
        assert_eq!(disc.classes(), 2);
    }

    #[test]
    fn dsr_ignores_label_names() {
        let mut rng = SeedTree::new(4).rng();
        let archives: Vec<StateBatch> =
            (0..3).map(|k| cloud(&mut rng, 300, [k as f64 * 0.8, 0.0], 0.5)).collect();
        let perm = [2, 0, 1];
        let (states, labels) = labelled_states(&archives).unwrap();
        let permuted: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        for seed in 0..3 {
            let (_, a) = train_discriminator(&states, &labels, &fast(), &mut SeedTree::new(seed).rng()).unwrap();
            let (_, b) = train_discriminator(&states, &permuted, &fast(), &mut SeedTree::new(seed).rng()).unwrap();
            assert!((a - b).abs() <= 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn stratified_split_keeps_every_label() {
        let mut rng = SeedTree::new(5).rng();
        let labels: Vec<usize> = (0..100).map(|i| if i < 90 { 0 } else { 1 }).collect();
        let (train, test) = stratified_split(&labels, 0.2, &mut rng);
        assert_eq!(train.len() + test.len(), 100);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), 18);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 2);
    }

    #[test]
    fn pairwise_matrix_examples() {
        let a = StateBatch::new(&[vec![0.0, 0.0]]).unwrap();
        let b = StateBatch::new(&[vec![3.0, 4.0]]).unwrap();
        let r = pairwise_wd_matrix(&[a.clone(), b], 8, 1).unwrap();
        assert!((r.wd - 5.0).abs() < 1e-12);
        assert_eq!(r.matrix[0][0], 0.0);

        let r = pairwise_wd_matrix(&[a.clone(), a.clone(), a.clone()], 8, 1).unwrap();
        assert_eq!(r.wd, 0.0);
        assert!(r.matrix.iter().flatten().all(|v| *v == 0.0));
        let c = StateBatch::new(&[vec![0.0]]).unwrap();
        assert!(pairwise_wd_matrix(&[a, c], 8, 1).is_err());
    }

    #[test]
    fn pairwise_matrix_is_symmetric_and_reproducible() {
        let mut rng = SeedTree::new(6).rng();
        let archives: Vec<StateBatch> = (0..5)
            .map(|k| {
                let x = rng.random_range(-3.0..3.0);
                cloud(&mut rng, 30 + k * 7, [x, 1.0], 1.0)
            })
            .collect();
        let r = pairwise_wd_matrix(&archives, 16, 9).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((r.matrix[i][j] - r.matrix[j][i]).abs() < 1e-9);
            }
        }
        let upper: Vec<f64> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).map(|(i, j)| r.matrix[i][j]).collect();
        assert_eq!(r.wd, upper.iter().sum::<f64>() / upper.len() as f64);
        assert_eq!(r, pairwise_wd_matrix(&archives, 16, 9).unwrap());
    }

    #[test]
    fn duplicate_policy_changes_mean_predictably() {
        let mut rng = SeedTree::new(7).rng();
        let archives: Vec<StateBatch> = (0..3).map(|k| cloud(&mut rng, 40, [k as f64 * 2.0, 0.0], 0.3)).collect();
        let base = pairwise_wd_matrix(&archives, 16, 3).unwrap();
        let mut more = archives.clone();
        more.push(archives[1].clone());
        let grown = pairwise_wd_matrix(&more, 16, 3).unwrap();
        // the copy adds one zero pair; its other two pairs reuse existing
        // distributions but fresh directions, so recompute them here
        assert!(grown.matrix[1][3].abs() < 1e-12);
        let expected = (base.wd * 3.0 + grown.matrix[0][3] + grown.matrix[2][3] + 0.0) / 6.0;
        assert!((grown.wd - expected).abs() < 1e-12);
        assert!((grown.matrix[0][3] - base.matrix[0][1]).abs() < 0.05 * base.matrix[0][1]);
    }

    #[test]
    fn report_text_round_trip() {
        let a = StateBatch::new(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = StateBatch::new(&[vec![3.0, 4.0]]).unwrap();
        let mut r = pairwise_wd_matrix(&[a, b], 4, 2).unwrap();
        r.dsr = Some(0.875);
        let text = r.to_text();
        assert!(text.starts_with("policies 2\ndsr 0.875\n"));
        assert_eq!(DiversityReport::from_text(&text).unwrap(), r);
        assert!(DiversityReport::from_text("policies x").is_err());
    }

    #[test]
    fn trajectory_export_contracts() {
        let dir = tempfile::tempdir().unwrap();
        let env = EnvConfig::free_run();
        let net = Mlp::zeros(&[4, 8, 4], OutputHead::Linear).unwrap();
        let still = Actor::from_net(net, vec![10.0, 10.0, 0.5, 0.5], 0.1).unwrap();
        let mut rng = SeedTree::new(8).rng();
        let moving = Actor::new(vec![10.0, 10.0, 0.5, 0.5], 2, 0.1, 8, 2, &mut rng).unwrap();
        let actors: Vec<Actor> = std::iter::once(still).chain(std::iter::repeat_n(moving, 9)).collect();
        let files = export_trajectories(&env, &actors, 3, true, 1, dir.path()).unwrap();
        assert_eq!(files.len(), 30);
        let first = std::fs::read_to_string(&files[0]).unwrap();
        let rows: Vec<&str> = first.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), env.horizon);
        assert!(rows.iter().all(|r| r.split_whitespace().skip(1).all(|v| v == "0.0")));
        let again = tempfile::tempdir().unwrap();
        let files2 = export_trajectories(&env, &actors, 3, true, 99, again.path()).unwrap();
        for (a, b) in files.iter().zip(&files2) {
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
    }

    #[test]
    fn evaluate_random_and_still_policies() {
        let env = EnvConfig::free_run();
        let cfg = EvalConfig {
            episodes: 3,
            discriminator: fast(),
            ..EvalConfig::default()
        };
        let (report, archives) = evaluate(&env, &mut [ZeroPolicy, ZeroPolicy], &cfg, 1).unwrap();
        assert_eq!(report.wd, 0.0);
        assert_eq!(archives[0].len(), 60);
        let mut randoms = vec![RandomPolicy { a_max: 0.1 }; 3];
        let (report, _) = evaluate(&env, &mut randoms, &cfg, 1).unwrap();
        assert!(report.wd > 0.0);
        assert_eq!(report.samples, vec![60; 3]);
    }

    #[test]
    fn cross_entropy_gradient() {
        let mut rng = SeedTree::new(9).rng();
        let net = Mlp::new(&[3, 8, 8, 4], OutputHead::Linear, &mut rng).unwrap();
        let x = ndarray::Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
        let y = vec![0, 1, 2, 3, 1, 0];
        let (_, g) = cross_entropy_and_grad(&net, &x, &y).unwrap();
        let rep = check_gradient("discriminator", net.params(), &g, 1e-5, 1e-4, |p| {
            let n = Mlp::from_params(net.sizes(), OutputHead::Linear, p.to_vec()).unwrap();
            cross_entropy_and_grad(&n, &x, &y).unwrap().0
        });
        assert!(rep.passed(), "{rep:?}");
    }
}
