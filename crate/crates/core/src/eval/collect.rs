use std::path::{Path, PathBuf};

use crate::env::{rollout, EnvConfig, ParticleEnv, Policy};
use crate::error::Result;
use crate::ot::StateBatch;
use crate::rng::SeedTree;
use crate::sac::Actor;

/// Per-episode visited states of `policy`.
pub fn collect_archive<P: Policy + ?Sized>(
    env: &EnvConfig,
    policy: &mut P,
    episodes: usize,
    seed: u64,
) -> Result<Vec<StateBatch>> {
    let mut e = ParticleEnv::new(env.clone())?;
    let tree = SeedTree::new(seed);
    (0..episodes)
        .map(|k| {
            let mut rng = tree.index(k as u64).rng();
            rollout(&mut e, policy, env.horizon, &mut rng)?.states()
        })
        .collect()
}

/// Pooled archives plus one label per state, for the discriminator.
pub fn labelled_states(archives: &[StateBatch]) -> Result<(StateBatch, Vec<usize>)> {
    let refs: Vec<&StateBatch> = archives.iter().collect();
    let pooled = StateBatch::pooled(&refs)?;
    let labels = archives
        .iter()
        .enumerate()
        .flat_map(|(l, a)| std::iter::repeat_n(l, a.len()))
        .collect();
    Ok((pooled, labels))
}

/// Roll out every actor `episodes` times and write one record file per
/// (policy, episode) into `dir`.
pub fn export_trajectories(
    env: &EnvConfig,
    actors: &[Actor],
    episodes: usize,
    deterministic: bool,
    seed: u64,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut e = ParticleEnv::new(env.clone())?;
    let tree = SeedTree::new(seed).child("trajectories");
    let mut files = Vec::new();
    for (i, actor) in actors.iter().enumerate() {
        let mut actor = actor.clone();
        actor.deterministic = deterministic;
        for k in 0..episodes {
            let mut rng = tree.index(i as u64).index(k as u64).rng();
            let ep = rollout(&mut e, &mut actor, env.horizon, &mut rng)?;
            let path = dir.join(format!("policy_{i:02}_episode_{k:02}.txt"));
            ep.write_records(&path)?;
            files.push(path);
        }
    }
    Ok(files)
}
