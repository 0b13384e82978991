//! One function per subcommand. Each writes a run directory and returns
//! its manifest together with the numbers it produced.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use wurl_core::env::{EnvConfig, RandomPolicy};
use wurl_core::eval::{collect_archive, evaluate, evaluate_actors, export_trajectories, DiversityReport};
use wurl_core::gradcheck::{format_reports, run_suite};
use wurl_core::hrl::{meta_train, HierarchyOutcome, MetaEnv};
use wurl_core::nn::{Checkpoint, GradCheckReport};
use wurl_core::ot::{projected_wd, StateBatch};
use wurl_core::sac::{actor_checkpoint, actor_from_checkpoint, Actor};
use wurl_core::study::{run_study, StudyReport};
use wurl_core::train::{stay_at_center, EpisodeMetrics, FrozenPolicy, Trainer};
use wurl_core::SeedTree;

use crate::config::{resolve_env, Kind, RunConfig};
use crate::error::{io_err, CliError, Result};
use crate::rundir::{Manifest, RunDir};

pub const METRICS: &str = "metrics.jsonl";

#[derive(Debug, Clone)]
pub struct Run<T> {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub result: T,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub report: DiversityReport,
    /// Same evaluation applied to random-action policies.
    pub baseline: Option<DiversityReport>,
}

/// One growth step of incremental training.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    /// Policy count after this stage.
    pub policies: usize,
    /// Projected distance from the new policy's states to the nearest
    /// frozen archive.
    pub min_wd_to_archive: f64,
    /// Every frozen policy's checkpoint bytes match those taken when it
    /// was frozen.
    pub frozen_unchanged: bool,
}

#[derive(Debug, Clone)]
pub struct IncrementalResult {
    pub stages: Vec<Stage>,
    pub report: DiversityReport,
}

fn start(cfg: &RunConfig) -> Result<(RunDir, EnvConfig)> {
    let run = RunDir::create(&cfg.out)?;
    let env = cfg.env_config()?;
    // the snapshot carries its environments so the run directory alone
    // is enough to rerun
    let mut snap = cfg.clone();
    run.write("env.toml", env.to_toml_string())?;
    snap.env = "env.toml".into();
    if cfg.kind == Some(Kind::Hierarchy) {
        run.write("task_env.toml", resolve_env(&cfg.hierarchy.task_env)?.to_toml_string())?;
        snap.hierarchy.task_env = "task_env.toml".into();
    }
    run.write("config.toml", snap.to_toml_string())?;
    Ok((run, env))
}

fn finish<T>(run: RunDir, cfg: &RunConfig, parent: Option<&Path>, result: T) -> Result<Run<T>> {
    let dir = run.root().to_path_buf();
    let kind = cfg.kind.map_or("unknown", Kind::name);
    let manifest = run.finish(kind, cfg.seed, "config.toml", parent)?;
    Ok(Run { dir, manifest, result })
}

fn seed_for(cfg: &RunConfig, label: &str) -> u64 {
    SeedTree::new(cfg.seed).child(label).key()
}

fn append_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    for line in lines {
        writeln!(f, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Actors saved as `policies/policy_XX.ckpt` in a run directory.
pub fn load_actors(run: &Path) -> Result<Vec<Actor>> {
    let mut actors = Vec::new();
    loop {
        let path = run.join("policies").join(format!("policy_{:02}.ckpt", actors.len()));
        if !path.exists() {
            break;
        }
        actors.push(actor_from_checkpoint(&Checkpoint::load(&path)?)?);
    }
    if actors.is_empty() {
        return Err(CliError::Config(format!("no policy checkpoints under {}", run.display())));
    }
    Ok(actors)
}

/// Score `actors`, writing archives, trajectories and the diversity
/// report; optionally score random-action policies as well.
fn evaluate_into(run: &mut RunDir, env: &EnvConfig, actors: &[Actor], cfg: &RunConfig) -> Result<TrainResult> {
    let t0 = Instant::now();
    let seed = seed_for(cfg, "eval");
    let (report, archives) = evaluate_actors(env, actors, &cfg.eval, seed)?;
    for (i, a) in archives.iter().enumerate() {
        run.write(&format!("archives/policy_{i:02}.txt"), a.to_text())?;
    }
    export_trajectories(env, actors, cfg.trajectory_episodes, cfg.eval.deterministic, seed, &run.path("trajectories"))?;
    run.write("diversity.txt", report.to_text())?;
    let baseline = if cfg.baseline {
        let mut randoms = vec![RandomPolicy { a_max: env.a_max }; actors.len()];
        let (b, _) = evaluate(env, &mut randoms, &cfg.eval, seed)?;
        run.write("baseline.txt", b.to_text())?;
        Some(b)
    } else {
        None
    };
    run.record("eval", t0);
    Ok(TrainResult { report, baseline })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Run<TrainResult>> {
    let (mut run, env) = start(cfg)?;
    let state = run.path("policies");
    let metrics = run.path(METRICS);
    let t0 = Instant::now();
    let seed = seed_for(cfg, "train");
    let mut trainer = if cfg.resume && state.join("trainer.ckpt").exists() {
        let t = Trainer::resume(env.clone(), cfg.train.clone(), seed, &state)?;
        // drop log lines written after the saved state
        let text = std::fs::read_to_string(&metrics).unwrap_or_default();
        let kept: Vec<&str> = text.lines().take(t.episodes_done()).collect();
        run.write(METRICS, kept.iter().map(|l| format!("{l}\n")).collect::<String>())?;
        t
    } else {
        run.write(METRICS, "")?;
        Trainer::new(env.clone(), cfg.train.clone(), seed)?
    };
    let mut logged = 0;
    let mut flush = |t: &Trainer| -> Result<()> {
        append_lines(&metrics, t.metrics()[logged..].iter().map(EpisodeMetrics::to_json_line))?;
        logged = t.metrics().len();
        t.save(&state)?;
        Ok(())
    };
    while trainer.episodes_done() < cfg.train.episodes {
        trainer.run_episode()?;
        if cfg.checkpoint_every > 0 && trainer.episodes_done() % cfg.checkpoint_every == 0 {
            flush(&trainer)?;
        }
    }
    flush(&trainer)?;
    run.record("train", t0);
    let actors: Vec<Actor> = (0..trainer.learners().len()).map(|l| trainer.actor(l).clone()).collect();
    let result = evaluate_into(&mut run, &env, &actors, cfg)?;
    finish(run, cfg, None, result)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<Run<TrainResult>> {
    let (mut run, env) = start(cfg)?;
    let seed = seed_for(cfg, "eval");
    let result = match &cfg.from {
        Some(from) => {
            let actors = load_actors(from)?;
            evaluate_into(&mut run, &env, &actors, cfg)?
        }
        None => {
            let t0 = Instant::now();
            let mut randoms = vec![RandomPolicy { a_max: env.a_max }; cfg.train.policies];
            let (report, archives) = evaluate(&env, &mut randoms, &cfg.eval, seed)?;
            for (i, a) in archives.iter().enumerate() {
                run.write(&format!("archives/policy_{i:02}.txt"), a.to_text())?;
            }
            run.write("diversity.txt", report.to_text())?;
            run.record("eval", t0);
            TrainResult { report, baseline: None }
        }
    };
    let parent = cfg.from.clone();
    finish(run, cfg, parent.as_deref(), result)
}

fn checkpoint_bytes(actor: &Actor) -> Vec<u8> {
    actor_checkpoint(actor).to_bytes()
}

pub fn cmd_incremental(cfg: &RunConfig) -> Result<Run<IncrementalResult>> {
    let (mut run, env) = start(cfg)?;
    let t0 = Instant::now();
    let tree = SeedTree::new(cfg.seed).child("incremental");
    let mut frozen: Vec<FrozenPolicy> = match &cfg.from {
        Some(parent) => Trainer::resume(env.clone(), cfg.train.clone(), tree.child("parent").key(), &parent.join("policies"))?
            .frozen_policies(),
        None => {
            let mut still = stay_at_center(&env, cfg.train.sac.hidden, cfg.train.sac.depth)?;
            let archive = collect_archive(&env, &mut still, cfg.train.recent_episodes, tree.child("seed_policy").key())?;
            vec![FrozenPolicy { actor: still, archive }]
        }
    };
    if frozen.len() >= cfg.incremental.grow_to {
        return Err(CliError::Config(format!(
            "already {} policies, nothing to grow to {}",
            frozen.len(),
            cfg.incremental.grow_to
        )));
    }
    let mut snapshots: Vec<Vec<u8>> = frozen.iter().map(|f| checkpoint_bytes(&f.actor)).collect();
    let metrics = run.write(METRICS, "")?;
    let mut stages = Vec::new();
    let mut last = None;
    while frozen.len() < cfg.incremental.grow_to {
        let n = frozen.len();
        let node = tree.child("stage").index(n as u64);
        let stage_cfg = wurl_core::train::TrainConfig {
            episodes: cfg.incremental.episodes_per_policy,
            ..cfg.train.clone()
        };
        let mut t = Trainer::with_frozen(env.clone(), stage_cfg, node.key(), frozen)?;
        t.train()?;
        append_lines(
            &metrics,
            t.metrics().iter().map(|m| {
                let mut v = serde_json::to_value(m).expect("metrics always serialize");
                v["stage"] = n.into();
                v.to_string()
            }),
        )?;
        let frozen_unchanged = (0..n).all(|l| checkpoint_bytes(t.actor(l)) == snapshots[l]);
        let mut fresh = t.actor(n).clone();
        fresh.deterministic = cfg.eval.deterministic;
        let visits = collect_archive(&env, &mut fresh, cfg.eval.episodes, node.child("probe").key())?;
        let visits = StateBatch::pooled(&visits.iter().collect::<Vec<_>>())?;
        let mut rng = node.child("distance").rng();
        let mut min_wd = f64::INFINITY;
        for f in t.frozen_policies().iter().take(n) {
            let archive = StateBatch::pooled(&f.archive.iter().collect::<Vec<_>>())?;
            min_wd = min_wd.min(projected_wd(&visits, &archive, cfg.train.projections, &mut rng)?);
        }
        let stage = Stage {
            policies: n + 1,
            min_wd_to_archive: min_wd,
            frozen_unchanged,
        };
        append_lines(&run.path("stages.jsonl"), [serde_json::to_string(&stage).expect("stage serializes")])?;
        stages.push(stage);
        snapshots.push(checkpoint_bytes(t.actor(n)));
        frozen = t.frozen_policies();
        last = Some(t);
    }
    let last = last.expect("at least one stage ran");
    last.save(&run.path("policies"))?;
    run.record("incremental", t0);
    let actors: Vec<Actor> = frozen.into_iter().map(|f| f.actor).collect();
    let report = evaluate_into(&mut run, &env, &actors, cfg)?.report;
    let parent = cfg.from.clone();
    finish(run, cfg, parent.as_deref(), IncrementalResult { stages, report })
}

pub fn cmd_hierarchy(cfg: &RunConfig) -> Result<Run<HierarchyOutcome>> {
    let (mut run, env) = start(cfg)?;
    let t0 = Instant::now();
    let skills = match &cfg.from {
        Some(from) => load_actors(from)?,
        None => {
            let mut t = Trainer::new(env.clone(), cfg.train.clone(), seed_for(cfg, "skills"))?;
            t.train()?;
            t.save(&run.path("policies"))?;
            append_lines(&run.path("skills.jsonl"), t.metrics().iter().map(EpisodeMetrics::to_json_line))?;
            (0..t.learners().len()).map(|l| t.actor(l).clone()).collect()
        }
    };
    run.record("skills", t0);
    let t0 = Instant::now();
    let before: Vec<Vec<u8>> = skills.iter().map(checkpoint_bytes).collect();
    let task = resolve_env(&cfg.hierarchy.task_env)?;
    let mut menv = MetaEnv::new(task, skills, cfg.hierarchy.macro_horizon)?;
    let h = &cfg.hierarchy;
    let (policy, outcome) = meta_train(&mut menv, h.ppo.clone(), h.iterations, h.baseline_episodes, seed_for(cfg, "meta"))?;
    let after: Vec<Vec<u8>> = menv.sub_policies().iter().map(checkpoint_bytes).collect();
    if before != after {
        return Err(CliError::Config("a sub-policy changed during meta-training".into()));
    }
    run.record("meta", t0);
    run.write(
        METRICS,
        outcome
            .curve
            .iter()
            .map(|p| serde_json::to_string(p).expect("curve serializes") + "\n")
            .collect::<String>(),
    )?;
    run.write(
        "hierarchy.txt",
        format!(
            "random_mean {}\nrandom_std {}\nfinal_return {}\n",
            outcome.random_mean, outcome.random_std, outcome.final_return
        ),
    )?;
    let mut ck = Checkpoint::new();
    ck.push_network("meta.policy", &policy.policy);
    ck.push_network("meta.value", &policy.value);
    ck.save(&run.path("meta_policy.ckpt"))?;
    let parent = cfg.from.clone();
    finish(run, cfg, parent.as_deref(), outcome)
}

#[derive(Serialize)]
struct EstimateLine<'a> {
    separation: f64,
    method: &'a str,
    mean: f64,
    std: f64,
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<Run<StudyReport>> {
    let (mut run, _) = start(cfg)?;
    let t0 = Instant::now();
    let report = run_study(&cfg.study, seed_for(cfg, "estimate"))?;
    run.record("study", t0);
    for r in &report.rows {
        run.push_timing(&format!("{} @ {}", r.method, r.separation), r.seconds);
    }
    let lines: String = report
        .rows
        .iter()
        .map(|r| {
            let line = EstimateLine {
                separation: r.separation,
                method: &r.method,
                mean: r.mean,
                std: r.std,
            };
            serde_json::to_string(&line).expect("estimate serializes") + "\n"
        })
        .collect();
    run.write(METRICS, lines)?;
    run.write("estimates.txt", report.to_text())?;
    finish(run, cfg, None, report)
}

/// `perturb` names a check whose analytic gradient is nudged first; it
/// exists to prove the suite can fail.
pub fn cmd_gradcheck(cfg: &RunConfig, perturb: Option<&str>) -> Result<Run<Vec<GradCheckReport>>> {
    let (mut run, _) = start(cfg)?;
    let t0 = Instant::now();
    let reports = run_suite(cfg.seed, perturb)?;
    run.record("gradcheck", t0);
    run.write("gradcheck.txt", format_reports(&reports))?;
    finish(run, cfg, None, reports)
}
