use std::path::Path;

use wurl_cli::{
    cmd_estimate, cmd_eval, cmd_gradcheck, cmd_hierarchy, cmd_incremental, cmd_train, Kind, Manifest, RunConfig, METRICS,
};

fn small(kind: Kind, out: &Path, extra: &str) -> RunConfig {
    let text = format!(
        "out = {out:?}\nseed = 5\npolicies = 3\nepisodes = 45\ncheckpoint_every = 15\ntrajectory_episodes = 1\n\
         {extra}\n[eval]\nepisodes = 3\n[incremental]\ngrow_to = 3\nepisodes_per_policy = 20\n"
    );
    RunConfig::from_toml_str(&text).unwrap().resolve(kind).unwrap()
}

#[test]
fn train_run_directory_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("train");
    let run = cmd_train(&small(Kind::Train, &out, "")).unwrap();
    assert_eq!(run.result.report.policies, 3);
    assert!(run.result.baseline.is_some());
    for f in ["config.toml", "env.toml", "diversity.txt", "baseline.txt", METRICS, "policies/trainer.ckpt"] {
        assert!(run.manifest.file(f).is_some(), "{f} missing from manifest");
    }
    for i in 0..3 {
        assert!(run.manifest.file(&format!("policies/policy_{i:02}.ckpt")).is_some());
        assert!(run.manifest.file(&format!("archives/policy_{i:02}.txt")).is_some());
    }
    let metrics = std::fs::read_to_string(out.join(METRICS)).unwrap();
    assert_eq!(metrics.lines().count(), 45);
    assert_eq!(Manifest::load(&out).unwrap(), run.manifest);
    assert_eq!(run.manifest.seed, 5);

    // the snapshot alone reruns the same experiment
    let mut again = RunConfig::load(&out.join("config.toml")).unwrap();
    again.out = dir.path().join("again");
    let again = cmd_train(&again.resolve(Kind::Train).unwrap()).unwrap();
    assert_eq!(std::fs::read(again.dir.join(METRICS)).unwrap(), metrics.as_bytes());
}

#[test]
fn resume_continues_and_corruption_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    cmd_train(&small(Kind::Train, &out, "")).unwrap();
    let mut longer = small(Kind::Train, &out, "resume = true\n");
    longer.train.episodes = 60;
    cmd_train(&longer).unwrap();
    let text = std::fs::read_to_string(out.join(METRICS)).unwrap();
    assert_eq!(text.lines().count(), 60);
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["episode"], 59);

    std::fs::write(out.join("policies/trainer.ckpt"), b"not a checkpoint").unwrap();
    let err = cmd_train(&longer).unwrap_err().to_string();
    assert!(err.contains("checkpoint"), "{err}");
}

#[test]
fn eval_and_incremental_reference_their_parent() {
    let dir = tempfile::tempdir().unwrap();
    let parent = dir.path().join("parent");
    cmd_train(&small(Kind::Train, &parent, "")).unwrap();

    let from = format!("from = {parent:?}\n");
    let ev = cmd_eval(&small(Kind::Eval, &dir.path().join("ev"), &from)).unwrap();
    assert_eq!(ev.result.report.policies, 3);
    assert_eq!(ev.manifest.parent.as_deref(), Some(parent.to_str().unwrap()));

    let mut cfg = small(Kind::Incremental, &dir.path().join("inc"), &from);
    cfg.incremental.grow_to = 4;
    let run = cmd_incremental(&cfg).unwrap();
    assert_eq!(run.manifest.parent.as_deref(), Some(parent.to_str().unwrap()));
    assert_eq!(run.result.stages.len(), 1);
    assert_eq!(run.result.stages[0].policies, 4);
    assert!(run.result.stages[0].frozen_unchanged);
    assert_eq!(run.result.report.policies, 4);

    cfg.incremental.grow_to = 3;
    assert!(cmd_incremental(&cfg).is_err());
}

#[test]
fn incremental_from_scratch_on_the_maze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Kind::Incremental, &dir.path().join("m"), "env = \"tree_maze\"\n");
    let run = cmd_incremental(&cfg).unwrap();
    let sizes: Vec<usize> = run.result.stages.iter().map(|s| s.policies).collect();
    assert_eq!(sizes, [2, 3]);
    assert!(run.result.stages.iter().all(|s| s.frozen_unchanged && s.min_wd_to_archive > 0.0));
    assert!(run.manifest.parent.is_none());
}

#[test]
fn untrained_random_policies_score_below_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Kind::Train, &dir.path().join("t"), "");
    cfg.train.episodes = 300;
    let trained = cmd_train(&cfg).unwrap();
    let random = cmd_eval(&small(Kind::Eval, &dir.path().join("e"), "")).unwrap();
    assert!(random.result.report.wd < trained.result.report.wd);
}

#[test]
fn hierarchy_over_saved_skills_keeps_them_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let parent = dir.path().join("skills");
    cmd_train(&small(Kind::Train, &parent, "")).unwrap();
    let cfg = small(
        Kind::Hierarchy,
        &dir.path().join("h"),
        &format!("from = {parent:?}\n[hierarchy]\niterations = 3\nbaseline_episodes = 4\n"),
    );
    let run = cmd_hierarchy(&cfg).unwrap();
    assert_eq!(run.result.curve.len(), 3);
    let curve = std::fs::read_to_string(run.dir.join(METRICS)).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert!(curve.contains("mean_return"));
    assert!(run.manifest.file("meta_policy.ckpt").is_some());
}

#[test]
fn estimate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let extra = "[study]\nseparations = [0.0, 16.0]\nrepeats = 4\ndual_repeats = 1\ndual_steps = 30\nsamples = 64\n";
    let a = cmd_estimate(&small(Kind::Estimate, &dir.path().join("a"), extra)).unwrap();
    let b = cmd_estimate(&small(Kind::Estimate, &dir.path().join("b"), extra)).unwrap();
    assert_eq!(
        std::fs::read(a.dir.join(METRICS)).unwrap(),
        std::fs::read(b.dir.join(METRICS)).unwrap()
    );
    assert_eq!(a.result.rows.len(), 8);
    for m in ["swd", "pwd"] {
        assert!(a.result.get(m, 0.0).unwrap().mean > 0.0);
    }
}

#[test]
fn gradcheck_lists_every_loss_and_catches_a_bad_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Kind::Gradcheck, &dir.path().join("g"), "");
    let run = cmd_gradcheck(&cfg, None).unwrap();
    assert_eq!(run.result.len(), wurl_core::gradcheck::CHECKS.len());
    assert!(run.result.iter().all(|r| r.passed()));
    let text = std::fs::read_to_string(run.dir.join("gradcheck.txt")).unwrap();
    for name in wurl_core::gradcheck::CHECKS {
        assert!(text.contains(name));
    }
    let bad = cmd_gradcheck(&cfg, Some("sac_critic")).unwrap();
    let failed: Vec<&str> = bad.result.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    assert_eq!(failed, ["sac_critic"]);
}
