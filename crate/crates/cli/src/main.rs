use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use wurl_cli::{
    cmd_estimate, cmd_eval, cmd_gradcheck, cmd_hierarchy, cmd_incremental, cmd_train, Kind, Overrides, RunConfig,
};
use wurl_core::gradcheck::format_reports;
use wurl_core::train::RewardMode;

/// Wasserstein unsupervised RL experiments on 2-D particle arenas.
///
/// Every flag can also be set through the environment variable shown in
/// its help (prefix WURL_). Flags beat environment variables, which beat
/// the config file.
#[derive(Parser)]
#[command(name = "wurl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run config; omitted fields take their defaults.
    #[arg(long, global = true, env = "WURL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "WURL_SEED")]
    seed: Option<u64>,
    /// Run directory to write.
    #[arg(long, global = true, env = "WURL_OUT")]
    out: Option<PathBuf>,
    /// Built-in arena (free_run, tree_maze, free_run_navigation) or an
    /// environment TOML file.
    #[arg(long, global = true, env = "WURL_ENV")]
    env: Option<String>,
    #[arg(long, global = true, env = "WURL_POLICIES")]
    policies: Option<usize>,
    /// Reward mode: tf1, tf2, pwd or apwd.
    #[arg(long, global = true, env = "WURL_MODE", value_parser = parse_mode)]
    mode: Option<RewardMode>,
    /// Projection directions for distance estimates.
    #[arg(long, global = true, env = "WURL_PROJECTIONS")]
    projections: Option<usize>,
    /// Total training episodes across all policies.
    #[arg(long, global = true, env = "WURL_EPISODES")]
    episodes: Option<usize>,
    /// Earlier run directory whose policies are reused.
    #[arg(long, global = true, env = "WURL_FROM")]
    from: Option<PathBuf>,
    /// Continue a train run from its last saved state.
    #[arg(long, global = true, env = "WURL_RESUME")]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the distance estimators on Gaussian pairs.
    Estimate,
    /// Train a set of diverse policies.
    Train,
    /// Add policies one at a time against a frozen archive.
    Incremental,
    /// Score saved (or random-action) policies.
    Eval,
    /// Train a meta-policy over saved skills on a navigation task.
    Hierarchy,
    /// Finite-difference check of every gradient.
    Gradcheck {
        /// Corrupt one named gradient (negative control).
        #[arg(long, hide = true)]
        perturb: Option<String>,
    },
}

fn parse_mode(s: &str) -> Result<RewardMode, String> {
    RewardMode::parse(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let kind = match cli.command {
        Command::Estimate => Kind::Estimate,
        Command::Train => Kind::Train,
        Command::Incremental => Kind::Incremental,
        Command::Eval => Kind::Eval,
        Command::Hierarchy => Kind::Hierarchy,
        Command::Gradcheck { .. } => Kind::Gradcheck,
    };
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    let c = &cli.common;
    cfg.apply(&Overrides {
        seed: c.seed,
        out: c.out.clone(),
        env: c.env.clone(),
        policies: c.policies,
        mode: c.mode,
        projections: c.projections,
        episodes: c.episodes,
        from: c.from.clone(),
        resume: c.resume,
    });
    let cfg = cfg.resolve(kind)?;

    match &cli.command {
        Command::Estimate => {
            let run = cmd_estimate(&cfg)?;
            print!("{}", run.result.to_text());
            println!("written to {}", run.dir.display());
        }
        Command::Train | Command::Eval => {
            let run = if kind == Kind::Train { cmd_train(&cfg)? } else { cmd_eval(&cfg)? };
            let r = &run.result.report;
            let dsr = r.dsr.map_or("n/a".to_string(), |d| format!("{d:.3}"));
            println!("policies {}  dsr {dsr}  mean wd {:.3}  min wd {:.3}", r.policies, r.wd, r.min_wd());
            if let Some(b) = &run.result.baseline {
                println!("random-action baseline: mean wd {:.3}", b.wd);
            }
            println!("written to {}", run.dir.display());
        }
        Command::Incremental => {
            let run = cmd_incremental(&cfg)?;
            for s in &run.result.stages {
                println!(
                    "n = {}  distance to archive {:.3}  frozen unchanged {}",
                    s.policies, s.min_wd_to_archive, s.frozen_unchanged
                );
            }
            println!("written to {}", run.dir.display());
        }
        Command::Hierarchy => {
            let run = cmd_hierarchy(&cfg)?;
            let o = &run.result;
            println!(
                "random meta {:.2} ± {:.2}  trained meta {:.2}",
                o.random_mean, o.random_std, o.final_return
            );
            println!("written to {}", run.dir.display());
        }
        Command::Gradcheck { perturb } => {
            let run = cmd_gradcheck(&cfg, perturb.as_deref())?;
            print!("{}", format_reports(&run.result));
            return Ok(run.result.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}
