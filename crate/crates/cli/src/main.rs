use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cpg_actor::actors::ActorKind;
use cpg_actor::par::{self, Execution};
use cpg_actor::Error;
use cpg_actor_cli::{compare, eval_checkpoint, export_plots, run_dir, train_one, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "cpg-actor",
    version,
    about = "Train and compare oscillator-based actors on a hopping leg"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (`key = value` lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel rollout workers per run.
    #[arg(long)]
    workers: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Extra `key=value` config overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one actor for each seed.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        actor: Option<ActorKind>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, value_delimiter = ',', alias = "seeds")]
        seed: Vec<u64>,
    },
    /// Evaluate a checkpoint and dump metrics and trajectories.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        /// Use action means instead of sampling.
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train several actors over several seeds and tabulate final rewards.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        actors: Vec<ActorKind>,
        #[arg(long, value_delimiter = ',', alias = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Write histogram and trace CSVs for a finished run directory.
    ExportPlots {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common, fallback: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    let path = common.config.as_deref().or(fallback.filter(|p| p.exists()));
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    for o in &common.overrides {
        let Some((k, v)) = o.split_once('=') else {
            bail!("override `{o}` is not KEY=VALUE");
        };
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(w) = common.workers {
        cfg.ppo.n_workers = w;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Caps the rayon pool at the worker count and at `CPG_ACTOR_THREADS`.
fn execution(common: &Common, cfg: &ExperimentConfig) -> anyhow::Result<Execution> {
    if common.sequential {
        return Ok(Execution::Sequential);
    }
    let mut threads = cfg.ppo.n_workers;
    if let Ok(v) = std::env::var("CPG_ACTOR_THREADS") {
        let cap: usize = v
            .parse()
            .with_context(|| format!("CPG_ACTOR_THREADS=`{v}` is not a count"))?;
        threads = threads.min(cap.max(1));
    }
    par::init_threads(threads);
    Ok(Execution::Parallel)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            common,
            actor,
            steps,
            seed,
        } => {
            let mut cfg = load_config(&common, None)?;
            if let Some(a) = actor {
                cfg.actor.kind = a;
            }
            if let Some(s) = steps {
                cfg.total_steps = s;
            }
            if !seed.is_empty() {
                cfg.seeds = seed;
            }
            let exec = execution(&common, &cfg)?;
            for &s in &cfg.seeds {
                let dir = run_dir(&cfg.out_dir, cfg.actor.kind, s);
                let outcome = train_one(&cfg, s, &dir, exec)?;
                let last = outcome.logs.last().map_or(f64::NAN, |l| l.mean_ep_reward);
                println!(
                    "{} seed {s}: {} steps, last mean episode reward {last:.3}, run dir {}",
                    cfg.actor.kind,
                    outcome.checkpoint.steps,
                    dir.display()
                );
            }
        }
        Command::Eval {
            common,
            checkpoint,
            episodes,
            deterministic,
            seed,
        } => {
            let dir = checkpoint.parent().unwrap_or(Path::new("."));
            let cfg = load_config(&common, Some(&dir.join("config.cfg")))?;
            let out = common.out.clone().unwrap_or_else(|| dir.join("eval"));
            let m = eval_checkpoint(&cfg, &checkpoint, episodes, deterministic, seed, Some(&out))?;
            println!(
                "mean reward {:.3} ± {:.3}, peak height {:.3} m, smoothness {:.4} rad/step; wrote {}",
                m.mean_reward,
                m.std_reward,
                m.peak_height,
                m.smoothness,
                out.join("metrics.json").display()
            );
        }
        Command::Compare {
            common,
            actors,
            seeds,
            steps,
        } => {
            let mut cfg = load_config(&common, None)?;
            if let Some(s) = steps {
                cfg.total_steps = s;
            }
            if !seeds.is_empty() {
                cfg.seeds = seeds;
            }
            let exec = execution(&common, &cfg)?;
            let cmp = compare(&cfg, &actors, &cfg.seeds.clone(), &cfg.out_dir, exec)?;
            println!(
                "{:<14} {:<14} {:>12} {:>12} {:>8} {:>8}",
                "actor", "vs", "mean", "mean vs", "ratio", "p"
            );
            for r in &cmp.ratios {
                println!(
                    "{:<14} {:<14} {:>12.2} {:>12.2} {:>8.3} {:>8.4}",
                    r.actor_a.name(),
                    r.actor_b.name(),
                    r.mean_a,
                    r.mean_b,
                    r.ratio,
                    r.p_value
                );
            }
        }
        Command::ExportPlots { run, out } => {
            let out = out.unwrap_or_else(|| run.join("plots"));
            export_plots(&run, &out)?;
            println!("wrote plot data to {}", out.display());
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::Parse { .. }) => 2,
        Some(Error::NonFinite(_)) => 3,
        Some(Error::SchemaVersion { .. }) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
