use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cpg_actor::actors::{build_actor, ActorKind};
use cpg_actor::checkpoint::Checkpoint;
use cpg_actor::eval::{evaluate, EvalConfig, EvalMetrics};
use cpg_actor::hopper::trajectory::write_csv;
use cpg_actor::par::Execution;
use cpg_actor::ppo::{TrainOutcome, TrainSettings, Trainer};
use cpg_actor::stats;
use cpg_actor::{Error, Result};
use serde_json::json;

use crate::config::ExperimentConfig;

/// `<out>/<actor>/seed-<seed>`.
pub fn run_dir(out: &Path, kind: ActorKind, seed: u64) -> PathBuf {
    out.join(kind.name()).join(format!("seed-{seed}"))
}

/// Trains one seed into `dir`, writing the resolved config next to the logs.
pub fn train_one(cfg: &ExperimentConfig, seed: u64, dir: &Path, exec: Execution) -> Result<TrainOutcome> {
    fs::create_dir_all(dir)?;
    let mut resolved = cfg.clone();
    resolved.seeds = vec![seed];
    fs::write(dir.join("config.cfg"), resolved.serialize())?;
    let actor = build_actor(&cfg.actor, cfg.hopper.control_dt())?;
    let settings = TrainSettings {
        total_steps: cfg.total_steps,
        seed,
        exec,
        checkpoint_at: cfg.checkpoint_at.clone(),
        snapshot_every: cfg.snapshot_every,
        out_dir: Some(dir.to_path_buf()),
    };
    Trainer::new(actor, &cfg.hopper, &cfg.reward, cfg.ppo.clone(), settings)?.run()
}

fn metrics_json(m: &EvalMetrics, ckpt: &Checkpoint, path: &Path, deterministic: bool) -> serde_json::Value {
    json!({
        "actor": ckpt.actor.name(),
        "checkpoint": path.display().to_string(),
        "steps": ckpt.steps,
        "episodes": m.episodes,
        "deterministic": deterministic,
        "mean_reward": m.mean_reward,
        "std_reward": m.std_reward,
        "peak_height": m.peak_height,
        "peak_heights": m.peak_heights,
        "mean_foot_slip": m.mean_foot_slip,
        "smoothness": m.smoothness,
        "desired_vel_in_band": m.desired_vel_in_band,
        "theta_dot_var": m.theta_dot_var,
        "r_ddot_var": m.r_ddot_var,
        "mean_length": m.mean_length,
    })
}

/// Evaluates a checkpoint; with `out` set, writes `metrics.json` and one
/// `trajectory-<i>.csv` per episode there.
pub fn eval_checkpoint(
    cfg: &ExperimentConfig,
    ckpt_path: &Path,
    episodes: usize,
    deterministic: bool,
    seed: u64,
    out: Option<&Path>,
) -> Result<EvalMetrics> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let mut actor_cfg = cfg.actor.clone();
    actor_cfg.kind = ckpt.actor;
    let actor = build_actor(&actor_cfg, cfg.hopper.control_dt())?;
    let ecfg = EvalConfig {
        episodes,
        deterministic,
        seed,
    };
    let (m, traces) = evaluate(actor.as_ref(), &ckpt, &cfg.hopper, &cfg.reward, &ecfg)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let js = metrics_json(&m, &ckpt, ckpt_path, deterministic);
        fs::write(
            dir.join("metrics.json"),
            serde_json::to_string_pretty(&js).expect("metrics serialise") + "\n",
        )?;
        for (i, t) in traces.iter().enumerate() {
            let mut f = BufWriter::new(File::create(dir.join(format!("trajectory-{i}.csv")))?);
            write_csv(&mut f, &t.rows)?;
            f.flush()?;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub update: u64,
    pub steps: u64,
    pub mean_ep_reward: f64,
}

pub fn read_train_log(path: &Path) -> Result<Vec<LogRow>> {
    let f =
        File::open(path).map_err(|e| Error::Contract(format!("cannot read training log {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate().skip(1) {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse {
            line: i + 1,
            message: format!("malformed training log row `{line}`"),
        };
        if cols.len() < 3 {
            return Err(bad());
        }
        rows.push(LogRow {
            update: cols[0].parse().map_err(|_| bad())?,
            steps: cols[1].parse().map_err(|_| bad())?,
            mean_ep_reward: cols[2].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

/// Mean of the last `window` logged mean episode rewards.
pub fn final_window_reward(rows: &[LogRow], window: usize) -> f64 {
    let tail: Vec<f64> = rows
        .iter()
        .rev()
        .take(window)
        .map(|r| r.mean_ep_reward)
        .filter(|x| x.is_finite())
        .collect();
    stats::mean(&tail)
}

#[derive(Clone, Debug)]
pub struct CompareRun {
    pub actor: ActorKind,
    pub seed: u64,
    pub dir: PathBuf,
    pub log: Vec<LogRow>,
    pub final_reward: f64,
    pub final_eval: EvalMetrics,
    /// Evaluation of the earliest intermediate checkpoint, if one was written.
    pub early_eval: Option<(u64, EvalMetrics)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub actor_a: ActorKind,
    pub actor_b: ActorKind,
    pub mean_a: f64,
    pub mean_b: f64,
    pub ratio: f64,
    /// One-sided rank-sum p-value for "a rewards exceed b rewards".
    pub p_value: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub runs: Vec<CompareRun>,
    pub ratios: Vec<RatioRow>,
}

/// Earliest `checkpoint-<steps>.ckpt` in `dir` with `steps > 0`.
fn early_checkpoint(dir: &Path) -> Result<Option<(u64, PathBuf)>> {
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(s) = name.strip_prefix("checkpoint-").and_then(|s| s.strip_suffix(".ckpt")) {
            if let Ok(steps) = s.parse::<u64>() {
                if steps > 0 && best.as_ref().is_none_or(|b| steps < b.0) {
                    best = Some((steps, p));
                }
            }
        }
    }
    Ok(best)
}

/// Trains (or reuses) every actor × seed run under `out`, evaluates the final
/// and earliest intermediate checkpoints, and writes `comparison.csv`,
/// `final_rewards.csv` and `ratios.csv`.
///
/// A run directory is reused when its `final.ckpt` exists and its stored
/// config equals the one this run would write.
pub fn compare(
    cfg: &ExperimentConfig,
    actors: &[ActorKind],
    seeds: &[u64],
    out: &Path,
    exec: Execution,
) -> Result<Comparison> {
    if actors.len() < 2 {
        return Err(Error::config("--actors", "compare needs at least two actors"));
    }
    fs::create_dir_all(out)?;
    let mut runs = Vec::new();
    for &kind in actors {
        let mut c = cfg.clone();
        c.actor.kind = kind;
        for &seed in seeds {
            let dir = run_dir(out, kind, seed);
            let mut resolved = c.clone();
            resolved.seeds = vec![seed];
            let cached = dir.join("final.ckpt").exists()
                && fs::read_to_string(dir.join("config.cfg")).ok().as_deref() == Some(resolved.serialize().as_str());
            if !cached {
                eprintln!("training {kind} seed {seed} for {} steps", c.total_steps);
                train_one(&c, seed, &dir, exec)?;
            }
            let log = read_train_log(&dir.join("train_log.csv"))?;
            let final_reward = final_window_reward(&log, c.final_window);
            let final_eval = eval_checkpoint(
                &c,
                &dir.join("final.ckpt"),
                c.eval_episodes,
                true,
                seed,
                Some(&dir.join("eval-final")),
            )?;
            let early_eval = match early_checkpoint(&dir)? {
                Some((steps, p)) => Some((
                    steps,
                    eval_checkpoint(
                        &c,
                        &p,
                        c.eval_episodes,
                        true,
                        seed,
                        Some(&dir.join(format!("eval-{steps}"))),
                    )?,
                )),
                None => None,
            };
            runs.push(CompareRun {
                actor: kind,
                seed,
                dir,
                log,
                final_reward,
                final_eval,
                early_eval,
            });
        }
    }

    let mut f = BufWriter::new(File::create(out.join("comparison.csv"))?);
    writeln!(f, "actor,seed,step,mean_ep_reward")?;
    for r in &runs {
        for row in &r.log {
            writeln!(f, "{},{},{},{}", r.actor, r.seed, row.steps, row.mean_ep_reward)?;
        }
    }
    f.flush()?;

    let mut f = BufWriter::new(File::create(out.join("final_rewards.csv"))?);
    writeln!(
        f,
        "actor,seed,final_reward,eval_reward,peak_height,early_steps,early_peak_height,smoothness,desired_vel_in_band,theta_dot_var,r_ddot_var"
    )?;
    for r in &runs {
        let (es, ep) = r
            .early_eval
            .as_ref()
            .map_or((0, f64::NAN), |(s, m)| (*s, m.peak_height));
        let m = &r.final_eval;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.actor,
            r.seed,
            r.final_reward,
            m.mean_reward,
            m.peak_height,
            es,
            ep,
            m.smoothness,
            m.desired_vel_in_band,
            m.theta_dot_var,
            m.r_ddot_var
        )?;
    }
    f.flush()?;

    let by_actor: BTreeMap<&str, Vec<f64>> = actors
        .iter()
        .map(|k| {
            (
                k.name(),
                runs.iter().filter(|r| r.actor == *k).map(|r| r.final_reward).collect(),
            )
        })
        .collect();
    let mut ratios = Vec::new();
    for &a in actors {
        for &b in actors {
            if a == b {
                continue;
            }
            let (xa, xb) = (&by_actor[a.name()], &by_actor[b.name()]);
            let (ma, mb) = (stats::mean(xa), stats::mean(xb));
            ratios.push(RatioRow {
                actor_a: a,
                actor_b: b,
                mean_a: ma,
                mean_b: mb,
                ratio: ma / mb,
                p_value: stats::rank_sum_p_greater(xa, xb),
            });
        }
    }
    let mut f = BufWriter::new(File::create(out.join("ratios.csv"))?);
    writeln!(f, "actor_a,actor_b,mean_a,mean_b,ratio,p_value")?;
    for r in &ratios {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.actor_a, r.actor_b, r.mean_a, r.mean_b, r.ratio, r.p_value
        )?;
    }
    f.flush()?;
    Ok(Comparison { runs, ratios })
}

const HIST_BINS: usize = 30;

/// Writes plot-ready series for one run directory into `out`:
/// `param_hist.csv`, `param_shift.csv` and `traces.csv`.
pub fn export_plots(run: &Path, out: &Path) -> Result<()> {
    let need = |name: &str| {
        let p = run.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::Contract(format!("{} is missing {name}", run.display())))
        }
    };
    let params_path = need("params.csv")?;
    need("train_log.csv")?;
    let grads_path = need("grad_norms.csv")?;
    let cfg = ExperimentConfig::load(&need("config.cfg")?)?;
    let ckpt_path = need("final.ckpt")?;
    fs::create_dir_all(out)?;

    // group -> update -> values
    let mut series: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for (i, line) in BufReader::new(File::open(&params_path)?).lines().enumerate().skip(1) {
        let line = line?;
        let c: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse {
            line: i + 1,
            message: format!("malformed parameter snapshot row `{line}`"),
        };
        if c.len() != 4 {
            return Err(bad());
        }
        let update: u64 = c[0].parse().map_err(|_| bad())?;
        let value: f64 = c[3].parse().map_err(|_| bad())?;
        series
            .entry(c[1].to_string())
            .or_default()
            .entry(update)
            .or_default()
            .push(value);
    }
    let mut grad_norms: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in BufReader::new(File::open(&grads_path)?).lines().skip(1) {
        let line = line?;
        let c: Vec<&str> = line.split(',').collect();
        if let (Some(g), Some(n)) = (c.get(1), c.get(2).and_then(|n| n.parse::<f64>().ok())) {
            grad_norms.entry(g.to_string()).or_default().push(n);
        }
    }

    let mut hist = BufWriter::new(File::create(out.join("param_hist.csv"))?);
    writeln!(hist, "update,group,bin,lo,hi,count")?;
    let mut shift = BufWriter::new(File::create(out.join("param_shift.csv"))?);
    writeln!(
        shift,
        "group,first_update,last_update,wasserstein,min_grad_norm,mean_grad_norm"
    )?;
    for (group, snaps) in &series {
        let all = snaps.values().flatten();
        let lo = all.clone().fold(f64::INFINITY, |m, &x| m.min(x));
        let hi = all.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let edges: Vec<f64> = (0..=HIST_BINS)
            .map(|k| lo + (hi - lo) * k as f64 / HIST_BINS as f64)
            .collect();
        for (update, vals) in snaps {
            for (b, n) in stats::histogram(vals, &edges).into_iter().enumerate() {
                writeln!(hist, "{update},{group},{b},{},{},{n}", edges[b], edges[b + 1])?;
            }
        }
        let (first, last) = (
            snaps.iter().next().expect("non-empty"),
            snaps.iter().last().expect("non-empty"),
        );
        let g = grad_norms.get(group).cloned().unwrap_or_default();
        writeln!(
            shift,
            "{group},{},{},{},{},{}",
            first.0,
            last.0,
            stats::wasserstein1(first.1, last.1),
            g.iter().copied().fold(f64::INFINITY, f64::min),
            stats::mean(&g)
        )?;
    }
    hist.flush()?;
    shift.flush()?;

    let ckpt = Checkpoint::load(&ckpt_path)?;
    let mut actor_cfg = cfg.actor.clone();
    actor_cfg.kind = ckpt.actor;
    let actor = build_actor(&actor_cfg, cfg.hopper.control_dt())?;
    let ecfg = EvalConfig {
        episodes: 1,
        deterministic: true,
        seed: cfg.seeds[0],
    };
    let (_, traces) = evaluate(actor.as_ref(), &ckpt, &cfg.hopper, &cfg.reward, &ecfg)?;
    let t = &traces[0];
    let mut f = BufWriter::new(File::create(out.join("traces.csv"))?);
    writeln!(f, "t,pdes1,pdes2,theta_dot1,theta_dot2,r_ddot1,r_ddot2,z,foot_height")?;
    for (k, row) in t.rows.iter().enumerate().skip(1) {
        let osc = |v: &Vec<Vec<f64>>, i: usize| v.get(k - 1).map_or(f64::NAN, |x| x[i]);
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            row.t,
            row.desired[0],
            row.desired[1],
            osc(&t.theta_dot, 0),
            osc(&t.theta_dot, 1),
            osc(&t.r_ddot, 0),
            osc(&t.r_ddot, 1),
            row.z,
            t.foot_height[k]
        )?;
    }
    f.flush()?;
    Ok(())
}
