//! Policy evaluation: episode metrics and control-rate traces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actors::Actor;
use crate::checkpoint::Checkpoint;
use crate::error::{check_len, Result};
use crate::hopper::trajectory::TrajectoryRow;
use crate::hopper::{HopperConfig, RewardConfig};
use crate::ppo::sample_action;
use crate::stats;

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Use action means instead of samples.
    pub deterministic: bool,
    pub seed: u64,
}

/// One evaluated episode at control rate. `rows[0]` is the reset state.
#[derive(Clone, Debug, Default)]
pub struct EpisodeTrace {
    pub rows: Vec<TrajectoryRow>,
    pub foot_height: Vec<f64>,
    /// Horizontal foot speed after each step (m/s).
    pub foot_slip: Vec<f64>,
    /// Oscillator phase rates after each step, when the actor has oscillators.
    pub theta_dot: Vec<Vec<f64>>,
    pub r_ddot: Vec<Vec<f64>>,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    /// Per-episode maximum hip height, averaged (m).
    pub peak_height: f64,
    pub peak_heights: Vec<f64>,
    /// Mean horizontal foot speed (m/s).
    pub mean_foot_slip: f64,
    /// Mean `|Δ desired position|` per control step over both joints (rad).
    pub smoothness: f64,
    /// Fraction of steps whose desired joint velocities are within the joint limit.
    pub desired_vel_in_band: f64,
    /// Variance of `θ̇` and `r̈` pooled over oscillators and episodes (NaN without oscillators).
    pub theta_dot_var: f64,
    pub r_ddot_var: f64,
    pub mean_length: f64,
}

/// Runs `cfg.episodes` episodes of the policy stored in `ckpt`.
pub fn evaluate(
    actor: &dyn Actor,
    ckpt: &Checkpoint,
    hopper: &HopperConfig,
    reward: &RewardConfig,
    cfg: &EvalConfig,
) -> Result<(EvalMetrics, Vec<EpisodeTrace>)> {
    check_len("checkpoint actor params", actor.n_params(), ckpt.actor_params.len())?;
    check_len("checkpoint log_std", actor.action_dim(), ckpt.log_std.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut env = actor.make_env(hopper, reward)?;
    let dt = hopper.control_dt();
    let params = &ckpt.actor_params;
    let mut traces = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let mut obs = env.reset(&mut rng)?;
        let mut carry = actor.initial_carry(params, &mut rng)?;
        let mut tr = EpisodeTrace::default();
        let s = env.hopper_state();
        tr.rows.push(TrajectoryRow {
            t: 0.0,
            z: s.z,
            z_dot: s.z_dot,
            q: s.q,
            q_dot: s.q_dot,
            desired: [obs[4], obs[5]],
            contact: s.foot_contact,
            ..Default::default()
        });
        tr.foot_height.push(s.foot_pos[1]);
        loop {
            let o = ckpt.obs_norm.normalize(&obs);
            let (mean, next) = actor.act(params, &o, &carry)?;
            let action = if cfg.deterministic {
                mean
            } else {
                sample_action(&mean, &ckpt.log_std, &mut rng).0
            };
            let res = env.step(&action)?;
            carry = next;
            tr.reward += res.reward;
            let s = env.hopper_state();
            obs = res.observation;
            tr.rows.push(TrajectoryRow {
                t: tr.rows.len() as f64 * dt,
                z: s.z,
                z_dot: s.z_dot,
                q: s.q,
                q_dot: s.q_dot,
                desired: [obs[4], obs[5]],
                torque: res.info.torque,
                terms: res.reward_terms,
                contact: s.foot_contact,
            });
            tr.foot_height.push(s.foot_pos[1]);
            tr.foot_slip.push(res.info.foot_slip.abs());
            if let Some(c) = env.cpg_state().or(carry.cpg()) {
                tr.theta_dot.push(c.theta_dot.clone());
                tr.r_ddot.push(c.r_ddot.clone());
            }
            if res.done {
                break;
            }
        }
        traces.push(tr);
    }
    Ok((metrics(&traces, hopper), traces))
}

pub fn metrics(traces: &[EpisodeTrace], hopper: &HopperConfig) -> EvalMetrics {
    let dt = hopper.control_dt();
    let rewards: Vec<f64> = traces.iter().map(|t| t.reward).collect();
    let peaks: Vec<f64> = traces
        .iter()
        .map(|t| t.rows.iter().map(|r| r.z).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (mut slip, mut n_slip) = (0.0, 0usize);
    let (mut delta, mut n_delta, mut in_band) = (0.0, 0usize, 0usize);
    let (mut td, mut rdd) = (Vec::new(), Vec::new());
    for t in traces {
        for w in t.rows.windows(2) {
            let d = [w[1].desired[0] - w[0].desired[0], w[1].desired[1] - w[0].desired[1]];
            delta += 0.5 * (d[0].abs() + d[1].abs());
            n_delta += 1;
            if d.iter().all(|x| (x / dt).abs() <= hopper.joint_vel_limit) {
                in_band += 1;
            }
        }
        slip += t.foot_slip.iter().sum::<f64>();
        n_slip += t.foot_slip.len();
        td.extend(t.theta_dot.iter().flatten());
        rdd.extend(t.r_ddot.iter().flatten());
    }
    let nan_if_empty = |x: &[f64]| if x.is_empty() { f64::NAN } else { stats::variance(x) };
    let per = |x: f64, n: usize| if n == 0 { f64::NAN } else { x / n as f64 };
    EvalMetrics {
        episodes: traces.len(),
        mean_reward: stats::mean(&rewards),
        std_reward: stats::std_dev(&rewards),
        peak_height: stats::mean(&peaks),
        peak_heights: peaks,
        mean_foot_slip: per(slip, n_slip),
        smoothness: per(delta, n_delta),
        desired_vel_in_band: per(in_band as f64, n_delta),
        theta_dot_var: nan_if_empty(&td),
        r_ddot_var: nan_if_empty(&rdd),
        mean_length: stats::mean(&traces.iter().map(|t| (t.rows.len() - 1) as f64).collect::<Vec<_>>()),
    }
}
