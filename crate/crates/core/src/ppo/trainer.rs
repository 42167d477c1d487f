//! Rollout collection and the synchronous PPO update.
//!
//! Trainable parameters live in one flat vector `[actor | log_std | critic]`;
//! each minibatch tape registers the three sections as separate leaves in that
//! order, so the flattened gradient lines up with the vector.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{clip_grad_norm, Adam};
use super::buffer::{Batch, Rollout};
use super::config::PpoConfig;
use super::gae::{gae, normalize_advantages};
use super::gaussian::{entropy_taped, log_prob_taped, sample_action};
use super::loss::{ppo_loss_taped, LossInputs};
use crate::actors::{Actor, Carry, ParamGroup};
use crate::checkpoint::{Checkpoint, SCHEMA_VERSION};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::grad::{Tape, Tensor};
use crate::hopper::{HopperConfig, RewardConfig};
use crate::math::all_finite;
use crate::nn::MlpLayout;
use crate::normalize::RunningNorm;
use crate::par::{self, Execution};

/// State-value network, `obs → hidden tanh layers → 1`.
#[derive(Clone, Debug)]
pub struct Critic {
    pub layout: MlpLayout,
}

impl Critic {
    pub fn new(obs_dim: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend(hidden);
        sizes.push(1);
        Critic {
            layout: MlpLayout::new(sizes),
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.layout.init_orthogonal(rng, std::f64::consts::SQRT_2, 1.0)
    }

    pub fn value(&self, params: &[f64], obs: &[f64]) -> Result<f64> {
        Ok(self.layout.forward(params, obs)?[0])
    }
}

#[derive(Clone, Debug)]
pub struct TrainSettings {
    pub total_steps: u64,
    pub seed: u64,
    pub exec: Execution,
    /// Write an extra checkpoint at the first update boundary at or past each of these step counts.
    pub checkpoint_at: Vec<u64>,
    /// Parameter snapshot period in updates (the first and last update are always kept).
    pub snapshot_every: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            total_steps: 0,
            seed: 0,
            exec: Execution::default(),
            checkpoint_at: Vec::new(),
            snapshot_every: 10,
            out_dir: None,
        }
    }
}

/// One row of the training log plus per-group gradient norms.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateLog {
    pub update: u64,
    pub steps: u64,
    pub mean_ep_reward: f64,
    pub std_ep_reward: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub log_std: f64,
    pub episodes: usize,
    /// Mean pre-clip gradient norm per parameter group over the update's minibatches.
    pub grad_norms: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub logs: Vec<UpdateLog>,
    pub checkpoint: Checkpoint,
    pub pretrain_losses: Vec<f64>,
}

struct Worker {
    env: Box<dyn Environment>,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    carry: Carry,
    ep_return: f64,
    discounted: f64,
}

/// Read-only view used inside parallel sections.
struct Policy<'a> {
    actor: &'a dyn Actor,
    critic: &'a Critic,
    cfg: &'a PpoConfig,
    params: &'a [f64],
    sections: [Range<usize>; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub grad: Vec<f64>,
    pub loss: f64,
    pub surrogate: f64,
    pub value_loss: f64,
}

impl Policy<'_> {
    fn actor_params(&self) -> &[f64] {
        &self.params[self.sections[0].clone()]
    }

    fn log_std(&self) -> &[f64] {
        &self.params[self.sections[1].clone()]
    }

    fn critic_params(&self) -> &[f64] {
        &self.params[self.sections[2].clone()]
    }

    fn rollout(&self, w: &mut Worker, norm: &RunningNorm, reward_scale: f64) -> Result<Rollout> {
        let t_len = self.cfg.rollout_len;
        let mut ro = Rollout::default();
        for _ in 0..t_len {
            let o = norm.normalize(&w.obs);
            let (mean, next_carry) = self.actor.act(self.actor_params(), &o, &w.carry)?;
            let value = self.critic.value(self.critic_params(), &o)?;
            let (action, log_prob) = sample_action(&mean, self.log_std(), &mut w.rng);
            let res = w.env.step(&action)?;
            w.ep_return += res.reward;
            w.discounted = self.cfg.gamma * w.discounted + res.reward;
            ro.discounted.push(w.discounted);
            let mut r = res.reward / reward_scale;
            if res.truncated {
                let last = norm.normalize(&res.observation);
                r += self.cfg.gamma * self.critic.value(self.critic_params(), &last)?;
            }
            ro.raw_obs.push(std::mem::take(&mut w.obs));
            ro.obs.push(o);
            ro.carries.push(std::mem::replace(&mut w.carry, next_carry));
            ro.actions.push(action);
            ro.means.push(mean);
            ro.log_probs.push(log_prob);
            ro.rewards.push(r);
            ro.values.push(value);
            ro.dones.push(res.done);
            if res.done {
                ro.episode_returns.push(w.ep_return);
                w.ep_return = 0.0;
                w.discounted = 0.0;
                w.obs = w.env.reset(&mut w.rng)?;
                w.carry = self.actor.initial_carry(self.actor_params(), &mut w.rng)?;
            } else {
                w.obs = res.observation;
            }
        }
        let o = norm.normalize(&w.obs);
        ro.values.push(self.critic.value(self.critic_params(), &o)?);
        Ok(ro)
    }

    fn chunk_grad(&self, batch: &Batch, idx: &[usize]) -> Result<LossGrad> {
        minibatch_loss(
            self.actor,
            self.critic,
            self.cfg,
            [self.actor_params(), self.log_std(), self.critic_params()],
            batch,
            idx,
        )
    }
}

/// PPO loss over rows `idx` of `batch` and its gradient with respect to
/// `[actor | log_std | critic]`.
pub fn minibatch_loss(
    actor: &dyn Actor,
    critic: &Critic,
    cfg: &PpoConfig,
    params: [&[f64]; 3],
    batch: &Batch,
    idx: &[usize],
) -> Result<LossGrad> {
    let rows = |f: &dyn Fn(usize) -> Vec<f64>| Tensor::from_rows(&idx.iter().map(|&i| f(i)).collect::<Vec<_>>());
    let mut tape = Tape::new();
    let pa = tape.leaf(Tensor::row(params[0].to_vec()));
    let pl = tape.leaf(Tensor::row(params[1].to_vec()));
    let pc = tape.leaf(Tensor::row(params[2].to_vec()));
    let obs = tape.constant(rows(&|i| batch.obs[i].clone())?);
    let actions = tape.constant(rows(&|i| batch.actions[i].clone())?);
    let column = |f: &dyn Fn(usize) -> f64| Tensor::column(idx.iter().map(|&i| f(i)).collect());
    let old = tape.constant(column(&|i| batch.log_probs[i]));
    let adv = tape.constant(column(&|i| batch.advantages[i]));
    let ret = tape.constant(column(&|i| batch.returns[i]));
    let carries: Vec<Carry> = idx.iter().map(|&i| batch.carries[i].clone()).collect();

    let mean = actor.act_taped(&mut tape, pa, obs, &carries)?;
    let new_lp = log_prob_taped(&mut tape, actions, mean, pl)?;
    let values = critic.layout.forward_taped(&mut tape, pc, 0, obs)?;
    let ent = entropy_taped(&mut tape, pl);
    let lv = ppo_loss_taped(
        &mut tape,
        LossInputs {
            new_log_prob: new_lp,
            old_log_prob: old,
            advantages: adv,
            values,
            returns: ret,
            entropy: ent,
        },
        cfg.clip,
        cfg.vf_coef,
        cfg.ent_coef,
    )?;
    let grad = tape.backward(lv.loss, &Tensor::scalar(1.0))?.to_vector().0;
    Ok(LossGrad {
        grad,
        loss: tape.value(lv.loss).item(),
        surrogate: tape.value(lv.surrogate).item(),
        value_loss: tape.value(lv.value_loss).item(),
    })
}

pub struct Trainer {
    actor: Box<dyn Actor>,
    critic: Critic,
    cfg: PpoConfig,
    settings: TrainSettings,
    params: Vec<f64>,
    sections: [Range<usize>; 3],
    adam: Adam,
    obs_norm: RunningNorm,
    ret_norm: RunningNorm,
    workers: Vec<Worker>,
    rng: ChaCha8Rng,
    steps: u64,
    update: u64,
    pretrain_losses: Vec<f64>,
    last_reward: (f64, f64),
}

impl Trainer {
    pub fn new(
        actor: Box<dyn Actor>,
        hopper: &HopperConfig,
        reward: &RewardConfig,
        cfg: PpoConfig,
        settings: TrainSettings,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let critic = Critic::new(actor.obs_dim(), &cfg.critic_hidden);
        let mut actor_params = actor.init_params(&mut rng)?;
        let pre = actor.pretrain(&mut actor_params, hopper, &mut rng)?;
        let na = actor_params.len();
        let nl = actor.action_dim();
        let nc = critic.n_params();
        let mut params = actor_params;
        params.extend(std::iter::repeat_n(cfg.init_log_std, nl));
        params.extend(critic.init(&mut rng));
        let sections = [0..na, na..na + nl, na + nl..na + nl + nc];

        let mut workers = Vec::with_capacity(cfg.n_workers);
        for _ in 0..cfg.n_workers {
            let mut wrng = ChaCha8Rng::seed_from_u64(rng.gen());
            let mut env = actor.make_env(hopper, reward)?;
            let obs = env.reset(&mut wrng)?;
            let carry = actor.initial_carry(&params[sections[0].clone()], &mut wrng)?;
            workers.push(Worker {
                env,
                rng: wrng,
                obs,
                carry,
                ep_return: 0.0,
                discounted: 0.0,
            });
        }
        let obs_norm = pre.normalizer.unwrap_or_else(|| RunningNorm::new(actor.obs_dim()));
        if let Some(dir) = &settings.out_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Trainer {
            adam: Adam::new(params.len(), cfg.lr),
            critic,
            params,
            sections,
            obs_norm,
            ret_norm: RunningNorm::new(1),
            workers,
            rng,
            steps: 0,
            update: 0,
            pretrain_losses: pre.losses,
            last_reward: (f64::NAN, f64::NAN),
            actor,
            cfg,
            settings,
        })
    }

    pub fn actor(&self) -> &dyn Actor {
        self.actor.as_ref()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn actor_params(&self) -> &[f64] {
        &self.params[self.sections[0].clone()]
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.sections[1].clone()]
    }

    pub fn critic_params(&self) -> &[f64] {
        &self.params[self.sections[2].clone()]
    }

    pub fn obs_norm(&self) -> &RunningNorm {
        &self.obs_norm
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn pretrain_losses(&self) -> &[f64] {
        &self.pretrain_losses
    }

    fn policy(&self) -> Policy<'_> {
        Policy {
            actor: self.actor.as_ref(),
            critic: &self.critic,
            cfg: &self.cfg,
            params: &self.params,
            sections: self.sections.clone(),
        }
    }

    fn reward_scale(&self) -> f64 {
        if self.cfg.reward_scaling {
            (self.ret_norm.var[0] + 1e-8).sqrt()
        } else {
            1.0
        }
    }

    /// Runs every worker for one rollout with frozen normaliser statistics,
    /// then folds the new observations into the statistics.
    pub fn collect(&mut self) -> Result<Vec<Rollout>> {
        let scale = self.reward_scale();
        let norm = self.obs_norm.clone();
        let policy = Policy {
            actor: self.actor.as_ref(),
            critic: &self.critic,
            cfg: &self.cfg,
            params: &self.params,
            sections: self.sections.clone(),
        };
        let results = par::map_mut(self.settings.exec, &mut self.workers, |_, w| {
            policy.rollout(w, &norm, scale)
        });
        let rollouts = results.into_iter().collect::<Result<Vec<_>>>()?;
        for ro in &rollouts {
            self.obs_norm.update(&ro.raw_obs)?;
            let d: Vec<Vec<f64>> = ro.discounted.iter().map(|&x| vec![x]).collect();
            self.ret_norm.update(&d)?;
        }
        self.steps += rollouts.iter().map(|r| r.len() as u64).sum::<u64>();
        Ok(rollouts)
    }

    /// Advantages, returns and flattening in worker order.
    pub fn build_batch(&self, rollouts: &[Rollout]) -> Batch {
        let mut batch = Batch::default();
        for ro in rollouts {
            let (adv, ret) = gae(&ro.rewards, &ro.values, &ro.dones, self.cfg.gamma, self.cfg.lambda);
            batch.obs.extend(ro.obs.iter().cloned());
            batch.carries.extend(ro.carries.iter().cloned());
            batch.actions.extend(ro.actions.iter().cloned());
            batch.log_probs.extend(&ro.log_probs);
            batch.advantages.extend(adv);
            batch.returns.extend(ret);
        }
        normalize_advantages(&mut batch.advantages);
        batch
    }

    fn groups(&self) -> Vec<ParamGroup> {
        let mut g = self.actor.groups();
        g.push(ParamGroup {
            name: "log_std",
            range: self.sections[1].clone(),
        });
        g.push(ParamGroup {
            name: "critic",
            range: self.sections[2].clone(),
        });
        g
    }

    /// Loss and gradient of one minibatch, reduced over chunks in a fixed order.
    pub fn minibatch_gradient(&self, batch: &Batch, idx: &[usize]) -> Result<LossGrad> {
        let policy = self.policy();
        let chunks: Vec<&[usize]> = idx.chunks(self.cfg.grad_chunk).collect();
        let parts = par::map_range(self.settings.exec, chunks.len(), |c| {
            policy.chunk_grad(batch, chunks[c])
        });
        let total = idx.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let (mut loss, mut surr, mut vl) = (0.0, 0.0, 0.0);
        for (part, chunk) in parts.into_iter().zip(&chunks) {
            let part = part?;
            let w = chunk.len() as f64 / total;
            for (g, p) in grad.iter_mut().zip(&part.grad) {
                *g += w * p;
            }
            loss += w * part.loss;
            surr += w * part.surrogate;
            vl += w * part.value_loss;
        }
        Ok(LossGrad {
            grad,
            loss,
            surrogate: surr,
            value_loss: vl,
        })
    }

    /// Epochs of shuffled minibatch Adam steps on one batch.
    pub fn update(&mut self, rollouts: &[Rollout]) -> Result<UpdateLog> {
        let batch = self.build_batch(rollouts);
        let groups = self.groups();
        let mut norms = vec![0.0; groups.len()];
        let (mut surr_sum, mut vl_sum, mut count) = (0.0, 0.0, 0usize);
        let mut perm: Vec<usize> = (0..batch.len()).collect();
        for epoch in 0..self.cfg.epochs {
            perm.shuffle(&mut self.rng);
            for (mb_i, mb) in perm.chunks(self.cfg.minibatch).enumerate() {
                let LossGrad {
                    grad: mut g,
                    loss,
                    surrogate: surr,
                    value_loss: vl,
                } = self.minibatch_gradient(&batch, mb)?;
                if !loss.is_finite() || !all_finite(&g) {
                    return Err(self.abort(epoch, mb_i, loss, surr, vl, &g));
                }
                for (k, gr) in groups.iter().enumerate() {
                    norms[k] += g[gr.range.clone()].iter().map(|x| x * x).sum::<f64>().sqrt();
                }
                clip_grad_norm(&mut g, self.cfg.max_grad_norm);
                self.adam.step(&mut self.params, &g)?;
                if !all_finite(&self.params) {
                    return Err(self.abort(epoch, mb_i, loss, surr, vl, &g));
                }
                surr_sum += surr;
                vl_sum += vl;
                count += 1;
            }
        }
        self.update += 1;
        let returns: Vec<f64> = rollouts
            .iter()
            .flat_map(|r| r.episode_returns.iter().copied())
            .collect();
        if !returns.is_empty() {
            self.last_reward = (crate::stats::mean(&returns), crate::stats::std_dev(&returns));
        }
        let c = count.max(1) as f64;
        Ok(UpdateLog {
            update: self.update,
            steps: self.steps,
            mean_ep_reward: self.last_reward.0,
            std_ep_reward: self.last_reward.1,
            surrogate: surr_sum / c,
            value_loss: vl_sum / c,
            log_std: crate::stats::mean(self.log_std()),
            episodes: returns.len(),
            grad_norms: groups
                .iter()
                .zip(&norms)
                .map(|(g, n)| (g.name.to_string(), n / c))
                .collect(),
        })
    }

    fn abort(&self, epoch: usize, minibatch: usize, loss: f64, surr: f64, vl: f64, g: &[f64]) -> Error {
        let mut msg = format!(
            "PPO update {} (epoch {epoch}, minibatch {minibatch}) at {} steps: loss {loss}, surrogate {surr}, value loss {vl}",
            self.update + 1,
            self.steps
        );
        for gr in self.groups() {
            let p = &self.params[gr.range.clone()];
            let bad_p = p.iter().filter(|x| !x.is_finite()).count();
            let bad_g = g[gr.range.clone()].iter().filter(|x| !x.is_finite()).count();
            msg.push_str(&format!(
                "\n  {}: {} params, {bad_p} non-finite params, {bad_g} non-finite grads, max |p| {}",
                gr.name,
                p.len(),
                p.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            ));
        }
        if let Some(dir) = &self.settings.out_dir {
            let _ = std::fs::write(dir.join("nan_dump.txt"), &msg);
        }
        Error::NonFinite(msg)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema_version: SCHEMA_VERSION,
            actor: self.actor.kind(),
            steps: self.steps,
            update: self.update,
            actor_params: self.actor_params().to_vec(),
            log_std: self.log_std().to_vec(),
            critic_params: self.critic_params().to_vec(),
            obs_norm: self.obs_norm.clone(),
        }
    }

    /// Writes every non-hidden actor group; hidden layers are omitted to keep snapshots small.
    fn snapshot(&self, w: &mut impl Write) -> Result<()> {
        for g in self.actor.groups().into_iter().filter(|g| !g.name.ends_with("_hidden")) {
            for (i, x) in self.params[g.range.clone()].iter().enumerate() {
                writeln!(w, "{},{},{},{:e}", self.update, g.name, i, x)?;
            }
        }
        Ok(())
    }

    /// Trains until `total_steps`, writing logs and checkpoints when an output
    /// directory is set.
    pub fn run(mut self) -> Result<TrainOutcome> {
        let dir = self.settings.out_dir.clone();
        let open = |name: &str, header: &str| -> Result<Option<BufWriter<File>>> {
            match &dir {
                Some(d) => {
                    let mut f = BufWriter::new(File::create(d.join(name))?);
                    writeln!(f, "{header}")?;
                    Ok(Some(f))
                }
                None => Ok(None),
            }
        };
        let mut log_f = open(
            "train_log.csv",
            "update,steps,mean_ep_reward,std_ep_reward,surrogate,value_loss,log_std",
        )?;
        let mut grad_f = open("grad_norms.csv", "update,group,norm")?;
        let mut snap_f = open("params.csv", "update,group,index,value")?;
        if let (Some(d), false) = (&dir, self.pretrain_losses.is_empty()) {
            let mut f = BufWriter::new(File::create(d.join("warm_start_loss.csv"))?);
            writeln!(f, "epoch,loss")?;
            for (i, l) in self.pretrain_losses.iter().enumerate() {
                writeln!(f, "{},{:e}", i + 1, l)?;
            }
        }
        if let Some(d) = &dir {
            self.checkpoint().save(&d.join("checkpoint-0.ckpt"))?;
        }
        if let Some(f) = &mut snap_f {
            self.snapshot(f)?;
        }
        let mut pending: Vec<u64> = self.settings.checkpoint_at.clone();
        pending.sort_unstable();
        let mut logs = Vec::new();
        let mut last_snap = 0;
        while self.steps < self.settings.total_steps {
            let rollouts = self.collect()?;
            let log = self.update(&rollouts)?;
            if let Some(f) = &mut log_f {
                writeln!(
                    f,
                    "{},{},{:e},{:e},{:e},{:e},{:e}",
                    log.update,
                    log.steps,
                    log.mean_ep_reward,
                    log.std_ep_reward,
                    log.surrogate,
                    log.value_loss,
                    log.log_std
                )?;
                f.flush()?;
            }
            if let Some(f) = &mut grad_f {
                for (g, n) in &log.grad_norms {
                    writeln!(f, "{},{},{:e}", log.update, g, n)?;
                }
            }
            while pending.first().is_some_and(|&s| s <= self.steps) {
                pending.remove(0);
                if let Some(d) = &dir {
                    self.checkpoint()
                        .save(&d.join(format!("checkpoint-{}.ckpt", self.steps)))?;
                }
            }
            if self.update.is_multiple_of(self.settings.snapshot_every.max(1)) {
                if let Some(f) = &mut snap_f {
                    self.snapshot(f)?;
                }
                last_snap = self.update;
            }
            logs.push(log);
        }
        if last_snap != self.update {
            if let Some(f) = &mut snap_f {
                self.snapshot(f)?;
            }
        }
        for f in [&mut log_f, &mut grad_f, &mut snap_f].into_iter().flatten() {
            f.flush()?;
        }
        let checkpoint = self.checkpoint();
        if let Some(d) = &dir {
            checkpoint.save(&d.join("final.ckpt"))?;
        }
        Ok(TrainOutcome {
            logs,
            checkpoint,
            pretrain_losses: self.pretrain_losses,
        })
    }
}
