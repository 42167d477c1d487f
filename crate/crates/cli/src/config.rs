//! Experiment configuration as `key = value` lines with dotted section paths.
//!
//! ```text
//! # comments and blank lines are ignored
//! actor.kind = cpg-actor
//! experiment.seeds = 0, 1, 2, 3, 4
//! ppo.lr = 0.0003
//! hopper.crouch = -0.2, 0.6
//! ```
//!
//! Every key is routed through [`visit_fields`], which serves both parsing and
//! serialisation, so the two cannot drift apart. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cpg_actor::actors::{ActorConfig, ActorKind};
use cpg_actor::cpg::CouplingInit;
use cpg_actor::hopper::{HopperConfig, RewardConfig};
use cpg_actor::ppo::PpoConfig;
use cpg_actor::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub total_steps: u64,
    pub out_dir: PathBuf,
    /// Step counts that get an extra checkpoint during training.
    pub checkpoint_at: Vec<u64>,
    pub snapshot_every: u64,
    pub eval_episodes: usize,
    /// Trailing training-log updates averaged into the final reward.
    pub final_window: usize,
    pub actor: ActorConfig,
    pub hopper: HopperConfig,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0],
            total_steps: 2_000_000,
            out_dir: PathBuf::from("runs"),
            checkpoint_at: vec![100_000],
            snapshot_every: 10,
            eval_episodes: 10,
            final_window: 10,
            actor: ActorConfig::default(),
            hopper: HopperConfig::default(),
            reward: RewardConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

/// A scalar or list that can be read from and written to a config value.
pub trait Field {
    fn get(&self) -> String;
    fn set(&mut self, s: &str) -> std::result::Result<(), String>;
}

macro_rules! parse_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn get(&self) -> String {
                self.to_string()
            }
            fn set(&mut self, s: &str) -> std::result::Result<(), String> {
                *self = s.parse().map_err(|_| format!("`{s}` is not a valid {}", stringify!($t)))?;
                Ok(())
            }
        }
    )*};
}

parse_field!(f64, u64, usize, bool);

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

impl<T: Field + Default> Field for Vec<T> {
    fn get(&self) -> String {
        self.iter().map(Field::get).collect::<Vec<_>>().join(", ")
    }
    fn set(&mut self, s: &str) -> std::result::Result<(), String> {
        *self = split_list(s)
            .map(|x| {
                let mut v = T::default();
                v.set(x).map(|_| v)
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(())
    }
}

impl Field for [f64; 2] {
    fn get(&self) -> String {
        format!("{}, {}", self[0], self[1])
    }
    fn set(&mut self, s: &str) -> std::result::Result<(), String> {
        let mut v: Vec<f64> = Vec::new();
        v.set(s)?;
        *self = v
            .try_into()
            .map_err(|v: Vec<f64>| format!("expected 2 values, got {}", v.len()))?;
        Ok(())
    }
}

impl Field for PathBuf {
    fn get(&self) -> String {
        self.display().to_string()
    }
    fn set(&mut self, s: &str) -> std::result::Result<(), String> {
        *self = PathBuf::from(s);
        Ok(())
    }
}

impl Field for ActorKind {
    fn get(&self) -> String {
        self.name().to_string()
    }
    fn set(&mut self, s: &str) -> std::result::Result<(), String> {
        *self = s.parse().map_err(|e: Error| e.to_string())?;
        Ok(())
    }
}

impl Field for CouplingInit {
    fn get(&self) -> String {
        match self {
            CouplingInit::Random => "random",
            CouplingInit::Zero => "zero",
        }
        .to_string()
    }
    fn set(&mut self, s: &str) -> std::result::Result<(), String> {
        *self = match s {
            "random" => CouplingInit::Random,
            "zero" => CouplingInit::Zero,
            _ => return Err(format!("`{s}` is not one of random, zero")),
        };
        Ok(())
    }
}

pub trait FieldVisitor {
    fn visit(&mut self, key: &str, field: &mut dyn Field);
}

/// Calls `v` once per configuration key, in file order.
pub fn visit_fields(c: &mut ExperimentConfig, v: &mut dyn FieldVisitor) {
    v.visit("experiment.seeds", &mut c.seeds);
    v.visit("experiment.total_steps", &mut c.total_steps);
    v.visit("experiment.out_dir", &mut c.out_dir);
    v.visit("experiment.checkpoint_at", &mut c.checkpoint_at);
    v.visit("experiment.snapshot_every", &mut c.snapshot_every);
    v.visit("experiment.eval_episodes", &mut c.eval_episodes);
    v.visit("experiment.final_window", &mut c.final_window);

    let a = &mut c.actor;
    v.visit("actor.kind", &mut a.kind);
    v.visit("actor.joint_offset", &mut a.joints.offset);
    v.visit("actor.joint_range", &mut a.joints.range);
    v.visit("actor.command", &mut a.command);
    v.visit("actor.d_max", &mut a.d_max);
    v.visit("actor.mlp_hidden", &mut a.mlp_hidden);
    v.visit("actor.mlp_output_gain", &mut a.mlp_output_gain);
    v.visit("cpg.init.coupling", &mut a.cpg_init.coupling);
    v.visit("cpg.init.nu0", &mut a.cpg_init.nu0);
    v.visit("cpg.init.rho0", &mut a.cpg_init.rho0);
    v.visit("cpg.init.a0", &mut a.cpg_init.a0);
    v.visit("cpg.init.std", &mut a.cpg_init.std);
    v.visit("cpg.init.d0", &mut a.cpg_init.d0);
    v.visit("feedback.hidden", &mut a.feedback.hidden);
    v.visit("feedback.xi_scale", &mut a.feedback.xi_scale);
    v.visit("feedback.kappa_scale", &mut a.feedback.kappa_scale);
    v.visit("feedback.hidden_gain", &mut a.feedback.hidden_gain);
    let w = &mut a.warm_start;
    v.visit("warm_start.nu", &mut w.nu);
    v.visit("warm_start.rho", &mut w.rho);
    v.visit("warm_start.a", &mut w.a);
    v.visit("warm_start.w", &mut w.w);
    v.visit("warm_start.phi", &mut w.phi);
    v.visit("warm_start.epochs", &mut w.epochs);
    v.visit("warm_start.lr", &mut w.lr);
    v.visit("warm_start.minibatch", &mut w.minibatch);
    v.visit("warm_start.samples", &mut w.samples);
    v.visit("warm_start.held_out", &mut w.held_out);

    let h = &mut c.hopper;
    v.visit("hopper.body_mass", &mut h.body_mass);
    v.visit("hopper.thigh_mass", &mut h.thigh_mass);
    v.visit("hopper.shank_mass", &mut h.shank_mass);
    v.visit("hopper.thigh_length", &mut h.thigh_length);
    v.visit("hopper.shank_length", &mut h.shank_length);
    v.visit("hopper.gravity", &mut h.gravity);
    v.visit("hopper.torque_limit", &mut h.torque_limit);
    v.visit("hopper.joint_vel_limit", &mut h.joint_vel_limit);
    v.visit("hopper.contact_stiffness", &mut h.contact_stiffness);
    v.visit("hopper.contact_damping", &mut h.contact_damping);
    v.visit("hopper.friction", &mut h.friction);
    v.visit("hopper.friction_damping", &mut h.friction_damping);
    v.visit("hopper.kp", &mut h.kp);
    v.visit("hopper.kd", &mut h.kd);
    v.visit("hopper.dt_physics", &mut h.dt_physics);
    v.visit("hopper.substeps", &mut h.substeps);
    v.visit("hopper.horizon", &mut h.horizon);
    v.visit("hopper.z_min", &mut h.z_min);
    v.visit("hopper.z_max", &mut h.z_max);
    v.visit("hopper.crouch", &mut h.crouch);
    v.visit("hopper.reset_noise", &mut h.reset_noise);

    for (k, ck) in c.reward.c.iter_mut().enumerate() {
        v.visit(&format!("reward.c{}", k + 1), ck);
    }

    let p = &mut c.ppo;
    v.visit("ppo.clip", &mut p.clip);
    v.visit("ppo.gamma", &mut p.gamma);
    v.visit("ppo.lambda", &mut p.lambda);
    v.visit("ppo.lr", &mut p.lr);
    v.visit("ppo.minibatch", &mut p.minibatch);
    v.visit("ppo.epochs", &mut p.epochs);
    v.visit("ppo.rollout_len", &mut p.rollout_len);
    v.visit("ppo.n_workers", &mut p.n_workers);
    v.visit("ppo.vf_coef", &mut p.vf_coef);
    v.visit("ppo.ent_coef", &mut p.ent_coef);
    v.visit("ppo.max_grad_norm", &mut p.max_grad_norm);
    v.visit("ppo.init_log_std", &mut p.init_log_std);
    v.visit("ppo.reward_scaling", &mut p.reward_scaling);
    v.visit("ppo.critic_hidden", &mut p.critic_hidden);
    v.visit("ppo.grad_chunk", &mut p.grad_chunk);
}

struct Setter<'a> {
    entries: BTreeMap<String, (usize, &'a str)>,
    error: Option<Error>,
}

impl FieldVisitor for Setter<'_> {
    fn visit(&mut self, key: &str, field: &mut dyn Field) {
        if let Some((line, value)) = self.entries.remove(key) {
            if let Err(message) = field.set(value) {
                self.error.get_or_insert(Error::Parse {
                    line,
                    message: format!("`{key}`: {message}"),
                });
            }
        }
    }
}

struct Getter(Vec<String>);

impl FieldVisitor for Getter {
    fn visit(&mut self, key: &str, field: &mut dyn Field) {
        self.0.push(format!("{key} = {}", field.get()));
    }
}

impl ExperimentConfig {
    /// Parses `text` over the defaults, then validates every section.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            if entries.insert(k.trim().to_string(), (i + 1, v.trim())).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key `{}`", k.trim()),
                });
            }
        }
        let mut cfg = ExperimentConfig::default();
        let mut setter = Setter { entries, error: None };
        visit_fields(&mut cfg, &mut setter);
        if let Some(e) = setter.error {
            return Err(e);
        }
        if let Some((key, (line, _))) = setter.entries.into_iter().next() {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        let mut copy = self.clone();
        let mut g = Getter(Vec::new());
        visit_fields(&mut copy, &mut g);
        g.0.join("\n") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one `key = value` override on top of this config.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut text = self.serialize();
        text = text
            .lines()
            .filter(|l| l.split('=').next().map(str::trim) != Some(key))
            .collect::<Vec<_>>()
            .join("\n");
        text.push_str(&format!("\n{key} = {value}\n"));
        *self = Self::parse(&text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "must list at least one seed"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::config("experiment.snapshot_every", "must be positive"));
        }
        if self.final_window == 0 {
            return Err(Error::config("experiment.final_window", "must be positive"));
        }
        self.actor.validate()?;
        self.hopper.validate()?;
        self.reward.validate()?;
        self.ppo.validate()
    }
}
