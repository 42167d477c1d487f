//! Interchangeable actors: the CPG-Actor (oscillators plus MLP feedback), its
//! open-loop variant, a plain MLP, and the CPG-in-environment baseline whose
//! policy emits oscillator parameters every control step.
//!
//! Every actor maps a normalised observation and a carried state to an action
//! mean. Only CPG-Actors carry anything; the baseline keeps its oscillators in
//! the environment wrapper instead.

mod cpg_actor;
mod cpg_in_env;
mod mlp_actor;
mod warm_start;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

pub use cpg_actor::CpgActor;
pub use cpg_in_env::{CpgInEnvActor, CpgInEnvWrapper};
pub use mlp_actor::MlpActor;
pub use warm_start::{warm_start, WarmStartConfig, WarmStartReport};

use crate::cpg::{CpgState, InitConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::feedback::FeedbackConfig;
use crate::grad::{Tape, Tensor, Var};
use crate::hopper::{HopperConfig, RewardConfig};
use crate::normalize::RunningNorm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActorKind {
    CpgActor,
    /// CPG-Actor with feedback fixed at zero; only `V` is trained.
    CpgOpenLoop,
    MlpActor,
    CpgInEnv,
}

impl ActorKind {
    pub const ALL: [ActorKind; 4] = [
        ActorKind::CpgActor,
        ActorKind::CpgOpenLoop,
        ActorKind::MlpActor,
        ActorKind::CpgInEnv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActorKind::CpgActor => "cpg-actor",
            ActorKind::CpgOpenLoop => "cpg-open-loop",
            ActorKind::MlpActor => "mlp-actor",
            ActorKind::CpgInEnv => "cpg-in-env",
        }
    }
}

impl fmt::Display for ActorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActorKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::config(
                "actor",
                format!("unknown actor kind `{s}` (expected one of cpg-actor, cpg-open-loop, mlp-actor, cpg-in-env)"),
            )
        })
    }
}

/// State threaded between consecutive `act` calls.
#[derive(Clone, Debug, PartialEq)]
pub enum Carry {
    None,
    Cpg(CpgState),
}

impl Carry {
    pub fn cpg(&self) -> Option<&CpgState> {
        match self {
            Carry::Cpg(s) => Some(s),
            Carry::None => None,
        }
    }
}

/// Affine map from oscillator output to joint targets: `x·range + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointMap {
    pub offset: [f64; 2],
    pub range: [f64; 2],
}

impl Default for JointMap {
    fn default() -> Self {
        JointMap {
            offset: [-0.2, 0.6],
            range: [0.6, 0.9],
        }
    }
}

impl JointMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| xj * self.range[j] + self.offset[j])
            .collect()
    }

    /// Same arithmetic on a `[B, 2]` tape value.
    pub fn apply_taped(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let range = tape.constant(Tensor::row(self.range.to_vec()));
        let offset = tape.constant(Tensor::row(self.offset.to_vec()));
        let scaled = tape.mul(x, range)?;
        tape.add(scaled, offset)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.range.iter().chain(&self.offset).all(|x| x.is_finite()) || self.range.iter().any(|&r| r <= 0.0) {
            return Err(Error::config("actor.joint_range", "must be finite and positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorConfig {
    pub kind: ActorKind,
    pub joints: JointMap,
    /// Constant command `d` for the whole episode.
    pub command: f64,
    pub d_max: f64,
    pub cpg_init: InitConfig,
    pub feedback: FeedbackConfig,
    /// Hidden widths of the MLP actor and of the baseline policy.
    pub mlp_hidden: Vec<usize>,
    pub mlp_output_gain: f64,
    pub warm_start: WarmStartConfig,
}

impl Default for ActorConfig {
    fn default() -> Self {
        ActorConfig {
            kind: ActorKind::CpgActor,
            joints: JointMap::default(),
            command: 1.0,
            d_max: 2.0,
            cpg_init: InitConfig::default(),
            feedback: FeedbackConfig::default(),
            mlp_hidden: vec![64, 64],
            mlp_output_gain: 0.01,
            warm_start: WarmStartConfig::default(),
        }
    }
}

impl ActorConfig {
    pub fn validate(&self) -> Result<()> {
        self.joints.validate()?;
        if !(self.d_max > 0.0) {
            return Err(Error::config("actor.d_max", "must be positive"));
        }
        if !(0.0..=self.d_max).contains(&self.command) {
            return Err(Error::config("actor.command", "must lie in [0, d_max]"));
        }
        if self.mlp_hidden.contains(&0) {
            return Err(Error::config("actor.mlp_hidden", "layer widths must be positive"));
        }
        if !(self.mlp_output_gain >= 0.0) {
            return Err(Error::config("actor.mlp_output_gain", "must be non-negative"));
        }
        self.cpg_init.validate()?;
        self.feedback.validate()?;
        self.warm_start.validate()
    }
}

/// Named slice of the flat actor parameters, for histograms and gradient norms.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGroup {
    pub name: &'static str,
    pub range: Range<usize>,
}

/// Result of any supervised pre-training an actor performs before RL.
#[derive(Clone, Debug, Default)]
pub struct Pretrain {
    /// Observation statistics the pre-training was fitted under.
    pub normalizer: Option<RunningNorm>,
    pub losses: Vec<f64>,
}

pub trait Actor: Send + Sync {
    fn kind(&self) -> ActorKind;
    fn obs_dim(&self) -> usize;
    /// Dimension of the Gaussian the trainer samples from.
    fn action_dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn init_params(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    /// Carried state at the start of an episode.
    fn initial_carry(&self, params: &[f64], rng: &mut ChaCha8Rng) -> Result<Carry>;
    fn act(&self, params: &[f64], obs: &[f64], carry: &Carry) -> Result<(Vec<f64>, Carry)>;
    /// Batched action means `[B, action_dim]`; `params` is a `[1, n_params]`
    /// tape value and `obs` is `[B, obs_dim]`. Carries enter as constants.
    fn act_taped(&self, tape: &mut Tape, params: Var, obs: Var, carries: &[Carry]) -> Result<Var>;
    fn groups(&self) -> Vec<ParamGroup>;
    fn make_env(&self, hopper: &HopperConfig, reward: &RewardConfig) -> Result<Box<dyn Environment>>;
    fn pretrain(&self, _params: &mut [f64], _hopper: &HopperConfig, _rng: &mut ChaCha8Rng) -> Result<Pretrain> {
        Ok(Pretrain::default())
    }
}

/// Builds the actor selected by `cfg.kind`. `dt` is the control period.
pub fn build_actor(cfg: &ActorConfig, dt: f64) -> Result<Box<dyn Actor>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        ActorKind::CpgActor => Box::new(CpgActor::new(cfg, dt, false)?),
        ActorKind::CpgOpenLoop => Box::new(CpgActor::new(cfg, dt, true)?),
        ActorKind::MlpActor => Box::new(MlpActor::new(cfg)),
        ActorKind::CpgInEnv => Box::new(CpgInEnvActor::new(cfg, dt)?),
    })
}

pub(crate) fn carry_states(carries: &[Carry]) -> Result<Vec<CpgState>> {
    carries
        .iter()
        .map(|c| {
            c.cpg()
                .cloned()
                .ok_or_else(|| Error::Contract("CPG actor needs an oscillator carry".into()))
        })
        .collect()
}
