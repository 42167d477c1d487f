use rand_chacha::ChaCha8Rng;

use super::{warm_start, Actor, ActorConfig, ActorKind, Carry, JointMap, ParamGroup, Pretrain, WarmStartConfig};
use crate::cpg::{cpg_step, reset_state, CommandSignal, CpgState, CpgTopology, FeedbackSignals};
use crate::env::{Environment, StepResult};
use crate::error::{check_len, Error, Result};
use crate::grad::{Tape, Var};
use crate::hopper::{HopperConfig, HopperEnv, HopperState, RewardConfig, OBS_DIM};
use crate::nn::MlpLayout;

/// Baseline policy: an MLP emitting the full raw oscillator vector `V`
/// each control step. The oscillators themselves live in
/// [`CpgInEnvWrapper`].
#[derive(Clone, Debug)]
pub struct CpgInEnvActor {
    pub layout: MlpLayout,
    pub topo: CpgTopology,
    pub joints: JointMap,
    pub cmd: CommandSignal,
    pub dt: f64,
    pub warm: WarmStartConfig,
    output_gain: f64,
}

impl CpgInEnvActor {
    pub fn new(cfg: &ActorConfig, dt: f64) -> Result<Self> {
        let topo = CpgTopology::hopper();
        let cmd = CommandSignal(vec![cfg.command; topo.d_cmd()]);
        cmd.validate(cfg.d_max)?;
        let mut sizes = vec![OBS_DIM];
        sizes.extend(&cfg.mlp_hidden);
        sizes.push(topo.m());
        Ok(CpgInEnvActor {
            layout: MlpLayout::new(sizes),
            topo,
            joints: cfg.joints,
            cmd,
            dt,
            warm: cfg.warm_start.clone(),
            output_gain: cfg.mlp_output_gain,
        })
    }

    /// Raw parameter vector the warm start regresses onto.
    pub fn target(&self) -> Vec<f64> {
        self.warm.target_vector(&self.topo)
    }

    pub fn wrapper(&self, hopper: &HopperConfig, reward: &RewardConfig) -> Result<CpgInEnvWrapper> {
        CpgInEnvWrapper::new(
            HopperEnv::new(hopper.clone(), reward.clone())?,
            self.topo.clone(),
            self.cmd.clone(),
            self.joints,
            self.dt,
            self.target(),
        )
    }
}

impl Actor for CpgInEnvActor {
    fn kind(&self) -> ActorKind {
        ActorKind::CpgInEnv
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        self.topo.m()
    }

    fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(self
            .layout
            .init_orthogonal(rng, std::f64::consts::SQRT_2, self.output_gain))
    }

    fn initial_carry(&self, _params: &[f64], _rng: &mut ChaCha8Rng) -> Result<Carry> {
        Ok(Carry::None)
    }

    fn act(&self, params: &[f64], obs: &[f64], _carry: &Carry) -> Result<(Vec<f64>, Carry)> {
        Ok((self.layout.forward(params, obs)?, Carry::None))
    }

    fn act_taped(&self, tape: &mut Tape, params: Var, obs: Var, _carries: &[Carry]) -> Result<Var> {
        self.layout.forward_taped(tape, params, 0, obs)
    }

    fn groups(&self) -> Vec<ParamGroup> {
        let out = self.layout.output_layer_range();
        vec![
            ParamGroup {
                name: "policy_hidden",
                range: 0..out.start,
            },
            ParamGroup {
                name: "policy_out",
                range: out,
            },
        ]
    }

    fn make_env(&self, hopper: &HopperConfig, reward: &RewardConfig) -> Result<Box<dyn Environment>> {
        Ok(Box::new(self.wrapper(hopper, reward)?))
    }

    fn pretrain(&self, params: &mut [f64], hopper: &HopperConfig, rng: &mut ChaCha8Rng) -> Result<Pretrain> {
        let report = warm_start(
            &self.layout,
            params,
            &self.target(),
            &self.warm,
            hopper,
            &self.joints,
            rng,
        )?;
        Ok(Pretrain {
            normalizer: Some(report.normalizer),
            losses: report.losses,
        })
    }
}

/// Hopper whose action is a raw oscillator vector. Each step runs one CPG
/// step with zero feedback and sends the mapped output to the leg.
#[derive(Clone, Debug)]
pub struct CpgInEnvWrapper {
    pub inner: HopperEnv,
    pub topo: CpgTopology,
    pub cmd: CommandSignal,
    pub joints: JointMap,
    pub dt: f64,
    /// Parameters whose `ρ` sets the amplitude at episode start.
    pub reset_v: Vec<f64>,
    state: CpgState,
    zero_fb: FeedbackSignals,
}

impl CpgInEnvWrapper {
    pub fn new(
        inner: HopperEnv,
        topo: CpgTopology,
        cmd: CommandSignal,
        joints: JointMap,
        dt: f64,
        reset_v: Vec<f64>,
    ) -> Result<Self> {
        check_len("wrapper reset params", topo.m(), reset_v.len())?;
        let n = topo.n();
        Ok(CpgInEnvWrapper {
            inner,
            state: CpgState::zeros(n),
            zero_fb: FeedbackSignals::zeros(n),
            topo,
            cmd,
            joints,
            dt,
            reset_v,
        })
    }

    pub fn set_cpg_state(&mut self, s: CpgState) {
        self.state = s;
    }
}

impl Environment for CpgInEnvWrapper {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        self.topo.m()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let obs = self.inner.reset(rng)?;
        self.state = reset_state(&self.topo, &self.reset_v, &self.cmd, rng)?;
        Ok(obs)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_len("emitted oscillator parameters", self.topo.m(), action.len())?;
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("emitted oscillator parameters".into()));
        }
        let (next, x) = cpg_step(&self.topo, &self.state, action, &self.cmd, &self.zero_fb, self.dt)?;
        if !next.is_finite() {
            return Err(Error::NonFinite("oscillator state in environment".into()));
        }
        let result = self.inner.step(&self.joints.apply(&x))?;
        self.state = next;
        Ok(result)
    }

    fn hopper_state(&self) -> &HopperState {
        self.inner.state()
    }

    fn cpg_state(&self) -> Option<&CpgState> {
        Some(&self.state)
    }
}
