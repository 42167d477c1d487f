use rand_chacha::ChaCha8Rng;

use super::{carry_states, Actor, ActorConfig, ActorKind, Carry, JointMap, ParamGroup};
use crate::cpg::{
    cpg_step, cpg_step_taped, init_cpg, reset_state, CommandSignal, CpgTopology, FeedbackSignals, TapedState,
};
use crate::env::Environment;
use crate::error::{check_len, Result};
use crate::feedback::FeedbackNet;
use crate::grad::{Tape, Tensor, Var};
use crate::hopper::{HopperConfig, HopperEnv, RewardConfig, OBS_DIM};
use rand::Rng;

/// Oscillators as the policy. Parameters are `[V | feedback MLP]`; the
/// open-loop variant has `V` only and zero feedback.
#[derive(Clone, Debug)]
pub struct CpgActor {
    pub topo: CpgTopology,
    pub net: FeedbackNet,
    pub joints: JointMap,
    pub cmd: CommandSignal,
    pub dt: f64,
    pub open_loop: bool,
    cfg: ActorConfig,
}

impl CpgActor {
    pub fn new(cfg: &ActorConfig, dt: f64, open_loop: bool) -> Result<Self> {
        let topo = CpgTopology::hopper();
        let cmd = CommandSignal(vec![cfg.command; topo.d_cmd()]);
        cmd.validate(cfg.d_max)?;
        Ok(CpgActor {
            net: FeedbackNet::new(OBS_DIM, topo.n(), &cfg.feedback),
            topo,
            joints: cfg.joints,
            cmd,
            dt,
            open_loop,
            cfg: cfg.clone(),
        })
    }

    fn m(&self) -> usize {
        self.topo.m()
    }

    /// Feedback for one observation, zero when open loop.
    pub fn feedback(&self, params: &[f64], obs: &[f64]) -> Result<FeedbackSignals> {
        if self.open_loop {
            return Ok(FeedbackSignals::zeros(self.topo.n()));
        }
        self.net.forward(&params[self.m()..], obs)
    }
}

impl Actor for CpgActor {
    fn kind(&self) -> ActorKind {
        if self.open_loop {
            ActorKind::CpgOpenLoop
        } else {
            ActorKind::CpgActor
        }
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        self.topo.n()
    }

    fn n_params(&self) -> usize {
        if self.open_loop {
            self.m()
        } else {
            self.m() + self.net.n_params()
        }
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let (p, _) = init_cpg(&self.topo, rng.gen(), &self.cfg.cpg_init)?;
        let mut v = p.v;
        if !self.open_loop {
            v.extend(self.net.init(rng, self.cfg.feedback.hidden_gain));
        }
        Ok(v)
    }

    fn initial_carry(&self, params: &[f64], rng: &mut ChaCha8Rng) -> Result<Carry> {
        Ok(Carry::Cpg(reset_state(
            &self.topo,
            &params[..self.m()],
            &self.cmd,
            rng,
        )?))
    }

    fn act(&self, params: &[f64], obs: &[f64], carry: &Carry) -> Result<(Vec<f64>, Carry)> {
        check_len("cpg actor params", self.n_params(), params.len())?;
        let state = carry_states(std::slice::from_ref(carry))?.remove(0);
        let fb = self.feedback(params, obs)?;
        let (next, x) = cpg_step(&self.topo, &state, &params[..self.m()], &self.cmd, &fb, self.dt)?;
        Ok((self.joints.apply(&x), Carry::Cpg(next)))
    }

    fn act_taped(&self, tape: &mut Tape, params: Var, obs: Var, carries: &[Carry]) -> Result<Var> {
        let states = carry_states(carries)?;
        let b = states.len();
        let n = self.topo.n();
        let v = tape.view(params, 0, 1, self.m())?;
        let cmd = tape.constant(Tensor::row(self.cmd.0.clone()));
        let (xi, kappa) = if self.open_loop {
            let z = tape.constant(Tensor::zeros(b, n));
            (z, z)
        } else {
            self.net.forward_taped(tape, params, self.m(), obs)?
        };
        let s = TapedState::constants(tape, &states)?;
        let step = cpg_step_taped(tape, &self.topo, v, cmd, xi, kappa, &s, self.dt)?;
        self.joints.apply_taped(tape, step.output)
    }

    fn groups(&self) -> Vec<ParamGroup> {
        let m = self.m();
        let mut g = vec![ParamGroup {
            name: "cpg",
            range: 0..m,
        }];
        if !self.open_loop {
            let out = self.net.layout.output_layer_range();
            g.push(ParamGroup {
                name: "feedback_hidden",
                range: m..m + out.start,
            });
            g.push(ParamGroup {
                name: "feedback_out",
                range: m + out.start..m + out.end,
            });
        }
        g
    }

    fn make_env(&self, hopper: &HopperConfig, reward: &RewardConfig) -> Result<Box<dyn Environment>> {
        Ok(Box::new(HopperEnv::new(hopper.clone(), reward.clone())?))
    }
}
