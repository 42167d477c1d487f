use rand_chacha::ChaCha8Rng;

use super::{Actor, ActorConfig, ActorKind, Carry, ParamGroup};
use crate::env::Environment;
use crate::error::Result;
use crate::grad::{Tape, Var};
use crate::hopper::{HopperConfig, HopperEnv, RewardConfig, OBS_DIM};
use crate::nn::MlpLayout;

/// `obs → 64 tanh → 64 tanh → 2`, read directly as joint targets.
#[derive(Clone, Debug)]
pub struct MlpActor {
    pub layout: MlpLayout,
    hidden_gain: f64,
    output_gain: f64,
}

impl MlpActor {
    pub fn new(cfg: &ActorConfig) -> Self {
        let mut sizes = vec![OBS_DIM];
        sizes.extend(&cfg.mlp_hidden);
        sizes.push(2);
        MlpActor {
            layout: MlpLayout::new(sizes),
            hidden_gain: std::f64::consts::SQRT_2,
            output_gain: cfg.mlp_output_gain,
        }
    }
}

impl Actor for MlpActor {
    fn kind(&self) -> ActorKind {
        ActorKind::MlpActor
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(self.layout.init_orthogonal(rng, self.hidden_gain, self.output_gain))
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
                name: "mlp_hidden",
                range: 0..out.start,
            },
            ParamGroup {
                name: "mlp_out",
                range: out,
            },
        ]
    }

    fn make_env(&self, hopper: &HopperConfig, reward: &RewardConfig) -> Result<Box<dyn Environment>> {
        Ok(Box::new(HopperEnv::new(hopper.clone(), reward.clone())?))
    }
}
