//! Random-configuration gradient checks of the actor step and the PPO loss
//! against the reference models, with double-double refinement of the
//! central differences.

use cpg_actor::actors::{Actor, ActorConfig, Carry, CpgActor, JointMap};
use cpg_actor::cpg::{CpgState, CpgTopology};
use cpg_actor::feedback::FeedbackConfig;
use cpg_actor::grad::{Tape, Tensor};
use cpg_actor::hopper::OBS_DIM;
use cpg_actor::ppo::{log_prob, minibatch_loss, Batch, Critic, PpoConfig};
use cpg_actor_oracle::fd::{check_jacobian, JacobianCheck, VectorFn};
use cpg_actor_oracle::models::{self, ActorCriticSpec, Osc, Transition};
use cpg_actor_oracle::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const H: f64 = 1e-6;
pub const TOL: f64 = 1e-5;
const DT: f64 = 0.01;

struct Setup {
    actor: CpgActor,
    spec: ActorCriticSpec,
    params: Vec<f64>,
}

fn widths(rng: &mut ChaCha8Rng, full: bool) -> Vec<usize> {
    if full {
        vec![32, 32]
    } else {
        vec![rng.gen_range(2..=8), rng.gen_range(2..=8)]
    }
}

fn gaussian_init(rng: &mut ChaCha8Rng, sizes: &[usize], out_gain: f64) -> Vec<f64> {
    let mut p = Vec::new();
    for (k, w) in sizes.windows(2).enumerate() {
        let gain = if k + 2 == sizes.len() { out_gain } else { 1.0 };
        let s = gain / (w[0] as f64).sqrt();
        p.extend((0..w[0] * w[1] + w[1]).map(|_| s * rng.sample::<f64, _>(StandardNormal)));
    }
    p
}

/// Every tenth configuration uses the default network widths.
fn setup(seed: u64, rng: &mut ChaCha8Rng) -> Setup {
    let full = seed.is_multiple_of(10);
    let feedback = FeedbackConfig {
        hidden: widths(rng, full),
        ..FeedbackConfig::default()
    };
    let command = rng.gen_range(0.2..1.8);
    let cfg = ActorConfig {
        command,
        feedback: feedback.clone(),
        ..ActorConfig::default()
    };
    let actor = CpgActor::new(&cfg, DT, false).unwrap();
    let topo = CpgTopology::hopper();
    let mut fb_sizes = vec![OBS_DIM];
    fb_sizes.extend(&feedback.hidden);
    fb_sizes.push(2 * topo.n());
    let mut critic_sizes = vec![OBS_DIM];
    critic_sizes.extend(if full { vec![64, 64] } else { widths(rng, false) });
    critic_sizes.push(1);

    let mut params: Vec<f64> = (0..topo.m()).map(|_| rng.gen_range(-1.5..1.5)).collect();
    params.extend(gaussian_init(rng, &fb_sizes, 0.5));
    let joints = JointMap::default();
    let spec = ActorCriticSpec {
        adj: topo.adjacency().to_vec(),
        fb_sizes,
        critic_sizes,
        scales: (feedback.xi_scale, feedback.kappa_scale),
        offsets: joints.offset.to_vec(),
        ranges: joints.range.to_vec(),
        command,
        dt: DT,
        clip: 0.2,
        vf_coef: rng.gen_range(0.1..1.0),
        ent_coef: rng.gen_range(0.0..0.02),
    };
    Setup { actor, spec, params }
}

fn random_state(rng: &mut ChaCha8Rng) -> CpgState {
    let mut u = |lo: f64, hi: f64| (0..2).map(|_| rng.gen_range(lo..hi)).collect::<Vec<_>>();
    CpgState {
        theta: u(-3.0, 3.0),
        theta_dot: u(-10.0, 10.0),
        r: u(0.05, 1.0),
        r_dot: u(-2.0, 2.0),
        r_ddot: u(-20.0, 20.0),
    }
}

fn random_obs(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..OBS_DIM).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Inputs `[actor params | obs]`, outputs the two action means.
struct ActorStepFn<'a> {
    spec: &'a ActorCriticSpec,
    state: Vec<f64>,
}

impl VectorFn for ActorStepFn<'_> {
    fn eval<T: Real>(&self, z: &[T]) -> Vec<T> {
        let na = self.spec.actor_size();
        let state: Vec<T> = self.state.iter().map(|&x| T::c(x)).collect();
        let (_, mean) = models::cpg_actor_step(
            &self.spec.adj,
            &self.spec.fb_sizes,
            &z[..na],
            &z[na..],
            &Osc::from_flat(2, &state),
            &[T::c(self.spec.command)],
            self.spec.dt,
            self.spec.scales,
            &self.spec.offsets,
            &self.spec.ranges,
        );
        mean
    }
}

/// Jacobian of one closed-loop actor step with respect to its parameters
/// and observation.
pub fn actor_step_check(seed: u64) -> JacobianCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = setup(seed, &mut rng);
    let state = random_state(&mut rng);
    let obs = random_obs(&mut rng);
    let mut tape = Tape::new();
    let p = tape.leaf(Tensor::row(s.params.clone()));
    let o = tape.leaf(Tensor::row(obs.clone()));
    let mean = s
        .actor
        .act_taped(&mut tape, p, o, &[Carry::Cpg(state.clone())])
        .unwrap();
    let jac: Vec<Vec<f64>> = (0..2)
        .map(|k| {
            let mut seed = Tensor::zeros(1, 2);
            seed.data_mut()[k] = 1.0;
            tape.backward(mean, &seed).unwrap().to_vector().0
        })
        .collect();
    let mut point = s.params;
    point.extend(obs);
    let f = ActorStepFn {
        spec: &s.spec,
        state: state.to_flat(),
    };
    check_jacobian(&f, &point, &jac, H, TOL)
}

struct LossFn<'a> {
    spec: &'a ActorCriticSpec,
    batch: &'a [Transition],
}

impl VectorFn for LossFn<'_> {
    fn eval<T: Real>(&self, z: &[T]) -> Vec<T> {
        vec![models::ppo_loss(self.spec, z, self.batch)]
    }
}

/// Gradient of the minibatch PPO loss with respect to
/// `[actor | log_std | critic]`. Probability ratios are kept at least 1e-3
/// away from the clip boundaries, where the loss has kinks.
pub fn ppo_loss_check(seed: u64) -> JacobianCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let s = setup(seed, &mut rng);
    let critic = Critic::new(OBS_DIM, &s.spec.critic_sizes[1..s.spec.critic_sizes.len() - 1]);
    let critic_params = gaussian_init(&mut rng, &s.spec.critic_sizes, 1.0);
    let log_std: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..0.0)).collect();
    let cfg = PpoConfig {
        clip: s.spec.clip,
        vf_coef: s.spec.vf_coef,
        ent_coef: s.spec.ent_coef,
        ..PpoConfig::default()
    };

    let b = rng.gen_range(1..=4);
    let mut batch = Batch::default();
    let mut transitions = Vec::new();
    for _ in 0..b {
        let obs = random_obs(&mut rng);
        let state = random_state(&mut rng);
        let carry = Carry::Cpg(state.clone());
        let (mean, _) = s.actor.act(&s.params, &obs, &carry).unwrap();
        let action: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(m, l)| m + l.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = log_prob(&action, &mean, &log_std);
        let shift = loop {
            let d: f64 = rng.gen_range(-0.4..0.4);
            let r = (-d).exp();
            if (r - (1.0 - cfg.clip)).abs() > 1e-3 && (r - (1.0 + cfg.clip)).abs() > 1e-3 {
                break d;
            }
        };
        let tr = Transition {
            obs: obs.clone(),
            state: state.to_flat(),
            action: action.clone(),
            old_log_prob: lp + shift,
            advantage: rng.sample(StandardNormal),
            ret: rng.sample::<f64, _>(StandardNormal) * 2.0,
        };
        batch.obs.push(obs);
        batch.carries.push(carry);
        batch.actions.push(action);
        batch.log_probs.push(tr.old_log_prob);
        batch.advantages.push(tr.advantage);
        batch.returns.push(tr.ret);
        transitions.push(tr);
    }
    let idx: Vec<usize> = (0..b).collect();
    let lg = minibatch_loss(
        &s.actor,
        &critic,
        &cfg,
        [&s.params, &log_std, &critic_params],
        &batch,
        &idx,
    )
    .unwrap();
    let mut point = s.params.clone();
    point.extend(&log_std);
    point.extend(&critic_params);
    let f = LossFn {
        spec: &s.spec,
        batch: &transitions,
    };
    check_jacobian(&f, &point, &[lg.grad], H, TOL)
}
