use cpg_actor::actors::*;
use cpg_actor::cpg::{cpg_step, map_params, CommandSignal, CpgState, CpgTopology, FeedbackSignals};
use cpg_actor::env::Environment;
use cpg_actor::grad::{Tape, Tensor};
use cpg_actor::hopper::{HopperConfig, HopperEnv, RewardConfig, OBS_DIM};
use cpg_actor_oracle::models;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DT: f64 = 0.01;

fn actor(kind: ActorKind) -> Box<dyn Actor> {
    build_actor(
        &ActorConfig {
            kind,
            ..ActorConfig::default()
        },
        DT,
    )
    .unwrap()
}

fn cpg_actor(open_loop: bool) -> CpgActor {
    CpgActor::new(&ActorConfig::default(), DT, open_loop).unwrap()
}

fn random_obs(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..OBS_DIM).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Gives the feedback output layer nonzero weights.
fn perturb_output_layer(a: &CpgActor, p: &mut [f64], rng: &mut ChaCha8Rng) {
    let m = a.topo.m();
    for x in &mut p[m + a.net.layout.output_layer_range().start..] {
        *x = rng.gen_range(-0.3..0.3);
    }
}

#[test]
fn kinds_round_trip_through_names() {
    for k in ActorKind::ALL {
        assert_eq!(k.name().parse::<ActorKind>().unwrap(), k);
    }
    assert!("lstm".parse::<ActorKind>().is_err());
}

#[test]
fn carries_match_actor_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in ActorKind::ALL {
        let a = actor(k);
        let p = a.init_params(&mut rng).unwrap();
        assert_eq!(p.len(), a.n_params());
        let c = a.initial_carry(&p, &mut rng).unwrap();
        let cpg = matches!(k, ActorKind::CpgActor | ActorKind::CpgOpenLoop);
        assert_eq!(c.cpg().is_some(), cpg, "{k}");
        let (_, next) = a.act(&p, &random_obs(&mut rng), &c).unwrap();
        assert_eq!(next.cpg().is_some(), cpg, "{k}");
    }
}

#[test]
fn zero_feedback_output_equals_open_loop() {
    let closed = cpg_actor(false);
    let open = cpg_actor(true);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = closed.init_params(&mut rng).unwrap();
    assert!(p[closed.topo.m() + closed.net.layout.output_layer_range().start..]
        .iter()
        .all(|&x| x == 0.0));
    let v = p[..closed.topo.m()].to_vec();
    let mut cc = closed.initial_carry(&p, &mut rng).unwrap();
    let mut co = cc.clone();
    for _ in 0..500 {
        let obs = random_obs(&mut rng);
        let (a1, n1) = closed.act(&p, &obs, &cc).unwrap();
        let (a2, n2) = open.act(&v, &obs, &co).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(n1, n2);
        (cc, co) = (n1, n2);
    }
}

#[test]
fn zero_amplitude_gives_joint_offsets() {
    let a = cpg_actor(true);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = a.init_params(&mut rng).unwrap();
    let (mean, _) = a.act(&p, &[0.0; OBS_DIM], &Carry::Cpg(CpgState::zeros(2))).unwrap();
    // One step from r = ṙ = r̈ = 0 moves r by (dt/2)·ṙ', which is O(dt²).
    let j = JointMap::default();
    for ((m, o), r) in mean.iter().zip(j.offset).zip(j.range) {
        assert!((m - o).abs() < 0.05 * r);
    }
    assert_eq!(j.apply(&[0.0, 0.0]), j.offset.to_vec());
}

#[test]
fn step_is_the_hand_composed_pipeline() {
    let a = cpg_actor(false);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut p = a.init_params(&mut rng).unwrap();
    perturb_output_layer(&a, &mut p, &mut rng);
    let c = a.initial_carry(&p, &mut rng).unwrap();
    let obs = random_obs(&mut rng);
    let m = a.topo.m();
    let z = a.net.layout.forward(&p[m..], &obs).unwrap();
    let fb = FeedbackSignals {
        xi: z[..2].iter().map(|x| x.tanh() * a.net.xi_scale).collect(),
        kappa: z[2..].iter().map(|x| x.tanh() * a.net.kappa_scale).collect(),
    };
    let (s, x) = cpg_step(
        &a.topo,
        c.cpg().unwrap(),
        &p[..m],
        &CommandSignal::constant(1.0),
        &fb,
        DT,
    )
    .unwrap();
    let (mean, next) = a.act(&p, &obs, &c).unwrap();
    assert_eq!(mean, a.joints.apply(&x));
    assert_eq!(next, Carry::Cpg(s));

    // Independent reference model.
    let st = c.cpg().unwrap().to_flat();
    let (ref_state, ref_mean) = models::cpg_actor_step(
        a.topo.adjacency(),
        a.net.layout.sizes(),
        &p,
        &obs,
        &models::Osc::from_flat(2, &st),
        &[1.0],
        DT,
        (a.net.xi_scale, a.net.kappa_scale),
        &a.joints.offset,
        &a.joints.range,
    );
    for k in 0..2 {
        assert!((ref_mean[k] - mean[k]).abs() < 1e-12);
    }
    for (r, s) in ref_state.flat().iter().zip(next.cpg().unwrap().to_flat()) {
        assert!((r - s).abs() < 1e-12 * s.abs().max(1.0));
    }
}

#[test]
fn taped_means_equal_direct_means_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in ActorKind::ALL {
        let a = actor(k);
        let mut p = a.init_params(&mut rng).unwrap();
        for x in &mut p {
            *x += rng.gen_range(-0.05..0.05);
        }
        let obs: Vec<Vec<f64>> = (0..6).map(|_| random_obs(&mut rng)).collect();
        let carries: Vec<Carry> = (0..6).map(|_| a.initial_carry(&p, &mut rng).unwrap()).collect();
        let mut tape = Tape::new();
        let pv = tape.leaf(Tensor::row(p.clone()));
        let ov = tape.constant(Tensor::from_rows(&obs).unwrap());
        let mv = a.act_taped(&mut tape, pv, ov, &carries).unwrap();
        let mt = tape.value(mv);
        assert_eq!(mt.shape(), (6, a.action_dim()));
        for b in 0..6 {
            let (m, _) = a.act(&p, &obs[b], &carries[b]).unwrap();
            assert_eq!(mt.row_slice(b), &m[..], "{k} row {b}");
        }
    }
}

#[test]
fn mlp_actor_examples() {
    let a = MlpActor::new(&ActorConfig::default());
    let zero = vec![0.0; a.n_params()];
    let (m, c) = a.act(&zero, &[0.7; OBS_DIM], &Carry::None).unwrap();
    assert_eq!(m, vec![0.0, 0.0]);
    assert_eq!(c, Carry::None);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p: Vec<f64> = (0..a.n_params()).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let obs = random_obs(&mut rng);
    let (m, _) = a.act(&p, &obs, &Carry::None).unwrap();
    let r = models::mlp(a.layout.sizes(), &p, &obs);
    for k in 0..2 {
        assert!((m[k] - r[k]).abs() < 1e-12);
    }
}

/// Reorders the units of the first hidden layer.
fn permute_first_hidden(layout: &cpg_actor::nn::MlpLayout, p: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut q = p.to_vec();
    let (w0, b0, n_in, n_out) = layout.layer(0);
    let (w1, _, n_in1, n_out1) = layout.layer(1);
    assert_eq!(n_in1, n_out);
    for (new, &old) in perm.iter().enumerate() {
        for i in 0..n_in {
            q[w0 + new * n_in + i] = p[w0 + old * n_in + i];
        }
        q[b0 + new] = p[b0 + old];
        for o in 0..n_out1 {
            q[w1 + o * n_in1 + new] = p[w1 + o * n_in1 + old];
        }
    }
    q
}

proptest! {
    #[test]
    fn hidden_permutation_leaves_output_unchanged(seed in 0u64..10_000) {
        let a = MlpActor::new(&ActorConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = a.init_params(&mut rng).unwrap();
        let mut perm: Vec<usize> = (0..64).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
        let q = permute_first_hidden(&a.layout, &p, &perm);
        let obs = random_obs(&mut rng);
        let (m1, _) = a.act(&p, &obs, &Carry::None).unwrap();
        let (m2, _) = a.act(&q, &obs, &Carry::None).unwrap();
        for k in 0..2 {
            prop_assert!((m1[k] - m2[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn actor_outputs_are_finite(seed in 0u64..10_000, scale in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in ActorKind::ALL {
            let a = actor(k);
            let p = a.init_params(&mut rng).unwrap();
            let c = a.initial_carry(&p, &mut rng).unwrap();
            let obs: Vec<f64> = random_obs(&mut rng).iter().map(|x| x * scale).collect();
            let (m, _) = a.act(&p, &obs, &c).unwrap();
            prop_assert!(m.iter().all(|x| x.is_finite()));
        }
    }
}

#[test]
fn baseline_with_zero_weights_emits_output_bias() {
    let a = CpgInEnvActor::new(&ActorConfig::default(), DT).unwrap();
    let mut p = vec![0.0; a.n_params()];
    let (_, bias, _, n_out) = a.layout.layer(a.layout.n_layers() - 1);
    let target = a.target();
    p[bias..bias + n_out].copy_from_slice(&target);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (m, c) = a.act(&p, &random_obs(&mut rng), &Carry::None).unwrap();
        assert_eq!(m, target);
        assert_eq!(c, Carry::None);
    }
}

#[test]
fn wrapper_step_is_manual_cpg_step_then_hopper_step() {
    let a = CpgInEnvActor::new(&ActorConfig::default(), DT).unwrap();
    let (hopper, reward) = (HopperConfig::default(), RewardConfig::default());
    let mut w = a.wrapper(&hopper, &reward).unwrap();
    let mut inner = HopperEnv::new(hopper, reward).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let obs = w.reset(&mut rng.clone()).unwrap();
    assert_eq!(inner.reset(&mut rng).unwrap(), obs);
    let mut state = w.cpg_state().unwrap().clone();
    let zero = FeedbackSignals::zeros(2);
    for _ in 0..200 {
        let emitted: Vec<f64> = a.target().iter().map(|x| x + rng.gen_range(-0.2..0.2)).collect();
        let (next, x) = cpg_step(&a.topo, &state, &emitted, &a.cmd, &zero, DT).unwrap();
        let expected = inner.step(&a.joints.apply(&x)).unwrap();
        let got = w.step(&emitted).unwrap();
        assert_eq!(got, expected);
        assert_eq!(w.cpg_state().unwrap(), &next);
        state = next;
        if got.done {
            break;
        }
    }
}

#[test]
fn wrapper_rejects_bad_emissions() {
    let a = CpgInEnvActor::new(&ActorConfig::default(), DT).unwrap();
    let mut w = a.wrapper(&HopperConfig::default(), &RewardConfig::default()).unwrap();
    w.reset(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(w.step(&[0.0; 3]).is_err());
    let mut v = a.target();
    v[0] = f64::NAN;
    assert!(matches!(w.step(&v), Err(cpg_actor::Error::NonFinite(_))));
}

/// Both architectures run the same oscillators when the closed loop has
/// zero feedback and the baseline emits a constant vector.
#[test]
fn open_loop_equivalence_across_architectures() {
    let cfg = ActorConfig::default();
    let baseline = CpgInEnvActor::new(&cfg, DT).unwrap();
    let closed = cpg_actor(false);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut p = closed.init_params(&mut rng).unwrap();
    let v = baseline.target();
    p[..v.len()].copy_from_slice(&v);

    let (hopper, reward) = (HopperConfig::default(), RewardConfig::default());
    let mut env_a = HopperEnv::new(hopper.clone(), reward.clone()).unwrap();
    let mut env_b = baseline.wrapper(&hopper, &reward).unwrap();
    let mut obs = env_a.reset(&mut rng.clone()).unwrap();
    env_b.reset(&mut rng).unwrap();
    let start = env_b.cpg_state().unwrap().clone();
    let mut carry = Carry::Cpg(start);
    for t in 0..400 {
        let (mean, next) = closed.act(&p, &obs, &carry).unwrap();
        let ra = env_a.step(&mean).unwrap();
        let rb = env_b.step(&v).unwrap();
        assert_eq!(ra, rb, "step {t}");
        assert_eq!(next.cpg(), env_b.cpg_state());
        if ra.done {
            break;
        }
        obs = ra.observation;
        carry = next;
    }
}

fn warm_setup(epochs: usize) -> (CpgInEnvActor, Vec<f64>, Vec<f64>, WarmStartReport) {
    let cfg = ActorConfig {
        warm_start: WarmStartConfig {
            epochs,
            ..WarmStartConfig::default()
        },
        ..ActorConfig::default()
    };
    let a = CpgInEnvActor::new(&cfg, DT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let before = a.init_params(&mut rng).unwrap();
    let mut p = before.clone();
    let rep = warm_start(
        &a.layout,
        &mut p,
        &a.target(),
        &a.warm,
        &HopperConfig::default(),
        &a.joints,
        &mut rng,
    )
    .unwrap();
    (a, before, p, rep)
}

#[test]
fn warm_start_with_no_epochs_changes_nothing() {
    let (_, before, after, rep) = warm_setup(0);
    assert_eq!(before, after);
    assert!(rep.losses.is_empty());
}

#[test]
fn warm_start_fits_the_target() {
    let (a, _, p, rep) = warm_setup(100);
    assert_eq!(rep.losses.len(), 100);
    let last = *rep.losses.last().unwrap();
    assert!(
        last < 0.01 * rep.initial_loss,
        "initial {} final {last}",
        rep.initial_loss
    );

    // Relative error of each mapped parameter over the held-out set. A
    // handful of clipped outlier observations dominate the maximum, so the
    // check is on the mean and the 99th percentile.
    let topo = CpgTopology::hopper();
    let cmd = CommandSignal::constant(1.0);
    let flat = |m: cpg_actor::cpg::MappedParams| [m.nu, m.rho, m.a, m.w, m.phi].concat();
    let want = flat(map_params(&topo, &a.target(), &cmd).unwrap());
    let mut errs = vec![Vec::new(); want.len()];
    for obs in &rep.held_out {
        let (emitted, _) = a.act(&p, obs, &Carry::None).unwrap();
        let got = flat(map_params(&topo, &emitted, &cmd).unwrap());
        for (k, e) in errs.iter_mut().enumerate() {
            e.push((got[k] - want[k]).abs() / want[k].abs());
        }
    }
    for (k, mut e) in errs.into_iter().enumerate() {
        e.sort_by(f64::total_cmp);
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let p99 = e[e.len() * 99 / 100];
        assert!(mean < 0.05 && p99 < 0.05, "entry {k}: mean {mean}, p99 {p99}");
    }
}
