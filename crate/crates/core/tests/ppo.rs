use cpg_actor::actors::{build_actor, Actor, ActorConfig, ActorKind, Carry};
use cpg_actor::grad::{Tape, Tensor};
use cpg_actor::hopper::{HopperConfig, RewardConfig, OBS_DIM};
use cpg_actor::par::Execution;
use cpg_actor::ppo::*;
use cpg_actor_oracle::models;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn log_prob_at_the_mean() {
    // Unit variance in two dimensions: −ln 2π.
    let lp = log_prob(&[0.3, -1.0], &[0.3, -1.0], &[0.0, 0.0]);
    assert!(close(lp, -(2.0 * std::f64::consts::PI).ln(), 1e-15));
    assert!(close(
        entropy(&[0.0]),
        0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln(),
        1e-15
    ));
}

#[test]
fn log_prob_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..1.0)).collect();
        assert!(close(
            log_prob(&x, &m, &s),
            models::gaussian_log_prob(&x, &m, &s),
            1e-12
        ));
    }
}

#[test]
fn sampled_actions_reevaluate_to_identical_log_prob() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mean = vec![vec![0.1, -0.4], vec![2.0, 0.3]];
    let ls = vec![-1.0, -0.3];
    let samples: Vec<_> = mean.iter().map(|m| sample_action(m, &ls, &mut rng)).collect();
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_rows(&samples.iter().map(|s| s.0.clone()).collect::<Vec<_>>()).unwrap());
    let mv = tape.constant(Tensor::from_rows(&mean).unwrap());
    let lv = tape.leaf(Tensor::row(ls.clone()));
    let lp = log_prob_taped(&mut tape, a, mv, lv).unwrap();
    for (b, s) in samples.iter().enumerate() {
        assert_eq!(tape.value(lp).row_slice(b)[0], s.1);
    }
}

fn gae_oracle(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    // Â_t = Σ_l (γλ)^l δ_{t+l} with no episode boundary.
    let n = r.len();
    let delta: Vec<f64> = (0..n).map(|t| r[t] + gamma * v[t + 1] - v[t]).collect();
    (0..n)
        .map(|t| (t..n).map(|k| (gamma * lambda).powi((k - t) as i32) * delta[k]).sum())
        .collect()
}

#[test]
fn gae_degenerate_cases() {
    let r = [0.5, -1.0, 2.0, 0.25];
    let v = [0.1, 0.7, -0.3, 1.2, 0.4];
    let d = [false; 4];
    let (adv, ret) = gae(&r, &v, &d, 0.9, 0.0);
    for t in 0..4 {
        assert!(close(adv[t], r[t] + 0.9 * v[t + 1] - v[t], 1e-12));
        assert!(close(ret[t], adv[t] + v[t], 1e-12));
    }
    let (adv, _) = gae(&r, &v, &d, 0.0, 0.95);
    for t in 0..4 {
        assert!(close(adv[t], r[t] - v[t], 1e-12));
    }
}

#[test]
fn gae_three_step_recursion() {
    let (adv, _) = gae(&[1.0, 1.0, 1.0], &[0.0; 4], &[false; 3], 0.9, 0.95);
    let want = gae_oracle(&[1.0, 1.0, 1.0], &[0.0; 4], 0.9, 0.95);
    for t in 0..3 {
        assert!(close(adv[t], want[t], 1e-12));
    }
    // By hand: Â₂ = 1, Â₁ = 1 + 0.855, Â₀ = 1 + 0.855·1.855.
    assert!(close(adv[0], 1.0 + 0.855 * 1.855, 1e-12));
}

#[test]
fn gae_stops_at_episode_boundaries() {
    let r = [1.0, 2.0, 3.0, 4.0];
    let v = [0.5, 0.5, 0.5, 0.5, 9.0];
    let (adv, _) = gae(&r, &v, &[false, true, false, false], 0.9, 0.8);
    let first = gae_oracle(&r[..2], &[0.5, 0.5, 0.0], 0.9, 0.8);
    let second = gae_oracle(&r[2..], &v[2..], 0.9, 0.8);
    for (a, b) in adv.iter().zip(first.iter().chain(&second)) {
        assert!(close(*a, *b, 1e-12));
    }
}

#[test]
fn clipped_surrogate_hand_cases() {
    let cases = [
        (0.5, 1.0, 0.5),
        (1.0, 1.0, 1.0),
        (1.5, 1.0, 1.2),
        (0.5, -1.0, -0.8),
        (1.0, -1.0, -1.0),
        (1.5, -1.0, -1.5),
    ];
    for (r, a, want) in cases {
        assert!((clipped_surrogate(r, a, 0.2) - want).abs() < 1e-12, "r={r} A={a}");
        // The taped loss is the negative mean of the same terms.
        let mut tape = Tape::new();
        let c = |t: &mut Tape, x: f64| t.constant(Tensor::scalar(x));
        let inputs = LossInputs {
            new_log_prob: c(&mut tape, r.ln()),
            old_log_prob: c(&mut tape, 0.0),
            advantages: c(&mut tape, a),
            values: c(&mut tape, 0.0),
            returns: c(&mut tape, 0.0),
            entropy: c(&mut tape, 0.0),
        };
        let lv = ppo_loss_taped(&mut tape, inputs, 0.2, 0.5, 0.0).unwrap();
        assert!((tape.value(lv.surrogate).item() + want).abs() < 1e-12, "r={r} A={a}");
    }
}

#[test]
fn unit_ratio_surrogate_is_minus_mean_advantage() {
    let adv = [0.3, -1.2, 2.0, 0.1];
    let mut tape = Tape::new();
    let lp = tape.constant(Tensor::column(vec![-0.7, 0.2, 1.1, -3.0]));
    let a = tape.constant(Tensor::column(adv.to_vec()));
    let z = tape.constant(Tensor::column(vec![0.0; 4]));
    let e = tape.constant(Tensor::scalar(0.0));
    let lv = ppo_loss_taped(
        &mut tape,
        LossInputs {
            new_log_prob: lp,
            old_log_prob: lp,
            advantages: a,
            values: z,
            returns: z,
            entropy: e,
        },
        0.2,
        0.5,
        0.0,
    )
    .unwrap();
    let want = -adv.iter().sum::<f64>() / 4.0;
    assert!(close(tape.value(lv.surrogate).item(), want, 1e-15));
}

#[test]
fn adam_zero_gradient_only_advances_the_count() {
    let mut p = vec![0.5, -2.0, 3.0];
    let before = p.clone();
    let mut adam = Adam::new(3, 1e-3);
    adam.step(&mut p, &[0.0; 3]).unwrap();
    assert_eq!(p, before);
    assert_eq!(adam.t, 1);
}

#[test]
fn adam_first_step_closed_form() {
    let g = [0.3, -4.0, 1e-3, 7.5];
    let mut p = vec![1.0, 2.0, 3.0, 4.0];
    let lr = 3e-4;
    let mut adam = Adam::new(4, lr);
    adam.step(&mut p, &g).unwrap();
    for k in 0..4 {
        // m̂ = g and v̂ = g², so Δ = −lr·g/(|g| + ε).
        let want = (k + 1) as f64 - lr * g[k] / (g[k].abs() + EPS);
        assert!((p[k] - want).abs() < 1e-12, "{k}");
        assert!(((p[k] - (k + 1) as f64) + lr * g[k].signum()).abs() < 1e-8);
    }
}

#[test]
fn gradient_norm_clipping() {
    let mut g = vec![6.0, 8.0];
    let n = clip_grad_norm(&mut g, 0.5);
    assert_eq!(n, 10.0);
    assert!(close(g[0], 0.3, 1e-15) && close(g[1], 0.4, 1e-15));
    let mut small = vec![0.1, 0.2];
    clip_grad_norm(&mut small, 0.5);
    assert_eq!(small, vec![0.1, 0.2]);
}

proptest! {
    #[test]
    fn advantage_normalization(xs in prop::collection::vec(-1e3f64..1e3, 2..300)) {
        prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
        let mut a = xs.clone();
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-6);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gae_matches_recursion_oracle(
        r in prop::collection::vec(-5.0f64..5.0, 1..40),
        seed in 0u64..1000,
        gamma in 0.0f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..=r.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (adv, _) = gae(&r, &v, &vec![false; r.len()], gamma, lambda);
        let want = gae_oracle(&r, &v, gamma, lambda);
        for (a, b) in adv.iter().zip(&want) {
            prop_assert!(close(*a, *b, 1e-10));
        }
    }
}

#[test]
fn critic_regression_reduces_error_a_hundredfold() {
    let critic = Critic::new(OBS_DIM, &[64, 64]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = critic.init(&mut rng);
    let xs: Vec<Vec<f64>> = (0..256)
        .map(|_| (0..OBS_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| (2.0 * x[0]).sin() + 0.5 * x[1] * x[1] - x[2] * x[3])
        .collect();
    let mse = |p: &[f64]| {
        xs.iter()
            .zip(&ys)
            .map(|(x, y)| (critic.value(p, x).unwrap() - y).powi(2))
            .sum::<f64>()
            / 256.0
    };
    let initial = mse(&p);
    let mut adam = Adam::new(p.len(), 1e-3);
    let x = Tensor::from_rows(&xs).unwrap();
    let y = Tensor::column(ys.clone());
    for _ in 0..1000 {
        let mut tape = Tape::new();
        let pv = tape.leaf(Tensor::row(p.clone()));
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let v = critic.layout.forward_taped(&mut tape, pv, 0, xv).unwrap();
        let d = tape.sub(v, yv).unwrap();
        let sq = tape.square(d);
        let loss = tape.mean(sq);
        let g = tape.backward(loss, &Tensor::scalar(1.0)).unwrap().to_vector().0;
        adam.step(&mut p, &g).unwrap();
    }
    let last = mse(&p);
    assert!(last * 100.0 <= initial, "initial {initial}, final {last}");
}

fn small_cfg(workers: usize) -> PpoConfig {
    PpoConfig {
        rollout_len: 64,
        n_workers: workers,
        minibatch: 64,
        epochs: 2,
        grad_chunk: 16,
        ..PpoConfig::default()
    }
}

fn trainer(kind: ActorKind, workers: usize, exec: Execution, total_steps: u64, seed: u64) -> Trainer {
    let actor_cfg = ActorConfig {
        kind,
        warm_start: cpg_actor::actors::WarmStartConfig {
            epochs: 2,
            samples: 256,
            held_out: 16,
            ..Default::default()
        },
        ..ActorConfig::default()
    };
    let hopper = HopperConfig::default();
    let actor = build_actor(&actor_cfg, hopper.control_dt()).unwrap();
    Trainer::new(
        actor,
        &hopper,
        &RewardConfig::default(),
        small_cfg(workers),
        TrainSettings {
            total_steps,
            seed,
            exec,
            ..TrainSettings::default()
        },
    )
    .unwrap()
}

#[test]
fn replay_with_stored_carries_reproduces_means() {
    for kind in ActorKind::ALL {
        let mut t = trainer(kind, 2, Execution::Sequential, 0, 4);
        let rollouts = t.collect().unwrap();
        let actor = t.actor();
        for ro in &rollouts {
            for i in 0..ro.len() {
                let (mean, next) = actor.act(t.actor_params(), &ro.obs[i], &ro.carries[i]).unwrap();
                assert_eq!(mean, ro.means[i], "{kind} step {i}");
                if i + 1 < ro.len() && !ro.dones[i] {
                    assert_eq!(next, ro.carries[i + 1], "{kind} step {i}");
                }
            }
        }
    }
}

/// With unchanged parameters every ratio is exactly one, so the clipped
/// objective's gradient is the vanilla policy gradient −mean(Â·∇log π).
#[test]
fn first_pass_gradient_is_the_vanilla_policy_gradient() {
    for kind in [ActorKind::CpgActor, ActorKind::MlpActor] {
        let mut t = trainer(kind, 2, Execution::Sequential, 0, 5);
        let rollouts = t.collect().unwrap();
        let batch = t.build_batch(&rollouts);
        let idx: Vec<usize> = (0..batch.len()).collect();
        let g = t.minibatch_gradient(&batch, &idx).unwrap().grad;

        let actor: &dyn Actor = t.actor();
        let mut tape = Tape::new();
        let pa = tape.leaf(Tensor::row(t.actor_params().to_vec()));
        let pl = tape.leaf(Tensor::row(t.log_std().to_vec()));
        let obs = tape.constant(Tensor::from_rows(&batch.obs).unwrap());
        let act = tape.constant(Tensor::from_rows(&batch.actions).unwrap());
        let adv = tape.constant(Tensor::column(batch.advantages.clone()));
        let carries: Vec<Carry> = batch.carries.clone();
        let mean = actor.act_taped(&mut tape, pa, obs, &carries).unwrap();
        let lp = log_prob_taped(&mut tape, act, mean, pl).unwrap();
        for (b, &old) in batch.log_probs.iter().enumerate() {
            assert_eq!(tape.value(lp).row_slice(b)[0], old);
        }
        let w = tape.mul(lp, adv).unwrap();
        let m = tape.mean(w);
        let obj = tape.neg(m);
        let pg = tape.backward(obj, &Tensor::scalar(1.0)).unwrap().to_vector().0;
        assert_eq!(pg.len(), actor.n_params() + actor.action_dim());
        let scale = pg.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (k, (a, b)) in g.iter().zip(&pg).enumerate() {
            assert!((a - b).abs() <= 1e-10 * scale, "{kind} param {k}: {a} vs {b}");
        }
    }
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let run = |exec| trainer(ActorKind::CpgActor, 2, exec, 256, 6).run().unwrap();
    let a = run(Execution::Sequential);
    let b = run(Execution::Sequential);
    // Compared as text: the reward columns are NaN until an episode ends.
    let text = |o: &TrainOutcome| format!("{:?}", o.logs);
    assert_eq!(text(&a), text(&b));
    assert_eq!(a.checkpoint, b.checkpoint);
    // Fixed reduction order makes the thread pool irrelevant.
    let c = run(Execution::Parallel);
    assert_eq!(text(&a), text(&c));
    assert_eq!(a.checkpoint, c.checkpoint);
    let d = trainer(ActorKind::CpgActor, 2, Execution::Sequential, 256, 7)
        .run()
        .unwrap();
    assert_ne!(a.checkpoint.actor_params, d.checkpoint.actor_params);
}

#[test]
fn zero_steps_writes_only_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let hopper = HopperConfig::default();
    let actor = build_actor(&ActorConfig::default(), hopper.control_dt()).unwrap();
    let t = Trainer::new(
        actor,
        &hopper,
        &RewardConfig::default(),
        small_cfg(1),
        TrainSettings {
            total_steps: 0,
            out_dir: Some(dir.path().to_path_buf()),
            ..TrainSettings::default()
        },
    )
    .unwrap();
    let out = t.run().unwrap();
    assert!(out.logs.is_empty());
    assert_eq!(out.checkpoint.steps, 0);
    let init = cpg_actor::checkpoint::Checkpoint::load(&dir.path().join("checkpoint-0.ckpt")).unwrap();
    assert_eq!(init, out.checkpoint);
    let log = std::fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn update_logs_group_gradient_norms() {
    let out = trainer(ActorKind::CpgActor, 1, Execution::Sequential, 64, 8)
        .run()
        .unwrap();
    let log = &out.logs[0];
    let names: Vec<&str> = log.grad_norms.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["cpg", "feedback_hidden", "feedback_out", "log_std", "critic"]);
    assert!(log.grad_norms.iter().all(|(_, n)| n.is_finite() && *n >= 0.0));
    assert!(log.mean_ep_reward.is_nan() || log.mean_ep_reward.is_finite());
}
