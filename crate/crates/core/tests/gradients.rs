mod support;

use support::gradients::{actor_step_check, ppo_loss_check};

#[test]
fn actor_step_partials_match_differences() {
    for seed in 0..100 {
        let rep = actor_step_check(seed);
        assert!(
            rep.passed(),
            "seed {seed}: max {:e}, failing {:?}",
            rep.max_rel_err,
            rep.failing
        );
    }
}

#[test]
fn ppo_loss_partials_match_differences() {
    for seed in 0..100 {
        let rep = ppo_loss_check(seed);
        assert!(
            rep.passed(),
            "seed {seed}: max {:e}, failing {:?}",
            rep.max_rel_err,
            rep.failing
        );
    }
}
