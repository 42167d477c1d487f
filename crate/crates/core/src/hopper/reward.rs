use super::config::RewardConfig;

/// Quantities the reward reads after a control step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardInputs {
    /// Vertical hip velocity (m/s).
    pub hip_vel: f64,
    pub desired: [f64; 2],
    pub measured: [f64; 2],
    pub joint_vel: [f64; 2],
    pub torque: [f64; 2],
    /// Horizontal foot speed (m/s).
    pub foot_slip: f64,
}

/// The five terms: upward hip speed, tracking error, joint speed, torque and
/// foot slip. Penalties carry the sign of their non-positive weight.
pub fn compute_reward(x: &RewardInputs, cfg: &RewardConfig) -> [f64; 5] {
    let c = cfg.c;
    let sum2 = |f: &dyn Fn(usize) -> f64| (0..2).map(|j| f(j).powi(2)).sum::<f64>();
    [
        (c[0] * x.hip_vel.max(0.0)).powi(2),
        c[1] * sum2(&|j| x.desired[j] - x.measured[j]),
        c[2] * sum2(&|j| x.joint_vel[j]),
        c[3] * sum2(&|j| x.torque[j]),
        c[4] * x.foot_slip.abs(),
    ]
}
