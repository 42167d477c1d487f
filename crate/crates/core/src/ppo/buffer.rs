use crate::actors::Carry;

/// One worker's records for one rollout.
#[derive(Clone, Debug, Default)]
pub struct Rollout {
    /// Observations as seen by the actor (normalised with frozen statistics).
    pub obs: Vec<Vec<f64>>,
    pub raw_obs: Vec<Vec<f64>>,
    /// Carried actor state entering each step.
    pub carries: Vec<Carry>,
    pub actions: Vec<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    /// Rewards as used for learning (scaled, with truncation bootstrap).
    pub rewards: Vec<f64>,
    /// One entry per step plus the bootstrap value.
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Unscaled discounted returns, for the reward scale statistics.
    pub discounted: Vec<f64>,
    /// Raw returns of episodes that ended in this rollout.
    pub episode_returns: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Flattened samples of all workers, in worker order.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub obs: Vec<Vec<f64>>,
    pub carries: Vec<Carry>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }
}
