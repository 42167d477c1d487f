//! Reference forward models written directly from the equations.
//!
//! Parameter vector layout: per oscillator `[α, β, γ, δ, a_raw]`, then per
//! coupling edge (row-major over an adjacency with `adj[i][j]` meaning `j`
//! drives `i`) the pair `[w, φ]`.

use crate::real::Real;

#[derive(Clone, Debug)]
pub struct Osc<T> {
    pub theta: Vec<T>,
    pub theta_dot: Vec<T>,
    pub r: Vec<T>,
    pub r_dot: Vec<T>,
    pub r_ddot: Vec<T>,
}

impl<T: Real> Osc<T> {
    /// From `[θ, θ̇, r, ṙ, r̈]` concatenated.
    pub fn from_flat(n: usize, x: &[T]) -> Self {
        let g = |k: usize| x[k * n..(k + 1) * n].to_vec();
        Osc {
            theta: g(0),
            theta_dot: g(1),
            r: g(2),
            r_dot: g(3),
            r_ddot: g(4),
        }
    }

    pub fn flat(&self) -> Vec<T> {
        [&self.theta, &self.theta_dot, &self.r, &self.r_dot, &self.r_ddot]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }
}

pub fn edges(adj: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for (i, row) in adj.iter().enumerate() {
        for (j, &on) in row.iter().enumerate() {
            if on {
                e.push((i, j));
            }
        }
    }
    e
}

/// One oscillator-network step; returns the new state and `r cos θ`.
pub fn cpg_step<T: Real>(
    adj: &[Vec<bool>],
    v: &[T],
    s: &Osc<T>,
    d: &[T],
    xi: &[T],
    kappa: &[T],
    dt: f64,
) -> (Osc<T>, Vec<T>) {
    let n = adj.len();
    let e = edges(adj);
    let cmd = |i: usize| if d.len() == 1 { d[0] } else { d[i] };
    let two_pi = T::c(2.0 * std::f64::consts::PI);
    let h = T::c(dt / 2.0);
    let mut next = s.clone();
    for i in 0..n {
        let (al, be, ga, de, ar) = (v[5 * i], v[5 * i + 1], v[5 * i + 2], v[5 * i + 3], v[5 * i + 4]);
        let nu = (al * cmd(i) + be).softplus();
        let rho = (ga * cmd(i) + de).softplus();
        let a = ar.softplus() + T::c(0.1);
        let mut zeta = T::c(0.0);
        for (k, &(ii, j)) in e.iter().enumerate() {
            if ii == i {
                let w = v[5 * n + 2 * k];
                let phi = v[5 * n + 2 * k + 1];
                zeta = zeta + s.r[j] * w * (s.theta[j] - s.theta[i] - phi).sin();
            }
        }
        let td = two_pi * nu + zeta + xi[i];
        let rdd = a * (a / T::c(4.0) * (rho - s.r[i]) - s.r_dot[i]) + kappa[i];
        next.theta[i] = s.theta[i] + h * (s.theta_dot[i] + td);
        next.r_dot[i] = s.r_dot[i] + h * (s.r_ddot[i] + rdd);
        next.r[i] = s.r[i] + h * (s.r_dot[i] + next.r_dot[i]);
        next.theta_dot[i] = td;
        next.r_ddot[i] = rdd;
    }
    let out = (0..n).map(|i| next.r[i] * next.theta[i].cos()).collect();
    (next, out)
}

/// Tanh MLP with a linear last layer. Layer storage: `W[out][in]` then `b[out]`.
pub fn mlp<T: Real>(sizes: &[usize], p: &[T], x: &[T]) -> Vec<T> {
    let mut off = 0;
    let mut h: Vec<T> = x.to_vec();
    let layers = sizes.len() - 1;
    for l in 0..layers {
        let (ni, no) = (sizes[l], sizes[l + 1]);
        let w = &p[off..off + ni * no];
        let b = &p[off + ni * no..off + ni * no + no];
        off += ni * no + no;
        h = (0..no)
            .map(|o| {
                let z = (0..ni).fold(b[o], |acc, i| acc + w[o * ni + i] * h[i]);
                if l + 1 < layers {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect();
    }
    h
}

pub fn mlp_size(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Closed-loop CPG actor step. `p = [cpg v | feedback MLP]`.
#[allow(clippy::too_many_arguments)]
pub fn cpg_actor_step<T: Real>(
    adj: &[Vec<bool>],
    fb_sizes: &[usize],
    p: &[T],
    obs: &[T],
    s: &Osc<T>,
    d: &[T],
    dt: f64,
    scales: (f64, f64),
    offsets: &[f64],
    ranges: &[f64],
) -> (Osc<T>, Vec<T>) {
    let n = adj.len();
    let m = 5 * n + 2 * edges(adj).len();
    let z = mlp(fb_sizes, &p[m..], obs);
    let xi: Vec<T> = (0..n).map(|i| z[i].tanh() * T::c(scales.0)).collect();
    let kappa: Vec<T> = (0..n).map(|i| z[n + i].tanh() * T::c(scales.1)).collect();
    let (next, x) = cpg_step(adj, &p[..m], s, d, &xi, &kappa, dt);
    let mean = (0..n).map(|i| T::c(offsets[i]) + T::c(ranges[i]) * x[i]).collect();
    (next, mean)
}

/// Diagonal Gaussian log-density with per-dimension log standard deviation.
pub fn gaussian_log_prob<T: Real>(x: &[f64], mean: &[T], log_std: &[T]) -> T {
    let two_pi = T::c(2.0 * std::f64::consts::PI);
    let mut acc = T::c(0.0);
    for k in 0..x.len() {
        let sigma = log_std[k].exp();
        let z = (T::c(x[k]) - mean[k]) / sigma;
        acc = acc - T::c(0.5) * z * z - log_std[k] - T::c(0.5) * two_pi.ln();
    }
    acc
}

/// One stored transition as the loss sees it.
#[derive(Clone, Debug)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Oscillator state `[θ, θ̇, r, ṙ, r̈]` before the step.
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Everything fixed about a closed-loop oscillator actor and its critic.
#[derive(Clone, Debug)]
pub struct ActorCriticSpec {
    pub adj: Vec<Vec<bool>>,
    pub fb_sizes: Vec<usize>,
    pub critic_sizes: Vec<usize>,
    pub scales: (f64, f64),
    pub offsets: Vec<f64>,
    pub ranges: Vec<f64>,
    pub command: f64,
    pub dt: f64,
    pub clip: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

impl ActorCriticSpec {
    pub fn actor_size(&self) -> usize {
        let n = self.adj.len();
        5 * n + 2 * edges(&self.adj).len() + mlp_size(&self.fb_sizes)
    }
}

/// Clipped-surrogate PPO loss of `z = [actor | log_std | critic]`:
/// `−mean(min(r·A, clip(r)·A)) + c_v·mean((V − R)²) − c_e·H`.
pub fn ppo_loss<T: Real>(spec: &ActorCriticSpec, z: &[T], batch: &[Transition]) -> T {
    let n = spec.adj.len();
    let na = spec.actor_size();
    let (actor, rest) = z.split_at(na);
    let (log_std, critic) = rest.split_at(n);
    let inv_b = T::c(1.0 / batch.len() as f64);
    let (lo, hi) = (T::c(1.0 - spec.clip), T::c(1.0 + spec.clip));
    let mut surrogate = T::c(0.0);
    let mut value = T::c(0.0);
    for tr in batch {
        let obs: Vec<T> = tr.obs.iter().map(|&x| T::c(x)).collect();
        let state: Vec<T> = tr.state.iter().map(|&x| T::c(x)).collect();
        let (_, mean) = cpg_actor_step(
            &spec.adj,
            &spec.fb_sizes,
            actor,
            &obs,
            &Osc::from_flat(n, &state),
            &[T::c(spec.command)],
            spec.dt,
            spec.scales,
            &spec.offsets,
            &spec.ranges,
        );
        let ratio = (gaussian_log_prob(&tr.action, &mean, log_std) - T::c(tr.old_log_prob)).exp();
        let adv = T::c(tr.advantage);
        let clipped = ratio.max(lo).min(hi);
        surrogate = surrogate + (ratio * adv).min(clipped * adv);
        let v = mlp(&spec.critic_sizes, critic, &obs)[0];
        value = value + (v - T::c(tr.ret)) * (v - T::c(tr.ret));
    }
    let two_pi_e = T::c(2.0 * std::f64::consts::PI * std::f64::consts::E);
    let entropy = log_std
        .iter()
        .fold(T::c(0.0), |acc, &l| acc + l + T::c(0.5) * two_pi_e.ln());
    -(surrogate * inv_b) + T::c(spec.vf_coef) * value * inv_b - T::c(spec.ent_coef) * entropy
}
