//! Planar three-coordinate leg: slider height `z`, hip angle `q1` (from the
//! downward vertical) and knee angle `q2` (relative to the thigh). Point
//! masses sit at the hip and at the midpoints of thigh and shank.

use nalgebra::{Matrix3, RowVector3, Vector2, Vector3};

use super::config::HopperConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HopperState {
    pub z: f64,
    pub z_dot: f64,
    pub q: [f64; 2],
    pub q_dot: [f64; 2],
    pub foot_contact: bool,
    /// Foot `(x, height)` relative to the slider axis (m).
    pub foot_pos: [f64; 2],
}

impl HopperState {
    fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.z, self.q[0], self.q[1])
    }

    fn velocities(&self) -> Vector3<f64> {
        Vector3::new(self.z_dot, self.q_dot[0], self.q_dot[1])
    }

    pub fn is_finite(&self) -> bool {
        [self.z, self.z_dot, self.q[0], self.q[1], self.q_dot[0], self.q_dot[1]]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Contact forces at the foot during one physics substep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactForces {
    pub normal: f64,
    pub tangential: f64,
}

struct Trig {
    s1: f64,
    c1: f64,
    s12: f64,
    c12: f64,
}

fn trig(q: [f64; 2]) -> Trig {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    Trig { s1, c1, s12, c12 }
}

pub fn foot_position(cfg: &HopperConfig, z: f64, q: [f64; 2]) -> [f64; 2] {
    let t = trig(q);
    let (l1, l2) = (cfg.thigh_length, cfg.shank_length);
    [l1 * t.s1 + l2 * t.s12, z - l1 * t.c1 - l2 * t.c12]
}

/// Rows: horizontal and vertical foot velocity per generalized velocity.
pub fn foot_jacobian(cfg: &HopperConfig, q: [f64; 2]) -> (RowVector3<f64>, RowVector3<f64>) {
    let t = trig(q);
    let (l1, l2) = (cfg.thigh_length, cfg.shank_length);
    (
        RowVector3::new(0.0, l1 * t.c1 + l2 * t.c12, l2 * t.c12),
        RowVector3::new(1.0, l1 * t.s1 + l2 * t.s12, l2 * t.s12),
    )
}

/// Point-mass Jacobians `(x row, y row)` for thigh and shank midpoints.
fn link_jacobians(cfg: &HopperConfig, t: &Trig) -> [(RowVector3<f64>, RowVector3<f64>); 2] {
    let (l1, a1, a2) = (cfg.thigh_length, cfg.thigh_length / 2.0, cfg.shank_length / 2.0);
    [
        (
            RowVector3::new(0.0, a1 * t.c1, 0.0),
            RowVector3::new(1.0, a1 * t.s1, 0.0),
        ),
        (
            RowVector3::new(0.0, l1 * t.c1 + a2 * t.c12, a2 * t.c12),
            RowVector3::new(1.0, l1 * t.s1 + a2 * t.s12, a2 * t.s12),
        ),
    ]
}

pub fn mass_matrix(cfg: &HopperConfig, q: [f64; 2]) -> Matrix3<f64> {
    let t = trig(q);
    let [(tx, ty), (sx, sy)] = link_jacobians(cfg, &t);
    let mut m = Matrix3::zeros();
    m[(0, 0)] = cfg.body_mass;
    m += cfg.thigh_mass * (tx.transpose() * tx + ty.transpose() * ty);
    m += cfg.shank_mass * (sx.transpose() * sx + sy.transpose() * sy);
    m
}

/// Velocity-product plus gravity terms `h(q, q̇)` in `M q̈ + h = u`.
pub fn bias_forces(cfg: &HopperConfig, q: [f64; 2], q_dot: [f64; 2]) -> Vector3<f64> {
    let t = trig(q);
    let [(tx, ty), (sx, sy)] = link_jacobians(cfg, &t);
    let (l1, a1, a2) = (cfg.thigh_length, cfg.thigh_length / 2.0, cfg.shank_length / 2.0);
    let w1 = q_dot[0] * q_dot[0];
    let w12 = (q_dot[0] + q_dot[1]).powi(2);
    // J̇ q̇ of each midpoint.
    let thigh_acc = (-a1 * t.s1 * w1, a1 * t.c1 * w1);
    let shank_acc = (-l1 * t.s1 * w1 - a2 * t.s12 * w12, l1 * t.c1 * w1 + a2 * t.c12 * w12);
    let coriolis = cfg.thigh_mass * (tx.transpose() * thigh_acc.0 + ty.transpose() * thigh_acc.1)
        + cfg.shank_mass * (sx.transpose() * shank_acc.0 + sy.transpose() * shank_acc.1);
    let g = cfg.gravity;
    let gravity = Vector3::new(
        g * cfg.total_mass(),
        g * (cfg.thigh_mass * a1 * t.s1 + cfg.shank_mass * (l1 * t.s1 + a2 * t.s12)),
        g * cfg.shank_mass * a2 * t.s12,
    );
    coriolis + gravity
}

/// Kinetic plus gravitational potential energy (J).
pub fn energy(cfg: &HopperConfig, s: &HopperState) -> f64 {
    let qd = s.velocities();
    let kinetic = 0.5 * qd.dot(&(mass_matrix(cfg, s.q) * qd));
    let t = trig(s.q);
    let (l1, a1, a2) = (cfg.thigh_length, cfg.thigh_length / 2.0, cfg.shank_length / 2.0);
    let heights =
        cfg.body_mass * s.z + cfg.thigh_mass * (s.z - a1 * t.c1) + cfg.shank_mass * (s.z - l1 * t.c1 - a2 * t.c12);
    kinetic + cfg.gravity * heights
}

/// `clip(kp (p_d − q) − kd q̇, ±limit)`.
pub fn pd_torque(cfg: &HopperConfig, desired: [f64; 2], q: [f64; 2], q_dot: [f64; 2]) -> [f64; 2] {
    let lim = cfg.torque_limit;
    [0, 1].map(|j| (cfg.kp * (desired[j] - q[j]) - cfg.kd * q_dot[j]).clamp(-lim, lim))
}

fn solve(a: Matrix3<f64>, b: Vector3<f64>) -> Result<Vector3<f64>> {
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::NonFinite("singular hopper dynamics".into()))
}

/// Contact force from the current state, used for the first half kick.
fn explicit_contact(cfg: &HopperConfig, s: &HopperState) -> (Vector3<f64>, ContactForces) {
    let pen = -foot_position(cfg, s.z, s.q)[1];
    if pen <= 0.0 {
        return (Vector3::zeros(), ContactForces::default());
    }
    let (jt, jn) = foot_jacobian(cfg, s.q);
    let v = s.velocities();
    let normal = (cfg.contact_stiffness * pen - cfg.contact_damping * (jn * v)[0]).max(0.0);
    let lim = cfg.friction * normal;
    let tangential = (-cfg.friction_damping * (jt * v)[0]).clamp(-lim, lim);
    (
        jn.transpose() * normal + jt.transpose() * tangential,
        ContactForces { normal, tangential },
    )
}

/// Closing half kick at the new configuration with contact damping and
/// friction implicit in the new velocity. `rhs = M v½ + h/2 (u − bias)`.
fn implicit_contact_kick(
    cfg: &HopperConfig,
    z: f64,
    q: [f64; 2],
    m: Matrix3<f64>,
    rhs: Vector3<f64>,
    h: f64,
) -> Result<(Vector3<f64>, ContactForces)> {
    let pen = -foot_position(cfg, z, q)[1];
    if pen > 0.0 {
        let (jt, jn) = foot_jacobian(cfg, q);
        let (d, dtan, mu) = (cfg.contact_damping, cfg.friction_damping, cfg.friction);
        let spring = cfg.contact_stiffness * pen;
        let a = m + h * (d * jn.transpose() * jn + dtan * jt.transpose() * jt);
        let v = solve(a, rhs + h * jn.transpose() * spring)?;
        let normal = spring - d * (jn * v)[0];
        if normal > 0.0 {
            let ft = -dtan * (jt * v)[0];
            if ft.abs() <= mu * normal {
                return Ok((v, ContactForces { normal, tangential: ft }));
            }
            // Sliding: F_t = sμF_n with F_n still implicit in the velocity.
            let dir = (jn + ft.signum() * mu * jt).transpose();
            let a = m + h * d * dir * jn;
            let v = solve(a, rhs + h * dir * spring)?;
            let normal = spring - d * (jn * v)[0];
            if normal > 0.0 {
                let tangential = ft.signum() * mu * normal;
                return Ok((v, ContactForces { normal, tangential }));
            }
        }
    }
    Ok((solve(m, rhs)?, ContactForces::default()))
}

/// Enforces `|q̇ⱼ| ≤ limit` with a joint-space impulse `M⁻¹ Sᵀ λ`, the way a
/// motor brake would. The new velocity is the kinetic-energy-norm projection
/// onto the speed box: only the joints receive the impulse, so the slider's
/// generalised momentum `(M v)_z` is unchanged, and since the box contains
/// rest the projection never adds kinetic energy.
pub fn clamp_joint_speed(m: &Matrix3<f64>, v: Vector3<f64>, limit: f64) -> Result<Vector3<f64>> {
    if v[1].abs() <= limit && v[2].abs() <= limit {
        return Ok(v);
    }
    let m_inv = m
        .try_inverse()
        .ok_or_else(|| Error::NonFinite("singular hopper mass matrix".into()))?;
    let b = m_inv.fixed_view::<3, 2>(0, 1).into_owned();
    // Joint velocities move by B λ on the joint rows; the cost of reaching
    // joint velocities y is ½ (y − q̇)ᵀ K (y − q̇) with K = (S M⁻¹ Sᵀ)⁻¹.
    let k = b
        .fixed_view::<2, 2>(1, 0)
        .into_owned()
        .try_inverse()
        .ok_or_else(|| Error::NonFinite("singular joint impulse system".into()))?;
    let qd = Vector2::new(v[1], v[2]);
    let cost = |y: &Vector2<f64>| {
        let d = y - qd;
        d.dot(&(k * d))
    };
    // Box-constrained 2D quadratic: the minimiser lies on an edge or corner.
    let mut best: Option<(f64, Vector2<f64>)> = None;
    let mut consider = |y: Vector2<f64>| {
        if y[0].abs() <= limit && y[1].abs() <= limit {
            let c = cost(&y);
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, y));
            }
        }
    };
    for fixed in 0..2 {
        let free = 1 - fixed;
        for side in [-limit, limit] {
            // Minimise over the free coordinate with the fixed one on the face.
            let y_free = qd[free] - k[(free, fixed)] / k[(free, free)] * (side - qd[fixed]);
            let mut y = Vector2::zeros();
            y[fixed] = side;
            y[free] = y_free.clamp(-limit, limit);
            consider(y);
        }
    }
    let y = best.expect("box corners are always feasible").1;
    let lambda = k * (y - qd);
    let mut out = v + b * lambda;
    out[1] = y[0];
    out[2] = y[1];
    Ok(out)
}

/// One velocity-Verlet step with joint torques `tau` held over the step:
/// half kick with forces at the current state, drift, then a closing half
/// kick whose contact damping and friction are implicit.
pub fn substep(cfg: &HopperConfig, s: &HopperState, tau: [f64; 2]) -> Result<(HopperState, ContactForces)> {
    let dt = cfg.dt_physics;
    let h = 0.5 * dt;
    let u = Vector3::new(0.0, tau[0], tau[1]);

    let m0 = mass_matrix(cfg, s.q);
    let (fc0, _) = explicit_contact(cfg, s);
    let acc0 = solve(m0, u - bias_forces(cfg, s.q, s.q_dot) + fc0)?;
    let lim = cfg.joint_vel_limit;
    // The drift also respects the joint speed limit.
    let v_half = clamp_joint_speed(&m0, s.velocities() + h * acc0, lim)?;

    let x = s.coords() + dt * v_half;
    let q = [x[1], x[2]];
    let m1 = mass_matrix(cfg, q);
    let rhs = m1 * v_half + h * (u - bias_forces(cfg, q, [v_half[1], v_half[2]]));
    let (v, forces) = implicit_contact_kick(cfg, x[0], q, m1, rhs, h)?;
    let v = clamp_joint_speed(&m1, v, lim)?;
    let next = HopperState {
        z: x[0],
        z_dot: v[0],
        q,
        q_dot: [v[1], v[2]],
        foot_contact: forces.normal > 0.0,
        foot_pos: foot_position(cfg, x[0], q),
    };
    if !next.is_finite() {
        return Err(Error::NonFinite(format!("hopper dynamics (state before step: {s:?})")));
    }
    Ok((next, forces))
}
