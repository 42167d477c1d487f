use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HopperConfig {
    /// Slider and hip housing, lumped at the hip (kg).
    pub body_mass: f64,
    /// Thigh point mass at its midpoint (kg).
    pub thigh_mass: f64,
    /// Shank point mass at its midpoint (kg).
    pub shank_mass: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    pub gravity: f64,
    pub torque_limit: f64,
    pub joint_vel_limit: f64,
    /// Normal contact stiffness (N/m).
    pub contact_stiffness: f64,
    /// Normal contact damping (N·s/m).
    pub contact_damping: f64,
    pub friction: f64,
    /// Viscous slope of the regularised Coulomb friction (N·s/m).
    pub friction_damping: f64,
    pub kp: f64,
    pub kd: f64,
    pub dt_physics: f64,
    pub substeps: usize,
    pub horizon: usize,
    pub z_min: f64,
    pub z_max: f64,
    /// Joint angles (hip, knee) of the rest pose (rad).
    pub crouch: [f64; 2],
    /// Half-width of the uniform reset perturbation on joint angles (rad).
    pub reset_noise: f64,
}

impl Default for HopperConfig {
    fn default() -> Self {
        HopperConfig {
            body_mass: 1.02,
            thigh_mass: 1.4,
            shank_mass: 1.0,
            thigh_length: 0.25,
            shank_length: 0.33,
            gravity: 9.81,
            torque_limit: 40.0,
            joint_vel_limit: 15.0,
            contact_stiffness: 1e5,
            contact_damping: 1e3,
            friction: 0.8,
            friction_damping: 2e3,
            kp: 60.0,
            kd: 1.5,
            dt_physics: 1e-3,
            substeps: 10,
            horizon: 1000,
            z_min: 0.1,
            z_max: 3.0,
            crouch: [-0.2, 0.6],
            reset_noise: 0.05,
        }
    }
}

impl HopperConfig {
    pub fn total_mass(&self) -> f64 {
        self.body_mass + self.thigh_mass + self.shank_mass
    }

    pub fn control_dt(&self) -> f64 {
        self.dt_physics * self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hopper.body_mass", self.body_mass),
            ("hopper.thigh_mass", self.thigh_mass),
            ("hopper.shank_mass", self.shank_mass),
            ("hopper.thigh_length", self.thigh_length),
            ("hopper.shank_length", self.shank_length),
            ("hopper.gravity", self.gravity),
            ("hopper.torque_limit", self.torque_limit),
            ("hopper.joint_vel_limit", self.joint_vel_limit),
            ("hopper.contact_stiffness", self.contact_stiffness),
            ("hopper.contact_damping", self.contact_damping),
            ("hopper.friction", self.friction),
            ("hopper.friction_damping", self.friction_damping),
            ("hopper.kp", self.kp),
            ("hopper.kd", self.kd),
            ("hopper.dt_physics", self.dt_physics),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.substeps == 0 {
            return Err(Error::config("hopper.substeps", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("hopper.horizon", "must be at least 1"));
        }
        if !(self.z_min < self.z_max) {
            return Err(Error::config("hopper.z_min", "must be below hopper.z_max"));
        }
        if !(self.reset_noise >= 0.0) {
            return Err(Error::config("hopper.reset_noise", "must be non-negative"));
        }
        Ok(())
    }
}

/// Weights of the five reward terms.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardConfig {
    pub c: [f64; 5],
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            c: [2.0, -0.5, -0.005, -0.0005, -0.1],
        }
    }
}

impl RewardConfig {
    /// `c1 ≥ 0` and `c2..c5 ≤ 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.c[0] >= 0.0) {
            return Err(Error::config("reward.c1", "must be non-negative"));
        }
        for k in 1..5 {
            if !(self.c[k] <= 0.0) {
                return Err(Error::config(format!("reward.c{}", k + 1), "must be non-positive"));
            }
        }
        Ok(())
    }
}
