use crate::error::{check_len, Error, Result};
use crate::math::all_finite;

/// Recurrent oscillator state, carried explicitly by the caller between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct CpgState {
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub r: Vec<f64>,
    pub r_dot: Vec<f64>,
    pub r_ddot: Vec<f64>,
}

impl CpgState {
    pub fn zeros(n: usize) -> Self {
        CpgState {
            theta: vec![0.0; n],
            theta_dot: vec![0.0; n],
            r: vec![0.0; n],
            r_dot: vec![0.0; n],
            r_ddot: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        for (name, v) in self.fields() {
            check_len(name, n, v.len())?;
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("cpg state".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|(_, v)| all_finite(v))
    }

    /// The derivatives stored by the previous step.
    pub fn stored_derivatives(&self) -> CpgDerivatives {
        CpgDerivatives {
            theta_dot: self.theta_dot.clone(),
            r_ddot: self.r_ddot.clone(),
            zeta: vec![0.0; self.n()],
        }
    }

    fn fields(&self) -> [(&'static str, &Vec<f64>); 5] {
        [
            ("cpg state theta", &self.theta),
            ("cpg state theta_dot", &self.theta_dot),
            ("cpg state r", &self.r),
            ("cpg state r_dot", &self.r_dot),
            ("cpg state r_ddot", &self.r_ddot),
        ]
    }

    /// `[θ, θ̇, r, ṙ, r̈]` concatenated.
    pub fn to_flat(&self) -> Vec<f64> {
        self.fields().iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }

    pub fn from_flat(n: usize, flat: &[f64]) -> Result<Self> {
        check_len("cpg state flat", 5 * n, flat.len())?;
        let part = |k: usize| flat[k * n..(k + 1) * n].to_vec();
        Ok(CpgState {
            theta: part(0),
            theta_dot: part(1),
            r: part(2),
            r_dot: part(3),
            r_ddot: part(4),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpgDerivatives {
    pub theta_dot: Vec<f64>,
    pub r_ddot: Vec<f64>,
    /// Coupling contribution to `theta_dot`.
    pub zeta: Vec<f64>,
}

/// Additive feedback on phase (`xi`, rad/s) and amplitude (`kappa`, 1/s²) dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackSignals {
    pub xi: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl FeedbackSignals {
    pub fn zeros(n: usize) -> Self {
        FeedbackSignals {
            xi: vec![0.0; n],
            kappa: vec![0.0; n],
        }
    }
}

/// Drive signal `d`, one shared entry or one per oscillator.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandSignal(pub Vec<f64>);

impl CommandSignal {
    pub fn constant(d: f64) -> Self {
        CommandSignal(vec![d])
    }

    pub fn validate(&self, d_max: f64) -> Result<()> {
        if self.0.iter().all(|&d| (0.0..=d_max).contains(&d)) {
            Ok(())
        } else {
            Err(Error::config(
                "cpg.command",
                format!("entries must lie in [0, {d_max}]"),
            ))
        }
    }
}
