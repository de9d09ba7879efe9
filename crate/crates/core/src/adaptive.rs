//! RCAC terms added to each of the four stock loops.
//!
//! | loop     | regressor                                   | θ  |
//! |----------|---------------------------------------------|----|
//! | position | `diag(z_r)`                                 | 3  |
//! | velocity | block-diag rows `[z_{k-1}, γ_{k-1}, Δz]`    | 9  |
//! | attitude | `diag(z_q)`                                 | 3  |
//! | rate     | block-diag rows `[z_{k-1}, γ_{k-1}, Δz, ω_sp,i]` | 12 |

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{ParseError, RcacError};
use crate::gains::key_values;
use crate::math::Vec3;
use crate::rcac::{block_diagonal, build_pid_regressor, PidChannelBuffer, RcacConfig, RcacState};

pub const THETA_R_LEN: usize = 3;
pub const THETA_V_LEN: usize = 9;
pub const THETA_Q_LEN: usize = 3;
pub const THETA_OMEGA_LEN: usize = 12;
/// Total adaptive coefficients across the four loops.
pub const THETA_TOTAL_LEN: usize = THETA_R_LEN + THETA_V_LEN + THETA_Q_LEN + THETA_OMEGA_LEN;

/// Index in `θ_ω` of the coefficient on the roll-rate error `z_{1,ω,k-1}`,
/// masked by default.
/// Velocity-loop covariance. The velocity loop outputs force in newtons, so
/// the normalized-thrust value of 1e-3 is scaled by `T_max^2` (~1540 N^2).
pub const DEFAULT_P0_V: f64 = 1.54;

pub const DEFAULT_OMEGA_MASK_INDEX: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoopFlags {
    pub r: bool,
    pub v: bool,
    pub q: bool,
    pub omega: bool,
}

impl LoopFlags {
    pub const ALL: LoopFlags = LoopFlags {
        r: true,
        v: true,
        q: true,
        omega: true,
    };
    pub const NONE: LoopFlags = LoopFlags {
        r: false,
        v: false,
        q: false,
        omega: false,
    };

    pub fn any(&self) -> bool {
        self.r || self.v || self.q || self.omega
    }
}

impl Default for LoopFlags {
    fn default() -> Self {
        Self::ALL
    }
}

impl FromStr for LoopFlags {
    type Err = ParseError;

    /// Comma-separated subset of `r,v,q,omega`; `none` or an empty string
    /// disables every loop.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut flags = LoopFlags::NONE;
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            match item {
                "r" => flags.r = true,
                "v" => flags.v = true,
                "q" => flags.q = true,
                "omega" | "w" => flags.omega = true,
                "none" => {}
                "all" => flags = LoopFlags::ALL,
                other => {
                    return Err(ParseError::Invalid(format!(
                        "unknown loop `{other}` (expected r, v, q, omega)"
                    )))
                }
            }
        }
        Ok(flags)
    }
}

impl fmt::Display for LoopFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.r, "r"), (self.v, "v"), (self.q, "q"), (self.omega, "omega")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

/// RCAC settings for the four loops.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub r: RcacConfig,
    pub v: RcacConfig,
    pub q: RcacConfig,
    pub omega: RcacConfig,
    pub enabled: LoopFlags,
    /// Clamp on the error sums in the velocity and rate regressors.
    pub gamma_bound: Option<f64>,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        let mut omega_mask = vec![false; THETA_OMEGA_LEN];
        omega_mask[DEFAULT_OMEGA_MASK_INDEX] = true;
        Self {
            r: RcacConfig::new(0.01, -1.0, 3, THETA_R_LEN),
            v: RcacConfig::new(DEFAULT_P0_V, -1.0, 3, THETA_V_LEN),
            q: RcacConfig::new(1.0, -1.0, 3, THETA_Q_LEN),
            omega: RcacConfig::new(0.1, -1.0, 3, THETA_OMEGA_LEN).with_mask(omega_mask),
            enabled: LoopFlags::ALL,
            gamma_bound: Some(5.0),
        }
    }
}

impl AdaptiveConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: LoopFlags::NONE,
            ..Self::default()
        }
    }

    pub fn unmask_omega(&mut self) {
        self.omega.mask.iter_mut().for_each(|m| *m = false);
    }

    pub fn set_covariance_checks(&mut self, on: bool) {
        for c in [&mut self.r, &mut self.v, &mut self.q, &mut self.omega] {
            c.check_covariance = on;
        }
    }

    fn loop_mut(&mut self, name: &str) -> Option<&mut RcacConfig> {
        Some(match name {
            "r" => &mut self.r,
            "v" => &mut self.v,
            "q" => &mut self.q,
            "omega" => &mut self.omega,
            _ => return None,
        })
    }

    /// Reads a hyperparameter file on top of the defaults.
    ///
    /// ```text
    /// p0_omega = 0.0001
    /// sigma_v = -1        # all channels of a loop
    /// sigma_q_2 = 1       # one channel
    /// mask_omega_0 = 0    # 1 pins the coefficient at zero
    /// ```
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cfg = Self::default();
        for (line, key, value) in key_values(text)? {
            if key == "gamma_bound" {
                cfg.gamma_bound = (value > 0.0).then_some(value);
                continue;
            }
            let unknown = || ParseError::at(line, format!("unknown hyperparameter `{key}`"));
            let mut parts = key.splitn(3, '_');
            let kind = parts.next().unwrap_or("");
            let name = parts.next().ok_or_else(unknown)?;
            let index = parts.next();
            let target = cfg.loop_mut(name).ok_or_else(unknown)?;
            let index = match index {
                Some(i) => Some(i.parse::<usize>().map_err(|_| unknown())?),
                None => None,
            };
            match (kind, index) {
                ("p0", None) => target.p0 = value,
                ("sigma", None) => target.sigma.iter_mut().for_each(|s| *s = value),
                ("sigma", Some(i)) if i < target.sigma.len() => target.sigma[i] = value,
                ("mask", Some(i)) if i < target.mask.len() => {
                    target.mask[i] = match value {
                        1.0 => true,
                        0.0 => false,
                        _ => return Err(ParseError::at(line, "mask entries must be 0 or 1")),
                    }
                }
                ("theta0", Some(i)) if i < target.theta0.len() => target.theta0[i] = value,
                _ => return Err(unknown()),
            }
        }
        for c in [&cfg.r, &cfg.v, &cfg.q, &cfg.omega] {
            c.validate().map_err(|e| ParseError::Invalid(e.to_string()))?;
        }
        Ok(cfg)
    }
}

/// Adaptive coefficients and regressor buffers for the four loops.
#[derive(Clone, Debug)]
pub struct AdaptiveAutopilot {
    config: AdaptiveConfig,
    rcac_r: RcacState,
    rcac_v: RcacState,
    rcac_q: RcacState,
    rcac_omega: RcacState,
    buf_v: [PidChannelBuffer; 3],
    buf_omega: [PidChannelBuffer; 3],
}

fn diag_regressor(z: &Vec3) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(z.as_slice()))
}

fn to_vec3(u: &nalgebra::DVector<f64>) -> Vec3 {
    Vec3::new(u[0], u[1], u[2])
}

impl AdaptiveAutopilot {
    pub fn new(config: AdaptiveConfig) -> Result<Self, RcacError> {
        Ok(Self {
            rcac_r: RcacState::new(&config.r)?,
            rcac_v: RcacState::new(&config.v)?,
            rcac_q: RcacState::new(&config.q)?,
            rcac_omega: RcacState::new(&config.omega)?,
            buf_v: Default::default(),
            buf_omega: Default::default(),
            config,
        })
    }

    pub fn config(&self) -> &AdaptiveConfig {
        &self.config
    }

    pub fn enabled(&self) -> LoopFlags {
        self.config.enabled
    }

    /// `u_r = diag(z_r) θ_r`, then the update with `z_r`.
    pub fn augment_position(&mut self, z_r: &Vec3) -> Result<Vec3, RcacError> {
        let u = self.rcac_r.step(z_r.as_slice(), diag_regressor(z_r), &self.config.r)?;
        Ok(to_vec3(&u))
    }

    /// PID-structured velocity term from the error history, then the update
    /// with `z_v`.
    pub fn augment_velocity(&mut self, z_v: &Vec3) -> Result<Vec3, RcacError> {
        let rows: Vec<Vec<f64>> = self.buf_v.iter().map(|b| build_pid_regressor(b, None)).collect();
        let u = self
            .rcac_v
            .step(z_v.as_slice(), block_diagonal(&rows), &self.config.v)?;
        for (b, z) in self.buf_v.iter_mut().zip(z_v.iter()) {
            b.push_bounded(*z, self.config.gamma_bound);
        }
        Ok(to_vec3(&u))
    }

    /// `u_q = diag(z_q) θ_q`, then the update with `z_q`.
    pub fn augment_attitude(&mut self, z_q: &Vec3) -> Result<Vec3, RcacError> {
        let u = self.rcac_q.step(z_q.as_slice(), diag_regressor(z_q), &self.config.q)?;
        Ok(to_vec3(&u))
    }

    /// PID-structured rate term with rate-setpoint feedforward, then the
    /// update with `z_ω`.
    pub fn augment_rate(&mut self, z_omega: &Vec3, omega_sp: &Vec3) -> Result<Vec3, RcacError> {
        let rows: Vec<Vec<f64>> = self
            .buf_omega
            .iter()
            .zip(omega_sp.iter())
            .map(|(b, w)| build_pid_regressor(b, Some(*w)))
            .collect();
        let u = self
            .rcac_omega
            .step(z_omega.as_slice(), block_diagonal(&rows), &self.config.omega)?;
        for (b, z) in self.buf_omega.iter_mut().zip(z_omega.iter()) {
            b.push_bounded(*z, self.config.gamma_bound);
        }
        Ok(to_vec3(&u))
    }

    pub fn theta_r(&self) -> &[f64] {
        self.rcac_r.theta().as_slice()
    }

    pub fn theta_v(&self) -> &[f64] {
        self.rcac_v.theta().as_slice()
    }

    pub fn theta_q(&self) -> &[f64] {
        self.rcac_q.theta().as_slice()
    }

    pub fn theta_omega(&self) -> &[f64] {
        self.rcac_omega.theta().as_slice()
    }

    /// `θ_r, θ_v, θ_q, θ_ω` concatenated.
    pub fn theta_all(&self) -> Vec<f64> {
        [self.theta_r(), self.theta_v(), self.theta_q(), self.theta_omega()].concat()
    }
}
