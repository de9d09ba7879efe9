//! The full cascade: stock laws with the adaptive terms summed in before
//! each loop's clamp.

use crate::adaptive::{AdaptiveAutopilot, AdaptiveConfig, LoopFlags};
use crate::dynamics::{ActuatorCommand, RigidBodyState, VehicleParams};
use crate::error::RcacError;
use crate::gains::GainSet;
use crate::math::Vec3;
use crate::stock::{
    attitude_error, attitude_law, f2q, position_law, rate_law, velocity_law, AttitudeMode, ControlLimits, LoopErrors,
    Pid3, SetpointChain,
};

/// Outer-loop references from the mission.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setpoint {
    pub r: Vec3,
    pub v_ff: Vec3,
    pub psi: f64,
    pub psi_rate_ff: f64,
}

/// The latest adaptive contribution of each loop; zero when a loop is off.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Augmentation {
    pub u_r: Vec3,
    pub u_v: Vec3,
    pub u_q: Vec3,
    pub u_omega: Vec3,
}

#[derive(Clone, Debug)]
pub struct Autopilot {
    params: VehicleParams,
    gains: GainSet,
    limits: ControlLimits,
    mode: AttitudeMode,
    velocity_pid: Pid3,
    rate_pid: Pid3,
    adaptive: Option<AdaptiveAutopilot>,
    chain: SetpointChain,
    errors: LoopErrors,
    augmentation: Augmentation,
    thrust_sp: f64,
    degenerate_force_count: u64,
}

impl Autopilot {
    /// Fixed-gain cascade.
    pub fn stock(params: VehicleParams, gains: GainSet, limits: ControlLimits, mode: AttitudeMode) -> Self {
        let hover = params.hover_thrust();
        Self {
            params,
            gains,
            limits,
            mode,
            velocity_pid: Pid3::default(),
            rate_pid: Pid3::default(),
            adaptive: None,
            chain: SetpointChain::hover(Vec3::zeros(), 0.0, hover),
            errors: LoopErrors::default(),
            augmentation: Augmentation::default(),
            thrust_sp: hover,
            degenerate_force_count: 0,
        }
    }

    /// Cascade with RCAC terms on the loops enabled in `config`.
    pub fn adaptive(
        params: VehicleParams,
        gains: GainSet,
        limits: ControlLimits,
        mode: AttitudeMode,
        config: AdaptiveConfig,
    ) -> Result<Self, RcacError> {
        let mut ap = Self::stock(params, gains, limits, mode);
        ap.adaptive = Some(AdaptiveAutopilot::new(config)?);
        Ok(ap)
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn limits(&self) -> &ControlLimits {
        &self.limits
    }

    pub fn chain(&self) -> &SetpointChain {
        &self.chain
    }

    pub fn errors(&self) -> &LoopErrors {
        &self.errors
    }

    pub fn augmentation(&self) -> &Augmentation {
        &self.augmentation
    }

    pub fn adaptive_state(&self) -> Option<&AdaptiveAutopilot> {
        self.adaptive.as_ref()
    }

    pub fn degenerate_force_count(&self) -> u64 {
        self.degenerate_force_count
    }

    fn flags(&self) -> LoopFlags {
        self.adaptive.as_ref().map_or(LoopFlags::NONE, |a| a.enabled())
    }

    /// Position and velocity loops, then the attitude setpoint.
    pub fn update_outer(&mut self, state: &RigidBodyState, sp: &Setpoint) -> Result<(), RcacError> {
        let flags = self.flags();

        let z_r = sp.r - state.r;
        let mut v = position_law(&z_r, &sp.v_ff, &self.gains);
        if flags.r {
            let u = self
                .adaptive
                .as_mut()
                .expect("flag implies adaptive")
                .augment_position(&z_r)?;
            self.augmentation.u_r = u;
            v += u;
        }
        let v_sp = self.limits.clamp_velocity(&v);

        let z_v = v_sp - state.v;
        let mut f = velocity_law(&self.velocity_pid, &z_v, &self.gains, self.params.hover_thrust());
        self.velocity_pid.advance(&z_v, self.limits.velocity_integrator_bound);
        if flags.v {
            let u = self
                .adaptive
                .as_mut()
                .expect("flag implies adaptive")
                .augment_velocity(&z_v)?;
            self.augmentation.u_v = u;
            f += u;
        }
        let f_sp = self.limits.clamp_force(&f);

        let att = f2q(&f_sp, sp.psi);
        if att.degenerate {
            self.degenerate_force_count += 1;
        }

        self.errors.z_r = z_r;
        self.errors.z_v = z_v;
        self.thrust_sp = f_sp.norm();
        self.chain.r_sp = sp.r;
        self.chain.v_sp_ff = sp.v_ff;
        self.chain.psi_sp = sp.psi;
        self.chain.psi_rate_sp_ff = sp.psi_rate_ff;
        self.chain.v_sp = v_sp;
        self.chain.f_sp = f_sp;
        self.chain.q_sp = att.q_sp;
        Ok(())
    }

    /// Attitude and rate loops against the latest attitude setpoint.
    pub fn update_inner(&mut self, state: &RigidBodyState) -> Result<(), RcacError> {
        let flags = self.flags();

        let z_q = attitude_error(&state.q, &self.chain.q_sp, self.mode);
        let mut w = attitude_law(&state.q, &z_q, self.chain.psi_rate_sp_ff, &self.gains, self.mode);
        if flags.q {
            let u = self
                .adaptive
                .as_mut()
                .expect("flag implies adaptive")
                .augment_attitude(&z_q)?;
            self.augmentation.u_q = u;
            w += u;
        }
        let omega_sp = self.limits.clamp_rates(&w);

        let z_w = omega_sp - state.omega;
        let mut m = rate_law(&self.rate_pid, &z_w, &omega_sp, &self.gains);
        self.rate_pid.advance(&z_w, self.limits.rate_integrator_bound);
        if flags.omega {
            let u = self
                .adaptive
                .as_mut()
                .expect("flag implies adaptive")
                .augment_rate(&z_w, &omega_sp)?;
            self.augmentation.u_omega = u;
            m += u;
        }
        let moment_sp = self.limits.clamp_moment(&m);

        self.errors.z_q = z_q;
        self.errors.z_omega = z_w;
        self.chain.omega_sp = omega_sp;
        self.chain.moment_sp = moment_sp;
        Ok(())
    }

    /// Total thrust and body moment held until the next inner update.
    pub fn command(&self) -> ActuatorCommand {
        ActuatorCommand::new(self.thrust_sp, self.chain.moment_sp)
    }
}
