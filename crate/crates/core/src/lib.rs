//! Quadcopter cascade autopilot with optional retrospective-cost adaptive
//! augmentation, a deterministic 6-DOF simulator and a mission harness.

// `!(x > 0.0)` is used on purpose in validation so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod autopilot;
pub mod dynamics;
pub mod error;
pub mod gains;
pub mod harness;
pub mod log;
pub mod math;
pub mod mission;
pub mod rcac;
pub mod runner;
pub mod stock;

pub use adaptive::{AdaptiveAutopilot, AdaptiveConfig, LoopFlags};
pub use autopilot::{Autopilot, Setpoint};
pub use dynamics::{ActuatorCommand, MixerOutput, RigidBodyState, VehicleParams};
pub use error::{Error, Result};
pub use gains::GainSet;
pub use harness::{compute_metrics, run_experiment, ExperimentConfig, ExperimentOutput, MetricsReport};
pub use math::{EulerAngles321, UnitQuaternion, Vec3};
pub use mission::{default_mission, MissionPlan, SetpointMode, Waypoint};
pub use rcac::{RcacConfig, RcacState};
pub use runner::{replay_metrics, run_grid, run_to_dir, GridRow, RunManifest};
pub use stock::{AttitudeMode, ControlLimits};
