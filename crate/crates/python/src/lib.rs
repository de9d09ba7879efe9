use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use autopilot::dynamics::RigidBodyState;
use autopilot::math::{euler_to_quat, EulerAngles321, UnitQuaternion, Vec3};
use autopilot::rcac::{RcacConfig, RcacState};
use autopilot::{
    default_mission as rust_default_mission, replay_metrics as rust_replay_metrics,
    run_experiment as rust_run_experiment, AdaptiveConfig, ExperimentConfig, GainSet, MetricsReport, MissionPlan,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Unit quaternion, scalar first, rotating body axes into Earth axes.
#[pyclass(name = "Quaternion", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyQuaternion(UnitQuaternion);

#[pymethods]
impl PyQuaternion {
    #[new]
    fn new(eta: f64, eps: [f64; 3]) -> PyResult<Self> {
        UnitQuaternion::new(eta, Vec3::from(eps)).map(Self).map_err(value_err)
    }

    /// From 3-2-1 Euler angles (azimuth, elevation, bank).
    #[staticmethod]
    fn from_euler(psi: f64, theta: f64, phi: f64) -> Self {
        Self(euler_to_quat(EulerAngles321::new(psi, theta, phi)))
    }

    fn components(&self) -> [f64; 4] {
        self.0.to_array()
    }

    #[allow(clippy::wrong_self_convention)]
    fn to_euler(&self) -> (f64, f64, f64) {
        let e = self.0.to_euler();
        (e.psi, e.theta, e.phi)
    }

    fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        self.0.rotate(&Vec3::from(v)).into()
    }

    fn inverse_rotate(&self, v: [f64; 3]) -> [f64; 3] {
        self.0.inverse_rotate(&Vec3::from(v)).into()
    }

    fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    fn __mul__(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    fn __repr__(&self) -> String {
        let [a, b, c, d] = self.0.to_array();
        format!("Quaternion({a}, [{b}, {c}, {d}])")
    }
}

/// Attitude setpoint whose thrust axis points along `force`.
#[pyfunction]
fn f2q(force: [f64; 3], psi: f64) -> PyQuaternion {
    PyQuaternion(autopilot::stock::f2q(&Vec3::from(force), psi).q_sp)
}

/// One retrospective-cost adaptive controller: `u = φ θ` with a recursive
/// least-squares update of `θ`.
#[pyclass(name = "RcacController")]
struct PyRcac {
    config: RcacConfig,
    state: RcacState,
}

fn matrix(rows: &[Vec<f64>], n_channels: usize, n_coeffs: usize) -> PyResult<nalgebra::DMatrix<f64>> {
    if rows.len() != n_channels || rows.iter().any(|r| r.len() != n_coeffs) {
        return Err(PyValueError::new_err(format!(
            "regressor must be {n_channels} x {n_coeffs}"
        )));
    }
    Ok(nalgebra::DMatrix::from_fn(n_channels, n_coeffs, |i, j| rows[i][j]))
}

#[pymethods]
impl PyRcac {
    #[new]
    #[pyo3(signature = (p0, n_channels, n_coeffs, sigma = -1.0, mask = None))]
    fn new(p0: f64, n_channels: usize, n_coeffs: usize, sigma: f64, mask: Option<Vec<bool>>) -> PyResult<Self> {
        let mut config = RcacConfig::new(p0, sigma, n_channels, n_coeffs);
        if let Some(mask) = mask {
            config.mask = mask;
        }
        let state = RcacState::new(&config).map_err(value_err)?;
        Ok(Self { config, state })
    }

    /// Emits `φ θ` with the current coefficients, then updates them with the
    /// error `z` measured since the previous step.
    fn step(&mut self, z: Vec<f64>, phi: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        if z.len() != self.config.n_channels() {
            return Err(PyValueError::new_err(format!(
                "expected {} errors",
                self.config.n_channels()
            )));
        }
        let phi = matrix(&phi, self.config.n_channels(), self.config.n_coeffs())?;
        let u = self
            .state
            .step(&z, phi, &self.config)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(u.iter().copied().collect())
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.state.theta().iter().copied().collect()
    }

    #[getter]
    fn covariance(&self) -> Vec<Vec<f64>> {
        let p = self.state.covariance();
        (0..p.nrows()).map(|i| p.row(i).iter().copied().collect()).collect()
    }

    /// Number of coefficient updates so far, one less than the steps taken.
    #[getter]
    fn step_count(&self) -> u64 {
        self.state.step_count()
    }
}

#[pyclass(name = "Metrics", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyMetrics {
    position_rmse: f64,
    azimuth_rmse: f64,
    completion_time: f64,
    completed: bool,
    samples: usize,
    max_overshoot: Vec<f64>,
    theta_norms: [f64; 4],
}

impl From<&MetricsReport> for PyMetrics {
    fn from(m: &MetricsReport) -> Self {
        Self {
            position_rmse: m.position_rmse,
            azimuth_rmse: m.azimuth_rmse,
            completion_time: m.completion_time,
            completed: m.completed,
            samples: m.samples,
            max_overshoot: m.max_overshoot.clone(),
            theta_norms: m.theta_norms,
        }
    }
}

#[pymethods]
impl PyMetrics {
    fn __repr__(&self) -> String {
        format!(
            "Metrics(position_rmse={}, completion_time={}, completed={})",
            self.position_rmse,
            self.completion_time,
            if self.completed { "True" } else { "False" }
        )
    }
}

/// Result of one flight: metrics plus the logged trajectories.
#[pyclass(name = "Flight", frozen, get_all, skip_from_py_object)]
struct PyFlight {
    metrics: PyMetrics,
    abort_reason: Option<String>,
    t: Vec<f64>,
    position: Vec<[f64; 3]>,
    position_sp: Vec<[f64; 3]>,
    /// `θ_r, θ_v, θ_q, θ_ω` concatenated, one row per sample.
    theta: Vec<Vec<f64>>,
}

/// Flies a mission. `mission`, `gains` and `hyper` take file contents; the
/// defaults are the built-in rectangle, gains and RCAC settings. With `out`
/// the log files are also written to that directory.
#[pyfunction]
#[pyo3(signature = (
    alpha, adaptive = false, loops = None, mission = None, gains = None, hyper = None,
    unmask_ff = false, dt = 0.002, duration = 180.0, seed = 0, out = None,
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    alpha: f64,
    adaptive: bool,
    loops: Option<&str>,
    mission: Option<&str>,
    gains: Option<&str>,
    hyper: Option<&str>,
    unmask_ff: bool,
    dt: f64,
    duration: f64,
    seed: u64,
    out: Option<PathBuf>,
) -> PyResult<PyFlight> {
    let plan = match mission {
        Some(text) => MissionPlan::parse(text).map_err(value_err)?,
        None => rust_default_mission(),
    };
    let mut config = ExperimentConfig {
        alpha_p: alpha,
        adaptive,
        dt,
        duration,
        seed,
        ..ExperimentConfig::default()
    };
    if let Some(text) = gains {
        config.gains = GainSet::parse(text).map_err(value_err)?;
    }
    if let Some(text) = hyper {
        config.rcac = AdaptiveConfig::parse(text).map_err(value_err)?;
    }
    if let Some(loops) = loops {
        config.rcac.enabled = loops.parse().map_err(value_err)?;
    }
    if unmask_ff {
        config.rcac.unmask_omega();
    }
    config.validate().map_err(value_err)?;

    let output = py
        .detach(|| match &out {
            Some(dir) => {
                let id = autopilot::runner::grid_id(config.alpha_p, config.adaptive);
                autopilot::run_to_dir(&config, &plan, dir, &id).map(|(o, _)| o)
            }
            None => rust_run_experiment(&config, &plan),
        })
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let rows = &output.log.rows;
    Ok(PyFlight {
        metrics: PyMetrics::from(&output.metrics),
        abort_reason: output.abort_reason.clone(),
        t: rows.iter().map(|r| r.t).collect(),
        position: rows.iter().map(|r| r.r.into()).collect(),
        position_sp: rows.iter().map(|r| r.r_sp.into()).collect(),
        theta: output.log.gains.iter().map(|g| g.theta.to_vec()).collect(),
    })
}

/// Recomputes metrics from a `log.csv` written by a run.
#[pyfunction]
fn replay_metrics(log: PathBuf) -> PyResult<PyMetrics> {
    rust_replay_metrics(&log)
        .map(|m| PyMetrics::from(&m))
        .map_err(value_err)
}

/// The built-in mission in the waypoint file format.
#[pyfunction]
fn default_mission() -> String {
    rust_default_mission().to_file_string()
}

/// The built-in gains in the gain file format.
#[pyfunction]
fn default_gains() -> String {
    GainSet::default().to_file_string()
}

/// Thrust that balances gravity for the default vehicle, N.
#[pyfunction]
fn hover_thrust() -> f64 {
    autopilot::VehicleParams::default().hover_thrust()
}

/// Position and attitude of the default vehicle after holding a constant
/// command from rest for `seconds`.
#[pyfunction]
fn state_after(thrust: f64, moment: [f64; 3], seconds: f64) -> PyResult<([f64; 3], [f64; 4])> {
    let params = autopilot::VehicleParams::default();
    let cmd = autopilot::ActuatorCommand::new(thrust, Vec3::from(moment));
    let mut s = RigidBodyState::default();
    let n = (seconds / 0.002).round() as usize;
    for _ in 0..n {
        s = autopilot::dynamics::step(&s, &cmd, 0.002, &params).map_err(value_err)?;
    }
    Ok((s.r.into(), s.q.to_array()))
}

#[pymodule]
fn rcac_autopilot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuaternion>()?;
    m.add_class::<PyRcac>()?;
    m.add_class::<PyMetrics>()?;
    m.add_class::<PyFlight>()?;
    m.add_function(wrap_pyfunction!(f2q, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(replay_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(default_mission, m)?)?;
    m.add_function(wrap_pyfunction!(default_gains, m)?)?;
    m.add_function(wrap_pyfunction!(hover_thrust, m)?)?;
    m.add_function(wrap_pyfunction!(state_after, m)?)?;
    Ok(())
}
