//! Retrospective cost adaptive control.
//!
//! The control is linear in the coefficients, `u_k = φ_k θ_k`. After `u_k`
//! has been applied and the error `z_{k+1}` is measured, the coefficients are
//! re-optimized against the retrospective performance variable
//!
//! ```text
//! ẑ_k(θ) = z_k + σ (φ_{k-1} θ - u_{k-1})
//! ```
//!
//! which asks what the error would have been had `φ_{k-1} θ` been applied
//! instead of `u_{k-1}`. The retrospective cost
//!
//! ```text
//! J_k(θ) = Σ_i ‖ẑ_i(θ)‖² + (θ - θ₀)ᵀ P₀⁻¹ (θ - θ₀)
//! ```
//!
//! is minimized exactly by a recursive least-squares update, so no history is
//! stored beyond the previous regressor and control.
//!
//! Multichannel loops share one `θ` and one `P`; a block-diagonal regressor
//! keeps the channels decoupled.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::RcacError;

#[derive(Clone, Debug, PartialEq)]
pub struct RcacConfig {
    /// Initial covariance scale, `P₀ = p0·I`.
    pub p0: f64,
    /// Per-channel sign of the leading coefficient from `u` to `z`.
    pub sigma: Vec<f64>,
    pub theta0: Vec<f64>,
    /// Coefficients forced to zero after every update.
    pub mask: Vec<bool>,
    /// Eigenvalue check of `P` after each update.
    pub check_covariance: bool,
}

impl RcacConfig {
    /// Zero initial coefficients, no mask, the same `sigma` on every channel.
    pub fn new(p0: f64, sigma: f64, n_channels: usize, n_coeffs: usize) -> Self {
        Self {
            p0,
            sigma: vec![sigma; n_channels],
            theta0: vec![0.0; n_coeffs],
            mask: vec![false; n_coeffs],
            check_covariance: cfg!(debug_assertions),
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        self.mask = mask;
        self
    }

    pub fn n_coeffs(&self) -> usize {
        self.theta0.len()
    }

    pub fn n_channels(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self) -> Result<(), RcacError> {
        let bad = |m: String| Err(RcacError::InvalidConfig(m));
        if !(self.p0.is_finite() && self.p0 > 0.0) {
            return bad(format!("p0 must be positive, got {}", self.p0));
        }
        if self.sigma.is_empty() || self.theta0.is_empty() {
            return bad("need at least one channel and one coefficient".into());
        }
        if let Some(s) = self.sigma.iter().find(|s| **s != 1.0 && **s != -1.0) {
            return bad(format!("sigma entries must be +1 or -1, got {s}"));
        }
        if self.mask.len() != self.theta0.len() {
            return bad(format!(
                "mask has {} entries but theta has {}",
                self.mask.len(),
                self.theta0.len()
            ));
        }
        if !self.theta0.iter().all(|t| t.is_finite()) {
            return bad("theta0 must be finite".into());
        }
        Ok(())
    }
}

/// Error history of one scalar PID channel.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PidChannelBuffer {
    /// `z_{k-1}`
    pub z_prev: f64,
    /// `z_{k-2}`
    pub z_prev2: f64,
    /// `γ_{k-1} = Σ_{i ≤ k-1} z_i`
    pub gamma: f64,
}

impl PidChannelBuffer {
    /// Shifts in the newest error; one accumulation per controller step.
    pub fn push(&mut self, z: f64) {
        self.push_bounded(z, None);
    }

    /// As [`push`](Self::push), clamping the accumulated error to `±bound`.
    pub fn push_bounded(&mut self, z: f64, bound: Option<f64>) {
        self.z_prev2 = self.z_prev;
        self.z_prev = z;
        self.gamma += z;
        if let Some(b) = bound {
            self.gamma = self.gamma.clamp(-b, b);
        }
    }
}

/// `[z_{k-1}, γ_{k-1}, z_{k-1} - z_{k-2}]`, followed by `r_k` when a
/// feedforward signal is given.
pub fn build_pid_regressor(buf: &PidChannelBuffer, feedforward: Option<f64>) -> Vec<f64> {
    let mut row = vec![buf.z_prev, buf.gamma, buf.z_prev - buf.z_prev2];
    if let Some(r) = feedforward {
        row.push(r);
    }
    row
}

/// Stacks per-channel rows into a block-diagonal regressor.
pub fn block_diagonal(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n_cols: usize = rows.iter().map(Vec::len).sum();
    let mut phi = DMatrix::zeros(rows.len(), n_cols);
    let mut col = 0;
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            phi[(i, col + j)] = *v;
        }
        col += row.len();
    }
    phi
}

/// `φ θ`.
pub fn control_output(phi: &DMatrix<f64>, theta: &DVector<f64>) -> DVector<f64> {
    assert_eq!(phi.ncols(), theta.len(), "regressor/coefficient dimension mismatch");
    phi * theta
}

/// Scalar retrospective performance variable `z + σ (φ θ - u)`.
pub fn retrospective_error(z: f64, phi_prev: &[f64], theta: &[f64], u_prev: f64, sigma: f64) -> f64 {
    assert_eq!(phi_prev.len(), theta.len(), "regressor/coefficient dimension mismatch");
    let phi_theta: f64 = phi_prev.iter().zip(theta).map(|(p, t)| p * t).sum();
    z + sigma * (phi_theta - u_prev)
}

/// One sample of the retrospective cost: the error `z_k` paired with the
/// regressor and control of the previous step.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrospectiveSample {
    pub z: DVector<f64>,
    pub phi_prev: DMatrix<f64>,
    pub u_prev: DVector<f64>,
}

/// `J(θ) = Σ_i ‖z_i + Σ(φ_{i-1} θ - u_{i-1})‖² + (θ - θ₀)ᵀ P₀⁻¹ (θ - θ₀)`.
pub fn batch_cost(theta: &DVector<f64>, history: &[RetrospectiveSample], config: &RcacConfig) -> f64 {
    let sigma = DVector::from_column_slice(&config.sigma);
    let theta0 = DVector::from_column_slice(&config.theta0);
    let data: f64 = history
        .iter()
        .map(|s| {
            let zhat = &s.z + sigma.component_mul(&(&s.phi_prev * theta - &s.u_prev));
            zhat.norm_squared()
        })
        .sum();
    let d = theta - theta0;
    data + d.norm_squared() / config.p0
}

#[derive(Clone, Debug, PartialEq)]
pub struct RcacState {
    theta: DVector<f64>,
    p: DMatrix<f64>,
    phi_prev: Option<DMatrix<f64>>,
    u_prev: DVector<f64>,
    step_count: u64,
}

impl RcacState {
    pub fn new(config: &RcacConfig) -> Result<Self, RcacError> {
        config.validate()?;
        let n = config.n_coeffs();
        let mut theta = DVector::from_column_slice(&config.theta0);
        apply_mask(&mut theta, &config.mask);
        Ok(Self {
            theta,
            p: DMatrix::identity(n, n) * config.p0,
            phi_prev: None,
            u_prev: DVector::zeros(config.n_channels()),
            step_count: 0,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn phi_prev(&self) -> Option<&DMatrix<f64>> {
        self.phi_prev.as_ref()
    }

    pub fn u_prev(&self) -> &DVector<f64> {
        &self.u_prev
    }

    /// Number of coefficient updates performed so far.
    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Emits `u_k = φ_k θ_k` and remembers `(φ_k, u_k)` for the next update.
    pub fn control(&mut self, phi: DMatrix<f64>) -> DVector<f64> {
        let u = control_output(&phi, &self.theta);
        self.phi_prev = Some(phi);
        self.u_prev = u.clone();
        u
    }

    /// Consumes `z_k` with the stored `(φ_{k-1}, u_{k-1})`, moving `θ` to the
    /// minimizer of the retrospective cost including this sample. A no-op
    /// before the first control has been emitted.
    pub fn rls_update(&mut self, z: &[f64], config: &RcacConfig) -> Result<(), RcacError> {
        let Some(phi) = self.phi_prev.as_ref() else {
            return Ok(());
        };
        assert_eq!(z.len(), phi.nrows(), "error/regressor channel mismatch");
        let n_ch = phi.nrows();
        let sigma = DVector::from_column_slice(&config.sigma);
        let z = DVector::from_column_slice(z);

        // P ← P - P φᵀ (I + φ P φᵀ)⁻¹ φ P
        let p_phi_t = &self.p * phi.transpose();
        let innovation = DMatrix::identity(n_ch, n_ch) + phi * &p_phi_t;
        let gain_t = innovation
            .cholesky()
            .expect("I + φPφᵀ is positive definite while P is")
            .solve(&p_phi_t.transpose());
        let mut p_next = &self.p - &p_phi_t * gain_t;
        symmetrize(&mut p_next);

        // θ ← θ - P φᵀ Σ ẑ(θ)
        let zhat = &z + sigma.component_mul(&(phi * &self.theta - &self.u_prev));
        let correction = &p_next * (phi.transpose() * sigma.component_mul(&zhat));
        self.theta -= correction;
        apply_mask(&mut self.theta, &config.mask);

        self.p = p_next;
        self.step_count += 1;
        if config.check_covariance {
            let min = min_eigenvalue(&self.p);
            if !(min > 0.0) {
                return Err(RcacError::CovarianceNotPositiveDefinite {
                    min_eigenvalue: min,
                    step: self.step_count,
                });
            }
        }
        Ok(())
    }

    /// A full controller step: `u_k = φ_k θ_k`, then the update with `z_k`,
    /// then `(φ_k, u_k)` is stored for the next step.
    pub fn step(&mut self, z: &[f64], phi: DMatrix<f64>, config: &RcacConfig) -> Result<DVector<f64>, RcacError> {
        let u = control_output(&phi, &self.theta);
        self.rls_update(z, config)?;
        self.phi_prev = Some(phi);
        self.u_prev = u.clone();
        Ok(u)
    }
}

fn apply_mask(theta: &mut DVector<f64>, mask: &[bool]) {
    for (t, m) in theta.iter_mut().zip(mask) {
        if *m {
            *t = 0.0;
        }
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = avg;
            p[(j, i)] = avg;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
