//! Fixed gains of the stock cascade and the flat `key = value` file format
//! used to override them.

use std::fmt::Write as _;

use crate::error::ParseError;
use crate::math::Vec3;

/// The 27 tunable gains of the stock cascade plus the time constant of the
/// full-quaternion attitude law.
///
/// Integral and derivative gains act on the per-sample sum and difference of
/// the error, so they absorb the loop's sample period.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSet {
    /// Position P, 1/s.
    pub k_r: Vec3,
    pub k_v_p: Vec3,
    pub k_v_i: Vec3,
    pub k_v_d: Vec3,
    /// Attitude P, 1/s.
    pub k_q: Vec3,
    /// Full-quaternion attitude time constant, s. Not a tuning gain.
    pub tau: f64,
    pub k_w_p: Vec3,
    pub k_w_i: Vec3,
    pub k_w_d: Vec3,
    pub k_w_ff: Vec3,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            k_r: Vec3::new(1.0, 1.0, 1.0),
            k_v_p: Vec3::new(4.0, 4.0, 8.0),
            k_v_i: Vec3::new(0.04, 0.04, 0.1),
            k_v_d: Vec3::new(0.5, 0.5, 0.0),
            k_q: Vec3::new(12.0, 12.0, 5.0),
            tau: 0.4,
            k_w_p: Vec3::new(0.38, 0.38, 0.25),
            k_w_i: Vec3::new(0.0045, 0.0045, 0.002),
            k_w_d: Vec3::new(0.2, 0.2, 0.0),
            k_w_ff: Vec3::zeros(),
        }
    }
}

const VECTOR_KEYS: [&str; 9] = ["K_r", "K_vP", "K_vI", "K_vD", "K_q", "K_wP", "K_wI", "K_wD", "K_wff"];

impl GainSet {
    /// Multiplies all 27 gains by `alpha_p`; `tau` is left alone.
    pub fn detune(&self, alpha_p: f64) -> GainSet {
        GainSet {
            k_r: self.k_r * alpha_p,
            k_v_p: self.k_v_p * alpha_p,
            k_v_i: self.k_v_i * alpha_p,
            k_v_d: self.k_v_d * alpha_p,
            k_q: self.k_q * alpha_p,
            tau: self.tau,
            k_w_p: self.k_w_p * alpha_p,
            k_w_i: self.k_w_i * alpha_p,
            k_w_d: self.k_w_d * alpha_p,
            k_w_ff: self.k_w_ff * alpha_p,
        }
    }

    fn vector(&self, key: &str) -> &Vec3 {
        match key {
            "K_r" => &self.k_r,
            "K_vP" => &self.k_v_p,
            "K_vI" => &self.k_v_i,
            "K_vD" => &self.k_v_d,
            "K_q" => &self.k_q,
            "K_wP" => &self.k_w_p,
            "K_wI" => &self.k_w_i,
            "K_wD" => &self.k_w_d,
            "K_wff" => &self.k_w_ff,
            _ => unreachable!("unknown gain vector {key}"),
        }
    }

    fn vector_mut(&mut self, key: &str) -> Option<&mut Vec3> {
        Some(match key {
            "K_r" => &mut self.k_r,
            "K_vP" => &mut self.k_v_p,
            "K_vI" => &mut self.k_v_i,
            "K_vD" => &mut self.k_v_d,
            "K_q" => &mut self.k_q,
            "K_wP" => &mut self.k_w_p,
            "K_wI" => &mut self.k_w_i,
            "K_wD" => &mut self.k_w_d,
            "K_wff" => &mut self.k_w_ff,
            _ => return None,
        })
    }

    /// All 27 gains in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        VECTOR_KEYS
            .iter()
            .flat_map(|k| self.vector(k).iter().copied())
            .collect()
    }

    pub fn validate(&self) -> Result<(), ParseError> {
        if !self.flatten().iter().all(|g| g.is_finite()) {
            return Err(ParseError::Invalid("gains must be finite".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ParseError::Invalid(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// Parses `K_vP_x = 1.8` style lines on top of the defaults. `#` starts a
    /// comment; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<GainSet, ParseError> {
        let mut gains = GainSet::default();
        for (line_no, key, value) in key_values(text)? {
            if key == "tau" {
                gains.tau = value;
                continue;
            }
            let (base, axis) = key
                .rsplit_once('_')
                .ok_or_else(|| ParseError::at(line_no, format!("unknown gain `{key}`")))?;
            let idx = match axis {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => return Err(ParseError::at(line_no, format!("unknown gain `{key}`"))),
            };
            let slot = gains
                .vector_mut(base)
                .ok_or_else(|| ParseError::at(line_no, format!("unknown gain `{key}`")))?;
            slot[idx] = value;
        }
        gains.validate()?;
        Ok(gains)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for key in VECTOR_KEYS {
            let v = self.vector(key);
            for (axis, value) in ["x", "y", "z"].iter().zip(v.iter()) {
                writeln!(out, "{key}_{axis} = {value}").unwrap();
            }
        }
        writeln!(out, "tau = {}", self.tau).unwrap();
        out
    }
}

/// Splits a flat config file into `(line number, key, value)` triples.
pub(crate) fn key_values(text: &str) -> Result<Vec<(usize, String, f64)>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ParseError::at(line_no, "expected `key = value`"))?;
        let key = key.trim();
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ParseError::at(line_no, format!("`{}` is not a number", value.trim())))?;
        if key.is_empty() {
            return Err(ParseError::at(line_no, "missing key"));
        }
        out.push((line_no, key.to_string(), value));
    }
    Ok(out)
}
