use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("rotation axis must be 1, 2 or 3, got {0}")]
    InvalidAxis(u8),
    #[error("quaternion components are zero or non-finite")]
    DegenerateQuaternion,
    #[error("rotation axis has zero or non-finite length")]
    DegenerateAxis,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite {0} in vehicle state")]
    NonFiniteState(&'static str),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RcacError {
    #[error("covariance lost positive definiteness (min eigenvalue {min_eigenvalue:e}) after {step} updates")]
    CovarianceNotPositiveDefinite { min_eigenvalue: f64, step: u64 },
    #[error("invalid RCAC configuration: {0}")]
    InvalidConfig(String),
}

/// Problems reading the line-oriented text inputs (gains, hyperparameters,
/// missions).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl ParseError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        ParseError::Line {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Rcac(#[from] RcacError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
