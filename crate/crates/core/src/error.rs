// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use thiserror::Error;

/// Which end of a radial integral failed to converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Zero,
    Infinity,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Zero => f.write_str("r -> 0"),
            Endpoint::Infinity => f.write_str("r -> infinity"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies in no root of the lattice window")]
    OutOfWindow { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid lattice window: {0}")]
    InvalidWindow(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} is not inside the cube")]
    NotInCube { point: Vec<f64> },

    #[error("cube (level {level}, index {index:?}) is not part of the window")]
    CubeOutsideWindow { level: i32, index: Vec<i64> },

    #[error("sigma carries no positive mass")]
    NoMass,

    #[error("grid oracle supports at most 3 sigma atoms with positive mass, got {0}")]
    TooManyAtoms(usize),

    #[error("Wolff potential vanishes at every positive mu atom; mu_1 is undefined")]
    DegenerateWolff,

    #[error("ball has zero sigma mass")]
    EmptyBall,

    #[error("radial integral diverges as {end}{}", exponent.map(|e| format!(" (power-law exponent {e})")).unwrap_or_default())]
    DivergentTail { end: Endpoint, exponent: Option<f64> },

    #[error("kernel is singular at sigma atom {atom} (it coincides with a mu atom)")]
    SingularEvaluation { atom: usize },

    #[error("DLBO ceiling {target} not reached after {attempts} attempts (smallest A seen {best})")]
    TargetAUnreachable { target: f64, attempts: usize, best: f64 },

    #[error("unsupported instance schema {0:?}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
