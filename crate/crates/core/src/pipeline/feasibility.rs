use serde::Serialize;

use crate::cavity::magic_time;
use crate::error::{Error, Result};

/// Order-of-magnitude operation time quoted for the Rydberg-atom setup, s.
pub const QUOTED_OPERATION_TIME: f64 = 1e-4;

/// Timescales of one fusion round against atomic and cavity lifetimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// rad/s
    pub g: f64,
    /// rad/s
    pub delta: f64,
    /// `g²/δ`, rad/s
    pub lambda: f64,
    pub lambda_t: f64,
    /// `(2π/9)/λ`, s
    pub interaction_time: f64,
    pub quoted_operation_time: f64,
    pub atomic_decay_time: f64,
    pub cavity_decay_time: f64,
    /// `atomic_decay_time / interaction_time`
    pub time_margin_atomic: f64,
    /// `cavity_decay_time / interaction_time`
    pub time_margin_cavity: f64,
}

/// All arguments in SI units: `g` and `delta` in rad/s, decay times in s.
pub fn feasibility_report(g: f64, delta: f64, atomic_decay: f64, cavity_decay: f64) -> Result<FeasibilityReport> {
    for (name, v) in
        [("g", g), ("delta", delta), ("atomic decay time", atomic_decay), ("cavity decay time", cavity_decay)]
    {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let lambda = g * g / delta;
    let lambda_t = magic_time();
    let interaction_time = lambda_t / lambda;
    Ok(FeasibilityReport {
        g,
        delta,
        lambda,
        lambda_t,
        interaction_time,
        quoted_operation_time: QUOTED_OPERATION_TIME,
        atomic_decay_time: atomic_decay,
        cavity_decay_time: cavity_decay,
        time_margin_atomic: atomic_decay / interaction_time,
        time_margin_cavity: cavity_decay / interaction_time,
    })
}
