//! Long-term NBTI aging model and lifetime estimates.
//!
//! Threshold-voltage shift follows
//! `dVt = 0.005 * exp(-1500 / T) * Vdd^4 * t^(1/6) * u^(1/6)`, where `u` is
//! the fraction of time a unit is under stress. Delay grows linearly with
//! `dVt`, so after calibrating one anchor point (a delay increase of `θ` at
//! `reference_lifetime` years for utilization `u_ref`) the delay increase is
//!
//! ```text
//! delay(t, u) = θ * ((t / t_ref) * (u / u_ref))^(1/6)
//! ```
//!
//! and the time to reach `θ` is `t_ref * u_ref / u`. The most-utilized unit
//! sets the lifetime of the whole fabric.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS_PER_YEAR: f64 = 8760.0;

const SIXTH: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgingParams {
    /// Kelvin.
    pub temperature: f64,
    /// Volts.
    pub vdd: f64,
    /// Relative delay increase that marks end of life.
    pub delay_threshold: f64,
    /// Years to reach `delay_threshold` at `reference_utilization`.
    pub reference_lifetime: f64,
    pub reference_utilization: f64,
}

impl Default for AgingParams {
    fn default() -> Self {
        Self {
            temperature: 350.0,
            vdd: 1.0,
            delay_threshold: 0.10,
            reference_lifetime: 3.0,
            reference_utilization: 1.0,
        }
    }
}

impl AgingParams {
    pub fn validate(&self) -> Result<(), AgingError> {
        let ok = self.temperature > 0.0
            && self.vdd > 0.0
            && self.delay_threshold > 0.0
            && self.delay_threshold <= 1.0
            && self.reference_lifetime > 0.0
            && self.reference_utilization > 0.0
            && self.reference_utilization <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(AgingError::InvalidParams(*self))
        }
    }
}

/// Stress duty cycle of a functional unit, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct UtilizationRate(f64);

impl UtilizationRate {
    pub fn new(u: f64) -> Result<Self, AgingError> {
        if (0.0..=1.0).contains(&u) {
            Ok(Self(u))
        } else {
            Err(AgingError::UtilizationOutOfRange(u))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum AgingError {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("utilization must lie in [0, 1], got {0}")]
    UtilizationOutOfRange(f64),
    #[error("invalid aging parameters {0:?}")]
    InvalidParams(AgingParams),
    /// An unstressed unit never reaches the delay threshold.
    #[error("lifetime is unbounded at zero utilization")]
    UnboundedLifetime,
    #[error("delay curve needs a positive horizon and at least 2 points")]
    InvalidCurve,
}

/// Raw threshold-voltage shift in volts after `hours` of operation.
pub fn delta_vt_raw(params: &AgingParams, hours: f64, u: UtilizationRate) -> Result<f64, AgingError> {
    if hours < 0.0 || hours.is_nan() {
        return Err(AgingError::NegativeTime(hours));
    }
    Ok(0.005
        * (-1500.0 / params.temperature).exp()
        * params.vdd.powi(4)
        * hours.powf(SIXTH)
        * u.get().powf(SIXTH))
}

/// Relative delay increase after `years`, calibrated to the reference point.
pub fn delay_increase(params: &AgingParams, years: f64, u: UtilizationRate) -> Result<f64, AgingError> {
    if years < 0.0 || years.is_nan() {
        return Err(AgingError::NegativeTime(years));
    }
    let stress = (years / params.reference_lifetime) * (u.get() / params.reference_utilization);
    Ok(params.delay_threshold * stress.powf(SIXTH))
}

/// Years until the delay increase reaches the threshold.
pub fn lifetime(params: &AgingParams, u: UtilizationRate) -> Result<f64, AgingError> {
    if u.get() == 0.0 {
        return Err(AgingError::UnboundedLifetime);
    }
    Ok(params.reference_lifetime * params.reference_utilization / u.get())
}

/// Lifetime gained by lowering the worst-case utilization from `baseline` to
/// `proposed`. Depends only on the two utilizations.
pub fn lifetime_improvement(
    baseline: UtilizationRate,
    proposed: UtilizationRate,
) -> Result<f64, AgingError> {
    if baseline.get() == 0.0 || proposed.get() == 0.0 {
        return Err(AgingError::UnboundedLifetime);
    }
    Ok(baseline.get() / proposed.get())
}

/// `num_points` evenly spaced samples of the delay increase over
/// `[0, horizon_years]`.
pub fn delay_curve(
    params: &AgingParams,
    u: UtilizationRate,
    horizon_years: f64,
    num_points: usize,
) -> Result<Vec<(f64, f64)>, AgingError> {
    if horizon_years.is_nan() || horizon_years <= 0.0 || num_points < 2 {
        return Err(AgingError::InvalidCurve);
    }
    let step = horizon_years / (num_points - 1) as f64;
    (0..num_points)
        .map(|i| {
            let t = if i + 1 == num_points { horizon_years } else { i as f64 * step };
            delay_increase(params, t, u).map(|d| (t, d))
        })
        .collect()
}

/// CSV with a `t_years,delay_fraction` header.
pub fn delay_curve_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("t_years,delay_fraction\n");
    for (t, d) in curve {
        let _ = writeln!(s, "{t},{d}");
    }
    s
}
