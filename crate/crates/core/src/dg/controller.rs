//! Fixed and adaptive step size control.

use super::{StepOutcome, Stepper, DEFAULT_TAU_MAX, DEFAULT_TAU_MIN};
use crate::energy::Energy;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    Fixed,
    /// Try `τ` and `2τ`, keep the lower energy, then halve (τ won) or double.
    Adaptive,
}

/// Step size state. Always `0 < tau_min ≤ tau ≤ tau_max < ∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepController {
    mode: StepMode,
    tau: f64,
    tau_min: f64,
    tau_max: f64,
}

impl StepController {
    pub fn new(mode: StepMode, tau: f64, tau_min: f64, tau_max: f64) -> Result<Self> {
        if !(tau_min > 0.0 && tau_min <= tau && tau <= tau_max && tau_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < tau_min <= tau <= tau_max < inf, got {tau_min} <= {tau} <= {tau_max}"
            )));
        }
        Ok(Self {
            mode,
            tau,
            tau_min,
            tau_max,
        })
    }

    pub fn fixed(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {tau}"
            )));
        }
        Self::new(StepMode::Fixed, tau, tau, tau)
    }

    /// Adaptive controller with the default window `[1e-7, 1e3]`.
    pub fn adaptive(tau: f64) -> Result<Self> {
        Self::new(StepMode::Adaptive, tau, DEFAULT_TAU_MIN, DEFAULT_TAU_MAX)
    }

    pub fn mode(&self) -> StepMode {
        self.mode
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.tau_min, self.tau_max)
    }

    /// Step size for the next trial pair after the `2τ` trial won or lost.
    pub fn next(&self, long_won: bool) -> Self {
        let t = if long_won {
            2.0 * self.tau
        } else {
            0.5 * self.tau
        };
        Self {
            tau: t.clamp(self.tau_min, self.tau_max),
            ..*self
        }
    }
}

/// One adaptive step: both trials run, their inner iterations add up, and
/// ties go to the shorter step.
pub fn adaptive_controller_step<E, S>(
    energy: &E,
    stepper: &S,
    x: &[f64],
    ctl: &StepController,
) -> Result<(StepOutcome, StepController)>
where
    E: Energy + ?Sized,
    S: Stepper + ?Sized,
{
    if ctl.mode != StepMode::Adaptive {
        return Err(Error::InvalidParameter(
            "adaptive_controller_step needs an adaptive controller".into(),
        ));
    }
    let short = stepper.step(x, ctl.tau)?;
    let long = stepper.step(x, 2.0 * ctl.tau)?;
    let iters = short.inner_iters + long.inner_iters;
    let long_won = energy.value_diff(&short.x, &long.x) < 0.0;
    let mut chosen = if long_won { long } else { short };
    chosen.inner_iters = iters;
    Ok((chosen, ctl.next(long_won)))
}

/// Fixed or adaptive step, by controller mode.
pub fn controlled_step<E, S>(
    energy: &E,
    stepper: &S,
    x: &[f64],
    ctl: &StepController,
) -> Result<(StepOutcome, StepController)>
where
    E: Energy + ?Sized,
    S: Stepper + ?Sized,
{
    match ctl.mode {
        StepMode::Fixed => Ok((stepper.step(x, ctl.tau)?, *ctl)),
        StepMode::Adaptive => adaptive_controller_step(energy, stepper, x, ctl),
    }
}
