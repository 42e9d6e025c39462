//! Steppers and the flow driver that records energy traces.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::controller::controlled_step;
use super::implicit::{dg_step_implicit, ImplicitOptions};
use super::itoh_abe::itoh_abe_step;
use super::{euler_step, lagged_diffusivity_step, Scheme, StepController, StepOutcome};
use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::functionals::FunctionalModel;
use crate::par;

/// Advances a state by one step of size `tau`.
pub trait Stepper: Sync {
    fn step(&self, x: &[f64], tau: f64) -> Result<StepOutcome>;

    /// Whether the method guarantees `V(x′) ≤ V(x)` for every `τ > 0`.
    fn dissipative(&self) -> bool;
}

/// Options shared by the implicit steppers.
#[derive(Clone, Debug)]
pub struct StepOptions {
    pub implicit: ImplicitOptions,
    /// Scalar root tolerance (Itoh–Abe) relative to `τ|∂_iV|`.
    pub coordinate_tol: f64,
    /// Relative CG tolerance for lagged diffusivity.
    pub cg_tol: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            implicit: ImplicitOptions::default(),
            coordinate_tol: super::DEFAULT_STEP_TOL,
            cg_tol: 1e-10,
        }
    }
}

impl StepOptions {
    /// Same tolerance for the Newton residual and the coordinate roots.
    pub fn with_tol(tol: f64) -> Self {
        let mut o = Self::default();
        o.implicit.tol = tol;
        o.coordinate_tol = tol;
        o
    }
}

pub struct DgStepper<'a, E: Energy + ?Sized> {
    energy: &'a E,
    scheme: Scheme,
    opts: StepOptions,
}

impl<'a, E: Energy + ?Sized> DgStepper<'a, E> {
    pub fn new(energy: &'a E, scheme: Scheme, opts: StepOptions) -> Self {
        Self {
            energy,
            scheme,
            opts,
        }
    }
}

impl<E: Energy + ?Sized> Stepper for DgStepper<'_, E> {
    fn step(&self, x: &[f64], tau: f64) -> Result<StepOutcome> {
        match self.scheme {
            Scheme::ItohAbe => {
                let out = itoh_abe_step(self.energy, x, tau, self.opts.coordinate_tol)?;
                Ok(StepOutcome {
                    x: out.x,
                    inner_iters: out.evals,
                    tau,
                })
            }
            s => dg_step_implicit(self.energy, s, x, tau, &self.opts.implicit),
        }
    }

    fn dissipative(&self) -> bool {
        true
    }
}

pub struct EulerStepper<'a, E: Energy + ?Sized> {
    energy: &'a E,
}

impl<'a, E: Energy + ?Sized> EulerStepper<'a, E> {
    pub fn new(energy: &'a E) -> Self {
        Self { energy }
    }
}

impl<E: Energy + ?Sized> Stepper for EulerStepper<'_, E> {
    fn step(&self, x: &[f64], tau: f64) -> Result<StepOutcome> {
        Ok(StepOutcome {
            x: euler_step(self.energy, x, tau),
            inner_iters: 0,
            tau,
        })
    }

    fn dissipative(&self) -> bool {
        false
    }
}

pub struct LaggedStepper<'a> {
    model: &'a FunctionalModel,
    cg_tol: f64,
    fixed_point: bool,
}

impl<'a> LaggedStepper<'a> {
    pub fn new(model: &'a FunctionalModel, cg_tol: f64, fixed_point: bool) -> Self {
        Self {
            model,
            cg_tol,
            fixed_point,
        }
    }
}

impl Stepper for LaggedStepper<'_> {
    fn step(&self, x: &[f64], tau: f64) -> Result<StepOutcome> {
        lagged_diffusivity_step(self.model, x, tau, self.cg_tol, self.fixed_point)
    }

    fn dissipative(&self) -> bool {
        false
    }
}

/// Every stepping method the command line exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Dg(Scheme),
    Euler,
    Lagged { fixed_point: bool },
}

impl Method {
    pub fn stepper<'a>(
        &self,
        model: &'a FunctionalModel,
        opts: &StepOptions,
    ) -> Box<dyn Stepper + 'a> {
        match *self {
            Method::Dg(s) => Box::new(DgStepper::new(model, s, opts.clone())),
            Method::Euler => Box::new(EulerStepper::new(model)),
            Method::Lagged { fixed_point } => {
                Box::new(LaggedStepper::new(model, opts.cg_tol, fixed_point))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dg(Scheme::Gonzalez) => "gonzalez",
            Method::Dg(Scheme::MeanValue { .. }) => "meanvalue",
            Method::Dg(Scheme::ItohAbe) => "itoh-abe",
            Method::Euler => "euler",
            Method::Lagged { .. } => "lagged",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// When to stop a flow. A zero `energy_stall_eps` disables the stall test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCriteria {
    pub max_steps: usize,
    /// Stop when `‖∇V(x_n)‖ ≤ grad_tol · (1 + ‖∇V(x₀)‖)`.
    pub grad_tol: f64,
    /// Stop when `|V(x_{n−10}) − V(x_n)| < energy_stall_eps`.
    pub energy_stall_eps: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            grad_tol: super::DEFAULT_GRAD_TOL,
            energy_stall_eps: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub tau: f64,
    pub inner_iters: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
}

impl FlowTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tau).collect()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Largest single-step energy increase (≤ 0 for a monotone trace).
    pub fn max_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows.len() < 2 || self.max_increase() <= slack
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradTol,
    MaxSteps,
    Stalled,
    Failed,
}

#[derive(Debug)]
pub struct FlowResult {
    pub state: Vec<f64>,
    pub trace: FlowTrace,
    pub termination: Termination,
    /// Set when a step failed; `state` and `trace` hold the progress so far.
    pub error: Option<Error>,
}

impl FlowResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradTol
    }
}

/// Runs `stepper` from `x0` until a stop criterion fires. Step 0 is recorded.
/// Wall-clock times are only recorded when `record_time` is set, so traces are
/// reproducible by default.
pub fn run_flow<E, S>(
    energy: &E,
    stepper: &S,
    ctl: StepController,
    stop: StopCriteria,
    x0: &[f64],
    record_time: bool,
) -> FlowResult
where
    E: Energy + ?Sized,
    S: Stepper + ?Sized,
{
    let start = Instant::now();
    let elapsed = |t: &Instant| {
        if record_time {
            t.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };
    let mut x = x0.to_vec();
    let mut ctl = ctl;
    let e0 = energy.value(&x);
    let g0 = par::norm(&energy.gradient(&x));
    let threshold = stop.grad_tol * (1.0 + g0);
    let mut trace = FlowTrace {
        rows: vec![TraceRow {
            step: 0,
            energy: e0,
            grad_norm: g0,
            tau: ctl.tau(),
            inner_iters: 0,
            wall_ms: elapsed(&start),
        }],
    };
    if g0 <= threshold {
        return FlowResult {
            state: x,
            trace,
            termination: Termination::GradTol,
            error: None,
        };
    }
    for n in 1..=stop.max_steps {
        let (out, next) = match controlled_step(energy, stepper, &x, &ctl) {
            Ok(v) => v,
            Err(e) => {
                return FlowResult {
                    state: x,
                    trace,
                    termination: Termination::Failed,
                    error: Some(e),
                }
            }
        };
        x = out.x;
        let e_now = energy.value(&x);
        ctl = next;
        let gn = par::norm(&energy.gradient(&x));
        trace.rows.push(TraceRow {
            step: n,
            energy: e_now,
            grad_norm: gn,
            tau: out.tau,
            inner_iters: out.inner_iters,
            wall_ms: elapsed(&start),
        });
        if gn <= threshold {
            return FlowResult {
                state: x,
                trace,
                termination: Termination::GradTol,
                error: None,
            };
        }
        if stop.energy_stall_eps > 0.0 && n >= 10 {
            let back = trace.rows[n - 10].energy;
            if (back - e_now).abs() < stop.energy_stall_eps {
                return FlowResult {
                    state: x,
                    trace,
                    termination: Termination::Stalled,
                    error: None,
                };
            }
        }
    }
    FlowResult {
        state: x,
        trace,
        termination: Termination::MaxSteps,
        error: None,
    }
}
