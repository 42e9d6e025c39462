//! Implicit discrete gradient steps solved by damped Newton with CG.

use super::{averaged_gradient, near_diagonal, quadrature, Scheme, StepOutcome};
use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::par;
use crate::solvers::{cg_solve, newton_solve_system, FnOperator, NewtonOptions, NewtonSystem};

#[derive(Clone, Debug)]
pub struct ImplicitOptions {
    /// Newton stops at `‖x′ − x + τ∇̄V(x, x′)‖ ≤ tol·(1 + ‖x‖)`.
    pub tol: f64,
    pub max_newton: usize,
    pub backtracks: usize,
    /// Relative CG accuracy for each Newton system.
    pub forcing: f64,
    pub cg_maxit: usize,
    /// How many times a failed step is retried with `τ/2`.
    pub retries: usize,
}

impl Default for ImplicitOptions {
    fn default() -> Self {
        Self {
            tol: super::DEFAULT_STEP_TOL,
            max_newton: 50,
            backtracks: 20,
            forcing: 1e-2,
            cg_maxit: 1000,
            retries: 8,
        }
    }
}

/// Residual `F(y) = y − x + τ (ḡ(y) + c(y)(y − x))` where `ḡ` is the
/// quadrature average of `∇V` on the segment and `c` the secant coefficient.
struct DgSystem<'a, E: Energy + ?Sized> {
    energy: &'a E,
    x: &'a [f64],
    tau: f64,
    nodes: Vec<(f64, f64)>,
    cg_maxit: usize,
}

impl<E: Energy + ?Sized> DgSystem<'_, E> {
    fn step(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.x).map(|(a, b)| a - b).collect()
    }

    /// `Σ w_k s_k ∇²V(x + s_k d) v`
    fn weighted_hessian(&self, d: &[f64], v: &[f64], out: &mut [f64]) {
        let n = v.len();
        out.fill(0.0);
        let mut z = vec![0.0; n];
        let mut hv = vec![0.0; n];
        for &(s, w) in &self.nodes {
            for k in 0..n {
                z[k] = self.x[k] + s * d[k];
            }
            self.energy.hessian_vec_into(&z, v, &mut hv);
            par::axpy(w * s, &hv, out);
        }
    }
}

impl<E: Energy + ?Sized> NewtonSystem for DgSystem<'_, E> {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn residual(&self, y: &[f64], out: &mut [f64]) {
        let d = self.step(y);
        let g = averaged_gradient(self.energy, self.x, &d, &self.nodes);
        let c = super::secant_coefficient(self.energy, self.x, y, &d, &g);
        for k in 0..d.len() {
            out[k] = d[k] + self.tau * (g[k] + c * d[k]);
        }
    }

    /// The Jacobian is `S + τ d ∇cᵀ` with symmetric
    /// `S = (1 + τc) I + τ Σ w_k s_k ∇²V(z_k)`; the rank-one part is folded in
    /// with Sherman–Morrison around two CG solves with `S`.
    fn solve_linearized(&self, y: &[f64], rhs: &[f64], rtol: f64) -> Result<(Vec<f64>, usize)> {
        let n = y.len();
        let tau = self.tau;
        let d = self.step(y);
        let g = averaged_gradient(self.energy, self.x, &d, &self.nodes);
        let diagonal = near_diagonal(self.x, &d);
        let c = if diagonal {
            0.0
        } else {
            super::secant_coefficient(self.energy, self.x, y, &d, &g)
        };
        let op = FnOperator::new(n, |v: &[f64], out: &mut [f64]| {
            self.weighted_hessian(&d, v, out);
            for k in 0..n {
                out[k] = (1.0 + tau * c) * v[k] + tau * out[k];
            }
        });
        let zero = vec![0.0; n];
        let z1 = cg_solve(&op, rhs, &zero, rtol, self.cg_maxit);
        let mut iters = z1.iters;
        if diagonal {
            return Ok((z1.x, iters));
        }
        // ∇c = (∇V(y) − ḡ − Σ w s ∇²V(z) d − 2c d) / ‖d‖²
        let dd = par::dot(&d, &d);
        let gy = self.energy.gradient(y);
        let mut hd = vec![0.0; n];
        self.weighted_hessian(&d, &d, &mut hd);
        let grad_c: Vec<f64> = (0..n)
            .map(|k| (gy[k] - g[k] - hd[k] - 2.0 * c * d[k]) / dd)
            .collect();
        let z2 = cg_solve(&op, &d, &zero, rtol, self.cg_maxit);
        iters += z2.iters;
        let denom = 1.0 + tau * par::dot(&grad_c, &z2.x);
        if !(denom.abs() > 1e-12) || !denom.is_finite() {
            return Ok((z1.x, iters));
        }
        let f = tau * par::dot(&grad_c, &z1.x) / denom;
        let mut delta = z1.x;
        par::axpy(-f, &z2.x, &mut delta);
        Ok((delta, iters))
    }
}

/// One implicit step `x′ = x − τ ∇̄V(x, x′)` with the Gonzalez or mean-value
/// discrete gradient.
///
/// Newton starts from the explicit Euler point, then from `x`; if both fail
/// the step is retried with `τ/2` up to `opts.retries` times.
pub fn dg_step_implicit<E: Energy + ?Sized>(
    energy: &E,
    scheme: Scheme,
    x: &[f64],
    tau: f64,
    opts: &ImplicitOptions,
) -> Result<StepOutcome> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {tau}"
        )));
    }
    if scheme == Scheme::ItohAbe {
        return Err(Error::Unsupported(
            "the Itoh–Abe scheme has its own coordinate stepper".into(),
        ));
    }
    let nodes = quadrature(scheme);
    let target = opts.tol * (1.0 + par::norm(x));
    let newton = NewtonOptions {
        tol: opts.tol,
        target: Some(target),
        max_iters: opts.max_newton,
        backtracks: opts.backtracks,
        forcing: opts.forcing,
    };
    let grad = energy.gradient(x);
    let mut t = tau;
    let mut spent = 0;
    let mut last_err = String::new();
    for _ in 0..=opts.retries {
        let sys = DgSystem {
            energy,
            x,
            tau: t,
            nodes: nodes.clone(),
            cg_maxit: opts.cg_maxit,
        };
        let euler: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - t * g).collect();
        for guess in [&euler[..], x] {
            match newton_solve_system(&sys, guess, &newton) {
                Ok(out) => {
                    return Ok(StepOutcome {
                        x: out.x,
                        inner_iters: spent + out.iters,
                        tau: t,
                    })
                }
                Err(Error::NewtonNotConverged {
                    iters, residual, ..
                }) => {
                    spent += iters;
                    last_err = format!("newton residual {residual:e} after {iters} iterations");
                }
                Err(e) => return Err(e),
            }
        }
        t *= 0.5;
    }
    Err(Error::StepFailed {
        retries: opts.retries,
        tau: 2.0 * t,
        reason: last_err,
    })
}
