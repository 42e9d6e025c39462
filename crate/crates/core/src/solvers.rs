//! Matrix-free linear and nonlinear solvers.

use crate::error::{Error, Result};
use crate::par;

/// A linear map given only by its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Adapts a closure `(x, y) -> ()` writing `A x` into `y`.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// A search direction with `pᵀAp ≤ 0` was met.
    pub breakdown: bool,
    /// `‖r_k‖` for `k = 0..=iters`.
    pub history: Vec<f64>,
}

/// Conjugate gradients (Hestenes–Stiefel recurrence) for symmetric positive
/// (semi)definite `a`. Stops when `‖b − A x‖ ≤ tol · max(‖b‖, ε)`.
pub fn cg_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    maxit: usize,
) -> CgOutcome {
    let n = a.dim();
    assert_eq!(b.len(), n, "rhs length");
    assert_eq!(x0.len(), n, "initial guess length");
    let mut x = x0.to_vec();
    let mut ap = vec![0.0; n];
    a.apply(&x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(b, ax)| b - ax).collect();
    let mut p = r.clone();
    let mut rr = par::dot(&r, &r);
    let target = tol * par::norm(b).max(f64::EPSILON);
    let mut history = vec![rr.sqrt()];
    let mut iters = 0;
    let mut breakdown = false;
    while rr.sqrt() > target && iters < maxit {
        a.apply(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            breakdown = true;
            break;
        }
        let step = rr / pap;
        par::axpy(step, &p, &mut x);
        par::axpy(-step, &ap, &mut r);
        let rr_new = par::dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        iters += 1;
        history.push(rr.sqrt());
    }
    let residual_norm = rr.sqrt();
    CgOutcome {
        x,
        iters,
        residual_norm,
        converged: residual_norm <= target,
        breakdown,
        history,
    }
}

/// A nonlinear system `F(x) = 0` together with a way to solve its
/// linearization.
pub trait NewtonSystem {
    fn dim(&self) -> usize;

    fn residual(&self, x: &[f64], out: &mut [f64]);

    /// Approximately solves `F'(x) δ = rhs` to relative accuracy `rtol`.
    /// Returns the correction and the number of inner linear iterations.
    fn solve_linearized(&self, x: &[f64], rhs: &[f64], rtol: f64) -> Result<(Vec<f64>, usize)>;
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    /// Relative tolerance: stop when `‖F(x)‖ ≤ tol · (1 + ‖F(x₀)‖)`.
    pub tol: f64,
    /// Absolute target that overrides the relative one when set.
    pub target: Option<f64>,
    pub max_iters: usize,
    /// Maximum number of step halvings per iteration.
    pub backtracks: usize,
    /// Relative accuracy requested from each linear solve (inexact Newton).
    pub forcing: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            target: None,
            max_iters: 50,
            backtracks: 20,
            forcing: 1e-2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub linear_iters: usize,
    pub residual_norm: f64,
}

/// Damped Newton: each correction is halved until the residual norm drops.
pub fn newton_solve_system<S: NewtonSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    let n = sys.dim();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    sys.residual(&x, &mut r);
    let mut rn = par::norm(&r);
    let target = opts.target.unwrap_or(opts.tol * (1.0 + rn));
    let mut linear_iters = 0;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    for iter in 0..opts.max_iters {
        if rn <= target {
            return Ok(NewtonOutcome {
                x,
                iters: iter,
                linear_iters,
                residual_norm: rn,
            });
        }
        if !rn.is_finite() {
            break;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, li) = sys.solve_linearized(&x, &rhs, opts.forcing)?;
        linear_iters += li;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.backtracks {
            for k in 0..n {
                trial[k] = x[k] + lambda * delta[k];
            }
            sys.residual(&trial, &mut r_trial);
            let tn = par::norm(&r_trial);
            if tn < rn {
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                rn = tn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonNotConverged {
                iters: iter + 1,
                residual: rn,
                best: x,
            });
        }
    }
    if rn <= target {
        return Ok(NewtonOutcome {
            x,
            iters: opts.max_iters,
            linear_iters,
            residual_norm: rn,
        });
    }
    Err(Error::NewtonNotConverged {
        iters: opts.max_iters,
        residual: rn,
        best: x,
    })
}

struct ClosureSystem<R, J> {
    dim: usize,
    residual: R,
    jvp: J,
    cg_maxit: usize,
}

impl<R, J> NewtonSystem for ClosureSystem<R, J>
where
    R: Fn(&[f64], &mut [f64]),
    J: Fn(&[f64], &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        (self.residual)(x, out)
    }

    fn solve_linearized(&self, x: &[f64], rhs: &[f64], rtol: f64) -> Result<(Vec<f64>, usize)> {
        let op = FnOperator::new(self.dim, |v: &[f64], out: &mut [f64]| (self.jvp)(x, v, out));
        let zero = vec![0.0; self.dim];
        let out = cg_solve(&op, rhs, &zero, rtol, self.cg_maxit);
        Ok((out.x, out.iters))
    }
}

/// Newton with CG inner solves for a residual whose Jacobian is symmetric
/// positive definite. `jvp(x, v, out)` writes `F'(x) v`.
pub fn newton_solve<R, J>(
    residual: R,
    jvp: J,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonOutcome>
where
    R: Fn(&[f64], &mut [f64]),
    J: Fn(&[f64], &[f64], &mut [f64]),
{
    let dim = x0.len();
    let sys = ClosureSystem {
        dim,
        residual,
        jvp,
        cg_maxit: 10 * dim.max(10),
    };
    newton_solve_system(&sys, x0, opts)
}

/// Finds a sign change of `h` by stepping from `s0` in the direction of
/// `step` (its magnitude is the first step, doubled each time), then shrinks
/// the bracket with an Illinois/bisection hybrid until `|h(s)| ≤ tol`.
///
/// Returns the root and the number of `h` evaluations.
pub fn scalar_root<H>(
    mut h: H,
    s0: f64,
    step: f64,
    tol: f64,
    expand_cap: usize,
) -> Result<(f64, usize)>
where
    H: FnMut(f64) -> f64,
{
    assert!(step != 0.0 && step.is_finite(), "step must be nonzero");
    let mut evals = 1;
    let f0 = h(s0);
    if f0.abs() <= tol {
        return Ok((s0, evals));
    }
    let (mut a, mut fa) = (s0, f0);
    let mut len = step;
    let mut bracket = None;
    for _ in 0..expand_cap {
        let b = s0 + len;
        let fb = h(b);
        evals += 1;
        if fb.abs() <= tol {
            return Ok((b, evals));
        }
        if fb.is_finite() && fb.signum() != fa.signum() {
            bracket = Some((b, fb));
            break;
        }
        if fb.is_finite() {
            a = b;
            fa = fb;
        }
        len *= 2.0;
    }
    let Some((mut b, mut fb)) = bracket else {
        return Err(Error::NoBracket {
            expansions: expand_cap,
        });
    };

    // Illinois regula falsi; falls back to bisection when the bracket stalls.
    let mut side = 0i8;
    let mut width = (b - a).abs();
    loop {
        let mut s = (a * fb - b * fa) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        if !(s > lo && s < hi) {
            s = 0.5 * (a + b);
        }
        let fs = h(s);
        evals += 1;
        if fs.abs() <= tol || fs == 0.0 {
            return Ok((s, evals));
        }
        if fs.signum() == fb.signum() {
            b = s;
            fb = fs;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = s;
            fa = fs;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        let new_width = (b - a).abs();
        if new_width > 0.5 * width {
            // Stalled: force a bisection step.
            let m = 0.5 * (a + b);
            let fm = h(m);
            evals += 1;
            if fm.abs() <= tol || fm == 0.0 {
                return Ok((m, evals));
            }
            if fm.signum() == fb.signum() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            side = 0;
        }
        width = (b - a).abs();
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if width <= 4.0 * f64::EPSILON * scale {
            // Bracket exhausted: return the endpoint with the smaller residual.
            return Ok(if fa.abs() <= fb.abs() {
                (a, evals)
            } else {
                (b, evals)
            });
        }
    }
}
