//! Discrete gradients and the steppers built on them.
//!
//! A discrete gradient `∇̄V(x, x′)` is continuous, equals `∇V(x)` on the
//! diagonal and satisfies the secant identity
//! `⟨∇̄V(x, x′), x′ − x⟩ = V(x′) − V(x)`. The implicit update
//! `x′ = x − τ ∇̄V(x, x′)` then decreases `V` by exactly `τ‖∇̄V‖²` for every
//! `τ > 0`.

mod baselines;
mod controller;
mod flow;
mod implicit;
mod itoh_abe;

pub use baselines::{euler_step, lagged_diffusivity_step};
pub use controller::{adaptive_controller_step, controlled_step, StepController, StepMode};
pub use flow::{
    run_flow, DgStepper, EulerStepper, FlowResult, FlowTrace, LaggedStepper, Method, StepOptions,
    Stepper, StopCriteria, Termination, TraceRow,
};
pub use implicit::{dg_step_implicit, ImplicitOptions};
pub use itoh_abe::{itoh_abe_step, itoh_abe_sweep, ItohAbeOutcome};

use crate::energy::Energy;
use crate::par;

pub const DEFAULT_STEP_TOL: f64 = 1e-8;
pub const DEFAULT_GRAD_TOL: f64 = 1e-6;
pub const DEFAULT_TAU_MIN: f64 = 1e-7;
pub const DEFAULT_TAU_MAX: f64 = 1e3;
pub const DEFAULT_QUADRATURE_ORDER: usize = 4;

/// Which discrete gradient to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Midpoint gradient plus a rank-one secant correction.
    Gonzalez,
    /// Gauss–Legendre average of `∇V` along the segment, plus the same
    /// secant correction so the identity survives quadrature error.
    MeanValue { order: usize },
    /// Coordinate-sequential divided differences.
    ItohAbe,
}

/// Result of one step of any stepper.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub x: Vec<f64>,
    /// Newton, CG or scalar-root evaluations spent on the step.
    pub inner_iters: usize,
    /// Step size actually taken.
    pub tau: f64,
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // Newton on P_n from the standard Chebyshev-like initial guess.
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out.push((0.5 * (1.0 - z), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub(crate) fn quadrature(scheme: Scheme) -> Vec<(f64, f64)> {
    match scheme {
        Scheme::Gonzalez => vec![(0.5, 1.0)],
        Scheme::MeanValue { order } => gauss_legendre(order),
        Scheme::ItohAbe => panic!("the Itoh–Abe gradient is not a quadrature rule"),
    }
}

/// `‖d‖² ≤ ε(1 + ‖x‖²)`: the secant correction is 0/0 and is dropped.
pub(crate) fn near_diagonal(x: &[f64], d: &[f64]) -> bool {
    par::dot(d, d) <= f64::EPSILON * (1.0 + par::dot(x, x))
}

/// `Σ w_k ∇V(x + s_k d)` over the quadrature nodes.
pub(crate) fn averaged_gradient<E: Energy + ?Sized>(
    e: &E,
    x: &[f64],
    d: &[f64],
    nodes: &[(f64, f64)],
) -> Vec<f64> {
    let n = x.len();
    let mut acc = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut g = vec![0.0; n];
    for &(s, w) in nodes {
        for k in 0..n {
            z[k] = x[k] + s * d[k];
        }
        e.gradient_into(&z, &mut g);
        par::axpy(w, &g, &mut acc);
    }
    acc
}

/// Secant coefficient `(V(y) − V(x) − ⟨g, d⟩)/‖d‖²`, or 0 near the diagonal.
pub(crate) fn secant_coefficient<E: Energy + ?Sized>(
    e: &E,
    x: &[f64],
    y: &[f64],
    d: &[f64],
    g: &[f64],
) -> f64 {
    if near_diagonal(x, d) {
        return 0.0;
    }
    (e.value_diff(x, y) - par::dot(g, d)) / par::dot(d, d)
}

fn corrected_gradient<E: Energy + ?Sized>(
    e: &E,
    x: &[f64],
    y: &[f64],
    nodes: &[(f64, f64)],
) -> Vec<f64> {
    let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let mut g = averaged_gradient(e, x, &d, nodes);
    let c = secant_coefficient(e, x, y, &d, &g);
    if c != 0.0 {
        par::axpy(c, &d, &mut g);
    }
    g
}

/// Gonzalez (midpoint) discrete gradient.
pub fn gonzalez_dg<E: Energy + ?Sized>(e: &E, x: &[f64], y: &[f64]) -> Vec<f64> {
    corrected_gradient(e, x, y, &quadrature(Scheme::Gonzalez))
}

/// Mean-value discrete gradient with an order-`q` Gauss–Legendre rule.
pub fn mean_value_dg<E: Energy + ?Sized>(e: &E, x: &[f64], y: &[f64], q: usize) -> Vec<f64> {
    corrected_gradient(e, x, y, &gauss_legendre(q))
}

/// Itoh–Abe discrete gradient. Coordinates with `y_i = x_i` take the partial
/// derivative at the intermediate point.
pub fn itoh_abe_dg<E: Energy + ?Sized>(e: &E, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut z = x.to_vec();
    let mut cm = e.coordinates(&z);
    let mut out = vec![0.0; x.len()];
    for i in 0..x.len() {
        let step = y[i] - z[i];
        if step == 0.0 {
            out[i] = cm.partial(&z, i);
        } else {
            out[i] = cm.diff(&z, i, y[i]) / step;
            let old = z[i];
            z[i] = y[i];
            cm.commit(&z, i, old);
        }
    }
    out
}

pub fn discrete_gradient<E: Energy + ?Sized>(
    e: &E,
    scheme: Scheme,
    x: &[f64],
    y: &[f64],
) -> Vec<f64> {
    match scheme {
        Scheme::Gonzalez => gonzalez_dg(e, x, y),
        Scheme::MeanValue { order } => mean_value_dg(e, x, y, order),
        Scheme::ItohAbe => itoh_abe_dg(e, x, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Quadratic;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in 1..=6 {
            let rule = gauss_legendre(q);
            assert_eq!(rule.len(), q);
            assert!((rule.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..2 * q {
                let got: f64 = rule.iter().map(|(s, w)| w * s.powi(deg as i32)).sum();
                assert!(
                    (got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13,
                    "q={q} deg={deg}"
                );
            }
        }
        assert_eq!(gauss_legendre(1), vec![(0.5, 1.0)]);
    }

    #[test]
    fn quadratic_gonzalez_is_midpoint_gradient() {
        let q = Quadratic::new(2, vec![2.0, 1.0, 1.0, 3.0]);
        let x = [0.5, -1.0];
        let y = [1.5, 2.0];
        let g = gonzalez_dg(&q, &x, &y);
        let mid = q.gradient(&[1.0, 0.5]);
        for k in 0..2 {
            assert!((g[k] - mid[k]).abs() < 1e-14);
        }
        let d = [1.0, 3.0];
        assert!(secant_coefficient(&q, &x, &y, &d, &mid).abs() < 1e-15);
    }

    #[test]
    fn diagonal_returns_gradient() {
        let q = Quadratic::new(2, vec![2.0, 1.0, 1.0, 3.0]);
        let x = [0.5, -1.0];
        let g = q.gradient(&x);
        for scheme in [
            Scheme::Gonzalez,
            Scheme::MeanValue { order: 3 },
            Scheme::ItohAbe,
        ] {
            let dg = discrete_gradient(&q, scheme, &x, &x);
            for k in 0..2 {
                assert!((dg[k] - g[k]).abs() < 1e-15, "{scheme:?}");
            }
        }
    }
}
