//! Comparison steppers without the discrete gradient dissipation guarantee.

use super::StepOutcome;
use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::functionals::{FunctionalModel, ModelKind};
use crate::solvers::{cg_solve, FnOperator};

/// Explicit Euler: `x − τ ∇V(x)`.
pub fn euler_step<E: Energy + ?Sized>(energy: &E, x: &[f64], tau: f64) -> Vec<f64> {
    let g = energy.gradient(x);
    x.iter().zip(&g).map(|(a, b)| a - tau * b).collect()
}

/// Semi-implicit lagged diffusivity step. Solves
///
/// ```text
/// (u′ − u)/τ + ΔxΔy [ 𝟙(u′ − u₀) + α Dᵀ(ω(u) D u′) ] = 0,   ω = 2ψ'(|Du|²)
/// ```
///
/// by CG, with `𝟙` the fidelity indicator. With `fixed_point` the `1/τ` term
/// is dropped, which is the plain lagged fixed-point iteration.
pub fn lagged_diffusivity_step(
    model: &FunctionalModel,
    u: &[f64],
    tau: f64,
    cg_tol: f64,
    fixed_point: bool,
) -> Result<StepOutcome> {
    if !matches!(model.kind(), ModelKind::DenoiseTv | ModelKind::InpaintTv) {
        return Err(Error::Unsupported(format!(
            "lagged diffusivity is implemented for the denoising and inpainting models, not {:?}",
            model.kind()
        )));
    }
    if !fixed_point && !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {tau}"
        )));
    }
    let n = u.len();
    let (dx, dy) = model.data().spacing();
    let cell = dx * dy;
    let alpha = model.alpha();
    let inv_tau = if fixed_point { 0.0 } else { 1.0 / tau };
    let omega = model.diffusivity(u);
    let u0 = model.data().as_slice();
    let rhs: Vec<f64> = (0..n)
        .map(|k| inv_tau * u[k] + cell * model.fit_weight(k) * u0[k])
        .collect();
    let op = FnOperator::new(n, |v: &[f64], out: &mut [f64]| {
        model.weighted_laplacian(&omega, v, out);
        for k in 0..n {
            out[k] = alpha * out[k] + (inv_tau + cell * model.fit_weight(k)) * v[k];
        }
    });
    let sol = cg_solve(&op, &rhs, u, cg_tol, 20 * n.max(50));
    if !sol.converged {
        return Err(Error::CgNotConverged {
            iters: sol.iters,
            residual: sol.residual_norm,
        });
    }
    Ok(StepOutcome {
        x: sol.x,
        inner_iters: sol.iters,
        tau,
    })
}
