//! Itoh–Abe discrete gradient steps.
//!
//! With the coordinate-sequential discrete gradient the implicit update
//! decouples: coordinate `i` solves `(s − x_i)² + τ Δ_i(s) = 0`, where `Δ_i(s)`
//! is the energy change from setting coordinate `i` to `s` after the earlier
//! coordinates have moved. Dividing out the trivial root `s = x_i` leaves
//! `h(s) = (s − x_i) + τ Δ_i(s)/(s − x_i)`, with `h(x_i) = τ ∂_iV`.

use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::solvers::scalar_root;

/// Bracket expansions per coordinate before the coordinate is skipped.
const EXPAND_CAP: usize = 60;

#[derive(Clone, Debug)]
pub struct ItohAbeOutcome {
    pub x: Vec<f64>,
    /// Scalar function evaluations over the sweep.
    pub evals: usize,
    /// Coordinates whose root search failed and were left unchanged.
    pub failures: usize,
    /// `Σ (s_i − x_i)² / τ` over the accepted coordinates.
    pub decrease: f64,
    /// Sum of the per-coordinate energy changes.
    pub energy_change: f64,
}

/// One sweep over all coordinates in storage order. `on_update(i, old, new, ΔV)`
/// is called after every accepted coordinate.
pub fn itoh_abe_sweep<E, F>(
    energy: &E,
    x: &[f64],
    tau: f64,
    tol: f64,
    mut on_update: F,
) -> Result<ItohAbeOutcome>
where
    E: Energy + ?Sized,
    F: FnMut(usize, f64, f64, f64),
{
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {tau}"
        )));
    }
    let mut y = x.to_vec();
    let mut cm = energy.coordinates(&y);
    let mut out = ItohAbeOutcome {
        x: Vec::new(),
        evals: 0,
        failures: 0,
        decrease: 0.0,
        energy_change: 0.0,
    };
    for i in 0..y.len() {
        let xi = y[i];
        let g = cm.partial(&y, i);
        let move_scale = tau * g.abs();
        // A stationary coordinate, or a move below roundoff of x_i.
        if !(move_scale > 1e-6 * tol * (1.0 + xi.abs())) {
            continue;
        }
        let first = -g.signum() * move_scale / 64.0;
        let root = {
            let y_ref = &y;
            let cm_ref = &mut cm;
            scalar_root(
                |s| {
                    if s == xi {
                        tau * g
                    } else {
                        (s - xi) + tau * cm_ref.diff(y_ref, i, s) / (s - xi)
                    }
                },
                xi,
                first,
                tol * move_scale,
                EXPAND_CAP,
            )
        };
        let s = match root {
            Ok((s, evals)) => {
                out.evals += evals;
                s
            }
            Err(Error::NoBracket { .. }) => {
                out.evals += EXPAND_CAP + 1;
                out.failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let delta = cm.diff(&y, i, s);
        out.evals += 1;
        if !(delta < 0.0) {
            out.failures += 1;
            continue;
        }
        y[i] = s;
        cm.commit(&y, i, xi);
        out.decrease += (s - xi) * (s - xi) / tau;
        out.energy_change += delta;
        on_update(i, xi, s, delta);
    }
    out.x = y;
    Ok(out)
}

/// One Itoh–Abe step with step size `tau`.
pub fn itoh_abe_step<E: Energy + ?Sized>(
    energy: &E,
    x: &[f64],
    tau: f64,
    tol: f64,
) -> Result<ItohAbeOutcome> {
    itoh_abe_sweep(energy, x, tau, tol, |_, _, _, _| {})
}
