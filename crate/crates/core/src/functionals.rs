//! Discretized restoration energies.
//!
//! Every model has the form `V(u) = fit(u) + α·reg(u)` where the regularizer is
//! built from the smoothed total variation
//!
//! ```text
//! J(u) = Δx Δy Σ_ij ψ((D^x_ij u)² + (D^y_ij u)²),   ψ(t) = (t + β)^{p/2}
//! ```
//!
//! with the backward differences of [`crate::grid`]. Gradients are assembled by
//! the chain rule through those stencils, so `∇J = -Δx Δy · div(2ψ'(t) ∇u)`.

use crate::energy::{CoordinateModel, Energy, FullCoordinates};
use crate::error::{Error, Result};
use crate::grid::{divergence_into, Convolver, ImageGrid, Kernel};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    DenoiseTv,
    DeblurTv,
    InpaintTv,
    MultichannelTv2,
    TvP,
}

impl ModelKind {
    /// Models whose fidelity term is pixel-local, so coordinate updates are cheap.
    pub fn is_local(self) -> bool {
        !matches!(self, ModelKind::DeblurTv)
    }
}

/// Inpainting domain: `true` marks a pixel with no data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    nx: usize,
    ny: usize,
    inside: Vec<bool>,
}

impl Mask {
    pub fn new(nx: usize, ny: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != nx * ny {
            return Err(Error::Shape(format!(
                "mask {nx}x{ny} needs {} entries, got {}",
                nx * ny,
                inside.len()
            )));
        }
        Ok(Self { nx, ny, inside })
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut inside = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                inside.push(f(i, j));
            }
        }
        Self { nx, ny, inside }
    }

    pub fn empty(nx: usize, ny: usize) -> Self {
        Self::from_fn(nx, ny, |_, _| false)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn is_inside(&self, k: usize) -> bool {
        self.inside[k]
    }

    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }
}

/// Fidelity and regularization parts of an energy value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub fit: f64,
    pub reg: f64,
    pub total: f64,
}

/// One of the restoration energies, bound to its data image.
#[derive(Clone, Debug)]
pub struct FunctionalModel {
    kind: ModelKind,
    alpha: f64,
    beta: f64,
    exponent: f64,
    data: ImageGrid,
    kernel: Option<Kernel>,
    conv: Option<Convolver>,
    mask: Option<Mask>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl FunctionalModel {
    fn build(
        kind: ModelKind,
        data: ImageGrid,
        alpha: f64,
        beta: f64,
        exponent: f64,
        kernel: Option<Kernel>,
        mask: Option<Mask>,
    ) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        match kind {
            ModelKind::TvP if !(exponent > 0.0 && exponent < 1.0) => {
                return Err(Error::InvalidParameter(format!(
                    "TV^p exponent must lie in (0, 1), got {exponent}"
                )))
            }
            ModelKind::MultichannelTv2 if data.channels() < 2 => {
                return Err(Error::Shape(format!(
                    "multichannel model needs at least 2 channels, got {}",
                    data.channels()
                )))
            }
            ModelKind::DenoiseTv | ModelKind::DeblurTv | ModelKind::InpaintTv | ModelKind::TvP
                if data.channels() != 1 =>
            {
                return Err(Error::Shape(format!(
                    "{kind:?} works on single-channel images, got {} channels",
                    data.channels()
                )))
            }
            _ => {}
        }
        let conv = match &kernel {
            Some(k) => Some(Convolver::new(data.nx(), data.ny(), k)?),
            None => None,
        };
        if let Some(m) = &mask {
            if m.shape() != (data.nx(), data.ny()) {
                return Err(Error::Shape(format!(
                    "mask is {:?} but image is {}x{}",
                    m.shape(),
                    data.nx(),
                    data.ny()
                )));
            }
        }
        Ok(Self {
            kind,
            alpha,
            beta,
            exponent,
            data,
            kernel,
            conv,
            mask,
        })
    }

    /// `½ΔxΔy Σ (u − u₀)² + α J(u)`.
    pub fn denoise(data: ImageGrid, alpha: f64, beta: f64) -> Result<Self> {
        Self::build(ModelKind::DenoiseTv, data, alpha, beta, 1.0, None, None)
    }

    /// `½ΔxΔy Σ (K u − u₀)² + α J(u)` with reflective-boundary blur `K`.
    pub fn deblur(data: ImageGrid, kernel: Kernel, alpha: f64, beta: f64) -> Result<Self> {
        if !kernel.is_symmetric() {
            return Err(Error::InvalidParameter(
                "deblurring needs a kernel symmetric along both axes (K must be self-adjoint)"
                    .into(),
            ));
        }
        Self::build(
            ModelKind::DeblurTv,
            data,
            alpha,
            beta,
            1.0,
            Some(kernel),
            None,
        )
    }

    /// Fidelity only outside the inpainting domain `mask`.
    pub fn inpaint(data: ImageGrid, mask: Mask, alpha: f64, beta: f64) -> Result<Self> {
        Self::build(
            ModelKind::InpaintTv,
            data,
            alpha,
            beta,
            1.0,
            None,
            Some(mask),
        )
    }

    /// `½ΔxΔy Σ_c Σ (u_c − u₀_c)² + α (Σ_c J(u_c)²)^{1/2}`.
    pub fn multichannel(data: ImageGrid, alpha: f64, beta: f64) -> Result<Self> {
        Self::build(
            ModelKind::MultichannelTv2,
            data,
            alpha,
            beta,
            1.0,
            None,
            None,
        )
    }

    /// Denoising with the non-convex `ψ(t) = (t + β)^{p/2}`, `0 < p < 1`.
    pub fn tvp(data: ImageGrid, alpha: f64, beta: f64, p: f64) -> Result<Self> {
        Self::build(ModelKind::TvP, data, alpha, beta, p, None, None)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn data(&self) -> &ImageGrid {
        &self.data
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }

    pub fn mask(&self) -> Option<&Mask> {
        self.mask.as_ref()
    }

    /// State vector with the shape of the data.
    pub fn state(&self, values: Vec<f64>) -> Result<ImageGrid> {
        self.data.with_data(values)
    }

    fn check(&self, u: &ImageGrid) -> Result<()> {
        self.data.check_conformable(u)
    }

    pub fn value(&self, u: &ImageGrid) -> Result<EnergyBreakdown> {
        self.check(u)?;
        Ok(self.breakdown(u.as_slice()))
    }

    pub fn gradient(&self, u: &ImageGrid) -> Result<ImageGrid> {
        self.check(u)?;
        let mut g = vec![0.0; u.len()];
        self.gradient_flat(u.as_slice(), &mut g);
        u.with_data(g)
    }

    pub fn hessian_vec(&self, u: &ImageGrid, w: &ImageGrid) -> Result<ImageGrid> {
        self.check(u)?;
        self.check(w)?;
        let mut out = vec![0.0; u.len()];
        self.hvp_flat(u.as_slice(), w.as_slice(), &mut out);
        u.with_data(out)
    }

    /// `value(u with u[pixel] = s) − value(u)`, evaluated from the affected
    /// stencils only. `pixel` is a flat index.
    pub fn local_diff(&self, u: &ImageGrid, pixel: usize, s: f64) -> Result<f64> {
        self.check(u)?;
        if !self.kind.is_local() {
            return Err(Error::Unsupported(
                "local_diff needs a pixel-local fidelity; the deblurring fit is nonlocal".into(),
            ));
        }
        if pixel >= u.len() {
            return Err(Error::InvalidParameter(format!(
                "pixel {pixel} out of range for {} values",
                u.len()
            )));
        }
        let mut lc = LocalCoordinates::new(self, u.as_slice());
        Ok(lc.diff(u.as_slice(), pixel, s))
    }

    /// Multichannel weights `c_i[u] = J(u_i) / (Σ_k J(u_k)²)^{1/2}`.
    pub fn channel_weights(&self, u: &ImageGrid) -> Result<Vec<f64>> {
        self.check(u)?;
        let js = self.channel_tvs(u.as_slice());
        let s = js.iter().map(|j| j * j).sum::<f64>().sqrt();
        Ok(js.iter().map(|j| j / s).collect())
    }

    // ---- stencil kernels on one channel slice ----

    fn dims(&self) -> (usize, usize, f64, f64) {
        let (dx, dy) = self.data.spacing();
        (self.data.nx(), self.data.ny(), dx, dy)
    }

    fn cell(&self) -> f64 {
        let (dx, dy) = self.data.spacing();
        dx * dy
    }

    #[inline]
    fn psi(&self, t: f64) -> f64 {
        if self.exponent == 1.0 {
            (t + self.beta).sqrt()
        } else {
            (t + self.beta).powf(0.5 * self.exponent)
        }
    }

    #[inline]
    fn dpsi(&self, t: f64) -> f64 {
        if self.exponent == 1.0 {
            0.5 / (t + self.beta).sqrt()
        } else {
            0.5 * self.exponent * (t + self.beta).powf(0.5 * self.exponent - 1.0)
        }
    }

    #[inline]
    fn d2psi(&self, t: f64) -> f64 {
        let h = 0.5 * self.exponent;
        h * (h - 1.0) * (t + self.beta).powf(h - 2.0)
    }

    /// `ψ(t₀ + δ) − ψ(t₀)` without cancellation.
    #[inline]
    fn psi_diff(&self, t0: f64, delta: f64) -> f64 {
        let base = t0 + self.beta;
        if self.exponent == 1.0 {
            delta / ((base + delta).sqrt() + base.sqrt())
        } else {
            let h = 0.5 * self.exponent;
            base.powf(h) * (h * (delta / base).ln_1p()).exp_m1()
        }
    }

    /// Backward differences `(a, b)` at flat index `k` of a channel slice.
    #[inline]
    fn stencil(&self, u: &[f64], k: usize) -> (f64, f64) {
        let (nx, _, dx, dy) = self.dims();
        let i = k % nx;
        let a = if i > 0 { (u[k] - u[k - 1]) / dx } else { 0.0 };
        let b = if k >= nx {
            (u[k] - u[k - nx]) / dy
        } else {
            0.0
        };
        (a, b)
    }

    fn tv_channel(&self, u: &[f64]) -> f64 {
        let s = par::sum_by(u.len(), |k| {
            let (a, b) = self.stencil(u, k);
            self.psi(a * a + b * b)
        });
        self.cell() * s
    }

    fn channel_tvs(&self, u: &[f64]) -> Vec<f64> {
        let n = self.data.plane_len();
        u.chunks(n).map(|c| self.tv_channel(c)).collect()
    }

    /// `out += scale · ∇J(u)` for one channel.
    fn tv_grad_channel(&self, u: &[f64], scale: f64, out: &mut [f64]) {
        let (nx, ny, dx, dy) = self.dims();
        let n = u.len();
        let mut px = vec![0.0; n];
        let mut py = vec![0.0; n];
        par::for_each_chunk_mut(&mut px, nx, |j, col| {
            for (i, v) in col.iter_mut().enumerate() {
                let (a, b) = self.stencil(u, j * nx + i);
                *v = 2.0 * self.dpsi(a * a + b * b) * a;
            }
        });
        par::for_each_chunk_mut(&mut py, nx, |j, col| {
            for (i, v) in col.iter_mut().enumerate() {
                let (a, b) = self.stencil(u, j * nx + i);
                *v = 2.0 * self.dpsi(a * a + b * b) * b;
            }
        });
        let mut div = vec![0.0; n];
        divergence_into(&px, &py, nx, ny, dx, dy, &mut div);
        let f = -scale * self.cell();
        par::axpy(f, &div, out);
    }

    /// `out += scale · ∇²J(u) w` for one channel.
    fn tv_hvp_channel(&self, u: &[f64], w: &[f64], scale: f64, out: &mut [f64]) {
        let (nx, ny, dx, dy) = self.dims();
        let n = u.len();
        let mut qx = vec![0.0; n];
        let mut qy = vec![0.0; n];
        for k in 0..n {
            let (a, b) = self.stencil(u, k);
            let (wa, wb) = self.stencil(w, k);
            let t = a * a + b * b;
            let d1 = 2.0 * self.dpsi(t);
            let d2 = 4.0 * self.d2psi(t) * (a * wa + b * wb);
            qx[k] = d1 * wa + d2 * a;
            qy[k] = d1 * wb + d2 * b;
        }
        let mut div = vec![0.0; n];
        divergence_into(&qx, &qy, nx, ny, dx, dy, &mut div);
        par::axpy(-scale * self.cell(), &div, out);
    }

    /// `J(y) − J(x)` for one channel, summed term by term.
    fn tv_diff_channel(&self, x: &[f64], y: &[f64]) -> f64 {
        let (nx, _, dx, dy) = self.dims();
        let s = par::sum_by(x.len(), |k| {
            let i = k % nx;
            let (ax, bx) = self.stencil(x, k);
            let (ay, by) = self.stencil(y, k);
            let da = if i > 0 {
                ((y[k] - x[k]) - (y[k - 1] - x[k - 1])) / dx
            } else {
                0.0
            };
            let db = if k >= nx {
                ((y[k] - x[k]) - (y[k - nx] - x[k - nx])) / dy
            } else {
                0.0
            };
            let dt = da * (ax + ay) + db * (bx + by);
            self.psi_diff(ax * ax + bx * bx, dt)
        });
        self.cell() * s
    }

    /// Change of `J` on one channel when pixel `k` moves from `u[k]` to `s`.
    fn tv_local_diff(&self, u: &[f64], k: usize, s: f64) -> f64 {
        let (nx, ny, dx, dy) = self.dims();
        let (i, j) = (k % nx, k / nx);
        let d = s - u[k];
        if d == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        // own stencil: both differences pick up +d
        {
            let (a, b) = self.stencil(u, k);
            let da = if i > 0 { d / dx } else { 0.0 };
            let db = if j > 0 { d / dy } else { 0.0 };
            let dt = da * (2.0 * a + da) + db * (2.0 * b + db);
            acc += self.psi_diff(a * a + b * b, dt);
        }
        if i + 1 < nx {
            let (a, b) = self.stencil(u, k + 1);
            let da = -d / dx;
            acc += self.psi_diff(a * a + b * b, da * (2.0 * a + da));
        }
        if j + 1 < ny {
            let (a, b) = self.stencil(u, k + nx);
            let db = -d / dy;
            acc += self.psi_diff(a * a + b * b, db * (2.0 * b + db));
        }
        self.cell() * acc
    }

    /// `∂J/∂u_k` on one channel from the three stencils touching `k`.
    fn tv_local_partial(&self, u: &[f64], k: usize) -> f64 {
        let (nx, ny, dx, dy) = self.dims();
        let (i, j) = (k % nx, k / nx);
        let mut acc = 0.0;
        let (a, b) = self.stencil(u, k);
        let w = 2.0 * self.dpsi(a * a + b * b);
        if i > 0 {
            acc += w * a / dx;
        }
        if j > 0 {
            acc += w * b / dy;
        }
        if i + 1 < nx {
            let (a, b) = self.stencil(u, k + 1);
            acc -= 2.0 * self.dpsi(a * a + b * b) * a / dx;
        }
        if j + 1 < ny {
            let (a, b) = self.stencil(u, k + nx);
            acc -= 2.0 * self.dpsi(a * a + b * b) * b / dy;
        }
        self.cell() * acc
    }

    /// Diffusivities `2ψ'(t)` of the lagged linearization at `u` (one channel).
    pub(crate) fn diffusivity(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|k| {
                let (a, b) = self.stencil(u, k);
                2.0 * self.dpsi(a * a + b * b)
            })
            .collect()
    }

    /// `out = ΔxΔy · Dᵀ(ω ⊙ D v)` on one channel.
    pub(crate) fn weighted_laplacian(&self, omega: &[f64], v: &[f64], out: &mut [f64]) {
        let (nx, ny, dx, dy) = self.dims();
        let n = v.len();
        let mut qx = vec![0.0; n];
        let mut qy = vec![0.0; n];
        for k in 0..n {
            let (a, b) = self.stencil(v, k);
            qx[k] = omega[k] * a;
            qy[k] = omega[k] * b;
        }
        divergence_into(&qx, &qy, nx, ny, dx, dy, out);
        let c = -self.cell();
        for o in out.iter_mut() {
            *o *= c;
        }
    }

    /// Fidelity weight of flat pixel `k` (0 inside the inpainting domain).
    #[inline]
    pub(crate) fn fit_weight(&self, k: usize) -> f64 {
        match &self.mask {
            Some(m) if m.is_inside(k % self.data.plane_len()) => 0.0,
            _ => 1.0,
        }
    }

    // ---- whole-state evaluations ----

    fn blur(&self, u: &[f64]) -> Vec<f64> {
        self.conv
            .as_ref()
            .expect("deblurring model carries a convolver")
            .apply(u)
    }

    fn fit_value(&self, u: &[f64]) -> f64 {
        let u0 = self.data.as_slice();
        let s = match self.kind {
            ModelKind::DeblurTv => {
                let ku = self.blur(u);
                par::sum_by(u.len(), |k| (ku[k] - u0[k]).powi(2))
            }
            _ => par::sum_by(u.len(), |k| self.fit_weight(k) * (u[k] - u0[k]).powi(2)),
        };
        0.5 * self.cell() * s
    }

    fn breakdown(&self, u: &[f64]) -> EnergyBreakdown {
        let fit = self.fit_value(u);
        let reg = match self.kind {
            ModelKind::MultichannelTv2 => {
                self.alpha
                    * self
                        .channel_tvs(u)
                        .iter()
                        .map(|j| j * j)
                        .sum::<f64>()
                        .sqrt()
            }
            _ => self.alpha * self.tv_channel(u),
        };
        EnergyBreakdown {
            fit,
            reg,
            total: fit + reg,
        }
    }

    fn gradient_flat(&self, u: &[f64], out: &mut [f64]) {
        let u0 = self.data.as_slice();
        let cell = self.cell();
        match self.kind {
            ModelKind::DeblurTv => {
                let ku = self.blur(u);
                let r: Vec<f64> = ku.iter().zip(u0).map(|(a, b)| a - b).collect();
                let kr = self.blur(&r);
                par::fill_with(out, |k| cell * kr[k]);
            }
            _ => par::fill_with(out, |k| cell * self.fit_weight(k) * (u[k] - u0[k])),
        }
        match self.kind {
            ModelKind::MultichannelTv2 => {
                let n = self.data.plane_len();
                let js = self.channel_tvs(u);
                let s = js.iter().map(|j| j * j).sum::<f64>().sqrt();
                for (c, jc) in js.iter().enumerate() {
                    let r = c * n..(c + 1) * n;
                    self.tv_grad_channel(&u[r.clone()], self.alpha * jc / s, &mut out[r]);
                }
            }
            _ => self.tv_grad_channel(u, self.alpha, out),
        }
    }

    fn hvp_flat(&self, u: &[f64], w: &[f64], out: &mut [f64]) {
        let cell = self.cell();
        match self.kind {
            ModelKind::DeblurTv => {
                let kkw = self.blur(&self.blur(w));
                par::fill_with(out, |k| cell * kkw[k]);
            }
            _ => par::fill_with(out, |k| cell * self.fit_weight(k) * w[k]),
        }
        match self.kind {
            ModelKind::MultichannelTv2 => {
                let n = self.data.plane_len();
                let p = self.data.channels();
                let js = self.channel_tvs(u);
                let s = js.iter().map(|j| j * j).sum::<f64>().sqrt();
                let grads: Vec<Vec<f64>> = (0..p)
                    .map(|c| {
                        let mut g = vec![0.0; n];
                        self.tv_grad_channel(&u[c * n..(c + 1) * n], 1.0, &mut g);
                        g
                    })
                    .collect();
                let a: Vec<f64> = (0..p)
                    .map(|c| par::dot(&grads[c], &w[c * n..(c + 1) * n]))
                    .collect();
                let ja: f64 = js.iter().zip(&a).map(|(j, a)| j * a).sum();
                for c in 0..p {
                    let r = c * n..(c + 1) * n;
                    self.tv_hvp_channel(
                        &u[r.clone()],
                        &w[r.clone()],
                        self.alpha * js[c] / s,
                        &mut out[r.clone()],
                    );
                    let coef = self.alpha * (a[c] / s - js[c] * ja / (s * s * s));
                    par::axpy(coef, &grads[c], &mut out[r]);
                }
            }
            _ => self.tv_hvp_channel(u, w, self.alpha, out),
        }
    }

    fn value_diff_flat(&self, x: &[f64], y: &[f64]) -> f64 {
        let u0 = self.data.as_slice();
        let half_cell = 0.5 * self.cell();
        let fit = match self.kind {
            ModelKind::DeblurTv => {
                let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
                let kd = self.blur(&d);
                let kx = self.blur(x);
                half_cell * par::sum_by(x.len(), |k| kd[k] * (kd[k] + 2.0 * (kx[k] - u0[k])))
            }
            _ => {
                half_cell
                    * par::sum_by(x.len(), |k| {
                        self.fit_weight(k) * (y[k] - x[k]) * (y[k] + x[k] - 2.0 * u0[k])
                    })
            }
        };
        let reg = match self.kind {
            ModelKind::MultichannelTv2 => {
                let n = self.data.plane_len();
                let jx = self.channel_tvs(x);
                let mut d2 = 0.0;
                let mut sy2 = 0.0;
                for (c, j) in jx.iter().enumerate() {
                    let r = c * n..(c + 1) * n;
                    let dj = self.tv_diff_channel(&x[r.clone()], &y[r]);
                    d2 += dj * (2.0 * j + dj);
                    sy2 += (j + dj) * (j + dj);
                }
                let sx = jx.iter().map(|j| j * j).sum::<f64>().sqrt();
                self.alpha * d2 / (sx + sy2.sqrt())
            }
            _ => self.alpha * self.tv_diff_channel(x, y),
        };
        fit + reg
    }
}

/// Smoothed total variation `ΔxΔy Σ ((D^x u)² + (D^y u)² + β)^{p/2}` of a
/// single-channel grid.
pub fn smoothed_tv(u: &ImageGrid, beta: f64, exponent: f64) -> Result<f64> {
    check_positive("beta", beta)?;
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent must lie in (0, 1], got {exponent}"
        )));
    }
    if u.channels() != 1 {
        return Err(Error::Shape("smoothed_tv expects a single channel".into()));
    }
    let m = FunctionalModel {
        kind: ModelKind::TvP,
        alpha: 1.0,
        beta,
        exponent,
        data: u.clone(),
        kernel: None,
        conv: None,
        mask: None,
    };
    Ok(m.tv_channel(u.as_slice()))
}

impl Energy for FunctionalModel {
    fn dim(&self) -> usize {
        self.data.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.breakdown(x).total
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.gradient_flat(x, out);
    }

    fn hessian_vec_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.hvp_flat(x, w, out);
    }

    fn value_diff(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value_diff_flat(x, y)
    }

    fn coordinates<'a>(&'a self, x: &[f64]) -> Box<dyn CoordinateModel + 'a> {
        if self.kind.is_local() {
            Box::new(LocalCoordinates::new(self, x))
        } else {
            Box::new(FullCoordinates::new(self, x))
        }
    }
}

/// Stencil-local coordinate evaluator. Tracks the per-channel `J` values for
/// the multichannel ℓ² combination.
struct LocalCoordinates<'a> {
    model: &'a FunctionalModel,
    tvs: Vec<f64>,
}

impl<'a> LocalCoordinates<'a> {
    fn new(model: &'a FunctionalModel, x: &[f64]) -> Self {
        let tvs = if model.kind == ModelKind::MultichannelTv2 {
            model.channel_tvs(x)
        } else {
            Vec::new()
        };
        Self { model, tvs }
    }

    fn split(&self, k: usize) -> (usize, usize) {
        let n = self.model.data.plane_len();
        (k / n, k % n)
    }
}

impl CoordinateModel for LocalCoordinates<'_> {
    fn diff(&mut self, x: &[f64], k: usize, s: f64) -> f64 {
        let m = self.model;
        let n = m.data.plane_len();
        let (c, kk) = self.split(k);
        let u0 = m.data.as_slice()[k];
        let fit = 0.5 * m.cell() * m.fit_weight(k) * (s - x[k]) * (s + x[k] - 2.0 * u0);
        let dj = m.tv_local_diff(&x[c * n..(c + 1) * n], kk, s);
        let reg = if m.kind == ModelKind::MultichannelTv2 {
            let s2: f64 = self.tvs.iter().map(|j| j * j).sum();
            let d2 = dj * (2.0 * self.tvs[c] + dj);
            m.alpha * d2 / (s2.sqrt() + (s2 + d2).max(0.0).sqrt())
        } else {
            m.alpha * dj
        };
        fit + reg
    }

    fn partial(&mut self, x: &[f64], k: usize) -> f64 {
        let m = self.model;
        let n = m.data.plane_len();
        let (c, kk) = self.split(k);
        let u0 = m.data.as_slice()[k];
        let fit = m.cell() * m.fit_weight(k) * (x[k] - u0);
        let mut reg = m.alpha * m.tv_local_partial(&x[c * n..(c + 1) * n], kk);
        if m.kind == ModelKind::MultichannelTv2 {
            let s = self.tvs.iter().map(|j| j * j).sum::<f64>().sqrt();
            reg *= self.tvs[c] / s;
        }
        fit + reg
    }

    fn commit(&mut self, x: &[f64], k: usize, old: f64) {
        if self.model.kind == ModelKind::MultichannelTv2 {
            let n = self.model.data.plane_len();
            let (c, kk) = self.split(k);
            let back = self.model.tv_local_diff(&x[c * n..(c + 1) * n], kk, old);
            self.tvs[c] -= back;
        }
    }
}
