//! Image container, Neumann finite differences, and reflective FFT convolution.
//!
//! Pixel `(i, j)` of channel `c` lives at flat index `c·nx·ny + j·nx + i`: the
//! first index runs fastest, so the vector walks the columns of the
//! `nx × ny` array one after another and channels follow as contiguous blocks.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A real scalar field on an `nx × ny` lattice with `channels` components.
#[derive(Clone, PartialEq)]
pub struct ImageGrid {
    nx: usize,
    ny: usize,
    channels: usize,
    dx: f64,
    dy: f64,
    data: Vec<f64>,
}

impl fmt::Debug for ImageGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageGrid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("channels", &self.channels)
            .field("dx", &self.dx)
            .field("dy", &self.dy)
            .finish_non_exhaustive()
    }
}

impl ImageGrid {
    /// All-zero grid with unit spacing.
    pub fn zeros(nx: usize, ny: usize, channels: usize) -> Result<Self> {
        Self::from_vec(nx, ny, channels, vec![0.0; nx * ny * channels])
    }

    /// Wraps a flat vector in the column-major, channel-blocked layout.
    pub fn from_vec(nx: usize, ny: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "grid dimensions must be positive, got {nx}x{ny}x{channels}"
            )));
        }
        if data.len() != nx * ny * channels {
            return Err(Error::Shape(format!(
                "expected {} values for a {nx}x{ny}x{channels} grid, got {}",
                nx * ny * channels,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at flat index {k}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            channels,
            dx: 1.0,
            dy: 1.0,
            data,
        })
    }

    /// Single-channel grid with `u[i, j] = f(i, j)`.
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                data.push(f(i, j));
            }
        }
        Self::from_vec(nx, ny, 1, data)
    }

    /// Inverse of [`ImageGrid::flatten`]; identical to [`ImageGrid::from_vec`].
    pub fn unflatten(nx: usize, ny: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_vec(nx, ny, channels, data)
    }

    pub fn with_spacing(mut self, dx: f64, dy: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite() && dy > 0.0 && dy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive and finite, got ({dx}, {dy})"
            )));
        }
        self.dx = dx;
        self.dy = dy;
        Ok(self)
    }

    /// Same shape and spacing, new values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        let g = Self::from_vec(self.nx, self.ny, self.channels, data)?;
        Ok(Self {
            dx: self.dx,
            dy: self.dy,
            ..g
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    /// Number of pixels in one channel.
    pub fn plane_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny && c < self.channels);
        c * self.nx * self.ny + j * self.nx + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.index(i, j, 0)]
    }

    #[inline]
    pub fn get_c(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.index(i, j, c)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        let k = self.index(i, j, c);
        self.data[k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Copy of one channel as a single-channel grid.
    pub fn channel_grid(&self, c: usize) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            channels: 1,
            dx: self.dx,
            dy: self.dy,
            data: self.channel(c).to_vec(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Two grids are conformable iff every shape field matches.
    pub fn conformable(&self, other: &ImageGrid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.channels == other.channels
            && self.dx == other.dx
            && self.dy == other.dy
    }

    pub fn check_conformable(&self, other: &ImageGrid) -> Result<()> {
        if self.conformable(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "grids are not conformable: {}x{}x{} (spacing {}, {}) vs {}x{}x{} (spacing {}, {})",
                self.nx,
                self.ny,
                self.channels,
                self.dx,
                self.dy,
                other.nx,
                other.ny,
                other.channels,
                other.dx,
                other.dy
            )))
        }
    }

    fn require_single_channel(&self, what: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::Shape(format!(
                "{what} expects a single-channel grid, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }
}

/// Backward difference on one channel stored as a column-major `nx × ny` slice.
/// The first row (x) or column (y) is zero: the duplicated ghost equals it.
pub(crate) fn backward_diff_into(
    u: &[f64],
    nx: usize,
    ny: usize,
    h: f64,
    axis: Axis,
    out: &mut [f64],
) {
    debug_assert_eq!(u.len(), nx * ny);
    let inv = 1.0 / h;
    par::for_each_chunk_mut(out, nx, |j, col| {
        let base = j * nx;
        match axis {
            Axis::X => {
                col[0] = 0.0;
                for i in 1..nx {
                    col[i] = (u[base + i] - u[base + i - 1]) * inv;
                }
            }
            Axis::Y => {
                if j == 0 {
                    col.fill(0.0);
                } else {
                    for i in 0..nx {
                        col[i] = (u[base + i] - u[base - nx + i]) * inv;
                    }
                }
            }
        }
    });
}

/// Negative adjoint of the backward differences: forward differences with the
/// boundary terms that make `<D u, q> = -<u, div q>` exact.
pub(crate) fn divergence_into(
    px: &[f64],
    py: &[f64],
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    out: &mut [f64],
) {
    let (ix, iy) = (1.0 / dx, 1.0 / dy);
    par::for_each_chunk_mut(out, nx, |j, col| {
        let base = j * nx;
        for i in 0..nx {
            let k = base + i;
            let fx = if i + 1 < nx { px[k + 1] } else { 0.0 };
            let bx = if i > 0 { px[k] } else { 0.0 };
            let fy = if j + 1 < ny { py[k + nx] } else { 0.0 };
            let by = if j > 0 { py[k] } else { 0.0 };
            col[i] = (fx - bx) * ix + (fy - by) * iy;
        }
    });
}

/// `(u[i,j] - u[i-1,j]) / Δx` (axis x) or `(u[i,j] - u[i,j-1]) / Δy` (axis y),
/// zero on the first row or column.
pub fn backward_diff(u: &ImageGrid, axis: Axis) -> Result<ImageGrid> {
    u.require_single_channel("backward_diff")?;
    let mut out = u.clone();
    let h = match axis {
        Axis::X => u.dx,
        Axis::Y => u.dy,
    };
    backward_diff_into(&u.data, u.nx, u.ny, h, axis, &mut out.data);
    Ok(out)
}

/// Discrete divergence, the negative adjoint of [`backward_diff`].
pub fn divergence_forward(px: &ImageGrid, py: &ImageGrid) -> Result<ImageGrid> {
    px.require_single_channel("divergence_forward")?;
    px.check_conformable(py)?;
    let mut out = px.clone();
    divergence_into(
        &px.data,
        &py.data,
        px.nx,
        px.ny,
        px.dx,
        px.dy,
        &mut out.data,
    );
    Ok(out)
}

/// Plain Euclidean inner product over the flattened vectors.
pub fn inner(u: &ImageGrid, v: &ImageGrid) -> Result<f64> {
    u.check_conformable(v)?;
    Ok(par::dot(&u.data, &v.data))
}

pub fn norm(u: &ImageGrid) -> f64 {
    par::norm(&u.data)
}

/// Convolution kernel with odd extents, stored column-major like [`ImageGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    kx: usize,
    ky: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(kx: usize, ky: usize, weights: Vec<f64>) -> Result<Self> {
        if kx.is_multiple_of(2) || ky.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel extents must be odd, got {kx}x{ky}"
            )));
        }
        if weights.len() != kx * ky {
            return Err(Error::Shape(format!(
                "kernel {kx}x{ky} needs {} weights, got {}",
                kx * ky,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "kernel weights must be finite".into(),
            ));
        }
        Ok(Self { kx, ky, weights })
    }

    /// Uniform `size × size` averaging kernel with weights `1/size²`.
    pub fn box_blur(size: usize) -> Result<Self> {
        let w = 1.0 / (size * size) as f64;
        Self::new(size, size, vec![w; size * size])
    }

    pub fn size(&self) -> (usize, usize) {
        (self.kx, self.ky)
    }

    pub fn center(&self) -> (usize, usize) {
        ((self.kx - 1) / 2, (self.ky - 1) / 2)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.weights[b * self.kx + a]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mirror symmetry along both axes. With reflective boundaries this is
    /// what makes the blur self-adjoint; point symmetry alone is not enough,
    /// because the mirrored copies pick up the axis-flipped kernel.
    pub fn is_symmetric(&self) -> bool {
        (0..self.ky).all(|b| {
            (0..self.kx).all(|a| {
                let v = self.get(a, b);
                v == self.get(self.kx - 1 - a, b) && v == self.get(a, self.ky - 1 - b)
            })
        })
    }
}

/// Precomputed reflective convolution for one image size and kernel.
///
/// The image is mirrored across its far x and y edges into a `2nx × 2ny` tile,
/// circularly convolved with the centred kernel by FFT, and cropped back.
/// Circular wrap of the mirrored tile reproduces the mirror at the near edges
/// too, so the result is a half-sample symmetric (Neumann) extension all round.
#[derive(Clone)]
pub struct Convolver {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Kernel spectrum, stored with the y frequency running fastest.
    spectrum: Vec<Complex64>,
}

impl fmt::Debug for Convolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Convolver")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish_non_exhaustive()
    }
}

impl Convolver {
    pub fn new(nx: usize, ny: usize, kernel: &Kernel) -> Result<Self> {
        if kernel.kx > nx || kernel.ky > ny {
            return Err(Error::Shape(format!(
                "kernel {}x{} larger than image {nx}x{ny}",
                kernel.kx, kernel.ky
            )));
        }
        let (mx, my) = (2 * nx, 2 * ny);
        let mut planner = FftPlanner::<f64>::new();
        let mut conv = Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(mx),
            inv_x: planner.plan_fft_inverse(mx),
            fwd_y: planner.plan_fft_forward(my),
            inv_y: planner.plan_fft_inverse(my),
            spectrum: Vec::new(),
        };
        let mut padded = vec![Complex64::new(0.0, 0.0); mx * my];
        let (cx, cy) = kernel.center();
        for b in 0..kernel.ky {
            for a in 0..kernel.kx {
                let i = (a + mx - cx) % mx;
                let j = (b + my - cy) % my;
                padded[j * mx + i] = Complex64::new(kernel.get(a, b), 0.0);
            }
        }
        conv.spectrum = conv.forward(padded);
        Ok(conv)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// x-fastest buffer in, y-fastest spectrum out.
    fn forward(&self, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        let (mx, my) = (2 * self.nx, 2 * self.ny);
        self.fwd_x.process(&mut buf);
        let mut t = transpose(&buf, mx, my);
        self.fwd_y.process(&mut t);
        t
    }

    fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        let (mx, my) = (2 * self.nx, 2 * self.ny);
        self.inv_y.process(&mut spec);
        let mut buf = transpose(&spec, my, mx);
        self.inv_x.process(&mut buf);
        buf
    }

    /// Blurs one channel slice of length `nx·ny` into `out`.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let (mx, my) = (2 * nx, 2 * ny);
        debug_assert_eq!(u.len(), nx * ny);
        let mut buf = vec![Complex64::new(0.0, 0.0); mx * my];
        for j in 0..my {
            let sj = if j < ny { j } else { my - 1 - j };
            for i in 0..mx {
                let si = if i < nx { i } else { mx - 1 - i };
                buf[j * mx + i] = Complex64::new(u[sj * nx + si], 0.0);
            }
        }
        let mut spec = self.forward(buf);
        for (s, k) in spec.iter_mut().zip(&self.spectrum) {
            *s *= *k;
        }
        let res = self.inverse(spec);
        let scale = 1.0 / (mx * my) as f64;
        for j in 0..ny {
            for i in 0..nx {
                out[j * nx + i] = res[j * mx + i].re * scale;
            }
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }
}

/// `rows × cols` (rows fastest) to `cols × rows`.
fn transpose(a: &[Complex64], fast: usize, slow: usize) -> Vec<Complex64> {
    let mut t = vec![Complex64::new(0.0, 0.0); a.len()];
    for s in 0..slow {
        for f in 0..fast {
            t[f * slow + s] = a[s * fast + f];
        }
    }
    t
}

/// Reflective-boundary convolution of a single-channel grid.
pub fn convolve_reflect(u: &ImageGrid, k: &Kernel) -> Result<ImageGrid> {
    u.require_single_channel("convolve_reflect")?;
    let conv = Convolver::new(u.nx, u.ny, k)?;
    u.with_data(conv.apply(&u.data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[f64]]) -> ImageGrid {
        // rows[i][j] = u[i, j]
        let nx = rows.len();
        let ny = rows[0].len();
        ImageGrid::from_fn(nx, ny, |i, j| rows[i][j]).unwrap()
    }

    #[test]
    fn constant_image_has_zero_differences() {
        let u = ImageGrid::from_fn(4, 4, |_, _| 0.7).unwrap();
        for axis in [Axis::X, Axis::Y] {
            let d = backward_diff(&u, axis).unwrap();
            assert!(d.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn y_difference_duplicates_first_column() {
        let u = grid(&[&[0.0, 1.0], &[0.0, 1.0]]);
        let d = backward_diff(&u, Axis::Y).unwrap();
        assert_eq!(d, grid(&[&[0.0, 1.0], &[0.0, 1.0]]));
    }

    #[test]
    fn x_difference_of_ramp() {
        let u = ImageGrid::from_fn(5, 3, |i, _| i as f64).unwrap();
        let d = backward_diff(&u, Axis::X).unwrap();
        for j in 0..3 {
            assert_eq!(d.get(0, j), 0.0);
            for i in 1..5 {
                assert_eq!(d.get(i, j), 1.0);
            }
        }
    }

    #[test]
    fn spacing_scales_differences() {
        let u = ImageGrid::from_fn(3, 3, |i, j| (i + 2 * j) as f64)
            .unwrap()
            .with_spacing(0.5, 2.0)
            .unwrap();
        assert_eq!(backward_diff(&u, Axis::X).unwrap().get(2, 1), 2.0);
        assert_eq!(backward_diff(&u, Axis::Y).unwrap().get(2, 1), 1.0);
    }

    #[test]
    fn multichannel_difference_rejected() {
        let u = ImageGrid::zeros(3, 3, 3).unwrap();
        assert!(matches!(backward_diff(&u, Axis::X), Err(Error::Shape(_))));
    }

    #[test]
    fn divergence_of_zero_and_of_constant_field() {
        let z = ImageGrid::zeros(4, 5, 1).unwrap();
        assert!(divergence_forward(&z, &z)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
        // Constant field c: interior cancels, first row/column gain +c, last lose -c.
        let c = 0.5;
        let p = ImageGrid::from_fn(4, 5, |_, _| c).unwrap();
        let d = divergence_forward(&p, &p).unwrap();
        for j in 0..5 {
            for i in 0..4 {
                let x = match i {
                    0 => c,
                    3 => -c,
                    _ => 0.0,
                };
                let y = match j {
                    0 => c,
                    4 => -c,
                    _ => 0.0,
                };
                assert_eq!(d.get(i, j), x + y, "({i},{j})");
            }
        }
    }

    #[test]
    fn divergence_shape_mismatch() {
        let a = ImageGrid::zeros(4, 5, 1).unwrap();
        let b = ImageGrid::zeros(5, 4, 1).unwrap();
        assert!(matches!(divergence_forward(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn inner_products() {
        let u = grid(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let v = grid(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(inner(&u, &v).unwrap(), 10.0);
        let z = ImageGrid::zeros(2, 2, 1).unwrap();
        assert_eq!(inner(&u, &z).unwrap(), 0.0);
        for a in 0..4 {
            for b in 0..4 {
                let mut ea = vec![0.0; 4];
                let mut eb = vec![0.0; 4];
                ea[a] = 1.0;
                eb[b] = 1.0;
                let ea = ImageGrid::from_vec(2, 2, 1, ea).unwrap();
                let eb = ImageGrid::from_vec(2, 2, 1, eb).unwrap();
                assert_eq!(inner(&ea, &eb).unwrap(), if a == b { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(norm(&u), 30f64.sqrt());
        let w = ImageGrid::zeros(2, 3, 1).unwrap();
        assert!(inner(&u, &w).is_err());
    }

    #[test]
    fn flat_layout_is_column_major_with_channel_blocks() {
        let g = ImageGrid::from_vec(3, 2, 2, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(g.get_c(1, 0, 0), 1.0);
        assert_eq!(g.get_c(0, 1, 0), 3.0);
        assert_eq!(g.get_c(2, 1, 1), 11.0);
        assert_eq!(g.channel(1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn non_finite_data_rejected() {
        assert!(ImageGrid::from_vec(1, 2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(ImageGrid::from_vec(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn constant_image_survives_box_blur() {
        let u = ImageGrid::from_fn(9, 11, |_, _| 0.3).unwrap();
        let k = Kernel::box_blur(7).unwrap();
        let b = convolve_reflect(&u, &k).unwrap();
        for v in b.as_slice() {
            assert!((v - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_larger_than_image_rejected() {
        let u = ImageGrid::zeros(5, 9, 1).unwrap();
        let k = Kernel::box_blur(7).unwrap();
        assert!(matches!(convolve_reflect(&u, &k), Err(Error::Shape(_))));
        assert!(Kernel::new(2, 3, vec![0.0; 6]).is_err());
    }

    #[test]
    fn point_symmetry_alone_is_not_self_adjoint() {
        // k[a,b] == k[2-a,2-b] but not mirrored along each axis.
        let k = Kernel::new(3, 3, vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(!k.is_symmetric());
        assert!(Kernel::box_blur(7).unwrap().is_symmetric());
        let u = ImageGrid::from_fn(4, 4, |i, j| (i * 4 + j) as f64).unwrap();
        let v = ImageGrid::from_fn(4, 4, |i, j| ((i + 2 * j) % 5) as f64).unwrap();
        let lhs = inner(&convolve_reflect(&u, &k).unwrap(), &v).unwrap();
        let rhs = inner(&u, &convolve_reflect(&v, &k).unwrap()).unwrap();
        assert!((lhs - rhs).abs() > 1e-6);
    }
}
