#![allow(dead_code)]

use dgflow::functionals::{FunctionalModel, Mask};
use dgflow::grid::{ImageGrid, Kernel};
use dgflow::io::counter_unit;

/// Deterministic uniform stream for test data.
pub struct Stream {
    seed: u64,
    k: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { seed, k: 0 }
    }

    pub fn unit(&mut self) -> f64 {
        self.k += 1;
        counter_unit(self.seed, self.k)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    pub fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.range(lo, hi)).collect()
    }

    pub fn grid(&mut self, nx: usize, ny: usize, c: usize) -> ImageGrid {
        ImageGrid::from_vec(nx, ny, c, self.vec(nx * ny * c, 0.0, 1.0)).unwrap()
    }
}

pub const KINDS: [&str; 5] = ["denoise", "deblur", "inpaint", "multichannel", "tvp"];

/// A random instance of the named model on an `nx × ny` grid.
pub fn model(kind: &str, nx: usize, ny: usize, s: &mut Stream) -> FunctionalModel {
    let alpha = s.range(0.01, 0.5);
    let beta = s.range(0.001, 0.1);
    match kind {
        "denoise" => FunctionalModel::denoise(s.grid(nx, ny, 1), alpha, beta),
        "deblur" => {
            let k = if nx.min(ny) >= 7 { 7 } else { 3 };
            FunctionalModel::deblur(s.grid(nx, ny, 1), Kernel::box_blur(k).unwrap(), alpha, beta)
        }
        "inpaint" => {
            let inside: Vec<bool> = (0..nx * ny).map(|_| s.unit() < 0.3).collect();
            FunctionalModel::inpaint(
                s.grid(nx, ny, 1),
                Mask::new(nx, ny, inside).unwrap(),
                alpha,
                beta,
            )
        }
        "multichannel" => FunctionalModel::multichannel(s.grid(nx, ny, 3), alpha, beta),
        "tvp" => {
            let p = if s.unit() < 0.5 { 0.8 } else { 0.2 };
            FunctionalModel::tvp(s.grid(nx, ny, 1), alpha, beta, p)
        }
        _ => unreachable!(),
    }
    .unwrap()
}

/// Plain-loop reference for the energies, written from the definitions:
/// fit `½ΔxΔy Σ m (Ku − u₀)²` plus `α ΔxΔy Σ ψ(|∇u|²)` with backward
/// differences and zero difference across the first row/column.
pub fn reference_value(m: &FunctionalModel, u: &[f64]) -> f64 {
    let d = m.data();
    let (nx, ny, nc) = (d.nx(), d.ny(), d.channels());
    let (dx, dy) = d.spacing();
    let area = dx * dy;
    let plane = nx * ny;
    let psi = |t: f64| (t + m.beta()).powf(m.exponent() / 2.0);
    let sqgrad = |c: usize, i: usize, j: usize| {
        let at = |i: usize, j: usize| u[c * plane + j * nx + i];
        let gx = if i == 0 {
            0.0
        } else {
            (at(i, j) - at(i - 1, j)) / dx
        };
        let gy = if j == 0 {
            0.0
        } else {
            (at(i, j) - at(i, j - 1)) / dy
        };
        gx * gx + gy * gy
    };
    let blurred: Vec<f64> = match m.kernel() {
        Some(k) => direct_convolution(&u[..plane], nx, ny, k),
        None => u.to_vec(),
    };
    let mut fit = 0.0;
    for c in 0..nc {
        for p in 0..plane {
            let keep = m.mask().is_none_or(|mask| !mask.is_inside(p));
            if keep {
                let r = blurred[c * plane + p] - d.as_slice()[c * plane + p];
                fit += 0.5 * area * r * r;
            }
        }
    }
    let reg = if nc == 1 {
        let mut j_sum = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                j_sum += area * psi(sqgrad(0, i, j));
            }
        }
        j_sum
    } else {
        // Coupled channels: sqrt(Σ_c J_c²)
        let mut sq = 0.0;
        for c in 0..nc {
            let mut j_c = 0.0;
            for j in 0..ny {
                for i in 0..nx {
                    j_c += area * psi(sqgrad(c, i, j));
                }
            }
            sq += j_c * j_c;
        }
        sq.sqrt()
    };
    fit + m.alpha() * reg
}

/// Half-sample symmetric index into `0..n`.
pub fn mirror(k: isize, n: usize) -> usize {
    let n = n as isize;
    let r = k.rem_euclid(2 * n);
    (if r < n { r } else { 2 * n - 1 - r }) as usize
}

/// `out(i,j) = Σ_{a,b} K(a,b) u(i − a + cx, j − b + cy)` on the mirrored image.
pub fn direct_convolution(u: &[f64], nx: usize, ny: usize, k: &Kernel) -> Vec<f64> {
    let (kx, ky) = k.size();
    let (cx, cy) = k.center();
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let mut s = 0.0;
            for b in 0..ky {
                for a in 0..kx {
                    let si = mirror(i as isize - a as isize + cx as isize, nx);
                    let sj = mirror(j as isize - b as isize + cy as isize, ny);
                    s += k.get(a, b) * u[sj * nx + si];
                }
            }
            out[j * nx + i] = s;
        }
    }
    out
}

/// Fourth-order central difference of `f` along every coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let at = |y: &mut Vec<f64>, d: f64| {
                y[i] = x[i] + d;
                let v = f(y);
                y[i] = x[i];
                v
            };
            (-at(&mut y, 2.0 * h) + 8.0 * at(&mut y, h) - 8.0 * at(&mut y, -h)
                + at(&mut y, -2.0 * h))
                / (12.0 * h)
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
