//! The interface the discrete gradient machinery needs from an energy.

use crate::par;

/// A differentiable energy `V: R^n -> R`.
pub trait Energy: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Hessian-vector product. The default is a central difference of the
    /// gradient with step `1e-5·(1+‖x‖)/‖w‖`.
    fn hessian_vec_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        fd_hessian_vec(self, x, w, out);
    }

    /// `V(y) - V(x)`. Implementations should avoid cancellation when `y ≈ x`.
    fn value_diff(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value(y) - self.value(x)
    }

    /// Per-coordinate evaluator positioned at `x`.
    fn coordinates<'a>(&'a self, x: &[f64]) -> Box<dyn CoordinateModel + 'a>;
}

/// Energy changes along single coordinates, for coordinate-sequential schemes.
///
/// The caller owns the state vector; after writing `x[i]` it must call
/// [`CoordinateModel::commit`] so cached quantities stay in sync.
pub trait CoordinateModel {
    /// `V(x with x_i = s) - V(x)`.
    fn diff(&mut self, x: &[f64], i: usize, s: f64) -> f64;

    /// `∂V/∂x_i` at `x`.
    fn partial(&mut self, x: &[f64], i: usize) -> f64;

    /// `x[i]` was just changed from `old`.
    fn commit(&mut self, x: &[f64], i: usize, old: f64);
}

/// Central-difference Hessian-vector product.
pub fn fd_hessian_vec<E: Energy + ?Sized>(e: &E, x: &[f64], w: &[f64], out: &mut [f64]) {
    let wn = par::norm(w);
    if wn == 0.0 {
        out.fill(0.0);
        return;
    }
    let h = 1e-5 * (1.0 + par::norm(x)) / wn.max(f64::EPSILON);
    let xp: Vec<f64> = x.iter().zip(w).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(w).map(|(a, b)| a - h * b).collect();
    let gp = e.gradient(&xp);
    e.gradient_into(&xm, out);
    for (o, p) in out.iter_mut().zip(&gp) {
        *o = (p - *o) / (2.0 * h);
    }
}

/// Coordinate evaluator that recomputes the whole energy difference.
pub struct FullCoordinates<'a, E: Energy + ?Sized> {
    energy: &'a E,
    scratch: Vec<f64>,
}

impl<'a, E: Energy + ?Sized> FullCoordinates<'a, E> {
    pub fn new(energy: &'a E, x: &[f64]) -> Self {
        Self {
            energy,
            scratch: x.to_vec(),
        }
    }
}

impl<E: Energy + ?Sized> CoordinateModel for FullCoordinates<'_, E> {
    fn diff(&mut self, x: &[f64], i: usize, s: f64) -> f64 {
        self.scratch[i] = s;
        let d = self.energy.value_diff(x, &self.scratch);
        self.scratch[i] = x[i];
        d
    }

    fn partial(&mut self, x: &[f64], i: usize) -> f64 {
        self.energy.gradient(x)[i]
    }

    fn commit(&mut self, x: &[f64], i: usize, _old: f64) {
        self.scratch[i] = x[i];
    }
}

/// `V(x) = ½ xᵀ A x` with a dense symmetric `A`. Used as an analytic oracle.
#[derive(Clone, Debug)]
pub struct Quadratic {
    n: usize,
    a: Vec<f64>,
}

impl Quadratic {
    /// `a` is row-major `n × n` and must be symmetric.
    pub fn new(n: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), n * n, "matrix size");
        for r in 0..n {
            for c in 0..r {
                assert!(
                    (a[r * n + c] - a[c * n + r]).abs() <= 1e-14 * (1.0 + a[r * n + c].abs()),
                    "matrix must be symmetric"
                );
            }
        }
        Self { n, a }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut a = vec![0.0; n * n];
        for (k, v) in d.iter().enumerate() {
            a[k * n + k] = *v;
        }
        Self { n, a }
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.n + c]
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.a[r * self.n..(r + 1) * self.n]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl Energy for Quadratic {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * (0..self.n).map(|r| x[r] * self.row_dot(r, x)).sum::<f64>()
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(r, x);
        }
    }

    fn hessian_vec_into(&self, _x: &[f64], w: &[f64], out: &mut [f64]) {
        self.gradient_into(w, out);
    }

    fn value_diff(&self, x: &[f64], y: &[f64]) -> f64 {
        // ½(y-x)ᵀA(y+x)
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let s: Vec<f64> = y.iter().zip(x).map(|(a, b)| a + b).collect();
        0.5 * (0..self.n).map(|r| d[r] * self.row_dot(r, &s)).sum::<f64>()
    }

    fn coordinates<'a>(&'a self, _x: &[f64]) -> Box<dyn CoordinateModel + 'a> {
        Box::new(QuadraticCoordinates { q: self })
    }
}

struct QuadraticCoordinates<'a> {
    q: &'a Quadratic,
}

impl CoordinateModel for QuadraticCoordinates<'_> {
    fn diff(&mut self, x: &[f64], i: usize, s: f64) -> f64 {
        let d = s - x[i];
        d * self.q.row_dot(i, x) + 0.5 * self.q.entry(i, i) * d * d
    }

    fn partial(&mut self, x: &[f64], i: usize) -> f64 {
        self.q.row_dot(i, x)
    }

    fn commit(&mut self, _x: &[f64], _i: usize, _old: f64) {}
}
