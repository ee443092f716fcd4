use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Plans {
    l: f64,
    n: usize,
    dx: f64,
    k: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on [-L, L) with N nodes and cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    p: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid(L={}, N={})", self.p.l, self.p.n)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.p, &other.p) || (self.p.n == other.p.n && self.p.l == other.p.l)
    }
}

impl Grid {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N = {n} must be a power of two >= 16")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("L = {l} must be positive")));
        }
        let dx = 2.0 * l / n as f64;
        let k = (0..n)
            .map(|m| {
                let m = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
                PI * m / l
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid { p: Arc::new(Plans { l, n, dx, k, fwd, inv }) })
    }

    pub fn l(&self) -> f64 {
        self.p.l
    }

    pub fn n(&self) -> usize {
        self.p.n
    }

    pub fn dx(&self) -> f64 {
        self.p.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.p.l + j as f64 * self.p.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.p.n).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers in FFT order; index N/2 is the Nyquist mode.
    pub fn k(&self) -> &[f64] {
        &self.p.k
    }

    pub fn nyquist(&self) -> usize {
        self.p.n / 2
    }

    pub fn k_max(&self) -> f64 {
        PI / self.p.dx
    }

    pub fn fft(&self, buf: &mut [Complex64]) {
        self.p.fwd.process(buf);
    }

    /// Inverse transform including the 1/N normalization.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        self.p.inv.process(buf);
        let s = 1.0 / self.p.n as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }

    /// Map a coordinate into [-L, L).
    pub fn wrap(&self, x: f64) -> f64 {
        let p = 2.0 * self.p.l;
        (x + self.p.l).rem_euclid(p) - self.p.l
    }
}

/// Complex samples of a function on a [`Grid`].
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    v: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: &Grid, v: Vec<Complex64>) -> Result<Self> {
        if v.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        Ok(Field { grid: grid.clone(), v })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field { grid: grid.clone(), v: vec![Complex64::new(0.0, 0.0); grid.n()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let v = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        Field { grid: grid.clone(), v }
    }

    pub fn from_real(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.v
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.v
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteInput(op))
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field { grid: self.grid.clone(), v: self.v.iter().map(|&z| f(z)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let v = self.v.iter().zip(&other.v).map(|(&a, &b)| f(a, b)).collect();
        Field { grid: self.grid.clone(), v }
    }

    pub fn scale(&self, a: Complex64) -> Field {
        self.map(|z| a * z)
    }

    pub fn mul_i(&self) -> Field {
        self.map(|z| Complex64::new(-z.im, z.re))
    }

    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    /// Pointwise product with a real weight.
    pub fn weighted(&self, w: &[f64]) -> Field {
        let v = self.v.iter().zip(w).map(|(&z, &a)| z * a).collect();
        Field { grid: self.grid.clone(), v }
    }

    /// self + a * other
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        self.zip_map(other, |u, v| u + v * a)
    }

    pub fn abs(&self) -> Vec<f64> {
        self.v.iter().map(|z| z.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Real representation (Re u, Im u) of length 2N.
    pub fn to_real(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.v.iter().map(|z| z.re).collect();
        r.extend(self.v.iter().map(|z| z.im));
        r
    }

    pub fn from_real_rep(grid: &Grid, r: &[f64]) -> Result<Field> {
        let n = grid.n();
        if r.len() != 2 * n {
            return Err(Error::GridMismatch);
        }
        Field::new(grid, (0..n).map(|j| Complex64::new(r[j], r[n + j])).collect())
    }

    /// Rectangle-rule integral of the samples.
    pub fn integral(&self) -> Complex64 {
        self.v.iter().sum::<Complex64>() * self.grid.dx()
    }
}

impl Add<&Field> for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub<&Field> for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|z| -z)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|z| z * rhs)
    }
}

impl Mul<Complex64> for &Field {
    type Output = Field;
    fn mul(self, rhs: Complex64) -> Field {
        self.scale(rhs)
    }
}
