use num_complex::Complex64;

use super::grid::{Field, Grid};
use crate::error::{Error, Result};

/// Fourier symbol of d^order/dx^order; the Nyquist mode is dropped for odd orders.
pub fn symbol(grid: &Grid, order: u32) -> Vec<Complex64> {
    let ny = grid.nyquist();
    grid.k()
        .iter()
        .enumerate()
        .map(|(m, &k)| {
            if order % 2 == 1 && m == ny {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        })
        .collect()
}

pub fn spectral_derivative(f: &Field, order: u32) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(Error::Config(format!("derivative order {order} not in 1..=3")));
    }
    f.check_finite("spectral_derivative")?;
    Ok(apply_symbol(f, &symbol(f.grid(), order)))
}

/// Multiply the transform of `f` by `sym` and transform back.
pub fn apply_symbol(f: &Field, sym: &[Complex64]) -> Field {
    let g = f.grid();
    let mut b = f.values().to_vec();
    g.fft(&mut b);
    for (z, s) in b.iter_mut().zip(sym) {
        *z *= s;
    }
    g.ifft(&mut b);
    Field::new(g, b).expect("length preserved")
}

pub fn dx(f: &Field) -> Field {
    apply_symbol(f, &symbol(f.grid(), 1))
}

pub fn dxx(f: &Field) -> Field {
    apply_symbol(f, &symbol(f.grid(), 2))
}

/// Periodic translate: returns samples of f(x - y) by Fourier interpolation.
pub fn shift(f: &Field, y: f64) -> Field {
    let sym: Vec<Complex64> = f.grid().k().iter().map(|&k| Complex64::from_polar(1.0, -k * y)).collect();
    apply_symbol(f, &sym)
}

/// Real inner product Re ∫ f conj(g).
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    f.same_grid(g)?;
    Ok(inner_unchecked(f, g))
}

pub(crate) fn inner_unchecked(f: &Field, g: &Field) -> f64 {
    let s: f64 = f.values().iter().zip(g.values()).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
    s * f.grid().dx()
}

/// Complex pairing ∫ f conj(g).
pub fn pairing(f: &Field, g: &Field) -> Complex64 {
    let s: Complex64 = f.values().iter().zip(g.values()).map(|(a, b)| a * b.conj()).sum();
    s * f.grid().dx()
}

pub fn l2_norm_sq(f: &Field) -> f64 {
    f.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * f.grid().dx()
}

pub fn l2_norm(f: &Field) -> f64 {
    l2_norm_sq(f).sqrt()
}

pub fn h1_norm(f: &Field) -> Result<f64> {
    f.check_finite("h1_norm")?;
    Ok((l2_norm_sq(f) + l2_norm_sq(&dx(f))).sqrt())
}

/// H¹ inner product via Parseval with weight (1 + k²) on the odd-order symbol.
pub fn h1_pairing(f: &Field, g: &Field) -> Complex64 {
    let grid = f.grid();
    let (mut a, mut b) = (f.values().to_vec(), g.values().to_vec());
    grid.fft(&mut a);
    grid.fft(&mut b);
    let w = h1_weight(grid);
    let s: Complex64 = a.iter().zip(&b).zip(&w).map(|((x, y), w)| x * y.conj() * w).sum();
    s * grid.dx() / grid.n() as f64
}

pub(crate) fn h1_weight(grid: &Grid) -> Vec<f64> {
    let ny = grid.nyquist();
    grid.k().iter().enumerate().map(|(m, k)| if m == ny { 1.0 } else { 1.0 + k * k }).collect()
}
