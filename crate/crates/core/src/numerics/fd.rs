//! Central differences in the (ω, c) parameter plane with one Richardson level.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    W,
    C,
    WW,
    WC,
    CC,
}

impl Which {
    pub fn order(self) -> u32 {
        match self {
            Which::W | Which::C => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative<T> {
    pub value: T,
    pub error: T,
}

fn k<T: Float>(x: f64) -> T {
    T::from(x).expect("float constant")
}

/// Default step for the given derivative order at frequency ω.
pub fn default_step(omega: f64, which: Which) -> f64 {
    match which.order() {
        1 => 1e-3 * omega.abs().max(1.0),
        _ => 1e-2,
    }
}

fn in_domain<T: Float>(w: T, c: T) -> bool {
    w > T::zero() && c * c < k::<T>(4.0) * w
}

fn stencil<T: Float, G: FnMut(T, T) -> Result<T>>(g: &mut G, w: T, c: T, which: Which, h: T) -> Result<T> {
    let two: T = k(2.0);
    let mut ev = |dw: T, dc: T| -> Result<T> {
        let (a, b) = (w + dw, c + dc);
        if !in_domain(a, b) {
            return Err(Error::DomainViolation(format!(
                "stencil point (omega, c) = ({:?}, {:?}) leaves c^2 < 4 omega",
                a.to_f64(),
                b.to_f64()
            )));
        }
        g(a, b)
    };
    let z = T::zero();
    Ok(match which {
        Which::W => (ev(h, z)? - ev(-h, z)?) / (two * h),
        Which::C => (ev(z, h)? - ev(z, -h)?) / (two * h),
        Which::WW => (ev(h, z)? - two * ev(z, z)? + ev(-h, z)?) / (h * h),
        Which::CC => (ev(z, h)? - two * ev(z, z)? + ev(z, -h)?) / (h * h),
        Which::WC => (ev(h, h)? - ev(h, -h)? - ev(-h, h)? + ev(-h, -h)?) / (k::<T>(4.0) * h * h),
    })
}

pub fn parameter_derivative<T: Float, G: FnMut(T, T) -> Result<T>>(mut g: G, at: (T, T), which: Which, h: T) -> Result<Derivative<T>> {
    let (w, c) = at;
    let d1 = stencil(&mut g, w, c, which, h)?;
    let d2 = stencil(&mut g, w, c, which, h * k(0.5))?;
    let value = (k::<T>(4.0) * d2 - d1) / k(3.0);
    Ok(Derivative { value, error: (value - d2).abs() })
}

/// Richardson-extrapolated central derivative of a scalar function of one variable.
pub fn derivative_1d<T: Float, G: FnMut(T) -> Result<T>>(mut g: G, x: T, h: T, order: u32) -> Result<T> {
    let two: T = k(2.0);
    let mut d = |h: T| -> Result<T> {
        Ok(match order {
            1 => (g(x + h)? - g(x - h)?) / (two * h),
            _ => (g(x + h)? - two * g(x)? + g(x - h)?) / (h * h),
        })
    };
    let (d1, d2) = (d(h)?, d(h / two)?);
    Ok((k::<T>(4.0) * d2 - d1) / k(3.0))
}
