//! Mass, momentum, energy, the auxiliary functional J, the action and the
//! distance to the soliton orbit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::roots::minimize;
use crate::numerics::spectral::{dx, h1_weight, l2_norm_sq};
use crate::numerics::Field;
use crate::soliton::{soliton_field, SolitonParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    pub m: f64,
    pub p: f64,
    pub e: f64,
    pub j: f64,
}

/// Im ∫ |u|^{2σ} u conj(u_x), given u_x.
fn j_with(u: &Field, ux: &Field, sigma: f64) -> f64 {
    let s: f64 = u
        .values()
        .iter()
        .zip(ux.values())
        .map(|(a, b)| a.norm().powf(2.0 * sigma) * (a * b.conj()).im)
        .sum();
    s * u.grid().dx()
}

fn p_with(u: &Field, ux: &Field) -> f64 {
    let s: f64 = u.values().iter().zip(ux.values()).map(|(a, b)| (a * b.conj()).im).sum();
    0.5 * s * u.grid().dx()
}

pub fn conserved_set(u: &Field, sigma: f64) -> Result<ConservedSet> {
    u.check_finite("conserved_set")?;
    let ux = dx(u);
    let m = 0.5 * l2_norm_sq(u);
    let p = p_with(u, &ux);
    let j = j_with(u, &ux, sigma);
    let e = 0.5 * l2_norm_sq(&ux) - j / (2.0 * sigma + 2.0);
    Ok(ConservedSet { m, p, e, j })
}

/// Momentum through the alternative form ½⟨i∂ₓu, u⟩.
pub fn momentum_alt(u: &Field) -> f64 {
    0.5 * crate::numerics::spectral::inner_unchecked(&dx(u).mul_i(), u)
}

pub fn j_functional(u: &Field, sigma: f64) -> f64 {
    j_with(u, &dx(u), sigma)
}

/// S_{ω,c}(u) = E + ωM + cP.
pub fn action(u: &Field, params: &SolitonParams) -> Result<f64> {
    let q = conserved_set(u, params.sigma)?;
    Ok(q.e + params.omega * q.m + params.c * q.p)
}

/// Q_{μ,ν}(u) = μM + νP.
pub fn q_functional(u: &Field, mu: f64, nu: f64) -> Result<f64> {
    let q = conserved_set(u, 1.0)?;
    Ok(mu * q.m + nu * q.p)
}

/// ∫ |u|^{2σ+2}.
pub fn lp_power_norm(u: &Field, sigma: f64) -> Result<f64> {
    u.check_finite("lp_power_norm")?;
    let s: f64 = u.values().iter().map(|z| z.norm().powf(2.0 * sigma + 2.0)).sum();
    Ok(s * u.grid().dx())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitFit {
    pub dist: f64,
    pub theta: f64,
    pub y: f64,
}

/// Evaluates the H¹ correlation C(y) = Σ_m z_m e^{i k_m y} and its first two y-derivatives.
struct Correlation<'a> {
    z: Vec<Complex64>,
    k: &'a [f64],
}

impl Correlation<'_> {
    fn eval(&self, y: f64) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (z, &k) in self.z.iter().zip(self.k) {
            let t = z * Complex64::from_polar(1.0, k * y);
            out[0] += t;
            out[1] += t * Complex64::new(0.0, k);
            out[2] -= t * (k * k);
        }
        out
    }
}

/// inf over (θ, y) of ‖u − e^{iθ}ref(· − y)‖_{H¹}.
pub fn orbit_fit(u: &Field, reference: &Field) -> Result<OrbitFit> {
    u.check_finite("orbit_distance")?;
    u.same_grid(reference)?;
    let grid = u.grid();
    let n = grid.n();
    let w = h1_weight(grid);
    let (mut uh, mut ph) = (u.values().to_vec(), reference.values().to_vec());
    grid.fft(&mut uh);
    grid.fft(&mut ph);
    let mut z: Vec<Complex64> = uh.iter().zip(&ph).zip(&w).map(|((a, b), w)| a * b.conj() * *w).collect();
    let mut corr = z.clone();
    grid.ifft(&mut corr);
    let jstar = (0..n).max_by(|&a, &b| corr[a].norm().total_cmp(&corr[b].norm())).unwrap_or(0);
    let h = grid.dx();
    let y0 = grid.wrap(jstar as f64 * h);
    for v in z.iter_mut() {
        *v /= n as f64;
    }
    let cf = Correlation { z, k: grid.k() };
    let (mut y, _) = minimize(|y| -cf.eval(y)[0].norm_sqr(), y0 - h, y0 + h, 1e-10 * h, 100);
    for _ in 0..3 {
        let [c0, c1, c2] = cf.eval(y);
        let g = (c0.conj() * c1).re;
        let hess = c1.norm_sqr() + (c0.conj() * c2).re;
        if hess >= 0.0 {
            break;
        }
        let step = -g / hess;
        if step.abs() > h {
            break;
        }
        y += step;
    }
    let c0 = cf.eval(y)[0];
    let theta = c0.arg();
    let rot = Complex64::from_polar(1.0, theta);
    let d2: f64 = uh
        .iter()
        .zip(&ph)
        .zip(&w)
        .zip(grid.k())
        .map(|(((a, b), w), &k)| (a - rot * b * Complex64::from_polar(1.0, -k * y)).norm_sqr() * w)
        .sum();
    let dist = (d2 * h / n as f64).sqrt();
    Ok(OrbitFit { dist, theta, y: grid.wrap(y) })
}

pub fn orbit_distance(u: &Field, params: &SolitonParams) -> Result<OrbitFit> {
    orbit_fit(u, &soliton_field(params, u.grid())?)
}
