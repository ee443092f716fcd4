//! Localized virial functionals I₁, I₂ and I = −√ω I₁ + I₂ + C̃λ, the exact
//! rate identities for fixed weights, and the A(u₀) + B(λ) decomposition.

use std::sync::Arc;

use serde::Serialize;

use crate::conserved::{action, conserved_set, ConservedSet};
use crate::critical::CriticalData;
use crate::error::{Error, Result};
use crate::evolve::{integrate, EvolveConfig, Flow};
use crate::numerics::spectral::{dx, l2_norm};
use crate::numerics::{quad, Field, Grid};
use crate::soliton::SolitonParams;

/// Odd, nondecreasing weight with φ_R(x) = x on |x| ≤ R and the plateau ±1.5R beyond 2R.
///
/// On R ≤ |x| ≤ 2R, with s = (|x| − R)/R, φ_R' = 1 − h(s) where h is the C^∞ step
/// 1/(1 + e^{1/s − 1/(1−s)}); h(s) + h(1 − s) = 1 fixes the plateau at 1.5R.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub r: f64,
    // ∫₀^{s_i} h on a uniform grid of [0, 1]
    table: Arc<Vec<f64>>,
}

/// Samples of φ_R, φ_R', φ_R''' at x − y on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSamples {
    pub phi: Vec<f64>,
    pub d1: Vec<f64>,
    pub d3: Vec<f64>,
}

const CELLS: usize = 1024;

/// (h, h', h'') of the smooth step at s ∈ (0, 1).
fn smooth_step(s: f64) -> (f64, f64, f64) {
    let g = 1.0 / s - 1.0 / (1.0 - s);
    let g1 = -1.0 / (s * s) - 1.0 / ((1.0 - s) * (1.0 - s));
    let g2 = 2.0 / (s * s * s) - 2.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s));
    let h = 1.0 / (1.0 + g.exp());
    let q = h / (1.0 + (-g).exp());
    if q == 0.0 {
        return (h, 0.0, 0.0);
    }
    let h1 = -q * g1;
    let h2 = -h1 * (1.0 - 2.0 * h) * g1 - q * g2;
    (h, h1, h2)
}

fn step_value(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        smooth_step(s).0
    }
}

fn step_table() -> Result<Vec<f64>> {
    let ds = 1.0 / CELLS as f64;
    let mut t = Vec::with_capacity(CELLS + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for i in 0..CELLS {
        let a = i as f64 * ds;
        acc += quad::integrate(step_value, a, a + ds, 1e-16, 64)?.value;
        t.push(acc);
    }
    Ok(t)
}

impl Cutoff {
    pub fn new(r: f64, grid: &Grid) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("cutoff radius {r} must be positive")));
        }
        if 2.0 * r > 0.9 * grid.l() {
            return Err(Error::CutoffTooLarge { r, l: grid.l() });
        }
        Ok(Cutoff { r, table: Arc::new(step_table()?) })
    }

    /// Plateau value 1.5R.
    pub fn plateau(&self) -> f64 {
        1.5 * self.r
    }

    /// ∫₀^s h by cubic Hermite interpolation of the table.
    fn step_integral(&self, s: f64) -> f64 {
        let ds = 1.0 / CELLS as f64;
        let i = ((s / ds) as usize).min(CELLS - 1);
        let a = i as f64 * ds;
        let t = (s - a) / ds;
        let (y0, y1) = (self.table[i], self.table[i + 1]);
        let (m0, m1) = (step_value(a) * ds, step_value(a + ds) * ds);
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    /// (φ_R, φ_R', φ_R''') at x.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let r = self.r;
        let a = x.abs();
        let sg = x.signum();
        if a <= r {
            (x, 1.0, 0.0)
        } else if a >= 2.0 * r {
            (sg * self.plateau(), 0.0, 0.0)
        } else {
            let s = (a - r) / r;
            let (h, _, h2) = smooth_step(s);
            let v = r * (1.0 + s - self.step_integral(s));
            // φ_R' and φ_R''' are even
            (sg * v, 1.0 - h, -h2 / (r * r))
        }
    }

    /// Samples centered at y, using the periodic representative of x − y.
    pub fn samples(&self, grid: &Grid, y: f64) -> CutoffSamples {
        let n = grid.n();
        let (mut phi, mut d1, mut d3) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..n {
            let (a, b, c) = self.eval(grid.wrap(grid.x(j) - y));
            phi.push(a);
            d1.push(b);
            d3.push(c);
        }
        CutoffSamples { phi, d1, d3 }
    }
}

/// R = 10/(b₂δ₁), capped at 0.45L.
pub fn auto_radius(b2: f64, delta1: f64, grid: &Grid) -> (f64, bool) {
    let want = 10.0 / (b2 * delta1);
    let cap = 0.45 * grid.l();
    if want > cap {
        (cap, true)
    } else {
        (want, false)
    }
}

fn weighted_sum(w: &[f64], f: impl Fn(usize) -> f64, dxg: f64) -> f64 {
    w.iter().enumerate().map(|(j, &w)| w * f(j)).sum::<f64>() * dxg
}

/// ∫ w |u|² and ∫ w Im(u ū_x).
pub fn weighted_densities(u: &Field, w: &[f64]) -> (f64, f64) {
    let ux = dx(u);
    let (v, vx) = (u.values(), ux.values());
    let h = u.grid().dx();
    (weighted_sum(w, |j| v[j].norm_sqr(), h), weighted_sum(w, |j| (v[j] * vx[j].conj()).im, h))
}

pub fn i1(u: &Field, y: f64, cutoff: &Cutoff) -> Result<f64> {
    u.check_finite("i1")?;
    Ok(weighted_densities(u, &cutoff.samples(u.grid(), y).phi).0)
}

pub fn i2(u: &Field, y: f64, cutoff: &Cutoff) -> Result<f64> {
    u.check_finite("i2")?;
    Ok(weighted_densities(u, &cutoff.samples(u.grid(), y).phi).1)
}

/// C̃ = 2C(P(φ) − √ω M(φ)): the coefficient that cancels the C λ̇ parts of
/// the moving-center terms −ẏ∫φ_R'|u|² and −ẏ∫φ_R' Im(uū_x).
pub fn c_tilde(c_coeff: f64, data: &CriticalData) -> f64 {
    2.0 * c_coeff * (data.p - data.omega.sqrt() * data.m)
}

/// −√ω I₁ + I₂ + C̃λ.
pub fn i_composite(u: &Field, y: f64, lambda: f64, omega: f64, c_tilde: f64, cutoff: &Cutoff) -> Result<(f64, f64, f64)> {
    u.check_finite("i_composite")?;
    let (a, b) = weighted_densities(u, &cutoff.samples(u.grid(), y).phi);
    Ok((a, b, -omega.sqrt() * a + b + c_tilde * lambda))
}

/// Right-hand sides of the rate identities for ∫φ|u|² and ∫φ Im(uū_x) at a fixed weight.
/// `nonlinear = false` drops the terms generated by |u|^{2σ}u_x.
pub fn virial_rhs(u: &Field, sigma: f64, w: &CutoffSamples, nonlinear: bool) -> (f64, f64) {
    let ux = dx(u);
    let (v, vx) = (u.values(), ux.values());
    let h = u.grid().dx();
    let on = if nonlinear { 1.0 } else { 0.0 };
    let r1 = weighted_sum(
        &w.d1,
        |j| {
            let a = v[j].norm_sqr();
            -2.0 * (v[j] * vx[j].conj()).im + on * a.powf(sigma + 1.0) / (sigma + 1.0)
        },
        h,
    );
    let r2 = weighted_sum(
        &w.d1,
        |j| {
            let a = v[j].norm_sqr();
            -2.0 * vx[j].norm_sqr() + on * a.powf(sigma) * (v[j] * vx[j].conj()).im
        },
        h,
    ) + 0.5 * weighted_sum(&w.d3, |j| v[j].norm_sqr(), h);
    (r1, r2)
}

/// Fixed-center virial sample: the two weighted integrals and their predicted rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirialSample {
    pub t: f64,
    pub v1: f64,
    pub v2: f64,
    pub r1: f64,
    pub r2: f64,
}

pub fn virial_sample(t: f64, u: &Field, sigma: f64, w: &CutoffSamples, nonlinear: bool) -> VirialSample {
    let (v1, v2) = weighted_densities(u, &w.phi);
    let (r1, r2) = virial_rhs(u, sigma, w, nonlinear);
    VirialSample { t, v1, v2, r1, r2 }
}

/// Evolves u0 and samples the fixed-center virial integrals every `record_every` steps.
/// The rate identities follow `config.nonlinear`.
pub fn fixed_center_run(u0: &Field, sigma: f64, config: &EvolveConfig, cutoff: &Cutoff, center: f64) -> Result<Vec<VirialSample>> {
    let w = cutoff.samples(u0.grid(), center);
    let traj = integrate(u0, sigma, config, |_, t, u| Ok((virial_sample(t, u, sigma, &w, config.nonlinear), Flow::Continue)))?;
    match traj.error {
        Some(e) => Err(e),
        None => Ok(traj.records),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCheck {
    /// max over interior samples of |Δ/Δt − rhs|, relative to max |rhs| (or 1 if that is smaller).
    pub mismatch: f64,
    pub mismatch_i1: f64,
    pub mismatch_i2: f64,
    pub spacing: f64,
    pub samples: usize,
}

/// Central differences of the fixed-weight integrals against their rate identities.
pub fn virial_rate_check(samples: &[VirialSample]) -> Result<RateCheck> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InsufficientSampling(format!("{n} samples, need at least 3")));
    }
    let spacing = samples.windows(2).map(|w| w[1].t - w[0].t).fold(0.0f64, f64::max);
    if spacing > 1e-2 * (1.0 + 1e-9) {
        return Err(Error::InsufficientSampling(format!("record spacing {spacing} exceeds 1e-2")));
    }
    let s1 = samples.iter().fold(1.0f64, |m, s| m.max(s.r1.abs()));
    let s2 = samples.iter().fold(1.0f64, |m, s| m.max(s.r2.abs()));
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for i in 1..n - 1 {
        let (a, b, c) = (&samples[i - 1], &samples[i], &samples[i + 1]);
        let dt = c.t - a.t;
        e1 = e1.max(((c.v1 - a.v1) / dt - b.r1).abs() / s1);
        e2 = e2.max(((c.v2 - a.v2) / dt - b.r2).abs() / s2);
    }
    Ok(RateCheck { mismatch: e1.max(e2), mismatch_i1: e1, mismatch_i2: e2, spacing, samples: n })
}

/// A(u₀) = (2c√ω + 4ω)ΔM + (4√ω − 2c)ΔP − 4ΔS, differences taken against φ.
pub fn a_functional(u0: &Field, params: &SolitonParams, phi: &ConservedSet, s_phi: f64) -> Result<f64> {
    let q = conserved_set(u0, params.sigma)?;
    let s = action(u0, params)?;
    let SolitonParams { omega, c, .. } = *params;
    let sw = omega.sqrt();
    Ok((2.0 * c * sw + 4.0 * omega) * (q.m - phi.m) + (4.0 * sw - 2.0 * c) * (q.p - phi.p) - 4.0 * (s - s_phi))
}

/// Second-order Taylor part of the λ-dependence of I', ½b₁λ².
pub fn b_of_lambda(b1: f64, lambda: f64) -> f64 {
    0.5 * b1 * lambda * lambda
}

/// Per-record quantities along a tracked critical run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirialRecord {
    pub t: f64,
    pub theta: f64,
    pub y: f64,
    pub i1: f64,
    pub i2: f64,
    pub i: f64,
    pub a_term: f64,
    pub lambda: f64,
    pub m: f64,
    pub p: f64,
    pub e: f64,
    pub j: f64,
    pub orbit_dist: f64,
    pub eps_h1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateDecomposition {
    /// Numerical I'(t) at interior records, with the record time.
    pub rates: Vec<(f64, f64)>,
    /// Fraction of interior records with I' ≥ ¼b₂δ₁ + ½b₁λ².
    pub positive_fraction: f64,
    /// Fraction with I' ≥ ¼b₂δ₁.
    pub floor_fraction: f64,
    /// I strictly increasing across all records.
    pub monotone: bool,
    /// Least-squares constant for |I' − A − ½b₁λ²| against λ‖ε‖ + ‖ε‖² + 1/R.
    pub remainder_constant: f64,
    pub max_remainder: f64,
}

/// Compares the time differences of I along `records` with A(u₀) + ½b₁λ².
pub fn rate_decomposition_check(records: &[VirialRecord], data: &CriticalData, a_u0: f64, delta1: f64, r: f64) -> Result<RateDecomposition> {
    let n = records.len();
    if n < 3 {
        return Err(Error::InsufficientSampling(format!("{n} records, need at least 3")));
    }
    let mut rates = Vec::with_capacity(n - 2);
    let (mut pos, mut flo) = (0usize, 0usize);
    let (mut xs, mut rs) = (Vec::new(), Vec::new());
    let mut max_rem = 0.0f64;
    for i in 1..n - 1 {
        let (a, b, c) = (&records[i - 1], &records[i], &records[i + 1]);
        let ip = (c.i - a.i) / (c.t - a.t);
        rates.push((b.t, ip));
        let lam = b.lambda;
        if ip >= 0.25 * data.b2 * delta1 + 0.5 * data.b1 * lam * lam {
            pos += 1;
        }
        if ip >= 0.25 * data.b2 * delta1 {
            flo += 1;
        }
        let rem = ip - a_u0 - b_of_lambda(data.b1, lam);
        max_rem = max_rem.max(rem.abs());
        xs.push(lam.abs() * b.eps_h1 + b.eps_h1 * b.eps_h1 + 1.0 / r);
        rs.push(rem);
    }
    let monotone = records.windows(2).all(|w| w[1].i > w[0].i);
    let m = (n - 2) as f64;
    Ok(RateDecomposition {
        rates,
        positive_fraction: pos as f64 / m,
        floor_fraction: flo as f64 / m,
        monotone,
        remainder_constant: crate::modulation::fitted_constant(&xs, &rs),
        max_remainder: max_rem,
    })
}

/// Bound 2R(‖u‖² + ‖u‖‖∂ₓu‖) + |C̃||λ| on |I|, with the plateau value in place of 2R.
pub fn i_bound(u: &Field, cutoff: &Cutoff, c_tilde: f64, lambda: f64) -> f64 {
    let a = l2_norm(u);
    let b = l2_norm(&dx(u));
    cutoff.plateau() * (a * a + a * b) * (1.0 + 1e-12) + c_tilde.abs() * lambda.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{phase_derivative, amplitude, soliton_field};
    use num_complex::Complex64;

    #[test]
    fn cutoff_shape() {
        let g = Grid::new(40.0, 1024).unwrap();
        let c = Cutoff::new(10.0, &g).unwrap();
        assert_eq!(c.eval(0.0).0, 0.0);
        assert_eq!(c.eval(5.0).0, 5.0);
        assert_eq!(c.eval(-7.5).0, -7.5);
        assert_eq!(c.eval(23.0).0, 15.0);
        assert_eq!(c.eval(-30.0).0, -15.0);
        let s = c.samples(&g, 0.0);
        assert!(s.d1.iter().all(|&d| (0.0..=1.0).contains(&d)));
        assert!(s.phi.iter().all(|v| v.abs() <= 2.0 * c.r));
        for x in [11.0, 13.3, 17.9, 19.99] {
            let (a, _, _) = c.eval(x);
            assert_eq!(c.eval(-x).0, -a);
            // slope by central differences
            let h = 1e-5;
            let fd = (c.eval(x + h).0 - c.eval(x - h).0) / (2.0 * h);
            assert!((fd - c.eval(x).1).abs() < 1e-8);
            let fd3 = (c.eval(x + 1e-3).1 - 2.0 * c.eval(x).1 + c.eval(x - 1e-3).1) / 1e-6;
            assert!((fd3 - c.eval(x).2).abs() < 1e-5);
        }
        assert!((c.table[CELLS] - 0.5).abs() < 1e-14);
        for s in [0.013, 0.25, 0.5, 0.77, 0.9991] {
            let q = quad::integrate(step_value, 0.0, s, 1e-15, 200).unwrap().value;
            assert!((c.step_integral(s) - q).abs() < 1e-12);
        }
        // continuity at the joins
        assert!((c.eval(10.0 + 1e-12).0 - 10.0).abs() < 1e-9);
        assert!((c.eval(20.0 - 1e-12).0 - 15.0).abs() < 1e-9);
        assert!(matches!(Cutoff::new(19.0, &g), Err(Error::CutoffTooLarge { .. })));
    }

    #[test]
    fn zero_field_and_parity() {
        let g = Grid::new(20.0, 512).unwrap();
        let c = Cutoff::new(5.0, &g).unwrap();
        let z = Field::zeros(&g);
        assert_eq!(i1(&z, 0.0, &c).unwrap(), 0.0);
        assert_eq!(i2(&z, 0.0, &c).unwrap(), 0.0);
        let u = Field::from_real(&g, |x| (-(x - 1.0) * (x - 1.0)).exp());
        assert!(i1(&u, 1.0, &c).unwrap().abs() < 1e-14);
        assert!(i2(&u, 1.0, &c).unwrap().abs() < 1e-14);
        let w = c.samples(&g, 0.0);
        let (r1, r2) = virial_rhs(&z, 1.5, &w, true);
        assert_eq!((r1, r2), (0.0, 0.0));
    }

    #[test]
    fn i2_through_phase_derivative() {
        let p = SolitonParams::new(1.5, 1.0, 0.0).unwrap();
        let g = p.auto_grid(2048).unwrap();
        let phi = soliton_field(&p, &g).unwrap();
        let c = Cutoff::new(0.4 * g.l(), &g).unwrap();
        let w = c.samples(&g, 0.0);
        let direct = i2(&phi, 0.0, &c).unwrap();
        let via: f64 = (0..g.n())
            .map(|j| {
                let x = g.x(j);
                -w.phi[j] * amplitude(&p, x).powi(2) * phase_derivative(&p, x)
            })
            .sum::<f64>()
            * g.dx();
        assert!((direct - via).abs() < 1e-9, "{direct} {via}");
    }

    #[test]
    fn gauge_invariance() {
        let p = SolitonParams::new(1.5, 1.0, 0.3).unwrap();
        let g = p.auto_grid(1024).unwrap();
        let phi = soliton_field(&p, &g).unwrap();
        let c = Cutoff::new(10.0, &g).unwrap();
        let u = phi.zip_map(&phi, |a, _| a * Complex64::new(1.0, 0.2 * a.norm()));
        let a = i_composite(&u, 0.3, 0.01, 1.0, 2.0, &c).unwrap();
        let b = i_composite(&u.scale(Complex64::from_polar(1.0, 1.1)), 0.3, 0.01, 1.0, 2.0, &c).unwrap();
        assert!((a.2 - b.2).abs() < 1e-13);
        assert!(a.2.abs() <= i_bound(&u, &c, 2.0, 0.01));
    }

    #[test]
    fn a_functional_vanishes_at_phi() {
        let p = SolitonParams::new(1.5, 1.0, 0.2).unwrap();
        let g = p.auto_grid(1024).unwrap();
        let phi = soliton_field(&p, &g).unwrap();
        let q = conserved_set(&phi, p.sigma).unwrap();
        let s = action(&phi, &p).unwrap();
        assert_eq!(a_functional(&phi, &p, &q, s).unwrap(), 0.0);
    }

    #[test]
    fn rate_identities_on_soliton_and_linear_runs() {
        let p = SolitonParams::new(1.5, 1.0, 0.5).unwrap();
        let g = p.auto_grid(1024).unwrap();
        let phi = soliton_field(&p, &g).unwrap();
        let c = Cutoff::new(2.0, &g).unwrap();
        for nonlinear in [true, false] {
            let cfg = EvolveConfig { dt: 1e-3, t_final: 0.5, record_every: 5, nonlinear, ..Default::default() };
            let s = fixed_center_run(&phi, 1.5, &cfg, &c, 0.3).unwrap();
            let r = virial_rate_check(&s).unwrap();
            assert!(r.mismatch < 1e-4, "{nonlinear}: {r:?}");
        }
        let z = Field::zeros(&g);
        let cfg = EvolveConfig { dt: 1e-3, t_final: 0.05, record_every: 10, ..Default::default() };
        let s = fixed_center_run(&z, 1.5, &cfg, &c, 0.0).unwrap();
        assert_eq!(virial_rate_check(&s).unwrap().mismatch, 0.0);
        let cfg = EvolveConfig { record_every: 20, ..cfg };
        assert!(matches!(virial_rate_check(&fixed_center_run(&z, 1.5, &cfg, &c, 0.0).unwrap()), Err(Error::InsufficientSampling(_))));
    }

    #[test]
    fn a_functional_first_order_slope() {
        use crate::critical::critical_constants;
        use crate::soliton::perturbation_direction;
        for sigma in [1.2, 1.5, 1.8] {
            let d = critical_constants(sigma, 1.0).unwrap();
            let p = d.params();
            let g = p.auto_grid(2048).unwrap();
            let phi = soliton_field(&p, &g).unwrap();
            let q = conserved_set(&phi, sigma).unwrap();
            let s = action(&phi, &p).unwrap();
            let r = |d1: f64| a_functional(&perturbation_direction(&p, &g, d1).unwrap(), &p, &q, s).unwrap() / d1;
            let (r2, r3, r4) = (r(1e-2), r(1e-3), r(1e-4));
            // the remainder is quadratic in δ₁, so one Richardson step removes it
            let rich = (10.0 * r4 - r3) / 9.0;
            assert!((rich - d.a_slope()).abs() < 1e-5 * d.a_slope(), "{sigma}: {rich} {}", d.a_slope());
            assert!((r2 - r3).abs() > (r3 - r4).abs());
        }
    }

    #[test]
    fn auto_radius_caps() {
        let g = Grid::new(80.0, 64).unwrap();
        assert_eq!(auto_radius(10.0, 1e-3, &g), (36.0, true));
        let (r, capped) = auto_radius(10.0, 0.5, &g);
        assert!(!capped && (r - 2.0).abs() < 1e-12);
    }
}
