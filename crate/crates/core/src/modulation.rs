//! Modulation of a solution near the critical soliton:
//! u = e^{iθ}(φ_{ω+λμ, c+λν} + ε)(· − y) with ε orthogonal to iφ_λ, ∂ₓφ_λ, J'(φ_λ).

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::conserved::{conserved_set, orbit_fit};
use crate::critical::{psi_field, EigenDirection};
use crate::error::{Error, Result};
use crate::linop::{apply_j_prime, SecondVariation};
use crate::numerics::spectral::{dx, h1_norm, inner, shift};
use crate::numerics::{Field, Grid};
use crate::soliton::{perturbation, sample, soliton_field, SolitonParams};

/// Tube radius, relative to ‖φ‖_{H¹}, inside which decompositions are attempted.
pub const TUBE_FRACTION: f64 = 0.1;
const MAX_NEWTON: usize = 25;
const RESIDUAL_TOL: f64 = 1e-9;
const LAMBDA_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct ModulationState {
    pub theta: f64,
    pub y: f64,
    pub lambda: f64,
    pub eps: Field,
    /// ⟨ε, iφ_λ⟩, ⟨ε, ∂ₓφ_λ⟩, ⟨ε, J'(φ_λ)⟩.
    pub residuals: [f64; 3],
    /// Residual tolerances, 1e-9 times the natural size of each pairing.
    pub scales: [f64; 3],
    pub iterations: usize,
    pub converged: bool,
}

impl ModulationState {
    pub fn eps_h1(&self) -> f64 {
        h1_norm(&self.eps).unwrap_or(f64::NAN)
    }
}

/// Everything fixed across decompositions about one base soliton.
#[derive(Debug, Clone)]
pub struct Modulator {
    pub base: SolitonParams,
    pub dir: EigenDirection,
    grid: Grid,
    phi: Field,
    radius: f64,
}

struct Eval {
    f: Vector3<f64>,
    eps: Field,
    phil: Field,
    g: [Field; 3],
}

fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * std::f64::consts::PI);
    if t > std::f64::consts::PI {
        t - 2.0 * std::f64::consts::PI
    } else {
        t
    }
}

impl Modulator {
    pub fn new(base: &SolitonParams, dir: &EigenDirection, grid: &Grid) -> Result<Self> {
        let phi = soliton_field(base, grid)?;
        let radius = TUBE_FRACTION * h1_norm(&phi)?;
        Ok(Modulator { base: *base, dir: *dir, grid: grid.clone(), phi, radius })
    }

    pub fn phi(&self) -> &Field {
        &self.phi
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn phi_lambda(&self, lambda: f64) -> Result<Field> {
        Ok(sample(&self.dir.params_at(&self.base, lambda)?, &self.grid))
    }

    /// e^{−iθ}u(· + y)
    fn pull_back(&self, u: &Field, theta: f64, y: f64) -> Field {
        shift(u, -y).scale(Complex64::from_polar(1.0, -theta))
    }

    fn eval(&self, u: &Field, theta: f64, y: f64, lambda: f64) -> Result<Eval> {
        let phil = self.phi_lambda(lambda)?;
        let eps = &self.pull_back(u, theta, y) - &phil;
        let g = [phil.mul_i(), dx(&phil), apply_j_prime(&phil, self.base.sigma)?];
        let f = Vector3::new(inner(&eps, &g[0])?, inner(&eps, &g[1])?, inner(&eps, &g[2])?);
        Ok(Eval { f, eps, phil, g })
    }

    fn f_only(&self, pulled: &Field, lambda: f64) -> Result<Vector3<f64>> {
        let phil = self.phi_lambda(lambda)?;
        let eps = pulled - &phil;
        let g = [phil.mul_i(), dx(&phil), apply_j_prime(&phil, self.base.sigma)?];
        Ok(Vector3::new(inner(&eps, &g[0])?, inner(&eps, &g[1])?, inner(&eps, &g[2])?))
    }

    fn scales(&self, ev: &Eval) -> [f64; 3] {
        let n = crate::numerics::spectral::l2_norm(&ev.phil);
        let s = |f: &Field| RESIDUAL_TOL * n * crate::numerics::spectral::l2_norm(f);
        [s(&ev.g[0]), s(&ev.g[1]), s(&ev.g[2])]
    }

    /// Newton solve of the three orthogonality conditions from `guess` = (θ, y, λ),
    /// or from the best orbit fit when `guess` is None.
    pub fn decompose(&self, u: &Field, guess: Option<(f64, f64, f64)>) -> Result<ModulationState> {
        u.check_finite("decompose")?;
        u.same_grid(&self.phi)?;
        let fit = orbit_fit(u, &self.phi)?;
        if fit.dist > self.radius {
            return Err(Error::OutsideTube { dist: fit.dist, radius: self.radius });
        }
        let (mut theta, mut y, mut lambda) = guess.unwrap_or((fit.theta, fit.y, 0.0));
        let mut best = f64::INFINITY;
        for it in 0..=MAX_NEWTON {
            let ev = self.eval(u, theta, y, lambda)?;
            let scales = self.scales(&ev);
            let rel = (0..3).map(|j| ev.f[j].abs() / scales[j]).fold(0.0f64, f64::max);
            best = best.min(rel);
            if rel <= 1.0 {
                return Ok(ModulationState {
                    theta: wrap_angle(theta),
                    y,
                    lambda,
                    eps: ev.eps,
                    residuals: [ev.f[0], ev.f[1], ev.f[2]],
                    scales,
                    iterations: it,
                    converged: true,
                });
            }
            if it == MAX_NEWTON {
                break;
            }
            // ∂_θ ε = −i(ε + φ_λ), ∂_y ε = ∂ₓ(ε + φ_λ); the λ column by central differences
            let full = &ev.eps + &ev.phil;
            let d_theta = full.mul_i().scale(Complex64::new(-1.0, 0.0));
            let d_y = dx(&full);
            let pulled = self.pull_back(u, theta, y);
            let h = LAMBDA_STEP;
            let d_lambda = (self.f_only(&pulled, lambda + h)? - self.f_only(&pulled, lambda - h)?) / (2.0 * h);
            let mut jac = Matrix3::zeros();
            for r in 0..3 {
                jac[(r, 0)] = inner(&d_theta, &ev.g[r])?;
                jac[(r, 1)] = inner(&d_y, &ev.g[r])?;
                jac[(r, 2)] = d_lambda[r];
            }
            let step = jac.lu().solve(&(-ev.f)).ok_or(Error::NewtonDiverged(rel))?;
            if !step.iter().all(|s| s.is_finite()) {
                return Err(Error::NewtonDiverged(rel));
            }
            theta += step[0];
            y += step[1];
            lambda += step[2];
        }
        Err(Error::NewtonDiverged(best * RESIDUAL_TOL))
    }

    /// C_{ω,c} = −⟨iψ, −a₀φ + i∂ₓφ⟩ / (2(a₀² − ω)M(φ)).
    pub fn c_coefficient(&self) -> Result<f64> {
        let psi = psi_field(&self.base, &self.dir, &self.grid)?;
        let a0 = self.base.a0();
        let m = conserved_set(&self.phi, self.base.sigma)?.m;
        let dirn = perturbation(&self.base, &self.grid)?;
        Ok(-inner(&psi.mul_i(), &dirn)? / (2.0 * (a0 * a0 - self.base.omega) * m))
    }

    /// ⟨S''_λ(φ_λ)ε, ε⟩ / ‖ε‖²_{H¹} at a converged state.
    pub fn coercivity_ratio(&self, state: &ModulationState) -> Result<f64> {
        let p = self.dir.params_at(&self.base, state.lambda)?;
        let op = SecondVariation::new(&sample(&p, &self.grid), &p)?;
        let e = &state.eps;
        Ok(inner(&op.apply(e)?, e)? / h1_norm(e)?.powi(2))
    }
}

/// One tracked record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub theta: f64,
    pub y: f64,
    pub lambda: f64,
    pub eps_h1: f64,
    pub iterations: usize,
}

/// Warm-started decompositions along a trajectory, with θ unwrapped.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub modulator: Modulator,
    pub points: Vec<TrackPoint>,
    /// First time the decomposition failed, with the failure.
    pub exit: Option<(f64, Error)>,
}

impl Tracker {
    pub fn new(modulator: Modulator) -> Self {
        Tracker { modulator, points: Vec::new(), exit: None }
    }

    fn predict(&self, t: f64) -> Option<(f64, f64, f64)> {
        let last = self.points.last()?;
        let dt = t - last.t;
        let base = &self.modulator.base;
        let dir = &self.modulator.dir;
        let w = base.omega + last.lambda * dir.mu;
        let c = base.c + last.lambda * dir.nu;
        Some((last.theta + w * dt, last.y + c * dt, last.lambda))
    }

    /// Decomposes u(t); after the first failure the tracker stays exited.
    pub fn push(&mut self, t: f64, u: &Field) -> Result<Option<ModulationState>> {
        if self.exit.is_some() {
            return Ok(None);
        }
        let guess = self.predict(t);
        match self.modulator.decompose(u, guess) {
            Ok(s) => {
                let theta = match self.points.last() {
                    // keep θ continuous across the ±π cut
                    Some(p) => p.theta + wrap_angle(s.theta - p.theta),
                    None => s.theta,
                };
                let y = match self.points.last() {
                    Some(p) => p.y + u.grid().wrap(s.y - p.y),
                    None => s.y,
                };
                self.points.push(TrackPoint { t, theta, y, lambda: s.lambda, eps_h1: s.eps_h1(), iterations: s.iterations });
                Ok(Some(s))
            }
            Err(e @ (Error::OutsideTube { .. } | Error::NewtonDiverged(_))) => {
                self.exit = Some((t, e));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Central-difference rates (θ̇, ẏ, λ̇) at interior points, one-sided at the ends.
    pub fn rates(&self) -> Vec<[f64; 3]> {
        let p = &self.points;
        let n = p.len();
        if n < 2 {
            return vec![[f64::NAN; 3]; n];
        }
        (0..n)
            .map(|i| {
                let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
                let dt = p[b].t - p[a].t;
                [(p[b].theta - p[a].theta) / dt, (p[b].y - p[a].y) / dt, (p[b].lambda - p[a].lambda) / dt]
            })
            .collect()
    }
}

/// Least-squares slope through the origin: the smallest C with |r| ≈ C·x on average.
pub fn fitted_constant(x: &[f64], r: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(r).map(|(x, r)| x * r.abs()).sum();
    let den: f64 = x.iter().map(|x| x * x).sum();
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

/// Smallest b₃ with ‖ε‖²_{H¹} ≤ b₃ λ δ₁ at every point with λ > 0.
pub fn b3_fit(points: &[TrackPoint], delta1: f64) -> Option<f64> {
    let mut b3: Option<f64> = None;
    for p in points {
        if p.lambda > 0.0 {
            let v = p.eps_h1 * p.eps_h1 / (p.lambda * delta1);
            b3 = Some(b3.map_or(v, |b: f64| b.max(v)));
        }
    }
    b3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::critical_constants;
    use crate::soliton::perturbation_direction;

    fn setup(n: usize) -> (Modulator, SolitonParams) {
        let d = critical_constants(1.5, 1.0).unwrap();
        let p = d.params();
        let g = p.auto_grid(n).unwrap();
        (Modulator::new(&p, &d.direction(), &g).unwrap(), p)
    }

    #[test]
    fn soliton_is_its_own_decomposition() {
        let (m, _p) = setup(1024);
        let s = m.decompose(m.phi(), None).unwrap();
        assert!(s.converged);
        assert!(s.theta.abs() < 1e-10 && s.y.abs() < 1e-10 && s.lambda.abs() < 1e-10, "{s:?}");
        assert!(s.eps_h1() < 1e-9);
    }

    #[test]
    fn exact_family_member() {
        let (m, p) = setup(1024);
        let lam = 1e-3;
        let q = m.dir.params_at(&p, lam).unwrap();
        let g = m.phi().grid().clone();
        let u = Field::from_fn(&g, |x| crate::soliton::profile(&q, x - 1.7) * Complex64::from_polar(1.0, 0.3));
        let s = m.decompose(&u, None).unwrap();
        assert!((s.theta - 0.3).abs() < 1e-8 && (s.y - 1.7).abs() < 1e-8 && (s.lambda - lam).abs() < 1e-8, "{s:?}");
        assert!(s.eps_h1() < 1e-8);
    }

    #[test]
    fn perturbed_soliton() {
        let (m, p) = setup(1024);
        let g = m.phi().grid().clone();
        let d1 = 1e-3;
        let u = perturbation_direction(&p, &g, d1).unwrap();
        let s = m.decompose(&u, None).unwrap();
        assert!(s.converged);
        for j in 0..3 {
            assert!(s.residuals[j].abs() <= s.scales[j]);
        }
        let bound = d1 * h1_norm(&perturbation(&p, &g).unwrap()).unwrap();
        assert!(s.eps_h1() <= bound, "{} {bound}", s.eps_h1());
    }

    #[test]
    fn gauge_equivariance() {
        let (m, p) = setup(1024);
        let g = m.phi().grid().clone();
        let u = perturbation_direction(&p, &g, 1e-3).unwrap();
        let s0 = m.decompose(&u, None).unwrap();
        let b = 40.0 * g.dx();
        let v = shift(&u, b).scale(Complex64::from_polar(1.0, 0.9));
        let s1 = m.decompose(&v, None).unwrap();
        assert!((s1.theta - s0.theta - 0.9).abs() < 1e-10 && (s1.y - s0.y - b).abs() < 1e-10);
        assert!((s1.lambda - s0.lambda).abs() < 1e-10);
        let diff = crate::numerics::spectral::l2_norm(&(&s1.eps - &s0.eps));
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn refuses_outside_tube() {
        let (m, _p) = setup(512);
        let u = m.phi() * 1.5;
        assert!(matches!(m.decompose(&u, None), Err(Error::OutsideTube { .. })));
    }

    #[test]
    fn coefficient_is_finite() {
        let (m, _p) = setup(1024);
        assert!(m.c_coefficient().unwrap().is_finite());
    }

    #[test]
    fn tracker_unwraps_phase() {
        let (m, p) = setup(512);
        let g = m.phi().grid().clone();
        let mut tr = Tracker::new(m);
        for i in 0..8 {
            let t = 0.5 * i as f64;
            let u = m_field(&g, &p, p.omega * t, p.c * t);
            tr.push(t, &u).unwrap().unwrap();
        }
        let last = tr.points.last().unwrap();
        assert!(tr.points.iter().all(|q| q.lambda.abs() < 1e-6));
        assert!((last.theta - p.omega * 3.5).abs() < 1e-8, "{last:?}");
        for r in tr.rates() {
            assert!((r[0] - p.omega).abs() < 1e-6 && (r[1] - p.c).abs() < 1e-6 && r[2].abs() < 1e-6);
        }
    }

    fn m_field(g: &Grid, p: &SolitonParams, theta: f64, y: f64) -> Field {
        Field::from_fn(g, |x| crate::soliton::profile(p, x - y) * Complex64::from_polar(1.0, theta))
    }

    #[test]
    fn b3_of_points() {
        let pts = [
            TrackPoint { t: 0.0, theta: 0.0, y: 0.0, lambda: 0.0, eps_h1: 1e-3, iterations: 0 },
            TrackPoint { t: 1.0, theta: 0.0, y: 0.0, lambda: 0.5, eps_h1: 1e-2, iterations: 0 },
        ];
        assert!((b3_fit(&pts, 1e-3).unwrap() - 0.2).abs() < 1e-12);
    }
}
