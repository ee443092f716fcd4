//! Threshold function F_σ, its root z₀(σ), closed forms for M and P along
//! the soliton family, the Hessian d''(ω,c) and the constants attached to
//! the critical speed c = 2z₀√ω.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::fd::{default_step, derivative_1d, parameter_derivative, Which};
use crate::numerics::quad::improper_integral;
use crate::numerics::roots::brent;
use crate::numerics::{Field, Grid};
use crate::soliton::{sample, soliton_field, SolitonParams};

const QUAD_TOL: f64 = 1e-13;

/// ∫₀^∞ (cosh y − z)^{−s} dy.
fn cosh_power(z: f64, s: f64) -> Result<f64> {
    Ok(improper_integral(|y: f64| (y.cosh() - z).powf(-s), QUAD_TOL)?.value)
}

pub fn f_sigma(sigma: f64, z: f64) -> Result<f64> {
    if !(z > -1.0 && z < 1.0) {
        return Err(Error::DomainViolation(format!("z = {z} outside (-1, 1)")));
    }
    let s = 1.0 / sigma;
    let a = cosh_power(z, s)?;
    // (cosh y − z)^{−1/σ−1}(z cosh y − 1), with the ratio written in sech for large y
    let b = improper_integral(
        |y: f64| {
            let q = 1.0 / y.cosh();
            (y.cosh() - z).powf(-s) * (z - q) / (1.0 - z * q)
        },
        QUAD_TOL,
    )?
    .value;
    Ok((sigma - 1.0).powi(2) * a * a - b * b)
}

/// Scan points used to bracket z₀.
pub const Z0_SCAN: (f64, f64, usize) = (-0.999, 0.999, 1000);

/// Root of F_σ on (−1, 1), bracketed by a sign-change scan.
pub fn find_z0(sigma: f64) -> Result<f64> {
    if !(sigma > 1.0 && sigma < 2.0) {
        return Err(Error::DomainViolation(format!("sigma = {sigma} outside (1, 2)")));
    }
    let (lo, hi, n) = Z0_SCAN;
    let zs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let fs = zs.iter().map(|&z| f_sigma(sigma, z)).collect::<Result<Vec<_>>>()?;
    let changes: Vec<usize> = (1..n).filter(|&i| (fs[i - 1] > 0.0) != (fs[i] > 0.0)).collect();
    match changes.len() {
        0 => Err(Error::NoSignChange(sigma)),
        1 => {
            let i = changes[0];
            brent(|z| f_sigma(sigma, z), zs[i - 1], zs[i], 1e-15, 1e-14, 200)
        }
        count => Err(Error::RootNotUnique { sigma, count }),
    }
}

pub fn critical_speed(sigma: f64, omega: f64) -> Result<f64> {
    Ok(2.0 * find_z0(sigma)? * omega.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileScalars {
    pub kappa: f64,
    pub kappa_tilde: f64,
    pub f: f64,
    pub alpha: [f64; 3],
}

pub fn profile_scalars(p: &SolitonParams) -> Result<ProfileScalars> {
    p.validate()?;
    let SolitonParams { sigma, omega, c } = *p;
    let kappa = p.kappa();
    let kappa_tilde = 2f64.powf(1.0 / sigma - 2.0) / sigma
        * (1.0 + sigma).powf(1.0 / sigma)
        * kappa.powf(2.0 / sigma - 2.0)
        * omega.powf(-0.5 / sigma - 0.5);
    let f = (sigma + 1.0) * kappa * kappa / (2.0 * omega.sqrt());
    let z = c / (2.0 * omega.sqrt());
    let mut alpha = [0.0; 3];
    for (n, a) in alpha.iter_mut().enumerate() {
        // x = y/(σκ) maps h(x) to cosh y − z
        *a = cosh_power(z, 1.0 / sigma + n as f64)? / (sigma * kappa);
    }
    Ok(ProfileScalars { kappa, kappa_tilde, f, alpha })
}

/// M(φ_{ω,c}) and P(φ_{ω,c}) from the α-integrals.
pub fn closed_form_mp(p: &SolitonParams) -> Result<(f64, f64)> {
    let a = profile_scalars(p)?;
    let fs = a.f.powf(1.0 / p.sigma);
    let m = fs * a.alpha[0];
    let sw = p.omega.sqrt();
    let pm = fs / (4.0 * sw) * (-2.0 * sw * p.c * a.alpha[0] + a.kappa * a.kappa * a.alpha[1]);
    Ok((m, pm))
}

fn mp_at(sigma: f64, omega: f64, c: f64, which: usize) -> Result<f64> {
    let (m, p) = closed_form_mp(&SolitonParams::new(sigma, omega, c)?)?;
    Ok(if which == 0 { m } else { p })
}

/// d''(ω,c) entries; `dcm` and `dwp` are averaged after the symmetry check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hessian {
    pub dwm: f64,
    pub dcm: f64,
    pub dwp: f64,
    pub dcp: f64,
    pub raw_dcm: f64,
    pub raw_dwp: f64,
}

impl Hessian {
    pub fn det(&self) -> f64 {
        self.dwm * self.dcp - self.dcm * self.dwp
    }

    pub fn scale(&self) -> f64 {
        self.dwm.abs().max(self.dcm.abs()).max(self.dwp.abs()).max(self.dcp.abs())
    }

    /// Singular values of the symmetric 2×2 matrix, ascending.
    pub fn singular_values(&self) -> (f64, f64) {
        let (a, b, d) = (self.dwm, self.dcm, self.dcp);
        let tr = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let (l1, l2) = ((tr - r).abs(), (tr + r).abs());
        (l1.min(l2), l1.max(l2))
    }
}

/// Raw first derivatives (∂_ωM, ∂_cM, ∂_ωP, ∂_cP) of the closed forms.
pub fn mp_gradients(p: &SolitonParams) -> Result<[f64; 4]> {
    let SolitonParams { sigma, omega, c } = *p;
    let mut out = [0.0; 4];
    for (i, (which, q)) in [(Which::W, 0), (Which::C, 0), (Which::W, 1), (Which::C, 1)].into_iter().enumerate() {
        out[i] = parameter_derivative(|w, c| mp_at(sigma, w, c, q), (omega, c), which, default_step(omega, which))?.value;
    }
    Ok(out)
}

pub fn hessian_d2(p: &SolitonParams) -> Result<Hessian> {
    let [dwm, dcm, dwp, dcp] = mp_gradients(p)?;
    let scale = dwm.abs().max(dcm.abs()).max(dwp.abs()).max(dcp.abs());
    if (dcm - dwp).abs() > 1e-6 * scale {
        return Err(Error::SymmetryViolation { dcm, dwp });
    }
    let off = 0.5 * (dcm + dwp);
    Ok(Hessian { dwm, dcm: off, dwp: off, dcp, raw_dcm: dcm, raw_dwp: dwp })
}

/// Null direction (μ, ν) of d'' normalized to ν = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDirection {
    pub mu: f64,
    pub nu: f64,
}

impl EigenDirection {
    /// Parameters φ_λ sits at: (ω + λμ, c + λν).
    pub fn params_at(&self, base: &SolitonParams, lambda: f64) -> Result<SolitonParams> {
        base.shifted(lambda * self.mu, lambda * self.nu)
    }

    /// Residuals of both forms of the null-vector system, relative to the Hessian scale.
    pub fn residuals(&self, h: &Hessian) -> (f64, f64) {
        let (mu, nu) = (self.mu, self.nu);
        let s = h.scale() * (mu.abs() + nu.abs());
        let r0 = (mu * h.dwm + nu * h.raw_dwp).abs().max((mu * h.raw_dcm + nu * h.dcp).abs());
        let r1 = (mu * h.dwm + nu * h.raw_dcm).abs().max((mu * h.raw_dwp + nu * h.dcp).abs());
        (r0 / s, r1 / s)
    }
}

pub fn eigen_direction(p: &SolitonParams) -> Result<EigenDirection> {
    let h = hessian_d2(p)?;
    let (small, large) = h.singular_values();
    if small > 1e-3 * large {
        return Err(Error::NotDegenerate { small, large });
    }
    // eigenvector of the symmetric matrix for the eigenvalue closest to zero
    let (a, b, d) = (h.dwm, h.dcm, h.dcp);
    let tr = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let lam = if (tr - r).abs() < (tr + r).abs() { tr - r } else { tr + r };
    // (a − lam) μ + b ν = 0 or b μ + (d − lam) ν = 0, whichever is better conditioned
    let mu = if (a - lam).abs() >= (d - lam).abs() { -b / (a - lam) } else { -(d - lam) / b };
    Ok(EigenDirection { mu, nu: 1.0 })
}

/// ψ = ∂_λ φ_{ω+λμ, c+λν} at λ = 0 by Richardson-extrapolated central differences.
pub fn psi_field(p: &SolitonParams, dir: &EigenDirection, grid: &Grid) -> Result<Field> {
    soliton_field(p, grid)?;
    let h = 1e-3 * p.omega.abs().max(1.0);
    let diff = |h: f64| -> Result<Field> {
        let plus = sample(&dir.params_at(p, h)?, grid);
        let minus = sample(&dir.params_at(p, -h)?, grid);
        Ok(&(&plus - &minus) * (0.5 / h))
    };
    let (d1, d2) = (diff(h)?, diff(0.5 * h)?);
    Ok(d2.zip_map(&d1, |a, b| (4.0 * a - b) / 3.0))
}

/// Directional second derivative along (μ, ν) of M (q = 0) or P (q = 1).
pub fn directional_second(p: &SolitonParams, dir: &EigenDirection, q: usize) -> Result<f64> {
    let SolitonParams { sigma, omega, c } = *p;
    let g = |w: f64, c: f64| mp_at(sigma, w, c, q);
    let h = default_step(omega, Which::WW);
    let ww = parameter_derivative(g, (omega, c), Which::WW, h)?.value;
    let wc = parameter_derivative(g, (omega, c), Which::WC, h)?.value;
    let cc = parameter_derivative(g, (omega, c), Which::CC, h)?.value;
    Ok(dir.mu * dir.mu * ww + 2.0 * dir.mu * dir.nu * wc + dir.nu * dir.nu * cc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub sigma: f64,
    pub omega: f64,
    pub z0: f64,
    pub c_crit: f64,
    pub a0: f64,
    pub mu: f64,
    pub nu: f64,
    pub kappa0: f64,
    pub kappa0_from_m: f64,
    pub kappa0_from_p: f64,
    pub b1: f64,
    pub b2: f64,
    pub m: f64,
    pub p: f64,
    pub det: f64,
}

impl CriticalData {
    pub fn params(&self) -> SolitonParams {
        SolitonParams { sigma: self.sigma, omega: self.omega, c: self.c_crit }
    }

    pub fn direction(&self) -> EigenDirection {
        EigenDirection { mu: self.mu, nu: self.nu }
    }

    /// Leading coefficient of A(u₀)/δ₁: (4√ω − 2c)·2ωσ(2−σ)M(φ) = 8ω√ω σ(2−σ) M(φ)(1 − z₀).
    pub fn a_slope(&self) -> f64 {
        2.0 * self.b2 * (1.0 - self.z0)
    }
}

pub fn critical_constants(sigma: f64, omega: f64) -> Result<CriticalData> {
    if omega <= 0.0 {
        return Err(Error::DomainViolation(format!("omega = {omega} must be positive")));
    }
    let z0 = find_z0(sigma)?;
    let c_crit = 2.0 * z0 * omega.sqrt();
    let params = SolitonParams::new(sigma, omega, c_crit)?;
    let h = hessian_d2(&params)?;
    let dir = eigen_direction(&params)?;
    let uvm = directional_second(&params, &dir, 0)?;
    let uvp = directional_second(&params, &dir, 1)?;
    let kappa0_from_m = uvm / z0;
    let kappa0_from_p = -uvp / omega.sqrt();
    if (kappa0_from_m - kappa0_from_p).abs() > 1e-2 * kappa0_from_m.abs().max(kappa0_from_p.abs()) {
        return Err(Error::Kappa0Mismatch { a: kappa0_from_m, b: kappa0_from_p });
    }
    let kappa0 = 0.5 * (kappa0_from_m + kappa0_from_p);
    let (m, p) = closed_form_mp(&params)?;
    Ok(CriticalData {
        sigma,
        omega,
        z0,
        c_crit,
        a0: params.a0(),
        mu: dir.mu,
        nu: dir.nu,
        kappa0,
        kappa0_from_m,
        kappa0_from_p,
        b1: 2.0 * kappa0 * omega * (1.0 - z0 * z0),
        b2: 4.0 * omega * omega.sqrt() * sigma * (2.0 - sigma) * m,
        m,
        p,
        det: h.det(),
    })
}

/// b₁ as (1/(2σ+2)) d²/dλ² [−√ω‖φ_λ‖^{2σ+2} + (σ−1)J(φ_λ)] at λ = 0, using
/// the closed-form identities for the L^{2σ+2} norm and J.
pub fn b1_direct(data: &CriticalData) -> Result<f64> {
    let base = data.params();
    let dir = data.direction();
    let sw = data.omega.sqrt();
    let g = |lam: f64| -> Result<f64> {
        let q = dir.params_at(&base, lam)?;
        let (m, p) = closed_form_mp(&q)?;
        let lp = 4.0 * (q.sigma + 1.0) * (0.5 * q.c * m + p);
        let j = 4.0 * q.omega * m + 2.0 * q.c * p;
        Ok(-sw * lp + (q.sigma - 1.0) * j)
    };
    Ok(derivative_1d(g, 0.0, 1e-2, 2)? / (2.0 * data.sigma + 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Critical,
    Unstable,
}

/// Classification of e^{iωt}φ_{ω,c}(x − ct) by σ and the speed relative to 2z₀√ω.
pub fn classify(sigma: f64, omega: f64, c: f64) -> Result<Stability> {
    if sigma <= 1.0 {
        return Ok(Stability::Stable);
    }
    if sigma >= 2.0 {
        return Ok(Stability::Unstable);
    }
    let cc = critical_speed(sigma, omega)?;
    let tol = 1e-9 * omega.sqrt();
    Ok(if (c - cc).abs() <= tol {
        Stability::Critical
    } else if c < cc {
        Stability::Stable
    } else {
        Stability::Unstable
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conserved::conserved_set;
    use std::f64::consts::PI;

    #[test]
    fn f_sigma_limits() {
        assert!((f_sigma(1.0, 0.0).unwrap() + 1.0).abs() < 1e-12);
        assert!(f_sigma(1.0 + 1e-6, 0.0).unwrap() < 0.0);
        assert!(f_sigma(1.5, 1.0).is_err());
    }

    #[test]
    fn f_sigma_scan_is_finite() {
        for i in 0..199 {
            let z = -0.99 + 0.01 * i as f64;
            assert!(f_sigma(1.5, z).unwrap().is_finite());
        }
    }

    #[test]
    fn z0_oracle_values() {
        // high-precision bisection values for the threshold root
        let cases = [(1.2, 0.718148207267322758957546736587), (1.5, 0.0618302632426406771911620693211), (1.8, -0.589820887255314709023248918521)];
        for (s, z) in cases {
            let r = find_z0(s).unwrap();
            assert!((r - z).abs() < 1e-9, "sigma {s}: {r} vs {z}");
            assert!(f_sigma(s, r).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn profile_scalars_dnls_values() {
        let p = SolitonParams::new(1.0, 1.0, 0.0).unwrap();
        let a = profile_scalars(&p).unwrap();
        assert!((a.kappa - 2.0).abs() < 1e-15 && (a.f - 4.0).abs() < 1e-15);
        assert!((a.alpha[0] - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_grid() {
        for &(s, w, c) in &[(1.5, 1.0, 0.5), (1.2, 0.5, -0.4), (1.8, 2.0, 1.0), (1.5, 1.0, 0.0)] {
            let p = SolitonParams::new(s, w, c).unwrap();
            let g = p.auto_grid(4096).unwrap();
            let q = conserved_set(&soliton_field(&p, &g).unwrap(), s).unwrap();
            let (m, pp) = closed_form_mp(&p).unwrap();
            assert!((m - q.m).abs() < 1e-8 * m);
            assert!((pp - q.p).abs() < 1e-8 * pp.abs().max(m), "{pp} vs {}", q.p);
        }
    }

    #[test]
    fn zero_speed_momentum_positive() {
        let p = SolitonParams::new(1.3, 1.0, 0.0).unwrap();
        let a = profile_scalars(&p).unwrap();
        let (_, pm) = closed_form_mp(&p).unwrap();
        let want = a.f.powf(1.0 / 1.3) * a.kappa * a.kappa * a.alpha[1] / 4.0;
        assert!(pm > 0.0 && (pm - want).abs() < 1e-14 * want);
    }

    #[test]
    fn hessian_relations() {
        let p = SolitonParams::new(1.5, 1.0, 0.5).unwrap();
        let [dwm, dcm, dwp, dcp] = mp_gradients(&p).unwrap();
        assert!((dcm - dwp).abs() < 1e-6 * dcm.abs());
        assert!((dcp - p.omega * dwm).abs() < 1e-6 * dcp.abs());
    }

    #[test]
    fn critical_constants_sigma_15() {
        let d = critical_constants(1.5, 1.0).unwrap();
        assert!((d.mu / d.nu - 1.0).abs() < 1e-5);
        assert!((d.p - d.a0 * d.m).abs() < 1e-7 * d.p);
        assert!(d.kappa0 > 0.0 && d.b1 > 0.0 && d.b2 > 0.0);
        assert!((d.kappa0_from_m - d.kappa0_from_p).abs() < 1e-3 * d.kappa0);
        assert!((d.kappa0 - 0.350589853314368).abs() < 1e-5);
        assert!((d.b1 - 0.698499109615317).abs() < 1e-5);
        assert!((d.b2 - 6.28649198653786).abs() < 1e-8);
        let b1 = b1_direct(&d).unwrap();
        assert!((b1 - d.b1).abs() < 1e-3 * d.b1);
    }

    #[test]
    fn kappa0_against_profile_scalar_expression() {
        // 8√ω κ̃ α₀ (σ−1) with ν = 1, up to the normalization factor 2^{−2/σ} of κ̃
        for s in [1.2, 1.5, 1.8] {
            let d = critical_constants(s, 1.0).unwrap();
            let a = profile_scalars(&d.params()).unwrap();
            let k0 = 8.0 * a.kappa_tilde * a.alpha[0] * (s - 1.0) * 2f64.powf(-2.0 / s);
            assert!((d.kappa0 - k0).abs() < 1e-5 * k0, "{s}: {} vs {k0}", d.kappa0);
        }
    }

    #[test]
    fn not_degenerate_away_from_critical() {
        let p = SolitonParams::new(1.5, 1.0, -1.0).unwrap();
        assert!(matches!(eigen_direction(&p), Err(Error::NotDegenerate { .. })));
    }

    #[test]
    fn classification() {
        assert_eq!(classify(0.8, 1.0, 1.5).unwrap(), Stability::Stable);
        assert_eq!(classify(2.5, 1.0, 0.0).unwrap(), Stability::Unstable);
        let cc = critical_speed(1.5, 1.0).unwrap();
        assert_eq!(classify(1.5, 1.0, cc).unwrap(), Stability::Critical);
        assert_eq!(classify(1.5, 1.0, cc - 0.1).unwrap(), Stability::Stable);
        assert_eq!(classify(1.5, 1.0, cc + 0.1).unwrap(), Stability::Unstable);
    }
}
