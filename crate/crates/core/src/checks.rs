//! Named numerical checks shared by the command-line tool and the acceptance suite.

use num_complex::Complex64;
use serde::Serialize;

use crate::conserved::{conserved_set, lp_power_norm};
use crate::critical::{closed_form_mp, critical_constants, f_sigma, mp_gradients, psi_field, CriticalData};
use crate::error::Result;
use crate::linop::{apply_j_prime, coercivity_constant, modulation_constraints, spectrum_summary, SecondVariation};
use crate::numerics::spectral::{dx, h1_norm, inner, l2_norm};
use crate::numerics::Grid;
use crate::soliton::{residual_norm, soliton_field, SolitonParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Upper bound on `value`; for lower-bound checks the bound is negated in `name`.
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check { name: name.into(), value, tol, pass: value.is_finite() && value <= tol }
    }

    pub fn positive(name: impl Into<String>, value: f64) -> Self {
        Check { name: name.into(), value, tol: 0.0, pass: value.is_finite() && value > 0.0 }
    }

    pub fn equals(name: impl Into<String>, value: usize, want: usize) -> Self {
        Check { name: name.into(), value: value as f64, tol: want as f64, pass: value == want }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Soliton residual and the profile identities, on `grid`.
pub fn soliton_checks(p: &SolitonParams, grid: &Grid) -> Result<Vec<Check>> {
    let phi = soliton_field(p, grid)?;
    let q = conserved_set(&phi, p.sigma)?;
    let dxn = l2_norm(&dx(&phi)).powi(2);
    let lp = lp_power_norm(&phi, p.sigma)?;
    let (m, pm) = closed_form_mp(p)?;
    let s = p.sigma;
    Ok(vec![
        Check::at_most("elliptic residual (L2)", residual_norm(&phi, p)?, 1e-8),
        Check::at_most("|phi_x|^2 = omega |phi|^2 (rel)", rel(dxn, 2.0 * p.omega * q.m), 1e-8),
        Check::at_most("J = 4 omega M + 2 c P (rel)", rel(q.j, 4.0 * p.omega * q.m + 2.0 * p.c * q.p), 1e-8),
        Check::at_most("(s-1)/(s+1) J = 2cP + 4E (rel)", rel((s - 1.0) / (s + 1.0) * q.j, 2.0 * p.c * q.p + 4.0 * q.e), 1e-8),
        Check::at_most("L^(2s+2) power = 4(s+1)(cM/2 + P) (rel)", rel(lp, 4.0 * (s + 1.0) * (0.5 * p.c * q.m + q.p)), 1e-8),
        Check::at_most("closed-form M vs grid (rel)", rel(m, q.m), 1e-8),
        Check::at_most("closed-form P vs grid (rel)", (pm - q.p).abs() / m, 1e-8),
    ])
}

/// Symmetry relations of the (ω, c)-derivatives of M and P.
pub fn derivative_checks(p: &SolitonParams) -> Result<Vec<Check>> {
    let [dwm, dcm, dwp, dcp] = mp_gradients(p)?;
    Ok(vec![
        Check::at_most("d_c M = d_omega P (rel)", rel(dcm, dwp), 1e-6),
        Check::at_most("d_c P = omega d_omega M (rel)", rel(dcp, p.omega * dwm), 1e-6),
    ])
}

/// Threshold root, null direction and the constants at c = 2z₀√ω.
pub fn critical_checks(data: &CriticalData) -> Result<Vec<Check>> {
    let sw = data.omega.sqrt();
    Ok(vec![
        Check::at_most("|F(z0)|", f_sigma(data.sigma, data.z0)?.abs(), 1e-10),
        Check::at_most("P = (s-1) sqrt(omega) M (rel)", (data.p - (data.sigma - 1.0) * sw * data.m).abs() / data.p.abs().max(data.m), 1e-7),
        Check::at_most("|mu/nu - sqrt(omega)|", (data.mu / data.nu - sw).abs(), 1e-5),
        Check::at_most("kappa0 dual extraction (rel)", rel(data.kappa0_from_m, data.kappa0_from_p), 1e-3),
        Check::positive("kappa0 > 0", data.kappa0),
        Check::positive("b1 > 0", data.b1),
        Check::positive("b2 > 0", data.b2),
    ])
}

/// Second-variation identities at `p`, plus the ψ relations when `critical` is given.
pub fn operator_checks(p: &SolitonParams, grid: &Grid, critical: Option<&CriticalData>) -> Result<Vec<Check>> {
    let phi = soliton_field(p, grid)?;
    let op = SecondVariation::new(&phi, p)?;
    let s = p.sigma;
    let phix = dx(&phi);
    let w1 = phi.zip_map(&phix, |u, ux| Complex64::new(0.0, -2.0 * s) * u.norm().powf(2.0 * s) * ux);
    let w2 = phi.map(|u| -2.0 * s * p.omega * u.norm().powf(2.0 * s) * u);
    let sphi = op.apply(&phi)?;
    let jp = apply_j_prime(&phi, s)?;
    let mut out = vec![
        Check::at_most("S''(phi) phi identity (L2)", l2_norm(&(&sphi - &w1)), 1e-7),
        Check::at_most("S''(phi) i phi_x identity (L2)", l2_norm(&(&op.apply(&phix.mul_i())? - &w2)), 1e-7),
        Check::at_most("J'(phi) = -(s+1)/s S''(phi) phi (L2)", l2_norm(&(&jp - &(&sphi * (-(s + 1.0) / s)))), 1e-7),
    ];
    if let Some(d) = critical {
        let psi = psi_field(p, &d.direction(), grid)?;
        let spsi = op.apply(&psi)?;
        let q = phi.zip_map(&phix, |u, ux| d.mu * u + Complex64::new(0.0, d.nu) * ux);
        out.push(Check::at_most("S'' psi = -Q'(phi) (L2)", l2_norm(&(&spsi + &q)), 1e-5));
        out.push(Check::at_most("<S'' psi, psi> / |psi|_H1^2", inner(&spsi, &psi)?.abs() / h1_norm(&psi)?.powi(2), 1e-6));
    }
    Ok(out)
}

/// Eigenvalue count and kernel of the discretized second variation.
pub fn spectrum_checks(p: &SolitonParams, grid: &Grid) -> Result<Vec<Check>> {
    let op = SecondVariation::at_soliton(p, grid)?;
    let s = spectrum_summary(&op, 6)?;
    Ok(vec![
        Check::equals("negative eigenvalues", s.negative, 1),
        Check::equals("near-zero eigenvalues", s.near_zero, 2),
        Check::positive("capture of i phi - 0.999", s.capture_iphi - 0.999),
        Check::positive("capture of phi_x - 0.999", s.capture_dx_phi - 0.999),
    ])
}

/// Constrained coercivity constant at c = 2z₀√ω with the three modulation constraints.
pub fn coercivity_check(data: &CriticalData, grid: &Grid) -> Result<Check> {
    let p = data.params();
    let phi = soliton_field(&p, grid)?;
    let op = SecondVariation::new(&phi, &p)?;
    let k = coercivity_constant(&op, &modulation_constraints(&phi, p.sigma)?)?;
    Ok(Check::positive("constrained coercivity constant", k))
}

/// The full identity suite at (σ, ω, c) on `grid`, including the critical machinery for 1 < σ < 2.
pub fn full_suite(p: &SolitonParams, grid: &Grid) -> Result<Vec<Check>> {
    let mut out = soliton_checks(p, grid)?;
    out.extend(derivative_checks(p)?);
    out.extend(operator_checks(p, grid, None)?);
    if p.sigma > 1.0 && p.sigma < 2.0 {
        let d = critical_constants(p.sigma, p.omega)?;
        out.extend(critical_checks(&d)?);
        let cg = d.params().auto_grid(grid.n())?;
        out.extend(operator_checks(&d.params(), &cg, Some(&d))?);
    }
    Ok(out)
}
